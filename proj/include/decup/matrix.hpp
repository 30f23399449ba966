#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace decup {

using complex_t = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Dense complex square matrix. Dimensions stay small (qubit operators,
// truncated Fock spaces), so everything is plain row-major storage with
// O(n^3) algorithms.
class Operator {
public:
    Operator() = default;

    explicit Operator(std::size_t dim) : dim_(dim), a_(dim * dim, complex_t{0.0, 0.0}) {}

    Operator(std::size_t dim, std::initializer_list<complex_t> entries) : Operator(dim) {
        if (entries.size() != dim * dim)
            throw std::invalid_argument("Operator: entry count does not match dim*dim");
        std::copy(entries.begin(), entries.end(), a_.begin());
    }

    static Operator identity(std::size_t dim) {
        Operator m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    static Operator zero(std::size_t dim) { return Operator(dim); }

    std::size_t dim() const { return dim_; }

    complex_t& operator()(std::size_t i, std::size_t j) { return a_[i * dim_ + j]; }
    const complex_t& operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

    const std::vector<complex_t>& data() const { return a_; }

    Operator& operator+=(const Operator& o) {
        check_same_dim(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }
    Operator& operator-=(const Operator& o) {
        check_same_dim(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }
    Operator& operator*=(complex_t c) {
        for (auto& x : a_) x *= c;
        return *this;
    }

    friend Operator operator+(Operator a, const Operator& b) { return a += b; }
    friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
    friend Operator operator*(Operator a, complex_t c) { return a *= c; }
    friend Operator operator*(complex_t c, Operator a) { return a *= c; }
    friend Operator operator*(Operator a, double c) { return a *= complex_t{c, 0.0}; }
    friend Operator operator*(double c, Operator a) { return a *= complex_t{c, 0.0}; }

    friend Operator operator*(const Operator& a, const Operator& b) {
        a.check_same_dim(b);
        const std::size_t n = a.dim_;
        Operator r(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const complex_t aik = a(i, k);
                if (aik == complex_t{0.0, 0.0}) continue;
                for (std::size_t j = 0; j < n; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    Operator dagger() const {
        Operator r(dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) r(j, i) = std::conj((*this)(i, j));
        return r;
    }

    complex_t trace() const {
        complex_t t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& x : a_) s += std::norm(x);
        return std::sqrt(s);
    }

    bool is_hermitian(double rel_tol = 1e-12) const {
        const double scale = std::max(frobenius_norm(), 1.0);
        return (*this - dagger()).frobenius_norm() <= rel_tol * scale;
    }

    bool is_unitary(double tol = 1e-10) const {
        return (dagger() * (*this) - identity(dim_)).frobenius_norm() <= tol;
    }

private:
    void check_same_dim(const Operator& o) const {
        if (dim_ != o.dim_) throw std::invalid_argument("Operator: dimension mismatch");
    }

    std::size_t dim_ = 0;
    std::vector<complex_t> a_;
};

inline Operator pauli_x() { return Operator(2, {0.0, 1.0, 1.0, 0.0}); }
inline Operator pauli_y() {
    return Operator(2, {0.0, complex_t{0.0, -1.0}, complex_t{0.0, 1.0}, 0.0});
}
inline Operator pauli_z() { return Operator(2, {1.0, 0.0, 0.0, -1.0}); }

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

inline double frobenius_distance(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("frobenius_distance: dimension mismatch");
    return (a - b).frobenius_norm();
}

// tr(A^dagger B)
inline complex_t hs_inner(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("hs_inner: dimension mismatch");
    complex_t s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j) s += std::conj(a(i, j)) * b(i, j);
    return s;
}

// min over phases e^{i phi} of ||A - e^{i phi} B||_F.  The minimizer is
// phi = arg tr(B^dagger A); the residual is evaluated element-wise so that
// near-equal inputs do not lose precision to cancellation.
inline double phase_distance(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("phase_distance: dimension mismatch");
    const complex_t ip = hs_inner(b, a);
    const double mag = std::abs(ip);
    const complex_t phase = mag > 0.0 ? ip / mag : complex_t{1.0, 0.0};
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j) s += std::norm(a(i, j) - phase * b(i, j));
    return std::sqrt(s);
}

inline bool phase_equal(const Operator& a, const Operator& b, double tol = 1e-9) {
    return phase_distance(a, b) <= tol;
}

inline complex_t determinant(Operator m) {
    const std::size_t n = m.dim();
    complex_t det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m(r, c)) > std::abs(m(piv, c))) piv = r;
        if (std::abs(m(piv, c)) == 0.0) return 0.0;
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(c, j));
            det = -det;
        }
        det *= m(c, c);
        for (std::size_t r = c + 1; r < n; ++r) {
            const complex_t f = m(r, c) / m(c, c);
            for (std::size_t j = c; j < n; ++j) m(r, j) -= f * m(c, j);
        }
    }
    return det;
}

// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
// Eigenvalues ascending, eigenvectors as columns of a unitary.
class HermitianEigen {
public:
    explicit HermitianEigen(const Operator& h, double hermiticity_tol = 1e-12) {
        if (!h.is_hermitian(hermiticity_tol))
            throw std::invalid_argument("HermitianEigen: matrix is not Hermitian");
        const std::size_t n = h.dim();
        Operator a = h;
        vectors_ = Operator::identity(n);
        values_.assign(n, 0.0);

        const double scale = std::max(a.frobenius_norm(), 1e-300);
        for (int sweep = 0; sweep < 100; ++sweep) {
            double off = 0.0;
            for (std::size_t p = 0; p < n; ++p)
                for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
            if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

            for (std::size_t p = 0; p < n; ++p) {
                for (std::size_t q = p + 1; q < n; ++q) {
                    const double r = std::abs(a(p, q));
                    if (r <= 1e-300) continue;
                    const complex_t phase = a(p, q) / r;
                    const double app = a(p, p).real();
                    const double aqq = a(q, q).real();
                    const double tau = (aqq - app) / (2.0 * r);
                    const double t =
                        (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                     : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                    const double c = 1.0 / std::sqrt(1.0 + t * t);
                    const double s = t * c;
                    // columns: p' = c p - s conj(phase) q ; q' = s phase p + c q
                    for (std::size_t i = 0; i < n; ++i) {
                        const complex_t aip = a(i, p), aiq = a(i, q);
                        a(i, p) = c * aip - s * std::conj(phase) * aiq;
                        a(i, q) = s * phase * aip + c * aiq;
                        const complex_t vip = vectors_(i, p), viq = vectors_(i, q);
                        vectors_(i, p) = c * vip - s * std::conj(phase) * viq;
                        vectors_(i, q) = s * phase * vip + c * viq;
                    }
                    // rows (conjugate transform)
                    for (std::size_t j = 0; j < n; ++j) {
                        const complex_t apj = a(p, j), aqj = a(q, j);
                        a(p, j) = c * apj - s * phase * aqj;
                        a(q, j) = s * std::conj(phase) * apj + c * aqj;
                    }
                }
            }
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });
        Operator sorted(n);
        for (std::size_t k = 0; k < n; ++k) {
            values_[k] = a(order[k], order[k]).real();
            for (std::size_t i = 0; i < n; ++i) sorted(i, k) = vectors_(i, order[k]);
        }
        vectors_ = std::move(sorted);
    }

    const std::vector<double>& values() const { return values_; }
    const Operator& vectors() const { return vectors_; }

    // exp(-i H t)
    Operator propagator(double t) const {
        const std::size_t n = values_.size();
        Operator r(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                complex_t s = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const complex_t ph = std::polar(1.0, -values_[k] * t);
                    s += vectors_(i, k) * ph * std::conj(vectors_(j, k));
                }
                r(i, j) = s;
            }
        return r;
    }

    // f applied to the spectrum: sum_k f(lambda_k) v_k v_k^dagger
    template <typename F>
    Operator apply(F&& f) const {
        const std::size_t n = values_.size();
        Operator r(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                complex_t s = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    s += vectors_(i, k) * f(values_[k]) * std::conj(vectors_(j, k));
                r(i, j) = s;
            }
        return r;
    }

private:
    std::vector<double> values_;
    Operator vectors_;
};

// exp(-i H t) for Hermitian H.
inline Operator expm(const Operator& h, double t) {
    return HermitianEigen(h).propagator(t);
}

// Hermitian principal log: A with U = exp(-i A) and eigenphases in [-pi, pi].
// Strategy: U is normal, so any Hermitian combination a*(U+U^d) + b*i(U^d-U)
// shares its eigenbasis as long as the combination separates the eigenphases.
// A fixed mixing constant can collide on special spectra, so verify and retry.
inline Operator hermitian_log(const Operator& u, double tol = 1e-8) {
    if (!u.is_unitary(tol)) throw std::invalid_argument("hermitian_log: input is not unitary");
    const std::size_t n = u.dim();
    const Operator re = (u + u.dagger()) * complex_t{0.5, 0.0};     // cos(lambda) spectrum
    const Operator im = (u - u.dagger()) * complex_t{0.0, -0.5};    // -sin(lambda) spectrum

    for (double cmix : {0.7310588061, 0.218281828, 3.1416926, 0.0117}) {
        const Operator mix = re + cmix * im;
        HermitianEigen es(mix, 1e-6);
        const Operator& v = es.vectors();
        Operator a(n);
        // Rayleigh quotients of U in this basis give e^{-i lambda_k}.
        for (std::size_t k = 0; k < n; ++k) {
            complex_t uk = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                complex_t acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += u(i, j) * v(j, k);
                uk += std::conj(v(i, k)) * acc;
            }
            const double lambda = -std::arg(uk);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    a(i, j) += lambda * v(i, k) * std::conj(v(j, k));
        }
        a = (a + a.dagger()) * complex_t{0.5, 0.0};
        if (frobenius_distance(expm(a, 1.0), u) <= std::max(tol, 1e-10) * 10.0) return a;
    }
    throw std::runtime_error("hermitian_log: could not separate eigenphases");
}

}  // namespace decup
