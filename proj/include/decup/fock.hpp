#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include "decup/matrix.hpp"
#include "decup/series.hpp"
#include "decup/spinboson.hpp"

namespace decup {

struct FockOracleOptions {
    double tol = 1e-8;    // convergence threshold under cutoff doubling
    int max_doublings = 4;
    double pulse_error = 0.0;  // pulses rotate by pi (1 + pulse_error)
};

namespace detail {

// apply a cutoff x cutoff matrix along one tensor axis of psi
inline void apply_mode_matrix(std::vector<complex_t>& psi, const Operator& m,
                              std::size_t mode, std::size_t n_modes, std::size_t cutoff) {
    std::size_t stride = 1;
    for (std::size_t j = mode + 1; j < n_modes; ++j) stride *= cutoff;
    const std::size_t block = stride * cutoff;
    std::vector<complex_t> tmp(cutoff);
    for (std::size_t base = 0; base < psi.size(); base += block) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t origin = base + off;
            for (std::size_t a = 0; a < cutoff; ++a) {
                complex_t acc{0.0, 0.0};
                for (std::size_t b = 0; b < cutoff; ++b)
                    acc += m(a, b) * psi[origin + b * stride];
                tmp[a] = acc;
            }
            for (std::size_t a = 0; a < cutoff; ++a) psi[origin + a * stride] = tmp[a];
        }
    }
}

inline double fock_coherence_at_cutoff(const BosonBath& bath, std::size_t cutoff,
                                       std::vector<double> pulse_times, double t,
                                       double pulse_error) {
    const std::size_t n_modes = bath.modes().size();
    std::size_t dim = 1;
    for (std::size_t k = 0; k < n_modes; ++k) dim *= cutoff;

    // per-mode branch Hamiltonians h_pm = omega n + (pm) g (b + b^dagger)
    std::vector<HermitianEigen> eig_plus, eig_minus;
    for (const auto& m : bath.modes()) {
        Operator h(cutoff);
        for (std::size_t n = 0; n < cutoff; ++n) h(n, n) = m.omega * static_cast<double>(n);
        Operator coupling(cutoff);
        for (std::size_t n = 0; n + 1 < cutoff; ++n) {
            const double v = std::sqrt(static_cast<double>(n + 1));
            coupling(n, n + 1) = v;
            coupling(n + 1, n) = v;
        }
        eig_plus.emplace_back(h + m.g * coupling);
        eig_minus.emplace_back(h - m.g * coupling);
    }

    // branch vectors attached to |0> and |1>, both starting in the vacuum
    std::vector<complex_t> psi_p(dim, complex_t{0.0, 0.0});
    std::vector<complex_t> psi_m(dim, complex_t{0.0, 0.0});
    psi_p[0] = 1.0;
    psi_m[0] = 1.0;

    auto evolve = [&](double tau) {
        if (tau <= 0.0) return;
        for (std::size_t k = 0; k < n_modes; ++k) {
            apply_mode_matrix(psi_p, eig_plus[k].propagator(tau), k, n_modes, cutoff);
            apply_mode_matrix(psi_m, eig_minus[k].propagator(tau), k, n_modes, cutoff);
        }
    };

    std::sort(pulse_times.begin(), pulse_times.end());
    const double theta_half = 0.5 * pi * (1.0 + pulse_error);
    const complex_t rc{std::cos(theta_half), 0.0};
    const complex_t rs{0.0, -std::sin(theta_half)};

    double now = 0.0;
    for (double tp : pulse_times) {
        if (tp > t + 1e-15) break;
        if (tp < -1e-15) throw std::invalid_argument("fock_oracle: negative pulse time");
        evolve(tp - now);
        now = tp;
        for (std::size_t i = 0; i < dim; ++i) {
            const complex_t a = psi_p[i], b = psi_m[i];
            psi_p[i] = rc * a + rs * b;
            psi_m[i] = rs * a + rc * b;
        }
    }
    evolve(t - now);

    complex_t inner{0.0, 0.0};
    for (std::size_t i = 0; i < dim; ++i) inner += std::conj(psi_m[i]) * psi_p[i];
    return std::abs(inner);
}

}  // namespace detail

// Exact qubit (x) truncated-Fock evolution of the diagonally coupled model with
// instantaneous sigma_x pulses; traces out the bath and reports the normalized
// coherence.  Doubles the cutoff until the value moves by less than tol.
// Vacuum (T = 0) bath state only; qubit splitting enters as a pure phase and
// is dropped from the magnitude.
inline double fock_oracle(const BosonBath& bath, std::size_t cutoff,
                          const std::vector<double>& pulse_times, double t,
                          const FockOracleOptions& opts = {}) {
    if (bath.modes().size() > 3)
        throw std::invalid_argument("fock_oracle: at most 3 modes");
    if (bath.modes().empty()) return 1.0;
    if (bath.temperature() > 0.0)
        throw std::invalid_argument("fock_oracle: vacuum bath state only (T = 0)");
    if (cutoff < 2) throw std::invalid_argument("fock_oracle: cutoff must be >= 2");
    if (t < 0.0) throw std::invalid_argument("fock_oracle: negative time");

    double prev = detail::fock_coherence_at_cutoff(bath, cutoff, pulse_times, t,
                                                   opts.pulse_error);
    for (int d = 0; d < opts.max_doublings; ++d) {
        cutoff *= 2;
        const double next = detail::fock_coherence_at_cutoff(bath, cutoff, pulse_times, t,
                                                             opts.pulse_error);
        if (std::abs(next - prev) <= opts.tol) return next;
        prev = next;
    }
    throw NonConvergence("fock_oracle: cutoff " + std::to_string(cutoff) +
                         " did not converge to tol " + std::to_string(opts.tol));
}

}  // namespace decup
