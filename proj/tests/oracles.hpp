#pragma once

// Independent oracles for the RTN dephasing engine.  Everything here works on
// the sign-conditioned coherence vector q = (q_+, q_-) with
//   dq_s/dt = -i s v eps_c(t) q_s + gamma (q_+ + q_-)/2 - gamma q_s,
// i.e. a 4-real-component linear ODE per fluctuator; the total coherence is
// the product of |q_+ + q_-| over independent fluctuators.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracles {

using cplx = std::complex<double>;
using QVec = std::array<cplx, 2>;

inline QVec rhs(const QVec& q, double v, double gamma, double eps) {
    const cplx mean = 0.5 * (q[0] + q[1]);
    return {cplx{0.0, -1.0} * (+v * eps) * q[0] + gamma * (mean - q[0]),
            cplx{0.0, -1.0} * (-v * eps) * q[1] + gamma * (mean - q[1])};
}

// classic RK4 with a fixed number of steps over [t0, t1] at constant eps
inline QVec rk4_span(QVec q, double v, double gamma, double eps, double t0, double t1,
                     int steps) {
    const double h = (t1 - t0) / steps;
    for (int i = 0; i < steps; ++i) {
        const QVec k1 = rhs(q, v, gamma, eps);
        const QVec q2{q[0] + 0.5 * h * k1[0], q[1] + 0.5 * h * k1[1]};
        const QVec k2 = rhs(q2, v, gamma, eps);
        const QVec q3{q[0] + 0.5 * h * k2[0], q[1] + 0.5 * h * k2[1]};
        const QVec k3 = rhs(q3, v, gamma, eps);
        const QVec q4{q[0] + h * k3[0], q[1] + h * k3[1]};
        const QVec k4 = rhs(q4, v, gamma, eps);
        q[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        q[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    return q;
}

// integrate with step control: double the step count until the result settles
inline QVec rk4_adaptive(const QVec& q0, double v, double gamma, double eps, double t0,
                         double t1, double tol = 1e-10) {
    int steps = 32;
    QVec prev = rk4_span(q0, v, gamma, eps, t0, t1, steps);
    for (int it = 0; it < 12; ++it) {
        steps *= 2;
        const QVec next = rk4_span(q0, v, gamma, eps, t0, t1, steps);
        const double diff = std::abs(next[0] - prev[0]) + std::abs(next[1] - prev[1]);
        prev = next;
        if (diff < tol) break;
    }
    return prev;
}

// free single-fluctuator dephasing at the given checkpoints
inline std::vector<double> ode_free_coherence(double v, double gamma,
                                              const std::vector<double>& times) {
    std::vector<double> out;
    QVec q{0.5, 0.5};
    double now = 0.0;
    for (double t : times) {
        q = rk4_adaptive(q, v, gamma, +1.0, now, t, 1e-12);
        now = t;
        out.push_back(std::abs(q[0] + q[1]));
    }
    return out;
}

// --- transfer-matrix route (independent algebra: closed-form 2x2 exponential)

struct Mat2 {
    cplx a, b, c, d;
    QVec apply(const QVec& q) const { return {a * q[0] + b * q[1], c * q[0] + d * q[1]}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
};

// exp(tau * A) for A = [[-i v e - g/2, g/2], [g/2, +i v e - g/2]]
inline Mat2 segment_transfer(double v, double gamma, double eps, double tau) {
    const cplx alpha{-0.5 * gamma, 0.0};
    const cplx n11{0.0, -v * eps};
    const cplx half_g{0.5 * gamma, 0.0};
    // N = [[n11, g/2], [g/2, -n11]], N^2 = (n11^2 + g^2/4) I
    const cplx delta = std::sqrt(n11 * n11 + half_g * half_g);
    cplx ch, sh_over;
    if (std::abs(delta) < 1e-14) {
        ch = 1.0;
        sh_over = tau;
    } else {
        ch = std::cosh(delta * tau);
        sh_over = std::sinh(delta * tau) / delta;
    }
    const cplx scale = std::exp(alpha * tau);
    return {scale * (ch + sh_over * n11), scale * sh_over * half_g, scale * sh_over * half_g,
            scale * (ch - sh_over * n11)};
}

// exact per-fluctuator coherence under an alternating-sign CP train,
// stroboscopic at multiples of 2 dt
inline std::vector<double> transfer_cp_coherence(double v, double gamma, double dt,
                                                 int n_cycles) {
    const Mat2 cycle = segment_transfer(v, gamma, -1.0, dt) * segment_transfer(v, gamma, +1.0, dt);
    std::vector<double> out;
    QVec q{0.5, 0.5};
    for (int n = 0; n < n_cycles; ++n) {
        q = cycle.apply(q);
        out.push_back(std::abs(q[0] + q[1]));
    }
    return out;
}

// product over an ensemble of independent fluctuators
template <typename Ensemble>
std::vector<double> transfer_cp_ensemble(const Ensemble& ensemble, double dt, int n_cycles) {
    std::vector<double> total(static_cast<std::size_t>(n_cycles), 1.0);
    for (const auto& f : ensemble.fluctuators()) {
        const auto one = transfer_cp_coherence(f.v, f.gamma, dt, n_cycles);
        for (int n = 0; n < n_cycles; ++n) total[n] *= one[n];
    }
    return total;
}

template <typename Ensemble>
std::vector<double> transfer_free_ensemble(const Ensemble& ensemble,
                                           const std::vector<double>& times) {
    std::vector<double> total(times.size(), 1.0);
    for (const auto& f : ensemble.fluctuators()) {
        QVec q{0.5, 0.5};
        double now = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j) {
            q = segment_transfer(f.v, f.gamma, +1.0, times[j] - now).apply(q);
            now = times[j];
            total[j] *= std::abs(q[0] + q[1]);
        }
    }
    return total;
}

}  // namespace oracles
