#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <stdexcept>

#include "decup/matrix.hpp"

namespace decup {

// Anything that drives U_c(t) over one cycle split into equal subintervals.
template <typename S>
concept ControlSchedule = requires(const S& s, double t) {
    { s.cycle_time() } -> std::convertible_to<double>;
    { s.subinterval_count() } -> std::convertible_to<std::size_t>;
    { s.propagator(t) } -> std::convertible_to<Operator>;
};

struct AverageResult {
    Operator h_bar0;                 // zeroth-order average Hamiltonian
    std::optional<Operator> h_bar1;  // first-order Magnus correction, if requested
    double integration_error = 0.0;  // change of h_bar0 under substep halving
    double cycle_time = 0.0;
};

namespace detail {

// toggling-frame Hamiltonian U_c(t)^dagger H U_c(t)
template <ControlSchedule S>
Operator toggled(const S& sched, const Operator& h, double t) {
    const Operator u = sched.propagator(t);
    return u.dagger() * h * u;
}

// midpoint rule per subinterval; the integrand is smooth inside subintervals
// and possibly discontinuous across them, so cells never straddle a boundary
template <ControlSchedule S>
Operator average_once(const S& sched, const Operator& h, int substeps) {
    const double tc = sched.cycle_time();
    const std::size_t m = sched.subinterval_count();
    if (m == 0 || tc <= 0.0) return h;  // degenerate no-op schedule
    const double dt = tc / static_cast<double>(m);
    Operator acc(h.dim());
    for (std::size_t l = 0; l < m; ++l) {
        for (int j = 0; j < substeps; ++j) {
            const double t = (static_cast<double>(l) + (j + 0.5) / substeps) * dt;
            acc += toggled(sched, h, t);
        }
    }
    acc *= complex_t{1.0 / static_cast<double>(m * substeps), 0.0};
    return (acc + acc.dagger()) * complex_t{0.5, 0.0};
}

}  // namespace detail

// (1/T_c) int_0^{T_c} U_c^dagger(x) H U_c(x) dx.  For bang-bang schedules the
// integrand is constant per subinterval and the quadrature is exact, matching
// the group-theoretic average.
template <ControlSchedule S>
AverageResult average_hamiltonian(const S& sched, const Operator& h, int substeps = 8) {
    if (substeps < 2) throw std::invalid_argument("average_hamiltonian: substeps must be >= 2");
    const Operator coarse = detail::average_once(sched, h, substeps);
    const Operator fine = detail::average_once(sched, h, 2 * substeps);
    return AverageResult{fine, std::nullopt, frobenius_distance(fine, coarse),
                         sched.cycle_time()};
}

// First-order Magnus term (-i / 2 T_c) int_0^{T_c} dx int_0^x dy [Ht(x), Ht(y)].
// Midpoint cells with a running prefix sum; exact for piecewise-constant frames.
template <ControlSchedule S>
Operator magnus_first_order(const S& sched, const Operator& h, int substeps = 8) {
    if (substeps < 2) throw std::invalid_argument("magnus_first_order: substeps must be >= 2");
    const double tc = sched.cycle_time();
    const std::size_t m = sched.subinterval_count();
    if (m == 0 || tc <= 0.0) return Operator::zero(h.dim());
    const double dt = tc / static_cast<double>(m);
    const double w = dt / substeps;

    Operator acc(h.dim());
    Operator prefix(h.dim());
    for (std::size_t l = 0; l < m; ++l)
        for (int j = 0; j < substeps; ++j) {
            const double t = (static_cast<double>(l) + (j + 0.5) / substeps) * dt;
            const Operator ht = detail::toggled(sched, h, t);
            acc += commutator(ht, prefix);
            prefix += ht;
        }
    acc *= complex_t{0.0, -1.0} * complex_t{w * w / (2.0 * tc), 0.0};
    return (acc + acc.dagger()) * complex_t{0.5, 0.0};
}

template <ControlSchedule S>
AverageResult average_hamiltonian_with_magnus(const S& sched, const Operator& h,
                                              int substeps = 8) {
    AverageResult r = average_hamiltonian(sched, h, substeps);
    r.h_bar1 = magnus_first_order(sched, h, substeps);
    return r;
}

struct EffectivePropagatorReport {
    double deviation = 0.0;          // || U_exact(N T_c) - exp(-i Hbar0 N T_c) || up to phase
    double integration_error = 0.0;  // step-halving error of the exact cycle propagator
    Operator u_exact;
    Operator u_average;
};

namespace detail {

template <ControlSchedule S>
Operator cycle_propagator_once(const S& sched, const Operator& h, int substeps) {
    const double tc = sched.cycle_time();
    const std::size_t m = sched.subinterval_count();
    Operator u = Operator::identity(h.dim());
    if (m == 0 || tc <= 0.0) return u;
    const double dt = tc / static_cast<double>(m);
    const double w = dt / substeps;
    for (std::size_t l = 0; l < m; ++l)
        for (int j = 0; j < substeps; ++j) {
            const double t = (static_cast<double>(l) + (j + 0.5) / substeps) * dt;
            u = expm(toggled(sched, h, t), w) * u;
        }
    return u;
}

}  // namespace detail

// Exact stroboscopic propagator in the toggling frame over N cycles versus the
// zeroth-order prediction exp(-i Hbar0 N T_c).
template <ControlSchedule S>
EffectivePropagatorReport effective_propagator_check(const S& sched, const Operator& h,
                                                     int n_cycles, int substeps = 16) {
    if (n_cycles < 1) throw std::invalid_argument("effective_propagator_check: N must be >= 1");
    const Operator coarse = detail::cycle_propagator_once(sched, h, substeps);
    const Operator fine = detail::cycle_propagator_once(sched, h, 2 * substeps);

    Operator u_exact = Operator::identity(h.dim());
    for (int n = 0; n < n_cycles; ++n) u_exact = fine * u_exact;

    const AverageResult avg = average_hamiltonian(sched, h, substeps);
    const Operator u_avg = expm(avg.h_bar0, avg.cycle_time * n_cycles);

    return EffectivePropagatorReport{phase_distance(u_exact, u_avg),
                                     frobenius_distance(fine, coarse), u_exact, u_avg};
}

}  // namespace decup
