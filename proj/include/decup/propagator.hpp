#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "decup/matrix.hpp"

namespace decup {

// Control Hamiltonian H(t) given as an ordered list of segments; within a
// segment the generator is a smooth function of the local time s in [0, duration).
struct HamiltonianSegment {
    double duration = 0.0;
    std::function<Operator(double)> generator;  // local time -> Hermitian operator
};

class PiecewiseHamiltonian {
public:
    PiecewiseHamiltonian() = default;

    explicit PiecewiseHamiltonian(std::vector<HamiltonianSegment> segments)
        : segments_(std::move(segments)) {
        for (const auto& seg : segments_) {
            if (!(seg.duration > 0.0))
                throw std::invalid_argument("PiecewiseHamiltonian: segment duration must be > 0");
            total_ += seg.duration;
        }
    }

    static PiecewiseHamiltonian constant(Operator h, double duration) {
        return PiecewiseHamiltonian({HamiltonianSegment{
            duration, [h = std::move(h)](double) { return h; }}});
    }

    const std::vector<HamiltonianSegment>& segments() const { return segments_; }
    double total_duration() const { return total_; }

    PiecewiseHamiltonian& append(HamiltonianSegment seg) {
        if (!(seg.duration > 0.0))
            throw std::invalid_argument("PiecewiseHamiltonian: segment duration must be > 0");
        total_ += seg.duration;
        segments_.push_back(std::move(seg));
        return *this;
    }

private:
    std::vector<HamiltonianSegment> segments_;
    double total_ = 0.0;
};

struct PropagatorResult {
    Operator u;
    double error_estimate = 0.0;  // Frobenius change between the n and 2n substep runs
};

namespace detail {

inline Operator propagate_midpoint(const PiecewiseHamiltonian& h, double t, int substeps) {
    double remaining = t;
    Operator u;
    bool first = true;
    for (const auto& seg : h.segments()) {
        if (remaining <= 0.0) break;
        const double span = std::min(seg.duration, remaining);
        const double ds = span / substeps;
        for (int j = 0; j < substeps; ++j) {
            const Operator hj = seg.generator((j + 0.5) * ds);
            const Operator step = expm(hj, ds);
            u = first ? step : step * u;
            first = false;
        }
        remaining -= span;
    }
    if (first) {
        // t == 0: need a dimension; probe the first segment.
        if (h.segments().empty())
            throw std::invalid_argument("time_ordered_propagator: empty Hamiltonian");
        return Operator::identity(h.segments().front().generator(0.0).dim());
    }
    return u;
}

}  // namespace detail

// T exp{-i int_0^t H(x) dx} by midpoint-sampled piecewise-constant exponentials.
// Unitary by construction; the error estimate is the change under substep halving,
// so a further halving moves the result by roughly a quarter of it.
inline PropagatorResult time_ordered_propagator(const PiecewiseHamiltonian& h, double t,
                                                int substeps_per_segment = 8) {
    if (substeps_per_segment < 1)
        throw std::invalid_argument("time_ordered_propagator: substeps must be >= 1");
    const double total = h.total_duration();
    if (t < -1e-15 * total || t > total * (1.0 + 1e-12) + 1e-300)
        throw std::out_of_range("time_ordered_propagator: t outside [0, total_duration]");
    const double tc = std::clamp(t, 0.0, total);

    const Operator coarse = detail::propagate_midpoint(h, tc, substeps_per_segment);
    const Operator fine = detail::propagate_midpoint(h, tc, 2 * substeps_per_segment);
    return PropagatorResult{fine, frobenius_distance(fine, coarse)};
}

}  // namespace decup
