#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "decup/matrix.hpp"

namespace decup {

// Finite group of unitaries, closed under multiplication modulo global phase.
// Element 0 is always the identity; ordering is the BFS discovery order from
// the identity with generators taken in the order supplied, which keeps
// schedules and Eulerian cycles reproducible.
class DecouplingGroup {
public:
    DecouplingGroup(std::vector<Operator> elements,
                    std::vector<std::vector<std::size_t>> table,
                    std::vector<std::size_t> generator_indices)
        : elements_(std::move(elements)),
          table_(std::move(table)),
          generator_indices_(std::move(generator_indices)) {}

    std::size_t order() const { return elements_.size(); }
    std::size_t dim() const { return elements_.front().dim(); }

    const Operator& element(std::size_t i) const { return elements_.at(i); }
    const std::vector<Operator>& elements() const { return elements_; }

    // index of g_i * g_j modulo phase
    std::size_t product(std::size_t i, std::size_t j) const { return table_.at(i).at(j); }

    std::size_t inverse(std::size_t i) const {
        for (std::size_t j = 0; j < order(); ++j)
            if (product(i, j) == 0) return j;
        throw std::logic_error("DecouplingGroup: element has no inverse");
    }

    // indices of the elements the group was generated from (identity excluded)
    const std::vector<std::size_t>& generator_indices() const { return generator_indices_; }

private:
    std::vector<Operator> elements_;
    std::vector<std::vector<std::size_t>> table_;
    std::vector<std::size_t> generator_indices_;
};

// Closure of the generated set under multiplication modulo global phase.
// An empty generator list yields the trivial group {I} on `dim_when_empty`.
inline DecouplingGroup make_group(const std::vector<Operator>& generators,
                                  std::size_t max_order = 64,
                                  std::size_t dim_when_empty = 2,
                                  double phase_tol = 1e-9) {
    const std::size_t dim = generators.empty() ? dim_when_empty : generators.front().dim();
    for (const auto& g : generators) {
        if (g.dim() != dim)
            throw std::invalid_argument("make_group: generators have mixed dimensions");
        if (!g.is_unitary(1e-10))
            throw std::invalid_argument("make_group: generator is not unitary");
    }

    std::vector<Operator> elements{Operator::identity(dim)};
    auto find = [&](const Operator& u) -> std::size_t {
        for (std::size_t i = 0; i < elements.size(); ++i)
            if (phase_equal(elements[i], u, phase_tol)) return i;
        return elements.size();
    };

    std::vector<std::size_t> generator_indices;
    for (std::size_t head = 0; head < elements.size(); ++head) {
        for (const auto& g : generators) {
            const Operator candidate = g * elements[head];
            if (find(candidate) == elements.size()) {
                if (elements.size() >= max_order)
                    throw std::runtime_error("make_group: group order exceeds max_order " +
                                             std::to_string(max_order));
                elements.push_back(candidate);
            }
        }
    }
    for (const auto& g : generators) generator_indices.push_back(find(g));

    const std::size_t n = elements.size();
    std::vector<std::vector<std::size_t>> table(n, std::vector<std::size_t>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = find(elements[i] * elements[j]);
            if (k == n)
                throw std::runtime_error("make_group: set is not closed under multiplication");
            table[i][j] = k;
        }
    return DecouplingGroup(std::move(elements), std::move(table), std::move(generator_indices));
}

// (1/|G|) sum_l g_l^dagger H g_l.  Projects onto the commutant of G; Hermitian
// and trace-preserving by construction.
inline Operator group_average(const DecouplingGroup& g, const Operator& h) {
    if (h.dim() != g.dim()) throw std::invalid_argument("group_average: dimension mismatch");
    Operator acc(h.dim());
    for (std::size_t l = 0; l < g.order(); ++l) {
        const Operator& gl = g.element(l);
        acc += gl.dagger() * h * gl;
    }
    acc *= complex_t{1.0 / static_cast<double>(g.order()), 0.0};
    return (acc + acc.dagger()) * complex_t{0.5, 0.0};
}

// Bang-bang schedule: the control propagator is held at g_{l} during
// subinterval l and switched by the instantaneous pulse p = g_next g_prev^dagger
// at each boundary; the final pulse wraps back to the identity.
class BBSchedule {
public:
    BBSchedule(DecouplingGroup group, double dt)
        : group_(std::move(group)), dt_(dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("bb_schedule: dt must be > 0");
        const std::size_t n = group_.order();
        for (std::size_t l = 0; l < n; ++l) frame_indices_.push_back(l);
        for (std::size_t l = 0; l < n; ++l) {
            const std::size_t from = frame_indices_[l];
            const std::size_t to = frame_indices_[(l + 1) % n];
            pulses_.push_back(group_.element(to) * group_.element(from).dagger());
        }
    }

    const DecouplingGroup& group() const { return group_; }
    double dt() const { return dt_; }
    double cycle_time() const { return dt_ * static_cast<double>(group_.order()); }
    std::size_t subinterval_count() const { return group_.order(); }

    // group-element index held during subinterval l (0-based)
    std::size_t frame_index(std::size_t l) const {
        if (l >= frame_indices_.size()) throw std::out_of_range("BBSchedule: subinterval index");
        return frame_indices_[l];
    }

    const std::vector<Operator>& pulses() const { return pulses_; }

    // pulse applied at the end of subinterval l, i.e. at time (l+1)*dt
    const Operator& pulse(std::size_t l) const {
        if (l >= pulses_.size()) throw std::out_of_range("BBSchedule: pulse index");
        return pulses_[l];
    }

    // U_c(t); piecewise constant, right-continuous, U_c(T_c) = I
    Operator propagator(double t) const {
        const double tc = cycle_time();
        if (t < -1e-12 * tc || t > tc * (1.0 + 1e-12))
            throw std::out_of_range("BBSchedule: t outside [0, T_c]");
        auto l = static_cast<std::size_t>(std::min(
            std::floor(std::max(t, 0.0) / dt_), static_cast<double>(group_.order()) - 1.0));
        if (t >= tc * (1.0 - 1e-15)) return Operator::identity(group_.dim());
        return group_.element(frame_indices_[l]);
    }

    static constexpr bool impulsive = true;  // instantaneous, unbounded-strength pulses

private:
    DecouplingGroup group_;
    double dt_;
    std::vector<std::size_t> frame_indices_;
    std::vector<Operator> pulses_;
};

inline BBSchedule bb_schedule(const DecouplingGroup& g, double dt) { return BBSchedule(g, dt); }

// Toggling-frame Hamiltonian during subinterval l (0-based): g_l^dagger H g_l.
inline Operator toggled_hamiltonian(const BBSchedule& schedule, const Operator& h, std::size_t l) {
    if (h.dim() != schedule.group().dim())
        throw std::invalid_argument("toggled_hamiltonian: dimension mismatch");
    const Operator& g = schedule.group().element(schedule.frame_index(l));
    return g.dagger() * h * g;
}

}  // namespace decup
