#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "decup/group.hpp"
#include "decup/matrix.hpp"

namespace decup {

struct CayleyEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    std::size_t label = 0;  // position in the generator label list
};

// Directed Cayley multigraph: vertices are group-element indices, one edge per
// (vertex, generator) pair under left multiplication to = gamma * g_from.
struct CayleyGraph {
    std::size_t vertex_count = 0;
    std::vector<std::size_t> generator_elements;  // group element index per label
    std::vector<CayleyEdge> edges;                // sorted by (from, label)
};

inline CayleyGraph cayley_graph(const DecouplingGroup& g,
                                const std::vector<std::size_t>& generator_indices) {
    CayleyGraph graph;
    graph.vertex_count = g.order();
    for (std::size_t gi : generator_indices) {
        if (gi >= g.order()) throw std::invalid_argument("cayley_graph: generator index out of range");
        graph.generator_elements.push_back(gi);
    }
    for (std::size_t v = 0; v < g.order(); ++v)
        for (std::size_t label = 0; label < generator_indices.size(); ++label)
            graph.edges.push_back(CayleyEdge{v, g.product(generator_indices[label], v), label});

    // reachability from the identity vertex
    std::vector<char> seen(graph.vertex_count, 0);
    std::vector<std::size_t> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
        const std::size_t v = queue.back();
        queue.pop_back();
        for (const auto& e : graph.edges)
            if (e.from == v && !seen[e.to]) {
                seen[e.to] = 1;
                queue.push_back(e.to);
            }
    }
    std::string unreachable;
    for (std::size_t v = 0; v < graph.vertex_count; ++v)
        if (!seen[v]) unreachable += (unreachable.empty() ? "" : ", ") + std::to_string(v);
    if (!unreachable.empty())
        throw std::invalid_argument(
            "cayley_graph: generators do not generate the group; unreachable vertices: " +
            unreachable);
    return graph;
}

// Hierholzer construction.  Outgoing edges are consumed in (vertex, label)
// order, so the cycle is deterministic.  Returns edge ids in walk order.
inline std::vector<std::size_t> eulerian_cycle(const CayleyGraph& graph, std::size_t start = 0) {
    if (graph.edges.empty()) return {};
    if (start >= graph.vertex_count) throw std::invalid_argument("eulerian_cycle: bad start vertex");

    std::vector<std::vector<std::size_t>> out(graph.vertex_count);
    for (std::size_t e = 0; e < graph.edges.size(); ++e)
        out[graph.edges[e].from].push_back(e);  // edges are already (from, label)-sorted

    std::vector<std::size_t> in_deg(graph.vertex_count, 0);
    for (const auto& e : graph.edges) ++in_deg[e.to];
    for (std::size_t v = 0; v < graph.vertex_count; ++v)
        if (in_deg[v] != out[v].size())
            throw std::invalid_argument("eulerian_cycle: in/out degree mismatch at vertex " +
                                        std::to_string(v));

    std::vector<std::size_t> next(graph.vertex_count, 0);
    std::vector<std::size_t> vertex_stack{start};
    std::vector<std::size_t> edge_stack;
    std::vector<std::size_t> cycle;
    while (!vertex_stack.empty()) {
        const std::size_t v = vertex_stack.back();
        if (next[v] < out[v].size()) {
            const std::size_t e = out[v][next[v]++];
            vertex_stack.push_back(graph.edges[e].to);
            edge_stack.push_back(e);
        } else {
            vertex_stack.pop_back();
            if (!edge_stack.empty()) {
                cycle.push_back(edge_stack.back());
                edge_stack.pop_back();
            }
        }
    }
    std::reverse(cycle.begin(), cycle.end());
    if (cycle.size() != graph.edges.size())
        throw std::invalid_argument("eulerian_cycle: graph is not connected");
    return cycle;
}

enum class PulseShapeKind { constant, sine };

// Bounded-strength realization of one group generator over a subinterval:
// H(s) = f(s) * direction, with direction the unit-norm traceless part of the
// generator's Hermitian log and int_0^dt f = theta the rotation angle.
class PulseShape {
public:
    PulseShape(const Operator& generator_unitary, double dt, PulseShapeKind kind)
        : dt_(dt), kind_(kind) {
        if (!(dt > 0.0)) throw std::invalid_argument("PulseShape: dt must be > 0");
        const Operator log = hermitian_log(generator_unitary);
        const std::size_t n = log.dim();
        Operator traceless = log - Operator::identity(n) * (log.trace() / static_cast<double>(n));
        const HermitianEigen traceless_eig(traceless);
        double theta = 0.0;
        for (double v : traceless_eig.values()) theta = std::max(theta, std::abs(v));
        theta_ = theta;
        if (theta_ > 1e-12) {
            direction_ = traceless * complex_t{1.0 / theta_, 0.0};
            eig_.emplace(direction_);
        } else {
            direction_ = Operator::zero(n);
        }
    }

    double dt() const { return dt_; }
    double theta() const { return theta_; }
    PulseShapeKind kind() const { return kind_; }
    const Operator& direction() const { return direction_; }

    // amplitude multiplier modeling a systematic control error
    PulseShape& set_amplitude_scale(double scale) {
        scale_ = scale;
        return *this;
    }
    double amplitude_scale() const { return scale_; }

    // f(s), angular-frequency units
    double amplitude(double s) const {
        switch (kind_) {
            case PulseShapeKind::constant:
                return scale_ * theta_ / dt_;
            case PulseShapeKind::sine:
                return scale_ * (pi * theta_ / (2.0 * dt_)) * std::sin(pi * s / dt_);
        }
        return 0.0;
    }

    // int_0^s f
    double angle(double s) const {
        switch (kind_) {
            case PulseShapeKind::constant:
                return scale_ * theta_ * s / dt_;
            case PulseShapeKind::sine:
                return scale_ * 0.5 * theta_ * (1.0 - std::cos(pi * s / dt_));
        }
        return 0.0;
    }

    double max_amplitude() const {
        return kind_ == PulseShapeKind::constant ? std::abs(scale_) * theta_ / dt_
                                                 : std::abs(scale_) * pi * theta_ / (2.0 * dt_);
    }

    // u(s) = exp(-i angle(s) direction); u(dt) equals the generator up to phase
    Operator u(double s) const {
        if (!eig_) return Operator::identity(direction_.dim());
        return eig_->propagator(angle(s));
    }

private:
    double dt_;
    PulseShapeKind kind_;
    double theta_ = 0.0;
    double scale_ = 1.0;
    Operator direction_;
    std::optional<HermitianEigen> eig_;
};

// Bounded-strength decoupling schedule: an Eulerian cycle on the Cayley graph,
// one pulse shape per generator, cycle time |G| * |Gamma| * dt.
class EulerianSchedule {
public:
    EulerianSchedule(DecouplingGroup group, std::vector<std::size_t> generator_indices, double dt,
                     PulseShapeKind kind = PulseShapeKind::constant, double amplitude_scale = 1.0)
        : group_(std::move(group)),
          generator_indices_(std::move(generator_indices)),
          dt_(dt),
          kind_(kind) {
        if (!(dt > 0.0)) throw std::invalid_argument("EulerianSchedule: dt must be > 0");
        graph_ = cayley_graph(group_, generator_indices_);
        cycle_ = eulerian_cycle(graph_, 0);
        for (std::size_t gi : generator_indices_) {
            shapes_.emplace_back(group_.element(gi), dt_, kind_);
            shapes_.back().set_amplitude_scale(amplitude_scale);
        }
        rebuild_frames();
    }

    const DecouplingGroup& group() const { return group_; }
    const CayleyGraph& graph() const { return graph_; }
    const std::vector<std::size_t>& cycle_edges() const { return cycle_; }
    const std::vector<PulseShape>& shapes() const { return shapes_; }
    double dt() const { return dt_; }
    double cycle_time() const { return dt_ * static_cast<double>(cycle_.size()); }
    std::size_t subinterval_count() const { return cycle_.size(); }

    // generator label driven during subinterval l
    std::size_t label(std::size_t l) const { return graph_.edges.at(cycle_.at(l)).label; }

    // Cayley walk vertex (group element index) reached after l subintervals
    std::size_t walk_vertex(std::size_t l) const {
        if (l > cycle_.size()) throw std::out_of_range("EulerianSchedule: subinterval index");
        return l == 0 ? 0 : graph_.edges.at(cycle_.at(l - 1)).to;
    }

    double max_amplitude() const {
        double m = 0.0;
        for (const auto& s : shapes_) m = std::max(m, s.max_amplitude());
        return m;
    }

    EulerianSchedule with_amplitude_error(double epsilon) const {
        EulerianSchedule copy = *this;
        for (auto& s : copy.shapes_) s.set_amplitude_scale(1.0 + epsilon);
        copy.rebuild_frames();
        return copy;
    }

    // U_c(t), continuous in t; at subinterval boundaries it matches the Cayley
    // walk element up to global phase, and U_c(T_c) ~ I.
    Operator propagator(double t) const {
        const double tc = cycle_time();
        if (t < -1e-12 * tc - 1e-300 || t > tc * (1.0 + 1e-12) + 1e-300)
            throw std::out_of_range("EulerianSchedule: t outside [0, T_c]");
        if (cycle_.empty()) return Operator::identity(group_.dim());
        const double tcl = std::clamp(t, 0.0, tc);
        auto l = static_cast<std::size_t>(std::floor(tcl / dt_));
        if (l >= cycle_.size()) return frames_.back();
        const double s = tcl - static_cast<double>(l) * dt_;
        return shapes_[label(l)].u(s) * frames_[l];
    }

    static constexpr bool impulsive = false;

private:
    void rebuild_frames() {
        frames_.assign(1, Operator::identity(group_.dim()));
        for (std::size_t l = 0; l < cycle_.size(); ++l)
            frames_.push_back(shapes_[label(l)].u(dt_) * frames_[l]);
    }

    DecouplingGroup group_;
    std::vector<std::size_t> generator_indices_;
    double dt_;
    PulseShapeKind kind_;
    CayleyGraph graph_;
    std::vector<std::size_t> cycle_;
    std::vector<PulseShape> shapes_;
    std::vector<Operator> frames_;
};

}  // namespace decup
