#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "decup/euler.hpp"
#include "decup/propagator.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace decup;

TEST_CASE("Cayley graph of the CP group is the two-cycle") {
    const auto g = make_group({pauli_x()});
    const auto graph = cayley_graph(g, {1});
    CHECK(graph.vertex_count == 2);
    REQUIRE(graph.edges.size() == 2);
    CHECK(graph.edges[0].from == 0);
    CHECK(graph.edges[0].to == 1);
    CHECK(graph.edges[0].label == 0);
    CHECK(graph.edges[1].from == 1);
    CHECK(graph.edges[1].to == 0);
    CHECK(graph.edges[1].label == 0);
}

TEST_CASE("trivial group gives a single vertex with no edges") {
    const auto graph = cayley_graph(make_group({}), {});
    CHECK(graph.vertex_count == 1);
    CHECK(graph.edges.empty());
    CHECK(eulerian_cycle(graph).empty());
}

TEST_CASE("Pauli-group Cayley graph is 2-in 2-out regular on 4 vertices") {
    const auto g = make_group({pauli_x(), pauli_z()});
    const auto graph = cayley_graph(g, g.generator_indices());
    CHECK(graph.vertex_count == 4);
    CHECK(graph.edges.size() == 8);
    std::vector<int> indeg(4, 0), outdeg(4, 0);
    for (const auto& e : graph.edges) {
        ++outdeg[e.from];
        ++indeg[e.to];
    }
    for (std::size_t v = 0; v < 4; ++v) {
        CHECK(indeg[v] == 2);
        CHECK(outdeg[v] == 2);
    }
}

TEST_CASE("non-generating set is rejected with the unreachable vertices named") {
    const auto g = make_group({pauli_x(), pauli_z()});
    // sigma_x alone only reaches {I, sigma_x} inside the Pauli group
    CHECK_THROWS_WITH_AS(cayley_graph(g, {g.generator_indices()[0]}),
                         doctest::Contains("unreachable"), std::invalid_argument);
}

TEST_CASE("Eulerian cycle on Z2 is (gamma, gamma)") {
    const auto g = make_group({pauli_x()});
    const auto graph = cayley_graph(g, {1});
    const auto cycle = eulerian_cycle(graph, 0);
    REQUIRE(cycle.size() == 2);
    CHECK(cycle[0] == 0);
    CHECK(cycle[1] == 1);
    CHECK(graph.edges[cycle[0]].label == 0);
    CHECK(graph.edges[cycle[1]].label == 0);
}

TEST_CASE("Eulerian cycle on the Pauli graph uses every edge exactly once and closes") {
    const auto g = make_group({pauli_x(), pauli_z()});
    const auto graph = cayley_graph(g, g.generator_indices());
    const auto cycle = eulerian_cycle(graph, 0);
    REQUIRE(cycle.size() == 8);
    std::set<std::size_t> used(cycle.begin(), cycle.end());
    CHECK(used.size() == 8);  // multiset equality with the edge set
    // walk continuity and closure
    std::size_t at = 0;
    for (std::size_t e : cycle) {
        CHECK(graph.edges[e].from == at);
        at = graph.edges[e].to;
    }
    CHECK(at == 0);
}

TEST_CASE("pulse shapes realize their generator up to phase") {
    for (auto kind : {PulseShapeKind::constant, PulseShapeKind::sine}) {
        const PulseShape shape(pauli_x(), 1.0, kind);
        CHECK(shape.theta() == doctest::Approx(pi / 2.0).epsilon(1e-9));
        CHECK(shape.angle(1.0) == doctest::Approx(shape.theta()).epsilon(1e-12));
        CHECK(phase_distance(shape.u(1.0), pauli_x()) < 1e-8);
        CHECK(frobenius_distance(shape.u(0.0), Operator::identity(2)) < 1e-12);
        CHECK(shape.max_amplitude() <= pi / 1.0 + 1e-12);

        // cross-check against the generic time-ordered integrator of f(s) * direction
        PiecewiseHamiltonian h({{1.0, [&](double s) {
                                     return shape.direction() * shape.amplitude(s);
                                 }}});
        const auto u = time_ordered_propagator(h, 1.0, 64);
        CHECK(frobenius_distance(u.u, shape.u(1.0)) < 1e-6 + 10.0 * u.error_estimate);
    }
    const PulseShape flat(pauli_x(), 2.0, PulseShapeKind::constant);
    CHECK(flat.max_amplitude() == doctest::Approx(pi / 4.0));  // theta / dt
    CHECK_THROWS_AS(PulseShape(pauli_x(), 0.0, PulseShapeKind::sine), std::invalid_argument);
}

TEST_CASE("sine shape amplitude integrates to theta and stays bounded") {
    const PulseShape shape(pauli_x(), 0.5, PulseShapeKind::sine);
    // trapezoid integral of the amplitude
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s0 = 0.5 * i / n, s1 = 0.5 * (i + 1) / n;
        acc += 0.5 * (shape.amplitude(s0) + shape.amplitude(s1)) * (s1 - s0);
    }
    CHECK(acc == doctest::Approx(pi / 2.0).epsilon(1e-6));
    double peak = 0.0;
    for (int i = 0; i <= n; ++i) peak = std::max(peak, shape.amplitude(0.5 * i / n));
    CHECK(peak == doctest::Approx(shape.max_amplitude()).epsilon(1e-6));
    CHECK(peak <= pi / 0.5);
}

TEST_CASE("Z2 Eulerian schedule reproduces the two-branch control propagator") {
    const auto g = make_group({pauli_x()});
    const double dt = 0.8;
    const EulerianSchedule sched(g, {1}, dt, PulseShapeKind::constant);
    CHECK(sched.cycle_time() == doctest::Approx(2.0 * dt));
    CHECK(sched.subinterval_count() == 2);

    const PulseShape& ux = sched.shapes()[0];
    for (double s : {0.0, 0.2, 0.5, 0.79}) {
        CHECK(frobenius_distance(sched.propagator(s), ux.u(s)) < 1e-12);
        CHECK(phase_distance(sched.propagator(dt + s), ux.u(s) * pauli_x()) < 1e-9);
    }
    CHECK(frobenius_distance(sched.propagator(0.0), Operator::identity(2)) < 1e-14);
    CHECK(phase_distance(sched.propagator(2.0 * dt), Operator::identity(2)) < 1e-9);
    CHECK_THROWS_AS(sched.propagator(-0.1), std::out_of_range);
    CHECK_THROWS_AS(sched.propagator(2.0 * dt + 0.1), std::out_of_range);
}

TEST_CASE("Eulerian boundary frames match the Cayley walk for the Pauli group") {
    const auto g = make_group({pauli_x(), pauli_z()});
    for (auto kind : {PulseShapeKind::constant, PulseShapeKind::sine}) {
        const EulerianSchedule sched(g, g.generator_indices(), 0.3, kind);
        CHECK(sched.subinterval_count() == 8);
        for (std::size_t l = 0; l <= 8; ++l) {
            const Operator expected = g.element(sched.walk_vertex(l));
            CHECK(phase_distance(sched.propagator(0.3 * static_cast<double>(l)), expected) <
                  1e-8);
        }
        CHECK(phase_distance(sched.propagator(sched.cycle_time()), Operator::identity(2)) < 1e-8);
        CHECK(sched.max_amplitude() <= pi / 0.3 + 1e-9);
    }
}

TEST_CASE("schedule construction rejects nonpositive subinterval lengths") {
    const auto g = make_group({pauli_x()});
    CHECK_THROWS_AS(EulerianSchedule(g, {1}, 0.0, PulseShapeKind::constant),
                    std::invalid_argument);
    CHECK_THROWS_AS(EulerianSchedule(g, {1}, -2.0, PulseShapeKind::sine), std::invalid_argument);
}

TEST_CASE("amplitude miscalibration breaks cycle closure") {
    const auto g = make_group({pauli_x()});
    const EulerianSchedule sched(g, {1}, 1.0, PulseShapeKind::sine);
    const auto bad = sched.with_amplitude_error(0.05);
    CHECK(phase_distance(sched.propagator(2.0), Operator::identity(2)) < 1e-9);
    CHECK(phase_distance(bad.propagator(2.0), Operator::identity(2)) > 1e-3);
    CHECK(bad.max_amplitude() == doctest::Approx(1.05 * sched.max_amplitude()));
}
