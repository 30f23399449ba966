// Acceptance suite: runs every bundled correctness criterion end to end and
// prints one PASS/FAIL line per criterion, with wall time against a budget.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "decup/averaging.hpp"
#include "decup/euler.hpp"
#include "decup/fig3.hpp"
#include "decup/fock.hpp"
#include "decup/group.hpp"
#include "decup/oneoverf.hpp"
#include "decup/spinboson.hpp"
#include "oracles.hpp"

using namespace decup;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

Operator random_hermitian2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Operator h(2);
    h(0, 0) = u(rng);
    h(1, 1) = u(rng);
    const complex_t off{u(rng), u(rng)};
    h(0, 1) = off;
    h(1, 0) = std::conj(off);
    return h;
}

// ---------------------------------------------------------------------------

void criterion_1_cp_zero_average(std::ostream& note) {
    const auto g = make_group({pauli_x()});
    const double exact = group_average(g, pauli_z()).frobenius_norm();
    expect(exact <= 1e-15, "group-theoretic average not zero: " + num(exact));
    const auto numeric = average_hamiltonian(bb_schedule(g, 0.37), pauli_z(), 8);
    expect(numeric.h_bar0.frobenius_norm() <= 1e-10,
           "numeric cycle average above 1e-10: " + num(numeric.h_bar0.frobenius_norm()));
    note << "exact " << num(exact) << ", numeric " << num(numeric.h_bar0.frobenius_norm());
}

void criterion_2_universal_decoupling(std::ostream& note) {
    const auto g = make_group({pauli_x(), pauli_z()});
    std::mt19937_64 rng(1234);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const Operator h = random_hermitian2(rng);
        const Operator avg = group_average(g, h);
        const Operator target = Operator::identity(2) * (h.trace() / 2.0);
        worst = std::max(worst, frobenius_distance(avg, target));
    }
    expect(worst <= 1e-10, "worst deviation " + num(worst));
    note << "1000 matrices, worst deviation " << num(worst);
}

void criterion_3_eulerian_zero_average(std::ostream& note) {
    const auto g = make_group({pauli_x()});
    double norms[2];
    int i = 0;
    for (auto kind : {PulseShapeKind::constant, PulseShapeKind::sine}) {
        const EulerianSchedule sched(g, {1}, 0.8, kind);
        norms[i++] = average_hamiltonian(sched, pauli_z(), 64).h_bar0.frobenius_norm();
    }
    expect(norms[0] <= 1e-8, "constant-shape average " + num(norms[0]));
    expect(norms[1] <= 1e-8, "sine-shape average " + num(norms[1]));
    expect(std::abs(norms[0] - norms[1]) <= 1e-8, "shape dependence detected");
    note << "constant " << num(norms[0]) << ", sine " << num(norms[1]);
}

void criterion_4_eulerian_cycle(std::ostream& note) {
    const auto z2 = make_group({pauli_x()});
    const auto z2_graph = cayley_graph(z2, {1});
    const auto z2_cycle = eulerian_cycle(z2_graph, 0);
    expect(z2_cycle.size() == 2, "Z2 cycle length != 2");
    expect(z2_cycle[0] == 0 && z2_cycle[1] == 1, "Z2 cycle is not (gamma, gamma)");
    expect(z2_graph.edges[z2_cycle[0]].label == 0 && z2_graph.edges[z2_cycle[1]].label == 0,
           "Z2 cycle labels wrong");

    const auto pauli = make_group({pauli_x(), pauli_z()});
    const auto graph = cayley_graph(pauli, pauli.generator_indices());
    const auto cycle = eulerian_cycle(graph, 0);
    expect(cycle.size() == 8, "Pauli cycle length != 8");
    std::set<std::size_t> used(cycle.begin(), cycle.end());
    expect(used.size() == 8, "Pauli cycle repeats an edge");
    std::size_t at = 0;
    for (std::size_t e : cycle) {
        expect(graph.edges[e].from == at, "Pauli cycle walk is not connected");
        at = graph.edges[e].to;
    }
    expect(at == 0, "Pauli cycle does not close");
    note << "Z2 cycle (gamma, gamma); Pauli cycle uses all 8 edges once";
}

void criterion_5_bounded_strength(std::ostream& note) {
    double worst_ratio = 0.0;
    for (auto kind : {PulseShapeKind::constant, PulseShapeKind::sine})
        for (double dt : {0.1, 1.0, 10.0}) {
            const EulerianSchedule z2(make_group({pauli_x()}), {1}, dt, kind);
            const auto pauli = make_group({pauli_x(), pauli_z()});
            const EulerianSchedule p4(pauli, pauli.generator_indices(), dt, kind);
            for (const auto* sched : {&z2, &p4}) {
                const double ratio = sched->max_amplitude() / (pi / dt);
                worst_ratio = std::max(worst_ratio, ratio);
                expect(ratio <= 1.0 + 1e-12, "amplitude exceeds pi/dt by factor " + num(ratio));
            }
        }
    static_assert(BBSchedule::impulsive, "bang-bang schedules must be flagged impulsive");
    static_assert(!EulerianSchedule::impulsive, "Eulerian schedules must not be impulsive");
    note << "max amplitude / (pi/dt) = " << num(worst_ratio) << "; BB flagged impulsive";
}

void criterion_6_spinboson_suppression(std::ostream& note) {
    const auto bath = default_bath();  // omega_max = 1
    const double t_star = 49.92;       // omega_max t ~ 50, common stroboscopic point
    const double free_c = free_coherence(bath, {t_star}).coherence[0];
    expect(free_c <= 0.5, "free coherence " + num(free_c) + " > 0.5");

    double prev = 0.0;
    double final_c = 0.0;
    for (int j = 0; j <= 6; ++j) {
        const double dt = 0.64 / static_cast<double>(1 << j);
        const int cycles = 39 * (1 << j);  // 2 dt cycles = t_star for every rung
        const double c = cp_coherence(bath, dt, cycles).coherence.back();
        expect(c >= prev - 1e-12,
               "coherence fell from " + num(prev) + " to " + num(c) + " at dt " + num(dt));
        prev = c;
        final_c = c;
    }
    expect(final_c >= 0.99, "coherence at dt*omega_max = 0.01 is " + num(final_c));
    note << "free " << num(free_c) << " -> CP(0.01/omega_max) " << num(final_c)
         << ", monotone over 6 halvings";
}

void criterion_7_fock_equivalence(std::ostream& note) {
    const BosonBath one({{1.0, 0.15}});
    const BosonBath two({{0.7, 0.1}, {1.0, 0.08}});
    double worst = 0.0;
    for (const BosonBath* bath : {&one, &two}) {
        // free evolution
        const double t_free = 2.6;
        const double engine_free = free_coherence(*bath, {t_free}).coherence[0];
        const double brute_free = fock_oracle(*bath, 8, {}, t_free);
        worst = std::max(worst, std::abs(engine_free - brute_free));
        // four CP cycles
        const double dt = 0.4;
        std::vector<double> pulses;
        for (int j = 1; j <= 8; ++j) pulses.push_back(dt * j);
        const double engine_cp = cp_coherence(*bath, dt, 4).coherence.back();
        const double brute_cp = fock_oracle(*bath, 8, pulses, 3.2);
        worst = std::max(worst, std::abs(engine_cp - brute_cp));
        // convergence stability: two independent starting cutoffs agree
        const double again = fock_oracle(*bath, 16, pulses, 3.2);
        expect(std::abs(again - brute_cp) <= 1e-8,
               "cutoff-doubling drift " + num(std::abs(again - brute_cp)));
    }
    expect(worst <= 1e-6, "worst engine-vs-Fock deviation " + num(worst));
    note << "worst deviation " << num(worst) << " over 1- and 2-mode baths, free and CP";
}

void criterion_8_rtn_statistics(std::ostream& note) {
    // single fluctuator: Lorentzian half-power point at gamma within 20%
    const double gamma = 1.0;
    const FluctuatorEnsemble single({{1.0, gamma}}, gamma, gamma, 1.0);
    const auto spec1 = estimate_psd(single, 327.68, 32768, 200, 501);
    double plateau = 0.0;
    int n_pl = 0;
    for (std::size_t j = 0; j < spec1.omega.size() && spec1.omega[j] < gamma / 10.0; ++j) {
        plateau += spec1.power[j];
        ++n_pl;
    }
    plateau /= std::max(1, n_pl);
    double half_point = 0.0;
    for (std::size_t j = 0; j < spec1.omega.size(); ++j) {
        double acc = 0.0;
        int cnt = 0;
        for (std::size_t i = j; i < spec1.omega.size() && spec1.omega[i] < spec1.omega[j] * 1.25;
             ++i) {
            acc += spec1.power[i];
            ++cnt;
        }
        if (cnt > 0 && acc / cnt < 0.5 * plateau) {
            half_point = spec1.omega[j];
            break;
        }
    }
    expect(std::abs(half_point - gamma) <= 0.2 * gamma,
           "half-power point " + num(half_point) + " vs gamma " + num(gamma));

    // 4-decade ensemble: log-log slope -1 +- 0.15 over [10 gamma_min, gamma_max/10]
    const auto ensemble = sample_ensemble(1e-2, 1e2, 10.0, 1.0, 502);
    const auto spec = estimate_psd(ensemble, 655.36, 65536, 240, 503);
    const double slope = fitted_loglog_slope(spec, 0.1, 10.0);
    expect(std::abs(slope + 1.0) <= 0.15, "slope " + num(slope));
    note << "half-power at " << num(half_point) << " (gamma 1), slope " << num(slope);
}

void criterion_9_single_rtn_oracle(std::ostream& note) {
    const double v = 1.0, gamma = 1.0;
    const FluctuatorEnsemble e({{v, gamma}}, gamma, gamma, 1.0);
    McOptions opt;
    opt.n_traj = 100000;
    opt.seed = 904;
    std::vector<double> times;
    for (int j = 1; j <= 20; ++j) times.push_back(0.4 * j);
    const auto mc = free_rtn_coherence(e, {}, times, opt);
    const auto ode = oracles::ode_free_coherence(v, gamma, times);
    double worst_sigma = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double se = std::max(mc.std_error[j + 1], 1e-9);
        worst_sigma = std::max(worst_sigma, std::abs(mc.coherence[j + 1] - ode[j]) / se);
    }
    expect(worst_sigma <= 3.0,
           "worst deviation " + num(worst_sigma) + " standard errors (limit 3)");
    note << "20 checkpoints, worst " << num(worst_sigma) << " sigma at 1e5 trajectories";
}

struct Fig3Outcome {
    double horizon6 = 0.0;
    double recovery = 0.0;
    double max_se = 0.0;
};

Fig3Outcome check_fig3_case(char id, const McOptions& base_opt) {
    const Fig3Case params = fig3_case(id);
    const auto ensemble =
        sample_ensemble(params.gamma_min, params.gamma_max, 10.0, params.mean_v, base_opt.seed);
    const double h6 = gaussian_horizon_estimate(ensemble, 0.6);
    // window: past the 0.6 crossing, and wide enough that even the coarsest
    // quoted spacing contributes a stroboscopic point
    const double window = std::max(1.15 * h6, 2.1 * params.dt_list.front());

    const auto result = fig3_experiment(id, {}, window, base_opt);
    const double horizon6 = result.free.first_crossing_below(0.6);

    Fig3Outcome out;
    out.horizon6 = horizon6;

    // every quoted spacing, coarsest to finest; tolerances from batch means
    for (const auto& s : result.controlled)
        for (std::size_t j = 0; j < s.size(); ++j) out.max_se = std::max(out.max_se, s.std_error[j]);
    expect(out.max_se <= 0.02, "stderr " + num(out.max_se) + " above 0.02");

    // 60% recovery at the smallest quoted spacing, at the first stroboscopic
    // point past the horizon
    const auto& finest = result.controlled.back();
    out.recovery = finest.at_or_after(horizon6);
    expect(out.recovery >= 0.6, std::string("case ") + id + ": coherence " +
                                    num(out.recovery) + " < 0.6 at the 0.6-horizon");

    // pointwise monotonicity across the quoted dt ladder at common times
    for (std::size_t a = 0; a + 1 < result.controlled.size(); ++a) {
        const auto& coarse = result.controlled[a];
        const auto& fine = result.controlled[a + 1];
        int compared = 0;
        for (std::size_t i = 1; i < coarse.size(); ++i) {
            for (std::size_t j = 1; j < fine.size(); ++j) {
                if (std::abs(fine.times[j] - coarse.times[i]) <=
                    1e-6 * std::max(1.0, coarse.times[i])) {
                    const double margin =
                        2.0 * std::sqrt(coarse.std_error[i] * coarse.std_error[i] +
                                        fine.std_error[j] * fine.std_error[j]);
                    expect(fine.coherence[j] >= coarse.coherence[i] - margin,
                           std::string("case ") + id + ": dt " + num(params.dt_list[a + 1]) +
                               " below dt " + num(params.dt_list[a]) + " at t " +
                               num(coarse.times[i]));
                    ++compared;
                }
            }
        }
        expect(compared > 0, "no common stroboscopic times to compare");
    }
    return out;
}

void criterion_10_fig3(std::ostream& note) {
    McOptions opt;
    opt.n_traj = 1600;  // stderr ~ 0.004, far under the 0.02 requirement
    opt.seed = 1001;
    const auto a = check_fig3_case('a', opt);
    const auto b = check_fig3_case('b', opt);
    const auto c = check_fig3_case('c', opt);
    note << "0.6-horizons a/b/c = " << num(a.horizon6) << "/" << num(b.horizon6) << "/"
         << num(c.horizon6) << "; recoveries " << num(a.recovery) << "/" << num(b.recovery)
         << "/" << num(c.recovery) << "; max stderr "
         << num(std::max({a.max_se, b.max_se, c.max_se}));
}

void criterion_11_eulerian_robustness(std::ostream& note) {
    const Fig3Case params = fig3_case('a');
    McOptions opt;
    opt.n_traj = 384;
    opt.seed = 1101;
    opt.pulse_error = 0.05;
    opt.checkpoint_stride = 1 << 20;  // final time only
    const auto ensemble =
        sample_ensemble(params.gamma_min, params.gamma_max, 10.0, params.mean_v, opt.seed);
    const double dt = 10.0;
    const int cycles =
        static_cast<int>(std::lround(gaussian_horizon_estimate(ensemble, 0.6) / (2.0 * dt)));

    const auto group = make_group({pauli_x()});
    const auto bb = controlled_coherence(ensemble, {}, bb_schedule(group, dt), cycles, opt);
    const EulerianSchedule esched(group, {1}, dt, PulseShapeKind::constant);
    const auto eu = controlled_coherence(ensemble, {}, esched, cycles, opt);

    const double se = 2.0 * std::sqrt(bb.std_error.back() * bb.std_error.back() +
                                      eu.std_error.back() * eu.std_error.back());
    expect(eu.coherence.back() >= bb.coherence.back() - se,
           "Eulerian " + num(eu.coherence.back()) + " vs BB " + num(bb.coherence.back()) +
               " - " + num(se));
    note << "matched T_c = " << num(2.0 * dt) << ", " << cycles << " cycles: Eulerian "
         << num(eu.coherence.back()) << " vs BB " << num(bb.coherence.back()) << " (2se "
         << num(se) << ")";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_12_determinism(std::ostream& note) {
    const fs::path dir = fs::temp_directory_path() / "decup_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "cfg.json";
    {
        std::ofstream out(cfg_path);
        out << R"({"kind":"one-over-f","name":"det","gamma_min":0.01,"gamma_max":100.0,)"
            << R"("n_d":10.0,"mean_v":0.1,"control":"bb","dt":0.05,"cycles":40,"n_traj":1000})";
    }
    auto run = [&](const std::string& args, const fs::path& out_dir) {
        fs::create_directories(out_dir);
        const std::string cmd = std::string(DECUP_CLI_PATH) + " " + args + " --out " +
                                out_dir.string() + " > /dev/null 2>&1";
        expect(std::system(cmd.c_str()) == 0, "CLI run failed: " + args);
    };
    run("--config " + cfg_path.string() + " --workers 1", dir / "w1");
    run("--config " + cfg_path.string() + " --workers 8", dir / "w8");
    const std::string csv1 = slurp(dir / "w1" / "det.csv");
    expect(!csv1.empty(), "no output written");
    expect(csv1 == slurp(dir / "w8" / "det.csv"), "workers 1 vs 8 differ");
    // re-run from the manifest
    run("--config " + (dir / "w1" / "det.manifest.json").string() + " --workers 8",
        dir / "rerun");
    expect(csv1 == slurp(dir / "rerun" / "det.csv"), "manifest re-run differs");
    note << "bytes identical across workers {1, 8} and a manifest re-run";
}

struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<void(std::ostream&)> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "CP group average of sigma_z vanishes", 1.0, criterion_1_cp_zero_average},
        {2, "Pauli-group averaging is universal on qubits", 1.0, criterion_2_universal_decoupling},
        {3, "Z2 Eulerian average of sigma_z vanishes, shape-independent", 5.0,
         criterion_3_eulerian_zero_average},
        {4, "Eulerian cycles: Z2 (gamma,gamma); Pauli graph 8 edges once", 1.0,
         criterion_4_eulerian_cycle},
        {5, "Eulerian amplitudes bounded by pi/dt; BB flagged impulsive", 1.0,
         criterion_5_bounded_strength},
        {6, "spin-boson CP suppression: monotone to >= 0.99 at dt = 0.01/omega_max", 10.0,
         criterion_6_spinboson_suppression},
        {7, "analytic engine matches truncated-Fock brute force to 1e-6", 60.0,
         criterion_7_fock_equivalence},
        {8, "RTN spectra: Lorentzian half-power and 1/f slope", 120.0, criterion_8_rtn_statistics},
        {9, "free RTN Monte Carlo matches the sign-conditioned ODE oracle", 120.0,
         criterion_9_single_rtn_oracle},
        {10, "1/f suppression: 60% recovery and dt-ladder monotonicity (cases a, b, c)", 600.0,
         criterion_10_fig3},
        {11, "Eulerian vs BB robustness under 5% flip-angle error", 300.0,
         criterion_11_eulerian_robustness},
        {12, "bit-identical reruns across worker counts and manifests", 300.0,
         criterion_12_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::ostringstream note;
        std::string error;
        try {
            c.run(note);
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (error.empty() && secs > c.budget_s) {
            std::ostringstream over;
            over << "runtime " << secs << " s exceeds budget " << c.budget_s << " s";
            error = over.str();
        }
        if (error.empty()) {
            std::printf("PASS  criterion %2d: %s  [%.2fs]  (%s)\n", c.id, c.title, secs,
                        note.str().c_str());
        } else {
            ++failures;
            std::printf("FAIL  criterion %2d: %s  [%.2fs]  %s\n", c.id, c.title, secs,
                        error.c_str());
        }
        std::fflush(stdout);
    }
    if (failures == 0)
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures;
}
