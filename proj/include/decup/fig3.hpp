#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "decup/oneoverf.hpp"

namespace decup {

// Spectral and control parameters of the three bundled 1/f suppression cases.
// All share gamma_max = 100 and a pure-dephasing qubit (Omega = 1, Delta = 0).
struct Fig3Case {
    char id = 'a';
    double gamma_min = 0.0, gamma_max = 0.0;
    double mean_v = 0.0;
    std::vector<double> dt_list;
};

inline Fig3Case fig3_case(char id) {
    switch (id) {
        case 'a': return {'a', 1e-4, 100.0, 1e-4, {1000.0, 100.0, 10.0}};
        case 'b': return {'b', 1e-6, 100.0, 1e-4, {1000.0, 100.0, 10.0}};
        case 'c': return {'c', 1e-4, 100.0, 1e-2, {10.0, 1.0, 0.1}};
        default: throw std::invalid_argument("fig3_case: case must be 'a', 'b' or 'c'");
    }
}

// Gaussian-approximation free-decay variance of the accumulated phase,
// Var = sum_k v_k^2 (2/gamma_k^2)(gamma_k t - 1 + e^{-gamma_k t}).
inline double gaussian_free_variance(const FluctuatorEnsemble& ensemble, double t) {
    double var = 0.0;
    for (const auto& f : ensemble.fluctuators()) {
        const double x = f.gamma * t;
        double tau;
        if (x < 1e-6) {
            tau = t * t * (1.0 - x / 3.0);
        } else {
            tau = (2.0 / (f.gamma * f.gamma)) * (x - 1.0 + std::exp(-x));
        }
        var += f.v * f.v * tau;
    }
    return var;
}

// time where the Gaussian estimate of the free coherence crosses `threshold`
inline double gaussian_horizon_estimate(const FluctuatorEnsemble& ensemble, double threshold) {
    const double target = 2.0 * std::log(1.0 / threshold);
    double hi = 1.0 / ensemble.gamma_max();
    int guard = 0;
    while (gaussian_free_variance(ensemble, hi) < target) {
        hi *= 2.0;
        if (++guard > 80)
            throw std::runtime_error("gaussian_horizon_estimate: coherence never decays");
    }
    double lo = hi / 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gaussian_free_variance(ensemble, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Fig3Result {
    Fig3Case params;
    FluctuatorEnsemble ensemble;
    double horizon = 0.0;  // end of the simulated window
    CoherenceSeries free;
    std::vector<CoherenceSeries> controlled;  // one per dt
};

// Free evolution plus one CP-controlled run per pulse spacing, on a shared
// ensemble.  With horizon <= 0 the window is set by the free curve's first
// crossing of 0.2, seeded by the Gaussian estimate and confirmed by a probe
// run.  Times are in units of 1/Omega.
inline Fig3Result fig3_experiment(char case_id, std::vector<double> dt_list = {},
                                  double horizon = 0.0, const McOptions& opt = {},
                                  double n_d = 10.0) {
    const Fig3Case base = fig3_case(case_id);
    Fig3Case params = base;
    if (!dt_list.empty()) params.dt_list = dt_list;

    FluctuatorEnsemble ensemble =
        sample_ensemble(params.gamma_min, params.gamma_max, n_d, params.mean_v, opt.seed);
    const QubitSpec qubit{0.0, 1.0, 0.0};

    double t_end = horizon;
    if (!(t_end > 0.0)) {
        double guess = 1.3 * gaussian_horizon_estimate(ensemble, 0.2);
        McOptions probe_opt = opt;
        probe_opt.n_traj = std::max(128, opt.n_traj / 8);
        for (int attempt = 0; attempt < 8; ++attempt) {
            std::vector<double> grid;
            for (int j = 1; j <= 32; ++j) grid.push_back(guess * j / 32.0);
            const auto probe = free_rtn_coherence(ensemble, qubit, grid, probe_opt);
            bool crossed = false;
            for (std::size_t j = 0; j < probe.size(); ++j)
                if (probe.coherence[j] < 0.2) {
                    t_end = 1.1 * probe.times[j];
                    crossed = true;
                    break;
                }
            if (crossed) break;
            guess *= 1.6;
        }
        if (!(t_end > 0.0))
            throw std::runtime_error("fig3_experiment: free coherence did not reach 0.2");
    }

    Fig3Result result{params, ensemble, t_end, {}, {}};

    std::vector<double> grid;
    const int n_points = 80;
    for (int j = 1; j <= n_points; ++j) grid.push_back(t_end * j / n_points);
    result.free = free_rtn_coherence(ensemble, qubit, grid, opt);
    result.free.id = "free";

    for (double dt : params.dt_list) {
        const auto group = make_group({pauli_x()});
        const auto schedule = bb_schedule(group, dt);
        const int n_cycles = std::max(1, static_cast<int>(std::ceil(t_end / (2.0 * dt))));
        McOptions run_opt = opt;
        run_opt.checkpoint_stride = std::max(1, n_cycles / 200);
        auto series = controlled_coherence(ensemble, qubit, schedule, n_cycles, run_opt);
        char label[64];
        std::snprintf(label, sizeof label, "cp_dt%g", dt);
        series.id = label;
        result.controlled.push_back(std::move(series));
    }
    return result;
}

}  // namespace decup
