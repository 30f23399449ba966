// decupsim: command-line front end for the decoupling simulator.
// Runs one experiment per invocation from a JSON config (or a built-in
// recipe), writes <name>.csv plus <name>.manifest.json, and exits 0 on
// success, 2 on validation errors, 3 on numerical non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "decup/averaging.hpp"
#include "decup/euler.hpp"
#include "decup/fig3.hpp"
#include "decup/fock.hpp"
#include "decup/group.hpp"
#include "decup/oneoverf.hpp"
#include "decup/spinboson.hpp"
#include "json.hpp"

using json = nlohmann::json;
using namespace decup;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Recipe {
    const char* name;
    const char* description;
    const char* config;
};

const Recipe kRecipes[] = {
    {"cp-spinboson",
     "CP pulse train on the 20-mode spin-boson bath, dt = 0.16, plus free decay",
     R"({"kind":"spin-boson","name":"cp-spinboson","experiment":"cp","bath":"default",
         "dt":0.16,"cycles":156,"pulse_error":0.0})"},
    {"eulerian-z2",
     "Z2 Eulerian schedule with a sine pulse shape: average Hamiltonian of sigma_z",
     R"({"kind":"avg-ham","name":"eulerian-z2","control":"eulerian","generators":["sigma_x"],
         "dt":1.0,"shape":"sine","hamiltonian":"sigma_z","substeps":64,"magnus":true})"},
    {"pauli-universal",
     "group average over the projective Pauli group: any qubit Hamiltonian -> (tr H/2) I",
     R"({"kind":"group-average","name":"pauli-universal","generators":["sigma_x","sigma_z"],
         "hamiltonian":[[1.2,[0.3,-0.5]],[[0.3,0.5],0.2]]})"},
    {"cp-average",
     "group average of sigma_z over {I, sigma_x}: exact zero",
     R"({"kind":"group-average","name":"cp-average","generators":["sigma_x"],
         "hamiltonian":"sigma_z"})"},
    {"fig3-a",
     "1/f suppression, gamma_min 1e-4, <v> 1e-4, dt {1000,100,10}",
     R"({"kind":"fig3","name":"fig3-a","case":"a","n_traj":2000,"n_d":10.0,"horizon":0.0,
         "dt_list":[]})"},
    {"fig3-b",
     "1/f suppression, gamma_min 1e-6, <v> 1e-4, dt {1000,100,10}",
     R"({"kind":"fig3","name":"fig3-b","case":"b","n_traj":2000,"n_d":10.0,"horizon":0.0,
         "dt_list":[]})"},
    {"fig3-c",
     "1/f suppression, gamma_min 1e-4, <v> 1e-2, dt {10,1,0.1}",
     R"({"kind":"fig3","name":"fig3-c","case":"c","n_traj":2000,"n_d":10.0,"horizon":0.0,
         "dt_list":[]})"},
    {"psd-1f",
     "averaged periodogram of a 4-decade fluctuator ensemble with slope fit",
     R"({"kind":"psd","name":"psd-1f","gamma_min":0.01,"gamma_max":100.0,"n_d":10.0,
         "mean_v":1.0,"t_max":655.36,"samples":65536,"realizations":200,
         "fit_band":[0.1,10.0]})"},
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// single source of truth for the accepted keys of every experiment kind
const std::map<std::string, std::pair<std::set<std::string>, std::set<std::string>>> kKindKeys = {
    {"group-average",
     {{"kind", "generators", "hamiltonian"}, {"name", "seed", "workers", "max_order"}}},
    {"eulerian-cycle", {{"kind", "generators", "dt"}, {"name", "seed", "workers", "shape"}}},
    {"avg-ham",
     {{"kind", "control", "generators", "dt", "hamiltonian"},
      {"name", "seed", "workers", "shape", "substeps", "magnus"}}},
    {"spin-boson",
     {{"kind", "bath", "experiment"},
      {"name", "seed", "workers", "times", "dt", "cycles", "pulse_error", "fock_check"}}},
    {"psd",
     {{"kind", "gamma_min", "gamma_max", "n_d", "mean_v", "t_max", "samples", "realizations"},
      {"name", "seed", "workers", "fit_band", "v_spread"}}},
    {"one-over-f",
     {{"kind", "gamma_min", "gamma_max", "n_d", "mean_v", "control"},
      {"name", "seed", "workers", "qubit", "dt", "cycles", "times", "n_traj", "pulse_error",
       "shape", "substeps", "stride", "v_spread"}}},
    {"fig3",
     {{"kind", "case"},
      {"name", "seed", "workers", "dt_list", "horizon", "n_traj", "n_d", "stride"}}},
};

std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

void require_keys(const json& cfg, const std::set<std::string>& required,
                  const std::set<std::string>& optional) {
    for (const auto& key : required)
        if (!cfg.contains(key))
            throw ValidationError("missing required key '" + key + "'");
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (!required.count(it.key()) && !optional.count(it.key()))
            throw ValidationError("unknown key '" + it.key() + "'");
}

void check_kind_keys(const json& cfg, const std::string& kind) {
    const auto it = kKindKeys.find(kind);
    if (it == kKindKeys.end()) throw ValidationError("unknown kind '" + kind + "'");
    require_keys(cfg, it->second.first, it->second.second);
}

double need_number(const json& cfg, const std::string& key) {
    if (!cfg.contains(key) || !cfg[key].is_number())
        throw ValidationError("key '" + key + "' must be a number");
    return cfg[key].get<double>();
}

double opt_number(const json& cfg, const std::string& key, double fallback) {
    if (!cfg.contains(key)) return fallback;
    if (!cfg[key].is_number()) throw ValidationError("key '" + key + "' must be a number");
    return cfg[key].get<double>();
}

int opt_int(const json& cfg, const std::string& key, int fallback) {
    if (!cfg.contains(key)) return fallback;
    if (!cfg[key].is_number_integer())
        throw ValidationError("key '" + key + "' must be an integer");
    return cfg[key].get<int>();
}

std::string opt_string(const json& cfg, const std::string& key, const std::string& fallback) {
    if (!cfg.contains(key)) return fallback;
    if (!cfg[key].is_string()) throw ValidationError("key '" + key + "' must be a string");
    return cfg[key].get<std::string>();
}

complex_t parse_entry(const json& e) {
    if (e.is_number()) return complex_t{e.get<double>(), 0.0};
    if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
        return complex_t{e[0].get<double>(), e[1].get<double>()};
    throw ValidationError("matrix entries must be numbers or [re, im] pairs");
}

Operator parse_operator(const json& spec) {
    if (spec.is_string()) {
        const std::string name = spec.get<std::string>();
        if (name == "sigma_x") return pauli_x();
        if (name == "sigma_y") return pauli_y();
        if (name == "sigma_z") return pauli_z();
        if (name == "identity") return Operator::identity(2);
        throw ValidationError("unknown operator name '" + name + "'");
    }
    if (!spec.is_array() || spec.empty())
        throw ValidationError("operator must be a name or a matrix");
    const std::size_t dim = spec.size();
    Operator m(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!spec[i].is_array() || spec[i].size() != dim)
            throw ValidationError("operator matrix must be square");
        for (std::size_t j = 0; j < dim; ++j) m(i, j) = parse_entry(spec[i][j]);
    }
    return m;
}

std::vector<Operator> parse_generators(const json& cfg) {
    if (!cfg.contains("generators") || !cfg["generators"].is_array())
        throw ValidationError("'generators' must be an array");
    std::vector<Operator> gens;
    for (const auto& g : cfg["generators"]) gens.push_back(parse_operator(g));
    return gens;
}

PulseShapeKind parse_shape(const std::string& s) {
    if (s == "constant") return PulseShapeKind::constant;
    if (s == "sine") return PulseShapeKind::sine;
    throw ValidationError("'shape' must be \"constant\" or \"sine\"");
}

BosonBath parse_bath(const json& cfg) {
    if (!cfg.contains("bath")) throw ValidationError("missing required key 'bath'");
    const json& b = cfg["bath"];
    if (b.is_string()) {
        if (b.get<std::string>() == "default") return default_bath();
        throw ValidationError("unknown bath name; use \"default\" or an object");
    }
    if (!b.is_object()) throw ValidationError("'bath' must be \"default\" or an object");
    if (b.contains("modes_explicit")) {
        require_keys(b, {"modes_explicit"}, {"temperature"});
        std::vector<BosonMode> modes;
        for (const auto& m : b["modes_explicit"]) {
            if (!m.is_array() || m.size() != 2)
                throw ValidationError("explicit modes must be [omega, g] pairs");
            modes.push_back({m[0].get<double>(), m[1].get<double>()});
        }
        return BosonBath(std::move(modes), opt_number(b, "temperature", 0.0));
    }
    require_keys(b, {"modes", "omega_max", "omega_cut", "coupling"}, {"temperature"});
    return ohmic_bath(static_cast<std::size_t>(opt_int(b, "modes", 20)),
                      need_number(b, "omega_max"), need_number(b, "omega_cut"),
                      need_number(b, "coupling"), opt_number(b, "temperature", 0.0));
}

struct Outputs {
    std::string csv_header;
    std::vector<std::string> csv_rows;
    json summary;  // extra manifest fields
};

void emit_series(Outputs& out, const CoherenceSeries& s) {
    for (std::size_t j = 0; j < s.size(); ++j)
        out.csv_rows.push_back(fmt12(s.times[j]) + "," + s.id + "," + fmt12(s.coherence[j]) +
                               "," + fmt12(s.std_error[j]));
}

void emit_operator(Outputs& out, const Operator& m, const std::string& tag) {
    for (std::size_t i = 0; i < m.dim(); ++i)
        for (std::size_t j = 0; j < m.dim(); ++j)
            out.csv_rows.push_back(tag + "," + std::to_string(i) + "," + std::to_string(j) +
                                   "," + fmt12(m(i, j).real()) + "," + fmt12(m(i, j).imag()));
}

// ---------------------------------------------------------------------------

Outputs run_group_average(const json& cfg) {
    check_kind_keys(cfg, "group-average");
    const auto gens = parse_generators(cfg);
    const Operator h = parse_operator(cfg["hamiltonian"]);
    if (!h.is_hermitian()) throw ValidationError("'hamiltonian' must be Hermitian");
    const auto group =
        make_group(gens, static_cast<std::size_t>(opt_int(cfg, "max_order", 64)));
    const Operator avg = group_average(group, h);

    Outputs out;
    out.csv_header = "part,i,j,re,im";
    emit_operator(out, avg, "h_bar0");
    out.summary["group_order"] = group.order();
    out.summary["result_norm"] = avg.frobenius_norm();
    return out;
}

Outputs run_eulerian_cycle(const json& cfg) {
    check_kind_keys(cfg, "eulerian-cycle");
    const auto gens = parse_generators(cfg);
    const double dt = need_number(cfg, "dt");
    const auto group = make_group(gens);
    const EulerianSchedule sched(group, group.generator_indices(), dt,
                                 parse_shape(opt_string(cfg, "shape", "constant")));

    Outputs out;
    out.csv_header = "step,from,to,generator";
    const auto& graph = sched.graph();
    for (std::size_t l = 0; l < sched.cycle_edges().size(); ++l) {
        const auto& e = graph.edges[sched.cycle_edges()[l]];
        out.csv_rows.push_back(std::to_string(l) + "," + std::to_string(e.from) + "," +
                               std::to_string(e.to) + "," + std::to_string(e.label));
    }
    out.summary["cycle_time"] = sched.cycle_time();
    out.summary["max_amplitude"] = sched.max_amplitude();
    out.summary["amplitude_bound"] = pi / dt;
    out.summary["bounded"] = sched.max_amplitude() <= pi / dt + 1e-12;
    return out;
}

Outputs run_avg_ham(const json& cfg) {
    check_kind_keys(cfg, "avg-ham");
    const auto gens = parse_generators(cfg);
    const double dt = need_number(cfg, "dt");
    const Operator h = parse_operator(cfg["hamiltonian"]);
    if (!h.is_hermitian()) throw ValidationError("'hamiltonian' must be Hermitian");
    const int substeps = opt_int(cfg, "substeps", 16);
    const bool magnus = cfg.contains("magnus") && cfg["magnus"].is_boolean()
                            ? cfg["magnus"].get<bool>()
                            : false;
    const std::string control = opt_string(cfg, "control", "bb");
    const auto group = make_group(gens);

    AverageResult result{Operator::zero(h.dim()), std::nullopt, 0.0, 0.0};
    if (control == "bb") {
        const auto sched = bb_schedule(group, dt);
        result = magnus ? average_hamiltonian_with_magnus(sched, h, substeps)
                        : average_hamiltonian(sched, h, substeps);
    } else if (control == "eulerian") {
        const EulerianSchedule sched(group, group.generator_indices(), dt,
                                     parse_shape(opt_string(cfg, "shape", "constant")));
        result = magnus ? average_hamiltonian_with_magnus(sched, h, substeps)
                        : average_hamiltonian(sched, h, substeps);
    } else {
        throw ValidationError("'control' must be \"bb\" or \"eulerian\"");
    }

    Outputs out;
    out.csv_header = "part,i,j,re,im";
    emit_operator(out, result.h_bar0, "h_bar0");
    if (result.h_bar1) emit_operator(out, *result.h_bar1, "h_bar1");
    out.summary["cycle_time"] = result.cycle_time;
    out.summary["integration_error"] = result.integration_error;
    out.summary["h_bar0_norm"] = result.h_bar0.frobenius_norm();
    return out;
}

Outputs run_spin_boson(const json& cfg) {
    check_kind_keys(cfg, "spin-boson");
    const BosonBath bath = parse_bath(cfg);
    const std::string experiment = opt_string(cfg, "experiment", "free");

    Outputs out;
    out.csv_header = "time,series_id,coherence,stderr";
    double t_last = 0.0;
    std::vector<double> check_pulses;
    double engine_last = 1.0;
    if (experiment == "free") {
        if (!cfg.contains("times") || !cfg["times"].is_array())
            throw ValidationError("free experiment needs a 'times' array");
        std::vector<double> times;
        for (const auto& t : cfg["times"]) times.push_back(t.get<double>());
        const auto series = free_coherence(bath, times);
        emit_series(out, series);
        if (!series.times.empty()) {
            t_last = series.times.back();
            engine_last = series.coherence.back();
        }
    } else if (experiment == "cp") {
        const double dt = need_number(cfg, "dt");
        const int cycles = opt_int(cfg, "cycles", 1);
        auto cp = cp_coherence(bath, dt, cycles, opt_number(cfg, "pulse_error", 0.0));
        cp.id = "cp";
        emit_series(out, cp);
        auto free = free_coherence(bath, cp.times);
        emit_series(out, free);
        out.summary["cycle_time"] = 2.0 * dt;
        t_last = cp.times.back();
        engine_last = cp.coherence.back();
        for (int j = 1; j <= 2 * cycles; ++j) check_pulses.push_back(dt * j);
    } else {
        throw ValidationError("'experiment' must be \"free\" or \"cp\"");
    }
    out.summary["omega_max"] = bath.omega_max();
    out.summary["tau_c"] = bath.tau_c();

    // optional brute-force verification of the final point, small baths only
    if (cfg.contains("fock_check")) {
        const json& fc = cfg["fock_check"];
        require_keys(fc, {}, {"cutoff", "tol"});
        FockOracleOptions opts;
        opts.tol = opt_number(fc, "tol", 1e-8);
        opts.pulse_error = opt_number(cfg, "pulse_error", 0.0);
        const double brute =
            fock_oracle(bath, static_cast<std::size_t>(opt_int(fc, "cutoff", 8)), check_pulses,
                        t_last, opts);
        out.summary["fock_check"] = {{"time", t_last},
                                     {"engine", engine_last},
                                     {"oracle", brute},
                                     {"abs_diff", std::abs(brute - engine_last)}};
    }
    return out;
}

Outputs run_psd(const json& cfg, std::uint64_t seed, int workers) {
    check_kind_keys(cfg, "psd");
    const auto ensemble =
        sample_ensemble(need_number(cfg, "gamma_min"), need_number(cfg, "gamma_max"),
                        need_number(cfg, "n_d"), need_number(cfg, "mean_v"), seed,
                        opt_number(cfg, "v_spread", 0.0));
    const auto spec = estimate_psd(ensemble, need_number(cfg, "t_max"),
                                   static_cast<std::size_t>(opt_int(cfg, "samples", 65536)),
                                   opt_int(cfg, "realizations", 100), seed, workers);

    Outputs out;
    out.csv_header = "omega,power";
    for (std::size_t j = 0; j < spec.omega.size(); ++j)
        out.csv_rows.push_back(fmt12(spec.omega[j]) + "," + fmt12(spec.power[j]));
    out.summary["n_fluctuators"] = ensemble.size();
    if (!spec.warning.empty()) out.summary["warning"] = spec.warning;
    if (cfg.contains("fit_band")) {
        const auto& band = cfg["fit_band"];
        if (!band.is_array() || band.size() != 2)
            throw ValidationError("'fit_band' must be [omega_lo, omega_hi]");
        out.summary["fitted_slope"] =
            fitted_loglog_slope(spec, band[0].get<double>(), band[1].get<double>());
    }
    return out;
}

Outputs run_one_over_f(const json& cfg, std::uint64_t seed, int workers) {
    check_kind_keys(cfg, "one-over-f");
    const auto ensemble =
        sample_ensemble(need_number(cfg, "gamma_min"), need_number(cfg, "gamma_max"),
                        need_number(cfg, "n_d"), need_number(cfg, "mean_v"), seed,
                        opt_number(cfg, "v_spread", 0.0));
    QubitSpec qubit;
    if (cfg.contains("qubit")) {
        require_keys(cfg["qubit"], {}, {"omega", "delta"});
        qubit.omega = opt_number(cfg["qubit"], "omega", 0.0);
        qubit.delta = opt_number(cfg["qubit"], "delta", 0.0);
    }
    McOptions opt;
    opt.n_traj = opt_int(cfg, "n_traj", 1000);
    opt.seed = seed;
    opt.workers = workers;
    opt.pulse_error = opt_number(cfg, "pulse_error", 0.0);
    opt.substeps = opt_int(cfg, "substeps", 8);
    opt.checkpoint_stride = opt_int(cfg, "stride", 1);

    const std::string control = cfg["control"].get<std::string>();
    Outputs out;
    out.csv_header = "time,series_id,coherence,stderr";
    if (control == "none") {
        if (!cfg.contains("times") || !cfg["times"].is_array())
            throw ValidationError("control \"none\" needs a 'times' array");
        std::vector<double> times;
        for (const auto& t : cfg["times"]) times.push_back(t.get<double>());
        emit_series(out, free_rtn_coherence(ensemble, qubit, times, opt));
    } else if (control == "bb") {
        const auto sched = bb_schedule(make_group({pauli_x()}), need_number(cfg, "dt"));
        emit_series(out,
                    controlled_coherence(ensemble, qubit, sched, opt_int(cfg, "cycles", 1), opt));
    } else if (control == "eulerian") {
        const EulerianSchedule sched(make_group({pauli_x()}), {1}, need_number(cfg, "dt"),
                                     parse_shape(opt_string(cfg, "shape", "constant")));
        emit_series(out,
                    controlled_coherence(ensemble, qubit, sched, opt_int(cfg, "cycles", 1), opt));
    } else {
        throw ValidationError("'control' must be \"none\", \"bb\" or \"eulerian\"");
    }
    out.summary["n_fluctuators"] = ensemble.size();
    return out;
}

Outputs run_fig3(const json& cfg, std::uint64_t seed, int workers) {
    check_kind_keys(cfg, "fig3");
    const std::string case_name = cfg["case"].get<std::string>();
    if (case_name.size() != 1) throw ValidationError("'case' must be \"a\", \"b\" or \"c\"");
    std::vector<double> dt_list;
    if (cfg.contains("dt_list"))
        for (const auto& d : cfg["dt_list"]) dt_list.push_back(d.get<double>());

    McOptions opt;
    opt.n_traj = opt_int(cfg, "n_traj", 2000);
    opt.seed = seed;
    opt.workers = workers;
    const auto result = fig3_experiment(case_name[0], dt_list, opt_number(cfg, "horizon", 0.0),
                                        opt, opt_number(cfg, "n_d", 10.0));

    Outputs out;
    out.csv_header = "time,series_id,coherence,stderr";
    emit_series(out, result.free);
    for (const auto& s : result.controlled) emit_series(out, s);
    out.summary["horizon"] = result.horizon;
    out.summary["gamma_min"] = result.params.gamma_min;
    out.summary["gamma_max"] = result.params.gamma_max;
    out.summary["mean_v"] = result.params.mean_v;
    out.summary["n_fluctuators"] = result.ensemble.size();
    return out;
}

// key and cheap semantic checks without running the experiment
void validate_config(const json& cfg) {
    if (!cfg.contains("kind") || !cfg["kind"].is_string())
        throw ValidationError("config needs a string 'kind'");
    const std::string kind = cfg["kind"].get<std::string>();
    check_kind_keys(cfg, kind);

    if (cfg.contains("generators")) parse_generators(cfg);
    if (cfg.contains("hamiltonian")) {
        const Operator h = parse_operator(cfg["hamiltonian"]);
        if (!h.is_hermitian()) throw ValidationError("'hamiltonian' must be Hermitian");
    }
    if (cfg.contains("shape")) parse_shape(cfg["shape"].get<std::string>());
    if (kind == "spin-boson") parse_bath(cfg);
    if (kind == "avg-ham") {
        const std::string control = opt_string(cfg, "control", "bb");
        if (control != "bb" && control != "eulerian")
            throw ValidationError("'control' must be \"bb\" or \"eulerian\"");
    }
    if (kind == "one-over-f") {
        const std::string control = cfg["control"].get<std::string>();
        if (control != "none" && control != "bb" && control != "eulerian")
            throw ValidationError("'control' must be \"none\", \"bb\" or \"eulerian\"");
        if (control == "none" && !cfg.contains("times"))
            throw ValidationError("control \"none\" needs a 'times' array");
        if (control != "none" && !cfg.contains("dt"))
            throw ValidationError("controlled runs need 'dt'");
    }
    if (kind == "fig3") {
        const std::string c = cfg["case"].get<std::string>();
        if (c != "a" && c != "b" && c != "c")
            throw ValidationError("'case' must be \"a\", \"b\" or \"c\"");
    }
    if (kind == "psd") {
        const auto n = static_cast<std::size_t>(need_number(cfg, "samples"));
        if (n < 2 || (n & (n - 1)) != 0)
            throw ValidationError("'samples' must be a power of two");
    }
    for (const char* key : {"dt", "t_max", "gamma_min", "n_d", "mean_v"})
        if (cfg.contains(key) && !(need_number(cfg, key) > 0.0))
            throw ValidationError(std::string("'") + key + "' must be positive");
}

// ---------------------------------------------------------------------------

json apply_overrides(json cfg, const std::vector<std::string>& sets,
                     std::optional<std::uint64_t> seed, std::optional<int> workers) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError("--set expects key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::parse_error&) {
            parsed = value;  // plain string
        }
        cfg[key] = parsed;
    }
    if (seed) cfg["seed"] = *seed;
    if (workers) cfg["workers"] = *workers;
    return cfg;
}

int run_config(json cfg, const std::string& out_dir) {
    if (!cfg.contains("kind") || !cfg["kind"].is_string())
        throw ValidationError("config needs a string 'kind'");
    const std::string kind = cfg["kind"].get<std::string>();
    const std::string name = opt_string(cfg, "name", kind);
    std::uint64_t seed = 1;
    if (cfg.contains("seed")) {
        if (!cfg["seed"].is_number_unsigned() && !cfg["seed"].is_number_integer())
            throw ValidationError("'seed' must be an integer");
        seed = cfg["seed"].get<std::uint64_t>();
    }
    const int workers = opt_int(cfg, "workers", 0);

    Outputs out;
    if (kind == "group-average") out = run_group_average(cfg);
    else if (kind == "eulerian-cycle") out = run_eulerian_cycle(cfg);
    else if (kind == "avg-ham") out = run_avg_ham(cfg);
    else if (kind == "spin-boson") out = run_spin_boson(cfg);
    else if (kind == "psd") out = run_psd(cfg, seed, workers);
    else if (kind == "one-over-f") out = run_one_over_f(cfg, seed, workers);
    else if (kind == "fig3") out = run_fig3(cfg, seed, workers);
    else throw ValidationError("unknown kind '" + kind + "'");

    std::filesystem::create_directories(out_dir);
    const auto csv_path = std::filesystem::path(out_dir) / (name + ".csv");
    {
        std::ofstream csv(csv_path);
        if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
        csv << out.csv_header << "\n";
        for (const auto& row : out.csv_rows) csv << row << "\n";
    }

    json manifest;
    cfg["seed"] = seed;
    manifest["name"] = name;
    manifest["kind"] = kind;
    manifest["config"] = cfg;
    manifest["seed"] = seed;
    manifest["workers"] = workers;
    manifest["versions"] = {{"decupsim", kVersion}, {"manifest_format", 1}};
    manifest["outputs"] = {name + ".csv"};
    manifest["summary"] = out.summary;
    const auto manifest_path = std::filesystem::path(out_dir) / (name + ".manifest.json");
    std::ofstream mf(manifest_path);
    mf << manifest.dump(2) << "\n";

    if (out.summary.contains("result_norm"))
        std::cout << "result_norm " << fmt12(out.summary["result_norm"].get<double>()) << "\n";
    std::cout << "wrote " << csv_path.string() << "\n";
    return 0;
}

void list_recipes() {
    std::cout << "built-in recipes:\n";
    for (const auto& r : kRecipes) std::cout << "  " << r.name << "  -  " << r.description << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decupsim: dynamical decoupling simulator"};
    std::string config_path, recipe, out_dir = ".";
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool do_list = false;
    bool validate_only = false;

    app.add_option("--config", config_path, "JSON experiment config (or a manifest)");
    app.add_option("--recipe", recipe, "built-in recipe name");
    app.add_option("--set", sets, "override a top-level config key (key=value, repeatable)");
    app.add_option("--seed", seed, "random seed override");
    app.add_option("--workers", workers, "worker thread count (default: DECUPSIM_WORKERS)");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--list-recipes", do_list, "print the built-in recipes and exit");
    app.add_flag("--validate", validate_only, "check the config and exit without running");

    CLI11_PARSE(app, argc, argv);

    try {
        if (do_list) {
            list_recipes();
            return 0;
        }
        json cfg;
        if (!recipe.empty()) {
            const Recipe* found = nullptr;
            for (const auto& r : kRecipes)
                if (recipe == r.name) found = &r;
            if (!found) throw ValidationError("unknown recipe '" + recipe + "'");
            cfg = json::parse(found->config);
        } else if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ValidationError("cannot read config file '" + config_path + "'");
            cfg = json::parse(in);
            // a manifest embeds the resolved config; accept it directly
            if (cfg.contains("config") && cfg["config"].is_object()) cfg = cfg["config"];
        } else {
            throw ValidationError("need --config, --recipe, or --list-recipes");
        }
        cfg = apply_overrides(std::move(cfg), sets, seed, workers);
        if (validate_only) {
            validate_config(cfg);
            std::cout << "config is valid\n";
            return 0;
        }
        return run_config(std::move(cfg), out_dir);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NonConvergence& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
