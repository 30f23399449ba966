#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "decup/euler.hpp"
#include "decup/group.hpp"
#include "decup/parallel.hpp"
#include "decup/rng.hpp"
#include "decup/series.hpp"
#include "decup/spinboson.hpp"

namespace decup {

struct Fluctuator {
    double v = 0.0;      // coupling amplitude; the signal switches between +-v/2
    double gamma = 0.0;  // total switching (event) rate
};

class FluctuatorEnsemble {
public:
    FluctuatorEnsemble(std::vector<Fluctuator> fluctuators, double gamma_min, double gamma_max,
                       double n_d)
        : fluctuators_(std::move(fluctuators)),
          gamma_min_(gamma_min),
          gamma_max_(gamma_max),
          n_d_(n_d) {
        if (!(gamma_min >= 0.0) || !(gamma_max >= gamma_min))
            throw std::invalid_argument("FluctuatorEnsemble: bad rate bounds");
        for (const auto& f : fluctuators_)
            if (f.gamma < gamma_min * (1.0 - 1e-12) || f.gamma > gamma_max * (1.0 + 1e-12))
                throw std::invalid_argument("FluctuatorEnsemble: rate outside [gamma_min, gamma_max]");
    }

    const std::vector<Fluctuator>& fluctuators() const { return fluctuators_; }
    std::size_t size() const { return fluctuators_.size(); }
    double gamma_min() const { return gamma_min_; }
    double gamma_max() const { return gamma_max_; }
    double n_d() const { return n_d_; }

    double mean_v() const {
        double s = 0.0;
        for (const auto& f : fluctuators_) s += f.v;
        return fluctuators_.empty() ? 0.0 : s / static_cast<double>(fluctuators_.size());
    }

private:
    std::vector<Fluctuator> fluctuators_;
    double gamma_min_, gamma_max_, n_d_;
};

// M = round(n_d log10(gamma_max/gamma_min)) fluctuators with log-uniform rates,
// P(gamma) = 1 / (gamma ln(gamma_max/gamma_min)); couplings at mean_v with an
// optional uniform relative spread.
inline FluctuatorEnsemble sample_ensemble(double gamma_min, double gamma_max, double n_d,
                                          double mean_v, std::uint64_t seed,
                                          double v_spread = 0.0) {
    if (!(gamma_min > 0.0) || !(gamma_max > gamma_min))
        throw std::invalid_argument("sample_ensemble: need 0 < gamma_min < gamma_max");
    if (!(n_d > 0.0)) throw std::invalid_argument("sample_ensemble: n_d must be > 0");
    if (v_spread < 0.0 || v_spread > 1.0)
        throw std::invalid_argument("sample_ensemble: v_spread must be in [0, 1]");
    const double decades = std::log10(gamma_max / gamma_min);
    // at least one fluctuator even for a degenerate rate range
    const auto m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(n_d * decades)));

    Rng rng = Rng::for_stream(seed, 0xE5ULL << 56);
    const double span = std::log(gamma_max / gamma_min);
    std::vector<Fluctuator> fl;
    fl.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double gamma = gamma_min * std::exp(rng.uniform(0.0, 1.0) * span);
        const double v = mean_v * (1.0 + v_spread * rng.uniform(-1.0, 1.0));
        fl.push_back({v, std::min(std::max(gamma, gamma_min), gamma_max)});
    }
    return FluctuatorEnsemble(std::move(fl), gamma_min, gamma_max, n_d);
}

// ---------------------------------------------------------------------------
// Telegraph processes.  Events arrive as a Poisson stream of rate gamma and
// resample the sign fairly, i.e. gamma/2 per direction; the autocorrelation is
// (v^2/4) exp(-gamma |t|) and the Lorentzian width equals gamma.
// ---------------------------------------------------------------------------

namespace detail {

// streams one fluctuator's process; the draw order (initial sign, then one
// gap + one sign per event) is the determinism contract for a (seed, stream)
class FluctuatorWalker {
public:
    FluctuatorWalker(Rng rng, double gamma) : rng_(rng), gamma_(gamma) {
        sign_ = rng_.sign();
        next_ = gamma_ > 0.0 ? rng_.exponential(gamma_) : std::numeric_limits<double>::infinity();
    }

    int sign() const { return sign_; }
    double next_event() const { return next_; }

    void advance() {
        sign_ = rng_.sign();
        next_ += rng_.exponential(gamma_);
    }

private:
    Rng rng_;
    double gamma_;
    int sign_;
    double next_;
};

inline Rng stream_rng(std::uint64_t seed, std::uint64_t trajectory, std::uint64_t fluctuator) {
    return Rng::for_stream(seed, (trajectory << 24) ^ fluctuator ^ 0x0F00000000000000ULL);
}

}  // namespace detail

struct FluctuatorTrajectory {
    double v = 0.0;
    int initial_sign = +1;
    std::vector<double> switch_times;   // Poisson event times in [0, t_max]
    std::vector<std::int8_t> signs;     // sign after each event

    int sign_at(double t) const {
        // last event at or before t
        std::size_t lo = 0, hi = switch_times.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (switch_times[mid] <= t) lo = mid + 1;
            else hi = mid;
        }
        return lo == 0 ? initial_sign : signs[lo - 1];
    }

    double value(double t) const { return 0.5 * v * sign_at(t); }
};

struct RTNTrajectory {
    double t_max = 0.0;
    std::vector<FluctuatorTrajectory> fluctuators;

    double total(double t) const {
        double s = 0.0;
        for (const auto& f : fluctuators) s += f.value(t);
        return s;
    }
};

inline RTNTrajectory sample_trajectory(const FluctuatorEnsemble& ensemble, double t_max,
                                       std::uint64_t seed, std::uint64_t trajectory_index = 0) {
    if (!(t_max > 0.0)) throw std::invalid_argument("sample_trajectory: t_max must be > 0");
    RTNTrajectory traj;
    traj.t_max = t_max;
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
        const auto& f = ensemble.fluctuators()[k];
        detail::FluctuatorWalker w(detail::stream_rng(seed, trajectory_index, k), f.gamma);
        FluctuatorTrajectory ft;
        ft.v = f.v;
        ft.initial_sign = w.sign();
        while (w.next_event() <= t_max) {
            ft.switch_times.push_back(w.next_event());
            w.advance();
            ft.signs.push_back(static_cast<std::int8_t>(w.sign()));
        }
        traj.fluctuators.push_back(std::move(ft));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Spectral estimation: averaged periodogram of Xi(t) on a uniform grid.
// Two-sided convention in angular frequency, where a single fluctuator gives
// S(omega) = (v^2/4) 2 gamma / (gamma^2 + omega^2).
// ---------------------------------------------------------------------------

struct Spectrum {
    std::vector<double> omega;  // 2 pi j / t_max, j = 1 .. n/2
    std::vector<double> power;
    std::string warning;        // set when the record is too short for gamma_min
};

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

inline Spectrum estimate_psd(const FluctuatorEnsemble& ensemble, double t_max,
                             std::size_t n_samples, int n_realizations, std::uint64_t seed,
                             int workers = 0) {
    if (!(t_max > 0.0) || n_realizations < 1)
        throw std::invalid_argument("estimate_psd: bad parameters");
    if (n_samples < 2 || (n_samples & (n_samples - 1)) != 0)
        throw std::invalid_argument("estimate_psd: n_samples must be a power of two");

    const double dt = t_max / static_cast<double>(n_samples);
    const std::size_t n_bins = n_samples / 2;

    const std::size_t n_batches = std::min<std::size_t>(n_realizations, 32);
    auto batch_power = run_batches<std::vector<double>>(
        n_batches, workers, [&](std::size_t b) {
            const auto [lo, hi] = batch_range(n_realizations, n_batches, b);
            std::vector<double> acc(n_bins, 0.0);
            std::vector<std::complex<double>> grid(n_samples);
            for (std::size_t r = lo; r < hi; ++r) {
                std::fill(grid.begin(), grid.end(), std::complex<double>{0.0, 0.0});
                for (std::size_t k = 0; k < ensemble.size(); ++k) {
                    const auto& f = ensemble.fluctuators()[k];
                    detail::FluctuatorWalker w(detail::stream_rng(seed, r, k), f.gamma);
                    const double half_v = 0.5 * f.v;
                    std::size_t i = 0;
                    while (i < n_samples) {
                        // fill forward with the current sign until the next event
                        const double stop = std::min(w.next_event(), t_max);
                        auto i_stop = static_cast<std::size_t>(stop / dt);
                        if (i_stop >= n_samples) i_stop = n_samples;
                        const double x = w.sign() * half_v;
                        for (; i < i_stop; ++i) grid[i] += x;
                        if (w.next_event() > t_max) break;
                        w.advance();
                    }
                }
                detail::fft_radix2(grid);
                for (std::size_t j = 0; j < n_bins; ++j)
                    acc[j] += std::norm(grid[j + 1]) * dt * dt / t_max;
            }
            return acc;
        });

    Spectrum spec;
    spec.omega.reserve(n_bins);
    spec.power.assign(n_bins, 0.0);
    for (std::size_t j = 0; j < n_bins; ++j)
        spec.omega.push_back(2.0 * pi * static_cast<double>(j + 1) / t_max);
    for (const auto& acc : batch_power)
        for (std::size_t j = 0; j < n_bins; ++j) spec.power[j] += acc[j];
    for (auto& p : spec.power) p /= static_cast<double>(n_realizations);

    if (ensemble.gamma_min() > 0.0 && t_max * ensemble.gamma_min() < 1.0)
        spec.warning = "record shorter than 1/gamma_min; lowest decades are unresolved";
    return spec;
}

// least-squares slope of log(power) vs log(omega) over [omega_lo, omega_hi],
// computed on log-spaced bin averages so high frequencies do not dominate
inline double fitted_loglog_slope(const Spectrum& spec, double omega_lo, double omega_hi,
                                  int n_bins = 24) {
    if (!(omega_lo > 0.0) || !(omega_hi > omega_lo))
        throw std::invalid_argument("fitted_loglog_slope: bad band");
    const double lo = std::log(omega_lo), hi = std::log(omega_hi);
    std::vector<double> sum(n_bins, 0.0);
    std::vector<int> count(n_bins, 0);
    for (std::size_t j = 0; j < spec.omega.size(); ++j) {
        const double lw = std::log(spec.omega[j]);
        if (lw < lo || lw >= hi) continue;
        const int b = std::min(n_bins - 1, static_cast<int>((lw - lo) / (hi - lo) * n_bins));
        sum[b] += spec.power[j];
        ++count[b];
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (int b = 0; b < n_bins; ++b) {
        if (count[b] == 0 || sum[b] <= 0.0) continue;
        const double x = lo + (b + 0.5) * (hi - lo) / n_bins;
        const double y = std::log(sum[b] / count[b]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) throw std::invalid_argument("fitted_loglog_slope: too few populated bins");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Monte Carlo qubit dephasing under H(t) = Omega sz + Delta sx + Xi(t) sz plus
// control, starting from (|0> + |1>)/sqrt(2).
//
// Pure dephasing with sign-toggling control reduces to a phase integral per
// trajectory, phi = 2 int eps_c(s) Xi(s) ds, evaluated in closed form between
// events.  Anything else (Delta != 0, bounded-strength drive, flip-angle
// errors) runs the exact piecewise-constant 2x2 propagator with segments at
// every switch, pulse, and subinterval boundary.
// ---------------------------------------------------------------------------

struct McOptions {
    int n_traj = 1000;
    std::uint64_t seed = 1;
    int workers = 0;            // 0: DECUPSIM_WORKERS or hardware
    int n_batches = 64;
    int substeps = 8;           // used inside smooth (sine) Eulerian subintervals
    int checkpoint_stride = 1;  // record every k-th cycle
    double pulse_error = 0.0;   // systematic flip-angle / amplitude error
    bool force_matrix = false;  // skip the phase shortcut (cross-validation)
};

namespace detail {

// E(t) = int_0^t eps_c for a sign-toggling cycle; cycle == 0 means free evolution
struct ToggleIntegral {
    double cycle = 0.0;
    double dt = 0.0;
    double e_cycle = 0.0;
    std::vector<double> prefix;  // E at subinterval starts within a cycle
    std::vector<double> sign;    // eps_c per subinterval

    double eval(double t) const {
        if (cycle <= 0.0) return t;
        const double n = std::floor(t / cycle);
        double tau = t - n * cycle;
        if (tau < 0.0) tau = 0.0;
        auto l = static_cast<std::size_t>(tau / dt);
        if (l >= sign.size()) l = sign.size() - 1;
        return n * e_cycle + prefix[l] + sign[l] * (tau - static_cast<double>(l) * dt);
    }
};

// sigma_z toggling sign of a group element, or 0 when it is not +-sigma_z
inline double sigma_z_toggle(const Operator& g) {
    const Operator t = g.dagger() * pauli_z() * g;
    if (frobenius_distance(t, pauli_z()) < 1e-9) return +1.0;
    if (frobenius_distance(t, -1.0 * pauli_z()) < 1e-9) return -1.0;
    return 0.0;
}

struct Pulse2 {
    double time = 0.0;  // offset within the cycle, in (0, cycle]
    std::array<complex_t, 4> u{};  // row-major 2x2
};

struct FieldSegment {
    double start = 0.0, end = 0.0;
    bool constant = true;
    std::array<double, 3> b{};                              // sigma_{x,y,z} components
    std::function<std::array<double, 3>(double)> profile;   // used when !constant
};

// one control cycle for the exact 2x2 walker
struct CycleProgram {
    double cycle = 0.0;  // 0 => free evolution
    std::vector<Pulse2> pulses;
    std::vector<FieldSegment> fields;
};

inline std::array<double, 3> pauli_components(const Operator& h) {
    return {0.5 * std::real(h(0, 1) + h(1, 0)), 0.5 * std::real((h(0, 1) - h(1, 0)) / complex_t{0.0, 1.0}),
            0.5 * std::real(h(0, 0) - h(1, 1))};
}

inline std::array<complex_t, 4> to_array2(const Operator& u) {
    return {u(0, 0), u(0, 1), u(1, 0), u(1, 1)};
}

// exp(-i (b . sigma) tau) applied to psi
inline void step_state(complex_t& p0, complex_t& p1, double bx, double by, double bz,
                       double tau) {
    const double r = std::sqrt(bx * bx + by * by + bz * bz);
    const double angle = r * tau;
    const double c = std::cos(angle);
    const double s = r > 0.0 ? std::sin(angle) / r : tau;  // sin(r tau)/r -> tau as r -> 0
    const complex_t a0 = p0, a1 = p1;
    const complex_t mis{0.0, -s};
    p0 = c * a0 + mis * (bz * a0 + complex_t{bx, -by} * a1);
    p1 = c * a1 + mis * (complex_t{bx, by} * a0 - bz * a1);
}

inline void apply_pulse(complex_t& p0, complex_t& p1, const std::array<complex_t, 4>& u) {
    const complex_t a0 = p0, a1 = p1;
    p0 = u[0] * a0 + u[1] * a1;
    p1 = u[2] * a0 + u[3] * a1;
}

struct BatchMoments {
    std::vector<std::complex<double>> sum;  // per checkpoint
    std::size_t count = 0;

    BatchMoments() = default;
    explicit BatchMoments(std::size_t n_checkpoints)
        : sum(n_checkpoints, std::complex<double>{0.0, 0.0}) {}
};

inline CoherenceSeries reduce_batches(const std::vector<double>& times,
                                      const std::vector<BatchMoments>& batches,
                                      std::size_t n_traj, const std::string& id) {
    CoherenceSeries series;
    series.id = id;
    series.push(0.0, 1.0, 0.0);
    const std::size_t n_cp = times.size();
    for (std::size_t j = 0; j < n_cp; ++j) {
        std::complex<double> total{0.0, 0.0};
        for (const auto& b : batches) total += b.sum[j];
        const std::complex<double> mean = total / static_cast<double>(n_traj);
        const double mag = std::abs(mean);
        const std::complex<double> dir = mag > 1e-14 ? mean / mag : std::complex<double>{1.0, 0.0};

        // batch-means standard error, projected on the mean direction
        double var = 0.0;
        std::size_t n_eff = 0;
        for (const auto& b : batches) {
            if (b.count == 0) continue;
            const std::complex<double> bm = b.sum[j] / static_cast<double>(b.count);
            const double p = std::real(bm * std::conj(dir));
            var += (p - mag) * (p - mag);
            ++n_eff;
        }
        const double se = n_eff > 1 ? std::sqrt(var / static_cast<double>(n_eff) /
                                                static_cast<double>(n_eff - 1))
                                    : 0.0;
        series.push(times[j], mag, se);
    }
    return series;
}

// fast path: per-trajectory phase accumulation with closed-form E(t)
inline std::vector<BatchMoments> run_phase_path(const FluctuatorEnsemble& ensemble,
                                                const ToggleIntegral& toggle,
                                                const std::vector<double>& times,
                                                const McOptions& opt) {
    const std::size_t n_cp = times.size();
    const auto n_traj = static_cast<std::size_t>(opt.n_traj);
    const std::size_t n_batches = std::min<std::size_t>(opt.n_batches, n_traj);
    return run_batches<BatchMoments>(n_batches, opt.workers, [&](std::size_t b) {
        const auto [lo, hi] = batch_range(n_traj, n_batches, b);
        BatchMoments moments(n_cp);
        std::vector<double> phase(n_cp);
        for (std::size_t tr = lo; tr < hi; ++tr) {
            std::fill(phase.begin(), phase.end(), 0.0);
            for (std::size_t k = 0; k < ensemble.size(); ++k) {
                const auto& f = ensemble.fluctuators()[k];
                FluctuatorWalker w(stream_rng(opt.seed, tr, k), f.gamma);
                double integral = 0.0;  // int eps_c * sign up to the last event
                double e_pos = 0.0;     // E at the last event
                for (std::size_t j = 0; j < n_cp; ++j) {
                    const double tj = times[j];
                    while (w.next_event() < tj) {
                        const double e_ev = toggle.eval(w.next_event());
                        integral += w.sign() * (e_ev - e_pos);
                        e_pos = e_ev;
                        w.advance();
                    }
                    const double at_cp = integral + w.sign() * (toggle.eval(tj) - e_pos);
                    phase[j] += f.v * at_cp;
                }
            }
            for (std::size_t j = 0; j < n_cp; ++j)
                moments.sum[j] += std::complex<double>{std::cos(phase[j]), -std::sin(phase[j])};
        }
        moments.count = hi - lo;
        return moments;
    });
}

// exact 2x2 path: merged event/pulse/boundary walk per trajectory
inline std::vector<BatchMoments> run_matrix_path(const FluctuatorEnsemble& ensemble,
                                                 const QubitSpec& qubit,
                                                 const CycleProgram& program,
                                                 const std::vector<double>& times,
                                                 const McOptions& opt) {
    const std::size_t n_cp = times.size();
    const auto n_traj = static_cast<std::size_t>(opt.n_traj);
    const std::size_t n_batches = std::min<std::size_t>(opt.n_batches, n_traj);
    const double t_end = times.back();

    // within-cycle timeline: segment boundaries and pulses
    struct Mark {
        double time;
        int pulse_index;  // -1: boundary only
    };
    std::vector<Mark> marks;
    if (program.cycle > 0.0) {
        for (const auto& fs : program.fields) {
            marks.push_back({fs.start, -1});
            if (!fs.constant)
                for (int u = 1; u < opt.substeps; ++u)
                    marks.push_back({fs.start + (fs.end - fs.start) * u / opt.substeps, -1});
        }
        for (std::size_t p = 0; p < program.pulses.size(); ++p)
            marks.push_back({program.pulses[p].time, static_cast<int>(p)});
        marks.push_back({program.cycle, -1});
        // pulses first among equal times, so a pulse landing on a cycle
        // boundary acts before the stroboscopic readout
        std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) {
            return a.time < b.time || (a.time == b.time && a.pulse_index > b.pulse_index);
        });
    }

    auto field_at = [&](double offset) -> std::array<double, 3> {
        for (const auto& fs : program.fields)
            if (offset >= fs.start - 1e-12 && offset < fs.end - 1e-12)
                return fs.constant ? fs.b : fs.profile(offset - fs.start);
        return {0.0, 0.0, 0.0};
    };

    return run_batches<BatchMoments>(n_batches, opt.workers, [&](std::size_t b) {
        const auto [lo, hi] = batch_range(n_traj, n_batches, b);
        BatchMoments moments(n_cp);
        for (std::size_t tr = lo; tr < hi; ++tr) {
            // merged fluctuator event queue
            std::vector<FluctuatorWalker> walkers;
            walkers.reserve(ensemble.size());
            double xi = 0.0;
            using QEntry = std::pair<double, std::size_t>;
            std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> queue;
            for (std::size_t k = 0; k < ensemble.size(); ++k) {
                walkers.emplace_back(stream_rng(opt.seed, tr, k),
                                     ensemble.fluctuators()[k].gamma);
                xi += 0.5 * ensemble.fluctuators()[k].v * walkers.back().sign();
                if (std::isfinite(walkers.back().next_event()))
                    queue.push({walkers.back().next_event(), k});
            }

            complex_t p0{1.0 / std::sqrt(2.0), 0.0}, p1{1.0 / std::sqrt(2.0), 0.0};
            double now = 0.0;
            std::size_t cp = 0;
            std::size_t mark_idx = 0;
            std::size_t cycle_count = 0;

            auto evolve_to = [&](double target) {
                while (now < target - 1e-15) {
                    double stop = target;
                    if (!queue.empty() && queue.top().first < stop) stop = queue.top().first;
                    if (stop > now) {
                        // sample the drive at the segment midpoint (exact for
                        // constant fields, midpoint rule for shaped ones)
                        const double offset = program.cycle > 0.0
                                                  ? 0.5 * (now + stop) -
                                                        static_cast<double>(cycle_count) *
                                                            program.cycle
                                                  : 0.0;
                        const auto f = field_at(offset);
                        step_state(p0, p1, f[0] + qubit.delta, f[1], f[2] + qubit.omega + xi,
                                   stop - now);
                        now = stop;
                    }
                    while (!queue.empty() && queue.top().first <= now + 1e-15) {
                        const auto [te, k] = queue.top();
                        queue.pop();
                        const int old_sign = walkers[k].sign();
                        walkers[k].advance();
                        xi += 0.5 * ensemble.fluctuators()[k].v *
                              (walkers[k].sign() - old_sign);
                        if (std::isfinite(walkers[k].next_event()))
                            queue.push({walkers[k].next_event(), k});
                    }
                }
                now = target;
            };

            while (cp < n_cp) {
                double next_stop;
                int pulse_here = -1;
                if (program.cycle > 0.0) {
                    if (mark_idx >= marks.size()) {
                        ++cycle_count;
                        mark_idx = 0;
                    }
                    const double mark_time = static_cast<double>(cycle_count) * program.cycle +
                                             marks[mark_idx].time;
                    next_stop = mark_time;
                    pulse_here = marks[mark_idx].pulse_index;
                } else {
                    next_stop = times[cp];
                }
                if (next_stop > t_end + 1e-12) next_stop = t_end;

                evolve_to(next_stop);
                if (pulse_here >= 0)
                    apply_pulse(p0, p1, program.pulses[static_cast<std::size_t>(pulse_here)].u);
                if (program.cycle > 0.0) ++mark_idx;

                while (cp < n_cp && times[cp] <= now + 1e-9 * std::max(1.0, now)) {
                    moments.sum[cp] += 2.0 * p0 * std::conj(p1);
                    ++cp;
                }
            }
        }
        moments.count = hi - lo;
        return moments;
    });
}

}  // namespace detail

// Free (uncontrolled) RTN dephasing on an explicit time grid.
inline CoherenceSeries free_rtn_coherence(const FluctuatorEnsemble& ensemble,
                                          const QubitSpec& qubit,
                                          const std::vector<double>& times,
                                          const McOptions& opt = {}) {
    if (opt.n_traj < 100) throw std::invalid_argument("free_rtn_coherence: n_traj too small");
    if (times.empty() || times.front() <= 0.0)
        throw std::invalid_argument("free_rtn_coherence: need positive, increasing times");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("free_rtn_coherence: times must increase");

    if (qubit.delta == 0.0 && !opt.force_matrix) {
        detail::ToggleIntegral free_toggle;  // E(t) = t
        return detail::reduce_batches(times,
                                      detail::run_phase_path(ensemble, free_toggle, times, opt),
                                      opt.n_traj, "free");
    }
    detail::CycleProgram no_control;
    return detail::reduce_batches(
        times, detail::run_matrix_path(ensemble, qubit, no_control, times, opt), opt.n_traj,
        "free");
}

namespace detail {

inline std::vector<double> stroboscopic_times(double cycle, int n_cycles, int stride) {
    std::vector<double> times;
    for (int n = stride; n <= n_cycles; n += stride) times.push_back(cycle * n);
    if (times.empty() || times.back() < cycle * n_cycles - 1e-12)
        times.push_back(cycle * n_cycles);
    return times;
}

}  // namespace detail

// Bang-bang control: stroboscopic coherence at multiples of the cycle time.
// Perfect sigma_z-toggling pulse trains use the exact phase path; flip-angle
// errors or Delta != 0 fall back to the 2x2 propagator with the pulses applied
// as instantaneous rotations scaled by (1 + pulse_error).
inline CoherenceSeries controlled_coherence(const FluctuatorEnsemble& ensemble,
                                            const QubitSpec& qubit, const BBSchedule& schedule,
                                            int n_cycles, const McOptions& opt = {}) {
    if (opt.n_traj < 100) throw std::invalid_argument("controlled_coherence: n_traj too small");
    if (n_cycles < 1) throw std::invalid_argument("controlled_coherence: n_cycles must be >= 1");
    if (schedule.group().dim() != 2)
        throw std::invalid_argument("controlled_coherence: qubit schedules only");

    const auto times =
        detail::stroboscopic_times(schedule.cycle_time(), n_cycles, opt.checkpoint_stride);

    if (qubit.delta == 0.0 && opt.pulse_error == 0.0 && !opt.force_matrix) {
        // try the exact toggling-sign path
        bool toggles = true;
        detail::ToggleIntegral toggle;
        toggle.cycle = schedule.cycle_time();
        toggle.dt = schedule.dt();
        double e = 0.0;
        for (std::size_t l = 0; l < schedule.subinterval_count(); ++l) {
            const double s =
                detail::sigma_z_toggle(schedule.group().element(schedule.frame_index(l)));
            if (s == 0.0) {
                toggles = false;
                break;
            }
            toggle.prefix.push_back(e);
            toggle.sign.push_back(s);
            e += s * schedule.dt();
        }
        toggle.e_cycle = e;
        if (toggles)
            return detail::reduce_batches(
                times, detail::run_phase_path(ensemble, toggle, times, opt), opt.n_traj, "bb");
    }

    detail::CycleProgram program;
    program.cycle = schedule.cycle_time();
    for (std::size_t l = 0; l < schedule.subinterval_count(); ++l) {
        Operator pulse = schedule.pulse(l);
        if (opt.pulse_error != 0.0) {
            const Operator log = hermitian_log(pulse);
            const Operator traceless =
                log - Operator::identity(2) * (log.trace() / 2.0);
            pulse = expm(traceless, 1.0 + opt.pulse_error);
        }
        program.pulses.push_back(
            {schedule.dt() * static_cast<double>(l + 1), detail::to_array2(pulse)});
    }
    return detail::reduce_batches(
        times, detail::run_matrix_path(ensemble, qubit, program, times, opt), opt.n_traj, "bb");
}

// Eulerian bounded-strength control, evaluated through the continuous control
// field of the schedule's pulse shapes.
inline CoherenceSeries controlled_coherence(const FluctuatorEnsemble& ensemble,
                                            const QubitSpec& qubit,
                                            const EulerianSchedule& schedule, int n_cycles,
                                            const McOptions& opt = {}) {
    if (opt.n_traj < 100) throw std::invalid_argument("controlled_coherence: n_traj too small");
    if (n_cycles < 1) throw std::invalid_argument("controlled_coherence: n_cycles must be >= 1");
    if (schedule.group().dim() != 2)
        throw std::invalid_argument("controlled_coherence: qubit schedules only");
    if (schedule.subinterval_count() == 0)
        throw std::invalid_argument("controlled_coherence: empty Eulerian schedule");

    detail::CycleProgram program;
    program.cycle = schedule.cycle_time();
    const double dt = schedule.dt();
    for (std::size_t l = 0; l < schedule.subinterval_count(); ++l) {
        const PulseShape& shape = schedule.shapes()[schedule.label(l)];
        detail::FieldSegment seg;
        seg.start = dt * static_cast<double>(l);
        seg.end = seg.start + dt;
        const auto dir = detail::pauli_components(shape.direction());
        if (shape.kind() == PulseShapeKind::constant) {
            seg.constant = true;
            const double f = shape.amplitude(0.0);
            seg.b = {f * dir[0], f * dir[1], f * dir[2]};
        } else {
            seg.constant = false;
            seg.profile = [&shape, dir](double s) -> std::array<double, 3> {
                const double f = shape.amplitude(s);
                return {f * dir[0], f * dir[1], f * dir[2]};
            };
        }
        program.fields.push_back(std::move(seg));
    }
    if (opt.pulse_error != 0.0) {
        // systematic amplitude miscalibration: rescale the whole drive
        for (auto& seg : program.fields) {
            if (seg.constant) {
                for (double& c : seg.b) c *= 1.0 + opt.pulse_error;
            } else {
                auto base = seg.profile;
                const double scale = 1.0 + opt.pulse_error;
                seg.profile = [base, scale](double s) {
                    auto b = base(s);
                    for (double& c : b) c *= scale;
                    return b;
                };
            }
        }
    }

    const auto times =
        detail::stroboscopic_times(schedule.cycle_time(), n_cycles, opt.checkpoint_stride);
    return detail::reduce_batches(
        times, detail::run_matrix_path(ensemble, qubit, program, times, opt), opt.n_traj,
        "eulerian");
}

}  // namespace decup
