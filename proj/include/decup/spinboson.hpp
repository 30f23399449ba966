#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "decup/matrix.hpp"
#include "decup/series.hpp"

namespace decup {

struct QubitSpec {
    double omega0 = 0.0;  // sigma_z splitting of the spin-boson qubit
    double omega = 0.0;   // Omega: sigma_z part of the RTN qubit Hamiltonian
    double delta = 0.0;   // Delta: sigma_x part (0 = pure dephasing)
};

struct BosonMode {
    double omega = 0.0;  // angular frequency, > 0
    double g = 0.0;      // diagonal coupling, angular-frequency units
};

// Discrete harmonic reservoir diagonally coupled to the qubit.  Temperature in
// frequency units (k_B = 1); 0 means the vacuum.
class BosonBath {
public:
    BosonBath(std::vector<BosonMode> modes, double temperature = 0.0)
        : modes_(std::move(modes)), temperature_(temperature) {
        if (temperature_ < 0.0) throw std::invalid_argument("BosonBath: negative temperature");
        for (const auto& m : modes_)
            if (!(m.omega > 0.0))
                throw std::invalid_argument("BosonBath: mode frequencies must be positive");
    }

    const std::vector<BosonMode>& modes() const { return modes_; }
    double temperature() const { return temperature_; }

    double omega_max() const {
        double w = 0.0;
        for (const auto& m : modes_) w = std::max(w, m.omega);
        return w;
    }

    // shortest bath correlation time, 1/omega_max
    double tau_c() const {
        const double w = omega_max();
        if (w <= 0.0) throw std::domain_error("BosonBath: tau_c undefined for an empty bath");
        return 1.0 / w;
    }

    // coth(omega / 2T); 1 in the T -> 0 limit
    double thermal_factor(double omega) const {
        if (temperature_ <= 0.0) return 1.0;
        return 1.0 / std::tanh(omega / (2.0 * temperature_));
    }

private:
    std::vector<BosonMode> modes_;
    double temperature_;
};

// K modes on a uniform grid up to omega_max with ohmic weights
// g_k^2 = coupling^2 * omega_k * exp(-omega_k / omega_cut) * domega.
inline BosonBath ohmic_bath(std::size_t k_modes, double omega_max, double omega_cut,
                            double coupling, double temperature = 0.0) {
    if (k_modes == 0 || !(omega_max > 0.0) || !(omega_cut > 0.0))
        throw std::invalid_argument("ohmic_bath: bad parameters");
    const double domega = omega_max / static_cast<double>(k_modes);
    std::vector<BosonMode> modes;
    for (std::size_t j = 1; j <= k_modes; ++j) {
        const double w = domega * static_cast<double>(j);
        modes.push_back({w, coupling * std::sqrt(w * std::exp(-w / omega_cut) * domega)});
    }
    return BosonBath(std::move(modes), temperature);
}

// Reference bath used by the bundled experiments: 20 ohmic modes, omega_max 1,
// coupling strong enough that free coherence is essentially gone by
// omega_max * t ~ 50 while fast CP control keeps it above 0.99.
inline BosonBath default_bath() { return ohmic_bath(20, 1.0, 0.4, 0.65, 0.0); }

namespace detail {

// |int_0^t eps(s) e^{i omega s} ds|^2 for the piecewise sign function eps
// flipping at the given times; closed form per constant-sign segment.
inline double filter_integral_sq(double omega, double t, const std::vector<double>& flip_times) {
    std::complex<double> acc{0.0, 0.0};
    double seg_start = 0.0;
    double sign = 1.0;
    const std::complex<double> iomega{0.0, omega};
    auto segment = [&](double a, double b) {
        return (std::exp(iomega * b) - std::exp(iomega * a)) / iomega;
    };
    for (double tf : flip_times) {
        if (tf >= t) break;
        if (tf > seg_start) acc += sign * segment(seg_start, tf);
        seg_start = tf;
        sign = -sign;
    }
    if (t > seg_start) acc += sign * segment(seg_start, t);
    return std::norm(acc);
}

// Same quantity for the even CP train (flips at dt, 2dt, ..., t = 2n dt):
// the geometric series telescopes to (4/omega^2) tan^2(omega dt/2) sin^2(omega t/2).
inline double cp_filter_sq(double omega, double dt, int n_cycles) {
    const double c = std::cos(0.5 * omega * dt);
    const double s = std::sin(0.5 * omega * dt);
    const double st = std::sin(0.5 * omega * 2.0 * dt * n_cycles);
    if (std::abs(c) < 1e-150) return 4.0e300;  // pulse spacing resonant with the mode
    const double tan_half = s / c;
    return 4.0 / (omega * omega) * tan_half * tan_half * st * st;
}

}  // namespace detail

// Exact free dephasing under the diagonal bath coupling:
// Gamma(t) = sum_k 4 (g_k/omega_k)^2 (1 - cos omega_k t) coth(omega_k / 2T).
inline CoherenceSeries free_coherence(const BosonBath& bath, const std::vector<double>& times) {
    CoherenceSeries series;
    series.id = "free";
    for (double t : times) {
        if (t < 0.0) throw std::invalid_argument("free_coherence: negative time");
        double gamma = 0.0;
        for (const auto& m : bath.modes()) {
            const double ratio = m.g / m.omega;
            gamma += 4.0 * ratio * ratio * (1.0 - std::cos(m.omega * t)) *
                     bath.thermal_factor(m.omega);
        }
        series.push(t, std::exp(-gamma));
    }
    return series;
}

// ---------------------------------------------------------------------------
// CP bang-bang control of the spin-boson qubit.
//
// Perfect pi pulses: exact per-mode filter formula, with (1 - cos omega t)
// replaced by |int eps e^{i omega s}|^2 omega^2 / 2.
//
// Imperfect pulses (rotation angle pi (1 + pulse_error)): exact coherent-state
// path sum over sign histories.  Displacement bookkeeping per mode uses
// U_s(dt) = e^{i chi} D(s delta) R(dt), so each history reduces to one
// displacement, one phase, and a thermal overlap.  The sum is exponential in
// the pulse count, so this path is capped at 6 cycles.
// ---------------------------------------------------------------------------

namespace detail {

struct PathTable {
    std::vector<std::complex<double>> amp_end_plus;   // qubit amplitude, path ends in |0>
    std::vector<std::complex<double>> amp_end_minus;  // path ends in |1>
    // per mode, per path: accumulated displacement and phase
    std::vector<std::vector<std::complex<double>>> disp;
    std::vector<std::vector<double>> phase;
};

// rho01 after n_intervals intervals of length dt with an imperfect pi pulse
// after every interval (the last one lands on the checkpoint itself)
inline double cp_pathsum_coherence(const BosonBath& bath, double dt, int n_intervals,
                                   double pulse_error) {
    const double theta_half = 0.5 * pi * (1.0 + pulse_error);
    const std::complex<double> rc{std::cos(theta_half), 0.0};
    const std::complex<double> rs{0.0, -std::sin(theta_half)};

    const std::size_t n_paths = std::size_t{1} << n_intervals;
    const std::size_t n_modes = bath.modes().size();

    // per-mode interval constants
    std::vector<std::complex<double>> delta(n_modes), rot(n_modes);
    std::vector<double> chi(n_modes), width(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        const auto& m = bath.modes()[k];
        const double alpha0 = m.g / m.omega;
        rot[k] = std::polar(1.0, -m.omega * dt);
        delta[k] = alpha0 * (rot[k] - 1.0);
        chi[k] = (m.g * m.g / m.omega) * dt - alpha0 * alpha0 * std::sin(m.omega * dt);
        width[k] = bath.thermal_factor(m.omega);  // 2 nbar + 1
    }

    PathTable table;
    table.amp_end_plus.resize(n_paths);
    table.amp_end_minus.resize(n_paths);
    table.disp.assign(n_modes, std::vector<std::complex<double>>(n_paths));
    table.phase.assign(n_modes, std::vector<double>(n_paths));

    for (std::size_t p = 0; p < n_paths; ++p) {
        // bit j of p selects the sign during interval j: 0 -> +1, 1 -> -1
        std::complex<double> amp{1.0 / std::sqrt(2.0), 0.0};
        int prev_sign = ((p & 1) == 0) ? +1 : -1;
        for (int j = 1; j < n_intervals; ++j) {
            const int sj = (((p >> j) & 1) == 0) ? +1 : -1;
            amp *= (sj == prev_sign) ? rc : rs;
            prev_sign = sj;
        }
        table.amp_end_plus[p] = amp * ((prev_sign == +1) ? rc : rs);
        table.amp_end_minus[p] = amp * ((prev_sign == -1) ? rc : rs);

        for (std::size_t k = 0; k < n_modes; ++k) {
            std::complex<double> b{0.0, 0.0};
            double phi = 0.0;
            for (int j = 0; j < n_intervals; ++j) {
                const double sj = (((p >> j) & 1) == 0) ? +1.0 : -1.0;
                const std::complex<double> add = sj * delta[k];
                const std::complex<double> rotated = b * rot[k];
                phi += chi[k] + std::imag(add * std::conj(rotated));
                b = add + rotated;
            }
            table.disp[k][p] = b;
            table.phase[k][p] = phi;
        }
    }

    // rho01(t) = sum over (ket path, bra path); normalized by rho01(0) = 1/2
    std::complex<double> rho01{0.0, 0.0};
    for (std::size_t p = 0; p < n_paths; ++p) {
        if (std::abs(table.amp_end_plus[p]) < 1e-300) continue;
        for (std::size_t q = 0; q < n_paths; ++q) {
            std::complex<double> w = table.amp_end_plus[p] * std::conj(table.amp_end_minus[q]);
            if (std::abs(w) < 1e-300) continue;
            for (std::size_t k = 0; k < n_modes; ++k) {
                const std::complex<double> b = table.disp[k][p];
                const std::complex<double> bp = table.disp[k][q];
                // thermal overlap Tr[D(b) rho_th D(-bp)] and reordering phase
                const double gauss = std::exp(-0.5 * std::norm(b - bp) * width[k]);
                const double ph = table.phase[k][p] - table.phase[k][q] -
                                  std::imag(bp * std::conj(b));
                w *= gauss * std::polar(1.0, ph);
            }
            rho01 += w;
        }
    }
    return 2.0 * std::abs(rho01);  // rho01(0) = 1/2 for the initial superposition
}

}  // namespace detail

// Stroboscopic coherence at t = n T_c, T_c = 2 dt, under the CP pulse train
// (pi pulses at every multiple of dt, including the checkpoint itself).
inline CoherenceSeries cp_coherence(const BosonBath& bath, double dt, int n_cycles,
                                    double pulse_error = 0.0) {
    if (!(dt > 0.0)) throw std::invalid_argument("cp_coherence: dt must be > 0");
    if (n_cycles < 1) throw std::invalid_argument("cp_coherence: need at least one cycle");

    CoherenceSeries series;
    series.id = "cp";
    series.push(0.0, 1.0);

    if (pulse_error == 0.0) {
        for (int n = 1; n <= n_cycles; ++n) {
            double gamma = 0.0;
            for (const auto& m : bath.modes())
                gamma += 2.0 * m.g * m.g * detail::cp_filter_sq(m.omega, dt, n) *
                         bath.thermal_factor(m.omega);
            series.push(2.0 * dt * n, std::exp(-gamma));
        }
        return series;
    }

    if (n_cycles > 6)
        throw std::invalid_argument(
            "cp_coherence: the imperfect-pulse path sum is exponential in the pulse count; "
            "use at most 6 cycles");
    for (int n = 1; n <= n_cycles; ++n)
        series.push(2.0 * dt * n,
                    detail::cp_pathsum_coherence(bath, dt, 2 * n, pulse_error));
    return series;
}

}  // namespace decup
