#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace decup {

// Numerical result did not converge (Fock cutoff exhausted, etc.); the CLI
// maps this to its own exit code.
struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stroboscopic record of |rho01(t)| / |rho01(0)| with per-point Monte Carlo
// standard errors (zero for exact methods).
struct CoherenceSeries {
    std::string id;
    std::vector<double> times;
    std::vector<double> coherence;
    std::vector<double> std_error;

    std::size_t size() const { return times.size(); }

    void push(double t, double c, double se = 0.0) {
        if (!times.empty() && !(t > times.back()))
            throw std::invalid_argument("CoherenceSeries: times must be strictly increasing");
        times.push_back(t);
        coherence.push_back(c);
        std_error.push_back(se);
    }

    // decoherence functional Gamma_c = -ln coherence
    std::vector<double> gamma_c() const {
        std::vector<double> g;
        g.reserve(coherence.size());
        for (double c : coherence)
            g.push_back(c > 0.0 ? -std::log(c) : std::numeric_limits<double>::infinity());
        return g;
    }

    // value at the first time >= t (times are sorted)
    double at_or_after(double t) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (times[i] >= t - 1e-12) return coherence[i];
        throw std::out_of_range("CoherenceSeries: time beyond series");
    }

    // first time where coherence drops below the threshold; throws if it never does
    double first_crossing_below(double threshold) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (coherence[i] < threshold) return times[i];
        throw std::out_of_range("CoherenceSeries: coherence never crosses threshold");
    }
};

}  // namespace decup
