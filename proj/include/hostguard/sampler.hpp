#pragma once

#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

namespace hostguard::sampler {

struct WlsFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Weighted least squares line fit with exponential decay: the i-th oldest of n
// points carries weight lambda^(n-1-i), so the newest point has weight 1.
// Needs >= 2 points; if all t coincide the fit degenerates to slope 0 and the
// weighted mean as intercept.
WlsFit wls_fit(const std::vector<std::pair<double, double>>& points, double lambda);

struct SamplerConfig {
    double lambda = 0.9;             // in (0, 1]
    std::size_t window = 8;          // observations kept
    std::int64_t t_min_ms = 250;
    std::int64_t t_max_ms = 16000;
    double theta_low = 0.1;          // 0 <= theta_low < theta_high
    double theta_high = 0.5;
    double epsilon = 1.0;            // relative-error division guard
};

// Adaptive monitoring-interval controller. Each observed traffic volume is
// compared against the weighted-least-squares prediction; a large relative
// error halves the interval, a small one doubles it, anything in the dead
// band leaves it unchanged. The first observation has no prediction basis and
// never adjusts the interval.
class Sampler {
public:
    explicit Sampler(SamplerConfig cfg);   // throws std::invalid_argument on bad config

    // Prediction for the upcoming observation: WLS extrapolation with >= 2
    // points, the last value with one, 0 when empty. Never negative.
    double predict_next() const;

    // Feeds one observation; returns the (possibly adjusted) interval.
    std::int64_t update(double observed);

    std::int64_t interval_ms() const { return interval_; }
    std::size_t observation_count() const { return window_.size(); }
    const SamplerConfig& config() const { return cfg_; }

private:
    SamplerConfig cfg_;
    std::int64_t interval_;
    double next_t_ = 0.0;                           // time of the upcoming observation
    std::deque<std::pair<double, double>> window_;  // (t, y)
};

} // namespace hostguard::sampler
