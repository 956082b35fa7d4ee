#include "hostguard/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace hostguard::sampler {

WlsFit wls_fit(const std::vector<std::pair<double, double>>& points, double lambda) {
    if (points.size() < 2) throw std::invalid_argument("wls_fit needs at least 2 points");
    if (!(lambda > 0.0) || lambda > 1.0) throw std::invalid_argument("lambda must be in (0,1]");

    const size_t n = points.size();
    double sw = 0, st = 0, stt = 0, sy = 0, sty = 0;
    bool all_t_equal = true;
    for (size_t i = 0; i < n; ++i) {
        double w = std::pow(lambda, static_cast<double>(n - 1 - i));
        double t = points[i].first;
        double y = points[i].second;
        if (t != points[0].first) all_t_equal = false;
        sw += w;
        st += w * t;
        stt += w * t * t;
        sy += w * y;
        sty += w * t * y;
    }
    if (all_t_equal) return WlsFit{0.0, sy / sw};

    double denom = sw * stt - st * st;
    double slope = (sw * sty - st * sy) / denom;
    double intercept = (sy - slope * st) / sw;
    return WlsFit{slope, intercept};
}

Sampler::Sampler(SamplerConfig cfg) : cfg_(cfg), interval_(cfg.t_min_ms) {
    if (!(cfg.lambda > 0.0) || cfg.lambda > 1.0) {
        throw std::invalid_argument("sampler lambda must be in (0,1]");
    }
    if (cfg.window < 2) throw std::invalid_argument("sampler window must be >= 2");
    if (cfg.t_min_ms <= 0 || cfg.t_min_ms > cfg.t_max_ms) {
        throw std::invalid_argument("sampler interval bounds invalid");
    }
    if (cfg.theta_low < 0 || !(cfg.theta_low < cfg.theta_high)) {
        throw std::invalid_argument("sampler thresholds invalid");
    }
    if (!(cfg.epsilon > 0)) throw std::invalid_argument("sampler epsilon must be positive");
}

double Sampler::predict_next() const {
    if (window_.empty()) return 0.0;
    if (window_.size() == 1) return std::max(0.0, window_.back().second);
    WlsFit fit = wls_fit({window_.begin(), window_.end()}, cfg_.lambda);
    double y_hat = fit.slope * next_t_ + fit.intercept;
    return std::max(0.0, y_hat);
}

std::int64_t Sampler::update(double observed) {
    if (!window_.empty()) {
        double y_hat = predict_next();
        double e = std::abs(y_hat - observed) / std::max(std::abs(observed), cfg_.epsilon);
        if (e > cfg_.theta_high) {
            interval_ = std::max(cfg_.t_min_ms, interval_ / 2);
        } else if (e < cfg_.theta_low) {
            interval_ = std::min(cfg_.t_max_ms, interval_ * 2);
        }
    }
    window_.emplace_back(next_t_, observed);
    while (window_.size() > cfg_.window) window_.pop_front();
    next_t_ += static_cast<double>(interval_);
    return interval_;
}

} // namespace hostguard::sampler
