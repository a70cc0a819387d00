#include "htb/detection.hpp"

#include <algorithm>
#include <cmath>

namespace htb {

bool interval_family_empty(std::span<const double> lowers, std::span<const double> uppers) {
    if (lowers.empty()) {
        return false;
    }
    const double max_lower = *std::max_element(lowers.begin(), lowers.end());
    const double min_upper = *std::min_element(uppers.begin(), uppers.end());
    return max_lower > min_upper;
}

double detection_delay_bound(const DelayBoundInputs& in) {
    const double eps = in.ht.epsilon;
    const double inner = std::log(1.0 / in.delta);
    const double loglog = inner > 1.0 ? std::log(inner) : 0.0;
    return 6.0 * std::pow(472.0, (1.0 + eps) / eps) * std::pow(in.ht.v, 1.0 / eps) *
           (loglog + std::log(in.horizon)) / std::pow(in.delta, (1.0 + eps) / eps);
}

std::size_t default_n_min(double horizon, double epsilon) {
    const double raw = 68.0 * (1.0 + epsilon) / epsilon * std::log(horizon);
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

ChangeDetector::ChangeDetector(CsKind kind, DetectorConfig config)
    : kind_(kind), config_(std::move(config)) {}

std::size_t ChangeDetector::active_cs() const {
    return kind_ == CsKind::catoni ? catoni_.size() : bernstein_.size();
}

bool ChangeDetector::grid_wants_start() const {
    if (!config_.thinning) {
        return true;
    }
    return stream_.size() + 1 >= next_grid_start_;
}

std::optional<std::size_t> ChangeDetector::step(double x) {
    const bool start = grid_wants_start();
    if (start && config_.thinning) {
        const auto pos = stream_.size() + 1;
        next_grid_start_ = std::max(pos + 1, static_cast<std::size_t>(
                                                 std::ceil(static_cast<double>(pos) *
                                                           *config_.thinning)));
    }
    return step_with(x, start);
}

std::optional<std::size_t> ChangeDetector::step_with(double x, bool start_new_cs) {
    if (tripped()) {
        throw SteppedAfterTrip{};
    }
    stream_.push_back(x);
    const std::size_t index = stream_.size();

    if (kind_ == CsKind::catoni) {
        if (start_new_cs) {
            catoni_.emplace_back(config_.schedule, index - 1, config_.n_min, config_.solver,
                                 config_.horizon_hint);
        }
        for (auto& cs : catoni_) {
            const auto history =
                std::span<const double>(stream_).subspan(cs.start_index());
            cs.update(x, history);
            const auto& itv = cs.running();
            max_lower_ = std::max(max_lower_, itv.lower);
            min_upper_ = std::min(min_upper_, itv.upper);
        }
    } else {
        if (start_new_cs) {
            bernstein_.emplace_back(config_.schedule.gamma, index - 1, config_.n_min);
        }
        for (auto& cs : bernstein_) {
            cs.update(x);
            const auto& itv = cs.running();
            max_lower_ = std::max(max_lower_, itv.lower);
            min_upper_ = std::min(min_upper_, itv.upper);
        }
    }

    if (max_lower_ > min_upper_) {
        tripped_at_ = index;
    }
    return tripped_at_;
}

void ChangeDetector::reset() {
    stream_.clear();
    catoni_.clear();
    bernstein_.clear();
    max_lower_ = -std::numeric_limits<double>::infinity();
    min_upper_ = std::numeric_limits<double>::infinity();
    tripped_at_.reset();
    next_grid_start_ = 1;
}

}  // namespace htb
