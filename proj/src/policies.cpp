#include "htb/policies.hpp"

#include <algorithm>
#include <cmath>

namespace htb {

const std::vector<long>& Policy::detections() const {
    static const std::vector<long> none;
    return none;
}

std::optional<int> forced_exploration_arm(long t_prime, int num_arms, double eta) {
    const long cycle = static_cast<long>(std::floor(static_cast<double>(num_arms) / eta));
    const long r = t_prime % cycle;
    if (r >= 1 && r <= num_arms) {
        return static_cast<int>(r) - 1;
    }
    if (r == 0 && cycle <= num_arms) {
        return num_arms - 1;
    }
    return std::nullopt;
}

double eta_schedule(int detections_so_far, double eta0, int num_arms, long horizon) {
    const double j = static_cast<double>(detections_so_far) + 1.0;
    const double eta = eta0 * std::sqrt(j * num_arms * std::log(static_cast<double>(horizon)) /
                                        static_cast<double>(horizon));
    return std::min(eta, static_cast<double>(num_arms));
}

int robust_ucb_choose(const std::vector<std::vector<double>>& history, long t,
                      const HeavyTailParams& ht, long horizon, const AlgoConfig& cfg) {
    const int k = static_cast<int>(history.size());
    for (int i = 0; i < k; ++i) {
        if (history[static_cast<std::size_t>(i)].empty()) {
            return i;
        }
    }
    const double eps = ht.epsilon;
    const std::size_t default_blocks =
        static_cast<std::size_t>(
            std::ceil(8.0 * std::log(static_cast<double>(horizon) * horizon))) + 1;
    const std::size_t blocks_cfg = cfg.mom_blocks.value_or(default_blocks);
    const double td = std::max<double>(2.0, static_cast<double>(t));

    int best = 0;
    double best_index = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        const auto& buf = history[static_cast<std::size_t>(i)];
        const std::size_t blocks = std::min(buf.size(), blocks_cfg);
        const double mom = median_of_means(buf, blocks);
        const double bonus =
            cfg.ucb_scale * std::pow(12.0 * ht.v, 1.0 / (1.0 + eps)) *
            std::pow(16.0 * std::log(td * td) / static_cast<double>(buf.size()),
                     eps / (1.0 + eps));
        const double index = mom + bonus;
        if (index > best_index) {
            best_index = index;
            best = i;
        }
    }
    return best;
}

RobustUcb::RobustUcb(HeavyTailParams ht, AlgoConfig cfg) : ht_(ht), cfg_(cfg) {}

void RobustUcb::begin(int num_arms, long horizon, std::uint64_t /*seed*/) {
    horizon_ = horizon;
    buffers_.assign(static_cast<std::size_t>(num_arms), {});
}

int RobustUcb::choose(long t) { return robust_ucb_choose(buffers_, t, ht_, horizon_, cfg_); }

void RobustUcb::observe(int arm, double reward) {
    buffers_[static_cast<std::size_t>(arm)].push_back(reward);
}

nlohmann::json RobustUcb::describe() const {
    nlohmann::json j;
    j["ucb_scale"] = cfg_.ucb_scale;
    if (cfg_.mom_blocks) {
        j["mom_blocks"] = *cfg_.mom_blocks;
    }
    j["epsilon"] = ht_.epsilon;
    j["v"] = ht_.v;
    return j;
}

RobustCpdUcb::RobustCpdUcb(HeavyTailParams ht, AlgoConfig cfg) : ht_(ht), cfg_(cfg) {}

double RobustCpdUcb::current_eta() const {
    if (cfg_.fixed_eta) {
        return std::min(*cfg_.fixed_eta, static_cast<double>(num_arms_));
    }
    return eta_schedule(detections_so_far_, cfg_.eta0, num_arms_, horizon_);
}

void RobustCpdUcb::begin(int num_arms, long horizon, std::uint64_t /*seed*/) {
    num_arms_ = num_arms;
    horizon_ = horizon;
    const double td = static_cast<double>(horizon);
    gamma_ = cfg_.gamma > 0.0 ? cfg_.gamma : 2.0 / (td * td * td);
    n_min_ = cfg_.n_min_override.value_or(default_n_min(td, ht_.epsilon));

    DetectorConfig dc;
    dc.schedule = StitchSchedule{gamma_, ht_.v, ht_.epsilon};
    dc.n_min = n_min_;
    dc.solver = cfg_.solver;
    dc.thinning = cfg_.thinning;
    dc.horizon_hint = td;

    detectors_.clear();
    for (int i = 0; i < num_arms; ++i) {
        detectors_.emplace_back(CsKind::catoni, dc);
    }
    buffers_.assign(static_cast<std::size_t>(num_arms), {});
    pull_counts_.assign(static_cast<std::size_t>(num_arms), 0);
    t_prime_ = 0;
    global_t_ = 0;
    detections_so_far_ = 0;
    detection_times_.clear();
}

void RobustCpdUcb::reset_everything() {
    t_prime_ = 0;
    for (auto& b : buffers_) {
        b.clear();
    }
    std::fill(pull_counts_.begin(), pull_counts_.end(), 0);
    for (auto& d : detectors_) {
        d.reset();
    }
}

int RobustCpdUcb::choose(long /*t*/) {
    if (const auto forced = forced_exploration_arm(t_prime_, num_arms_, current_eta())) {
        return *forced;
    }
    return robust_ucb_choose(buffers_, t_prime_ + 1, ht_, horizon_, cfg_);
}

void RobustCpdUcb::observe(int arm, double reward) {
    ++global_t_;
    ++t_prime_;
    buffers_[static_cast<std::size_t>(arm)].push_back(reward);
    ++pull_counts_[static_cast<std::size_t>(arm)];

    if (pull_counts_[static_cast<std::size_t>(arm)] < static_cast<long>(n_min_)) {
        return;
    }
    if (detectors_[static_cast<std::size_t>(arm)].step(reward)) {
        detection_times_.push_back(global_t_);
        ++detections_so_far_;
        reset_everything();
    }
}

nlohmann::json RobustCpdUcb::describe() const {
    nlohmann::json j;
    j["gamma"] = gamma_;
    j["n_min"] = n_min_;
    j["adaptive_eta"] = !cfg_.fixed_eta.has_value();
    if (cfg_.fixed_eta) {
        j["fixed_eta"] = *cfg_.fixed_eta;
    } else {
        j["eta0"] = cfg_.eta0;
    }
    j["initial_eta"] = cfg_.fixed_eta ? *cfg_.fixed_eta
                                      : eta_schedule(0, cfg_.eta0, num_arms_, horizon_);
    if (cfg_.thinning) {
        j["cs_start_thinning"] = *cfg_.thinning;
    }
    j["ucb_scale"] = cfg_.ucb_scale;
    j["epsilon"] = ht_.epsilon;
    j["v"] = ht_.v;
    return j;
}

SlidingWindowUcb::SlidingWindowUcb(AlgoConfig cfg) : cfg_(cfg) {}

void SlidingWindowUcb::begin(int num_arms, long horizon, std::uint64_t /*seed*/) {
    num_arms_ = num_arms;
    const double td = static_cast<double>(horizon);
    window_ = cfg_.sw_window.value_or(
        static_cast<long>(std::ceil(std::sqrt(td * std::log(td)))));
    window_ = std::max<long>(window_, num_arms);
    recent_.clear();
    sums_.assign(static_cast<std::size_t>(num_arms), 0.0);
    counts_.assign(static_cast<std::size_t>(num_arms), 0);
}

int SlidingWindowUcb::choose(long t) {
    for (int i = 0; i < num_arms_; ++i) {
        if (counts_[static_cast<std::size_t>(i)] == 0) {
            return i;  // unplayed within the window: infinite index
        }
    }
    const double horizon_term = std::log(static_cast<double>(std::min(t, window_)));
    int best = 0;
    double best_index = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < num_arms_; ++i) {
        const double n = static_cast<double>(counts_[static_cast<std::size_t>(i)]);
        const double mean = sums_[static_cast<std::size_t>(i)] / n;
        const double index = mean + cfg_.sw_scale * std::sqrt(2.0 * horizon_term / n);
        if (index > best_index) {
            best_index = index;
            best = i;
        }
    }
    return best;
}

void SlidingWindowUcb::observe(int arm, double reward) {
    recent_.emplace_back(arm, reward);
    sums_[static_cast<std::size_t>(arm)] += reward;
    ++counts_[static_cast<std::size_t>(arm)];
    if (static_cast<long>(recent_.size()) > window_) {
        const auto [old_arm, old_reward] = recent_.front();
        recent_.pop_front();
        sums_[static_cast<std::size_t>(old_arm)] -= old_reward;
        --counts_[static_cast<std::size_t>(old_arm)];
    }
}

nlohmann::json SlidingWindowUcb::describe() const {
    return {{"window", window_}, {"sw_scale", cfg_.sw_scale}};
}

MonitoredUcb::MonitoredUcb(AlgoConfig cfg) : cfg_(cfg) {}

void MonitoredUcb::begin(int num_arms, long horizon, std::uint64_t /*seed*/) {
    num_arms_ = num_arms;
    horizon_ = horizon;
    const double td = static_cast<double>(horizon);
    eta_ = cfg_.mucb_eta > 0.0 ? cfg_.mucb_eta : std::sqrt(num_arms * std::log(td) / td);
    const double w = static_cast<double>(cfg_.mucb_window);
    threshold_ = cfg_.mucb_threshold.value_or(
        cfg_.mucb_scale * std::sqrt(w / 2.0 * std::log(2.0 * num_arms * td * td)));
    buffers_.assign(static_cast<std::size_t>(num_arms), {});
    t_prime_ = 0;
    global_t_ = 0;
    detection_times_.clear();
}

void MonitoredUcb::reset_everything() {
    t_prime_ = 0;
    for (auto& b : buffers_) {
        b.clear();
    }
}

int MonitoredUcb::choose(long /*t*/) {
    if (const auto forced = forced_exploration_arm(t_prime_, num_arms_, eta_)) {
        return *forced;
    }
    int best = 0;
    double best_index = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < num_arms_; ++i) {
        const auto& buf = buffers_[static_cast<std::size_t>(i)];
        if (buf.empty()) {
            return i;
        }
        double mean = 0.0;
        for (double x : buf) {
            mean += x;
        }
        mean /= static_cast<double>(buf.size());
        const double bonus = std::sqrt(2.0 * std::log(static_cast<double>(t_prime_) + 1.0) /
                                       static_cast<double>(buf.size()));
        if (mean + bonus > best_index) {
            best_index = mean + bonus;
            best = i;
        }
    }
    return best;
}

void MonitoredUcb::observe(int arm, double reward) {
    ++global_t_;
    ++t_prime_;
    auto& buf = buffers_[static_cast<std::size_t>(arm)];
    buf.push_back(reward);
    const long w = cfg_.mucb_window;
    if (static_cast<long>(buf.size()) >= w) {
        double first_half = 0.0;
        double second_half = 0.0;
        const std::size_t n = buf.size();
        const std::size_t half = static_cast<std::size_t>(w) / 2;
        for (std::size_t i = n - static_cast<std::size_t>(w); i < n - half; ++i) {
            first_half += buf[i];
        }
        for (std::size_t i = n - half; i < n; ++i) {
            second_half += buf[i];
        }
        if (std::abs(second_half - first_half) > threshold_) {
            detection_times_.push_back(global_t_);
            reset_everything();
        }
    }
}

nlohmann::json MonitoredUcb::describe() const {
    return {{"window", cfg_.mucb_window},
            {"threshold", threshold_},
            {"forced_eta", eta_},
            {"mucb_scale", cfg_.mucb_scale}};
}

OraclePolicy::OraclePolicy(const InstanceSpec& spec) : spec_(spec) {
    optimal_arm_ = gap_summary(spec).optimal_arm;
}

void OraclePolicy::begin(int /*num_arms*/, long /*horizon*/, std::uint64_t /*seed*/) {}

int OraclePolicy::choose(long t) {
    return optimal_arm_[static_cast<std::size_t>(spec_.epoch_of(t))];
}

void OraclePolicy::observe(int /*arm*/, double /*reward*/) {}

void UniformRandomPolicy::begin(int num_arms, long /*horizon*/, std::uint64_t seed) {
    num_arms_ = num_arms;
    rng_.emplace(mix_seed(seed, 0x7e57ab1e));
}

int UniformRandomPolicy::choose(long /*t*/) {
    return static_cast<int>(rng_->next_u64() % static_cast<std::uint64_t>(num_arms_));
}

void UniformRandomPolicy::observe(int /*arm*/, double /*reward*/) {}

}  // namespace htb
