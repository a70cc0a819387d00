#pragma once
/*
Bandit policies.

RobustCpdUcb plays a stationary heavy-tailed regret minimizer (Robust UCB
with median-of-means) on the history since the last reset, injects one forced
pull of every arm per cycle of floor(K/eta) rounds, and feeds each arm's
rewards to a per-arm Catoni change detector once the arm holds n_min samples.
When any detector's CS family empties, everything is reset and, on the
adaptive schedule, eta advances to eta0 sqrt((j+1) K log T / T).

Sliding-Window UCB and Monitored UCB are the sub-gaussian baselines; both are
parameterized the way the corresponding literature recipes are usually run,
with every knob recorded in experiment metadata.
*/

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "htb/detection.hpp"
#include "htb/environments.hpp"
#include "htb/estimators.hpp"
#include "htb/rng.hpp"

namespace htb {

struct AlgoConfig {
    double eta0{1.0};
    bool adaptive_eta{true};
    std::optional<double> fixed_eta{};
    double gamma{0.0};  // 0 means the horizon default 2/T^3
    std::optional<std::size_t> n_min_override{};
    SolverConfig solver{};
    std::optional<double> thinning{};

    // Robust UCB: mom + ucb_scale (12 v)^(1/(1+eps)) (16 log t^2 / n)^(eps/(1+eps));
    // block count min(n, ceil(8 log T^2) + 1) unless overridden.
    double ucb_scale{1.0};
    std::optional<std::size_t> mom_blocks{};

    // Sliding-Window UCB: window ceil(sqrt(T log T)) unless set; bonus
    // sw_scale sqrt(2 log(min(t, window)) / n_window).
    std::optional<long> sw_window{};
    double sw_scale{1.0};

    // Monitored UCB: even window, two-halves threshold
    // mucb_scale sqrt(w/2 log(2 K T^2)) unless given explicitly.
    long mucb_window{100};
    std::optional<double> mucb_threshold{};
    double mucb_scale{1.0};
    double mucb_eta{0.0};  // 0 means sqrt(K log T / T)
};

// Forced-exploration rule: with cycle length m = floor(K/eta) and
// r = t' mod m, rounds with r in {1..K} play arm r (0-based: r-1); when the
// cycle is degenerate (m <= K), r = 0 plays the last arm so every round is
// forced. Returns nothing when the sub-policy should choose.
std::optional<int> forced_exploration_arm(long t_prime, int num_arms, double eta);

// eta_{j+1} = eta0 sqrt((j+1) K log(T) / T), capped at K.
double eta_schedule(int detections_so_far, double eta0, int num_arms, long horizon);

// Median-of-means UCB choice over per-arm histories; `t` is the 1-based round
// count the confidence level is tied to. Unpulled arms first, ties to the
// lowest index.
int robust_ucb_choose(const std::vector<std::vector<double>>& history, long t,
                      const HeavyTailParams& ht, long horizon, const AlgoConfig& cfg);

class Policy {
public:
    virtual ~Policy() = default;
    virtual void begin(int num_arms, long horizon, std::uint64_t seed) = 0;
    virtual int choose(long t) = 0;
    virtual void observe(int arm, double reward) = 0;
    virtual std::string name() const = 0;
    virtual const std::vector<long>& detections() const;
    // Resolved knobs after begin(), for result metadata.
    virtual nlohmann::json describe() const { return nlohmann::json::object(); }
};

class RobustUcb : public Policy {
public:
    explicit RobustUcb(HeavyTailParams ht, AlgoConfig cfg = {});
    void begin(int num_arms, long horizon, std::uint64_t seed) override;
    int choose(long t) override;
    void observe(int arm, double reward) override;
    std::string name() const override { return "robust_ucb"; }
    nlohmann::json describe() const override;

private:
    HeavyTailParams ht_;
    AlgoConfig cfg_;
    long horizon_{0};
    std::vector<std::vector<double>> buffers_;
};

class RobustCpdUcb : public Policy {
public:
    explicit RobustCpdUcb(HeavyTailParams ht, AlgoConfig cfg = {});
    void begin(int num_arms, long horizon, std::uint64_t seed) override;
    int choose(long t) override;
    void observe(int arm, double reward) override;
    std::string name() const override { return "robust_cpd_ucb"; }
    const std::vector<long>& detections() const override { return detection_times_; }
    nlohmann::json describe() const override;

    long since_reset() const { return t_prime_; }
    double current_eta() const;
    std::size_t n_min() const { return n_min_; }

private:
    void reset_everything();

    HeavyTailParams ht_;
    AlgoConfig cfg_;
    int num_arms_{0};
    long horizon_{0};
    double gamma_{0.0};
    std::size_t n_min_{0};

    long t_prime_{0};
    long global_t_{0};
    int detections_so_far_{0};
    std::vector<std::vector<double>> buffers_;  // since last reset
    std::vector<long> pull_counts_;             // since last reset
    std::vector<ChangeDetector> detectors_;
    std::vector<long> detection_times_;
};

class SlidingWindowUcb : public Policy {
public:
    explicit SlidingWindowUcb(AlgoConfig cfg = {});
    void begin(int num_arms, long horizon, std::uint64_t seed) override;
    int choose(long t) override;
    void observe(int arm, double reward) override;
    std::string name() const override { return "sliding_window_ucb"; }
    nlohmann::json describe() const override;
    long window() const { return window_; }

private:
    AlgoConfig cfg_;
    int num_arms_{0};
    long window_{1};
    std::deque<std::pair<int, double>> recent_;
    std::vector<double> sums_;
    std::vector<long> counts_;
};

class MonitoredUcb : public Policy {
public:
    explicit MonitoredUcb(AlgoConfig cfg = {});
    void begin(int num_arms, long horizon, std::uint64_t seed) override;
    int choose(long t) override;
    void observe(int arm, double reward) override;
    std::string name() const override { return "monitored_ucb"; }
    const std::vector<long>& detections() const override { return detection_times_; }
    nlohmann::json describe() const override;
    double threshold() const { return threshold_; }

private:
    void reset_everything();

    AlgoConfig cfg_;
    int num_arms_{0};
    long horizon_{0};
    double eta_{0.0};
    double threshold_{0.0};
    long t_prime_{0};
    long global_t_{0};
    std::vector<std::vector<double>> buffers_;
    std::vector<long> detection_times_;
};

// Plays the per-epoch optimal arm; zero pseudo-regret by construction.
class OraclePolicy : public Policy {
public:
    explicit OraclePolicy(const InstanceSpec& spec);
    void begin(int num_arms, long horizon, std::uint64_t seed) override;
    int choose(long t) override;
    void observe(int arm, double reward) override;
    std::string name() const override { return "oracle"; }

private:
    InstanceSpec spec_;
    std::vector<int> optimal_arm_;
};

class UniformRandomPolicy : public Policy {
public:
    void begin(int num_arms, long horizon, std::uint64_t seed) override;
    int choose(long t) override;
    void observe(int arm, double reward) override;
    std::string name() const override { return "uniform_random"; }

private:
    int num_arms_{0};
    std::optional<Rng> rng_;
};

}  // namespace htb
