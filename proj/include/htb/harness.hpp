#pragma once
/*
Experiment orchestration: seeded multi-trial runs with exact pseudo-regret
accounting, detection-delay experiments, the epoch-length assumption checker,
theoretical bound report, and deterministic result files (CSV trajectories
plus a JSON metadata sidecar embedding the resolved configuration and a
git-style content hash of the instance).

Pseudo-regret uses true means: each round adds the gap of the played arm in
the current epoch, so the ledger identity sum_j sum_i gap * pulls equals the
trajectory end exactly, independent of reward noise. Trials are parallel and
reduced in trial order, so results do not depend on scheduling.
*/

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "htb/detection.hpp"
#include "htb/environments.hpp"
#include "htb/policies.hpp"

namespace htb {

struct RegretLedger {
    std::vector<int> arm_sequence;                   // 0-based arm per round
    std::vector<double> per_round_regret;            // pseudo-regret increments
    std::vector<std::vector<long>> pulls_per_epoch;  // (Y+1) x K
    std::vector<long> detection_times;
    std::uint64_t seed{0};

    double total() const;
    std::vector<double> cumulative() const;
};

RegretLedger run_trial(const InstanceSpec& spec, Policy& policy, std::uint64_t seed);

std::unique_ptr<Policy> make_policy(const std::string& name, const InstanceSpec& spec,
                                    const AlgoConfig& cfg);

struct PolicyAggregate {
    std::string policy;
    std::vector<double> mean_cumulative;
    std::vector<double> std_cumulative;
    std::vector<RegretLedger> ledgers;
};

struct ExperimentResult {
    std::vector<PolicyAggregate> per_policy;
    nlohmann::json metadata;
};

// Per-trial seeds are seed_base + trial index; the reward stream depends on
// the seed only, never on the policy list or its order.
ExperimentResult run_experiment(const InstanceSpec& spec,
                                const std::vector<std::string>& policy_names,
                                const AlgoConfig& cfg, int n_trials, std::uint64_t seed_base,
                                int max_threads = 0);

struct DelayOutcome {
    std::vector<double> delays;      // (tau - t_c)+ per trial; censored at T - t_c
    std::vector<bool> censored;      // no trip by T
    std::vector<bool> false_alarm;   // tripped at or before t_c
    std::vector<long> trip_times;    // 0 when no trip
    int false_alarm_count{0};
    double median_delay() const;
};

DelayOutcome detection_delay_experiment(const ArmDistribution& pre, const ArmDistribution& post,
                                        long t_c, long horizon, CsKind kind, int n_trials,
                                        std::uint64_t seed_base, const DetectorConfig& config,
                                        int max_threads = 0);

struct EpochLengthCheck {
    std::vector<double> required_pulls;  // L_j per epoch (0 when no adjacent change)
    std::vector<bool> holds_per_epoch;
    bool holds{false};
};

// Checks |E_j| >= 2 n_min + 2 ceil(L_j K / eta) per epoch with
// L_j = 6 * 236^((1+eps)/eps) v^(1/eps) (loglog(1/dtilde) + log T) / dtilde^((1+eps)/eps),
// dtilde the smaller mean change at the epoch's boundaries (first/last epoch
// boundaries that do not exist count as infinite, i.e. no constraint).
EpochLengthCheck check_epoch_length_assumption(const InstanceSpec& spec, double eta,
                                               std::size_t n_min);

// Minimax lower bound (1/25) (K * epochs)^(eps/(1+eps)) (v T)^(1/(1+eps)).
double minimax_regret_lower_bound(int num_arms, int epochs, long horizon,
                                  const HeavyTailParams& ht);

struct BoundReport {
    double lower_bound{0.0};
    std::vector<double> required_pulls;      // L_j values
    bool assumption_holds{false};
    std::vector<double> delay_bounds;        // per epoch, from its dtilde
    double term_detection{0.0};              // (A), order-level constants
    double term_stationary{0.0};             // (B)
    double term_exploration{0.0};            // (C)
    bool infinite_bound{false};              // some dtilde is zero
};

BoundReport regret_bound_report(const InstanceSpec& spec, double eta, std::size_t n_min);

// SHA-1 of "blob <len>\0<content>", hex-encoded.
std::string git_blob_sha1(const std::string& content);

// CSV schema: round,mean_regret,std_regret[,policy]; one row per round per
// policy, byte-deterministic for fixed inputs.
void write_results_csv(const ExperimentResult& result, const std::string& path);
void write_metadata_json(const ExperimentResult& result, const std::string& path);

nlohmann::json algo_config_to_json(const AlgoConfig& cfg);
AlgoConfig algo_config_from_json(const nlohmann::json& j);

}  // namespace htb
