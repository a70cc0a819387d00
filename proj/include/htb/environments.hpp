#pragma once
/*
Piecewise-stationary heavy-tailed bandit instances.

An instance fixes K arms, a horizon T, breakpoints 0 < b_1 < ... < b_Y < T,
and one reward distribution per (epoch, arm). Round t belongs to epoch j when
b_j < t <= b_{j+1} (with b_0 = 0, b_{Y+1} = T), so a breakpoint value is the
last round of its epoch. Every arm-epoch distribution must satisfy the moment
bound E|X - EX|^(1+eps) <= v.

The two-point prototype family rho_y (mass at 0 plus one positive atom) is
the worst-case construction behind the minimax lower bound; its mean depends
only on (y, delta) while its moment scales with the internal normalization,
which make_minimax_instance shrinks until the family fits the moment class.
*/

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "htb/estimators.hpp"
#include "htb/rng.hpp"

namespace htb {

struct Gaussian {
    double mean{0.0};
    double sigma{1.0};
};
struct Laplace {
    double mean{0.0};
    double scale{1.0};
};
// Pareto(shape, scale) shifted so the distribution mean equals `mean`.
struct ShiftedPareto {
    double mean{0.0};
    double shape{2.0};
    double scale{1.0};
};
struct TwoPoint {
    double mass_at_zero{1.0};
    double atom{0.0};
};

using ArmDistribution = std::variant<Gaussian, Laplace, ShiftedPareto, TwoPoint>;

struct MomentDiverges : std::runtime_error {
    MomentDiverges() : std::runtime_error("centered moment diverges: shape <= order") {}
};
struct InfeasibleMoment : std::runtime_error {
    InfeasibleMoment() : std::runtime_error("no positive scale satisfies the moment bound") {}
};
struct MissingColumn : std::runtime_error {
    explicit MissingColumn(const std::string& name)
        : std::runtime_error("column not found in header: " + name) {}
};
struct ParseError : std::runtime_error {
    explicit ParseError(std::size_t line_number)
        : std::runtime_error("unparseable value at line " + std::to_string(line_number)),
          line(line_number) {}
    std::size_t line;
};

double dist_mean(const ArmDistribution& dist);
double sample_dist(const ArmDistribution& dist, Rng& rng);

// E|X - EX|^order. Closed form for TwoPoint and Gaussian; adaptive quadrature
// (relative tolerance 1e-6) for Laplace and ShiftedPareto. Throws
// MomentDiverges when the Pareto shape is <= order.
double centered_moment(const ArmDistribution& dist, double order);

// Pareto with the given shape whose mean is `mean`, scale shrunk from 1 by
// bisection until the centered (1+eps)-moment is <= v.
ArmDistribution make_shifted_pareto(double mean, const HeavyTailParams& ht, double shape);

struct InstanceSpec {
    int num_arms{1};
    long horizon{1};
    std::vector<long> breakpoints;
    std::vector<std::vector<ArmDistribution>> arms_per_epoch;  // (Y+1) x K
    HeavyTailParams ht{};
    std::string name;

    int epoch_count() const { return static_cast<int>(breakpoints.size()) + 1; }
    int epoch_of(long t) const;
    long epoch_length(int epoch) const;
    double mean(int epoch, int arm) const;
    // Every violated invariant, one message each; empty when valid.
    std::vector<std::string> validate() const;
};

struct GapSummary {
    double delta_min{0.0};                 // smallest nonzero-arm change over all breakpoints
    std::vector<double> change_into;       // per epoch: min over arms of |mean change|, inf for epoch 0
    std::vector<double> delta_min_tilde;   // per epoch: min of the boundary changes
    std::vector<double> gap_min;           // per epoch: smallest positive suboptimality gap
    std::vector<double> gap_max;           // per epoch: largest suboptimality gap
    std::vector<int> optimal_arm;          // per epoch, ties to the lowest index
};

GapSummary gap_summary(const InstanceSpec& spec);

double sample_reward(const InstanceSpec& spec, int arm, long t, Rng& rng);

// Two-point prototype rho_y with internal normalization vtilde:
// P(X = atom) = vtilde^(-1/eps) y^((1+eps)/eps), atom = vtilde^(1/eps) delta^(-1/eps).
TwoPoint two_point_prototype(double y, double delta, double epsilon, double vtilde);

// Worst-case instance: `epochs` equal epochs of length T/epochs, a rotating
// best arm with mean gap exactly delta = v^(1/(1+eps)) (2 log2 K Y / (16 T))^(eps/(1+eps)).
InstanceSpec make_minimax_instance(int num_arms, int epochs, long horizon,
                                   const HeavyTailParams& ht);

struct SegmentationResult {
    std::vector<std::size_t> breakpoints;  // 1-based last index of each segment but the final
    std::vector<double> levels;            // segment means
    double sse{0.0};
};

// Globally optimal piecewise-constant fit (total squared error) by dynamic
// programming with O(1) segment cost from prefix sums.
SegmentationResult fit_piecewise_constant(std::span<const double> series, int segment_count);

std::vector<double> load_price_csv(const std::string& path, const std::string& close_column,
                                   char delimiter = ',');

// Per-arm piecewise-constant fits on series rescaled to [0, 10]; global
// breakpoints are the union of per-arm ones; each arm-epoch level becomes a
// moment-checked Pareto arm.
InstanceSpec instance_from_prices(const std::vector<std::vector<double>>& per_arm_series,
                                  const std::vector<int>& segment_counts,
                                  const HeavyTailParams& ht, double pareto_shape);

nlohmann::json instance_to_json(const InstanceSpec& spec);
InstanceSpec instance_from_json(const nlohmann::json& j);

}  // namespace htb
