#pragma once
/*
Anytime-valid confidence sequences for the mean of a heavy-tailed stream.

The Catoni CS at sample count t is the set

  CI_t = { m : |f_t(m)| <= B_t },   f_t(m) = sum_i phi_eps(lambda * (X_i - m)),
  B_t  = v/(1+eps) * t * lambda^(1+eps) + log(2 / gamma_cell),

where time is partitioned into the exponential grid t_j = e^j ("stitching"):
while t lies in cell j, every sample is weighted by the same

  Lambda_j = ( log(2/gamma_j) * e^(-j) / v )^(1/(1+eps)),   gamma_j = gamma/(j+1)^2,

and the cell-level budget gamma_j is spent on that cell's boundary. The
weights depend only on the sample count, never on the data. f_t is strictly
decreasing in m, so both interval endpoints are located by bisection.

A CS reports the running intersection of its per-step intervals; it stays
trivial, (-inf, +inf), until it holds n_min samples and the width-control
equation becomes solvable (width_control_feasible). CatoniCs updates are
incremental: the endpoint sums f_t(lower), f_t(upper) are maintained per
sample and full recomputation happens only at cell boundaries or when an
endpoint actually tightens.

An empirical-Bernstein CS over the same stitching grid is provided as the
finite-variance baseline.
*/

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "htb/estimators.hpp"

namespace htb {

struct StitchSchedule {
    double gamma{0.05};  // overall confidence budget, in (0,1)
    double v{1.0};
    double epsilon{1.0};
};

struct ConfidenceInterval {
    double lower{-std::numeric_limits<double>::infinity()};
    double upper{std::numeric_limits<double>::infinity()};

    bool trivial() const {
        return lower == -std::numeric_limits<double>::infinity() &&
               upper == std::numeric_limits<double>::infinity();
    }
    bool empty() const { return lower > upper; }
    bool contains(double m) const { return lower <= m && m <= upper; }
    double width() const { return upper - lower; }
};

// Index j of the stitching cell with e^j < sample_ordinal <= e^(j+1)
// (j = 0 for the first sample).
int stitch_cell(std::size_t sample_ordinal);

// Integer cell boundary floor(e^(j+1)): the largest count still in cell j.
std::size_t stitch_cell_end(int cell);

double cell_gamma(const StitchSchedule& schedule, int cell);

// The constant weight used while the sample count sits in its cell.
// Depends only on the ordinal and the schedule, never on data.
double stitched_lambda(std::size_t sample_ordinal, const StitchSchedule& schedule);

// Threshold B_t for a count of t samples at cell-level confidence gamma_cell.
double catoni_threshold(std::size_t t, const StitchSchedule& schedule, double gamma_cell);

// Solvability of the width-control equation at count t and failure budget theta.
bool width_control_feasible(std::size_t t, const StitchSchedule& schedule, double theta);

// Deterministic width bound 68 v^(1/(1+eps)) (1+eps) ((log(2/gamma) +
// 2 log log(e^2 t)) / t)^(eps/(1+eps)) holding per step with prob >= 1 - gamma/4.
double catoni_width_bound(std::size_t t, const StitchSchedule& schedule);

// Per-step Catoni interval for the full sample view. Returns the trivial
// interval while samples.size() < n_min or the width-control equation is
// unsolvable (theta = gamma/4). A side whose threshold crossing cannot be
// bracketed stays unbounded.
ConfidenceInterval catoni_interval(std::span<const double> samples,
                                   const StitchSchedule& schedule, double gamma_cell,
                                   const SolverConfig& solver, std::size_t n_min = 0);

// Empirical-Bernstein interval at count t over the same stitching grid:
// mean +/- sigma_hat sqrt(2 L_j / t) + kBernsteinRangeSlack range_hat L_j / t
// with L_j = log(2/gamma_j). Trivial below kBernsteinMinCount samples.
inline constexpr std::size_t kBernsteinMinCount = 10;
inline constexpr double kBernsteinRangeSlack = 0.75;
ConfidenceInterval empirical_bernstein_interval(std::span<const double> samples, double gamma);

// One Catoni confidence sequence with running intersection.
class CatoniCs {
public:
    // With track_endpoints = false the running interval is never located
    // (stays trivial) and only the probe membership test runs; updates are
    // then O(1) amortized regardless of stream length.
    CatoniCs(const StitchSchedule& schedule, std::size_t start_index, std::size_t n_min,
             const SolverConfig& solver, double horizon_hint,
             std::optional<double> probe = std::nullopt, bool track_endpoints = true);

    // Feed the next observation. `history` is the sample view since this CS
    // started, with history.back() == x.
    void update(double x, std::span<const double> history);

    const ConfidenceInterval& running() const { return running_; }
    std::size_t count() const { return count_; }
    std::size_t start_index() const { return start_; }
    bool informative() const { return informative_; }

    // True once the probe point has fallen outside any per-step interval
    // (equivalently: outside the running intersection).
    bool probe_ever_missed() const { return probe_missed_; }

private:
    void enter_cell(int cell);
    void rescan(std::span<const double> history);
    double threshold() const;
    double search_radius(double reach) const;

    StitchSchedule schedule_;
    SolverConfig solver_;
    std::size_t start_;
    std::size_t n_min_;
    double horizon_;

    std::size_t count_{0};
    int cell_{0};
    std::size_t cell_end_{0};
    double lambda_{0.0};
    double lambda_pow_{0.0};  // lambda^(1+eps)
    double log_term_{0.0};    // log(2/gamma_cell)

    ConfidenceInterval running_{};
    bool informative_{false};
    double sum_lo_{0.0};  // f_t(running_.lower)
    double sum_hi_{0.0};  // f_t(running_.upper)
    double min_x_{std::numeric_limits<double>::infinity()};
    double max_x_{-std::numeric_limits<double>::infinity()};

    std::optional<double> probe_;
    double sum_probe_{0.0};
    bool probe_missed_{false};
    bool track_endpoints_{true};
};

// The empirical-Bernstein counterpart; interval is closed form so the
// running intersection is maintained directly.
class BernsteinCs {
public:
    BernsteinCs(double gamma, std::size_t start_index, std::size_t n_min);

    void update(double x);

    const ConfidenceInterval& running() const { return running_; }
    std::size_t count() const { return count_; }
    std::size_t start_index() const { return start_; }
    bool informative() const { return informative_; }

private:
    double gamma_;
    std::size_t start_;
    std::size_t n_min_;
    std::size_t count_{0};
    double mean_{0.0};
    double m2_{0.0};
    double min_x_{std::numeric_limits<double>::infinity()};
    double max_x_{-std::numeric_limits<double>::infinity()};
    ConfidenceInterval running_{};
    bool informative_{false};
};

}  // namespace htb
