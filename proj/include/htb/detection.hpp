#pragma once
/*
Change-point detection by repeated confidence sequences.

A detector watches one stream. Every round it feeds the new observation to
all active confidence sequences and (unless thinned) starts a fresh CS whose
stream begins at that observation. A change is declared at the first round
where the intersection of all running CS intervals is empty. Intervals are
one-dimensional, so by Helly's property the family intersection is empty iff
max(lower bounds) > min(upper bounds); per-CS running bounds only move
inward, which makes the two scalars maintainable in O(1) per CS update.

Catoni CSs cover the heavy-tailed case; empirical-Bernstein CSs are the
finite-variance baseline.
*/

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "htb/confseq.hpp"
#include "htb/estimators.hpp"

namespace htb {

struct SteppedAfterTrip : std::logic_error {
    SteppedAfterTrip() : std::logic_error("detector stepped after tripping; reset it first") {}
};

enum class CsKind { catoni, bernstein };

struct DetectorConfig {
    StitchSchedule schedule{};
    std::size_t n_min{0};  // per-CS informativeness gate
    SolverConfig solver{};
    // When set, new CSs start only at stream ordinals on a geometric grid
    // with this ratio; default starts one CS per sample.
    std::optional<double> thinning{};
    double horizon_hint{1000.0};
};

// Two-scalar emptiness test for a family of intervals.
bool interval_family_empty(std::span<const double> lowers, std::span<const double> uppers);

struct DelayBoundInputs {
    double delta{1.0};  // mean-change magnitude
    HeavyTailParams ht{};
    double horizon{2.0};  // known upper bound T on the change point
};

// High-probability detection-delay bound
// 6 * 472^((1+eps)/eps) * v^(1/eps) * (loglog(1/delta) + log T) / delta^((1+eps)/eps),
// with the loglog term floored at zero.
double detection_delay_bound(const DelayBoundInputs& in);

// Default informativeness gate ceil(68 (1+eps)/eps ln T).
std::size_t default_n_min(double horizon, double epsilon);

class ChangeDetector {
public:
    ChangeDetector(CsKind kind, DetectorConfig config);

    // Feeds the next observation, starting a new CS per the thinning grid.
    // Returns the trip index (1-based ordinal of the processed sample) the
    // first time the family intersection empties. Throws SteppedAfterTrip
    // when called on an already-tripped detector.
    std::optional<std::size_t> step(double x);

    // Same, with the CS-start decision made by the caller.
    std::optional<std::size_t> step_with(double x, bool start_new_cs);

    void reset();

    bool tripped() const { return tripped_at_.has_value(); }
    std::optional<std::size_t> tripped_at() const { return tripped_at_; }
    std::size_t samples_seen() const { return stream_.size(); }
    std::size_t active_cs() const;
    double max_lower() const { return max_lower_; }
    double min_upper() const { return min_upper_; }
    const DetectorConfig& config() const { return config_; }

private:
    bool grid_wants_start() const;

    CsKind kind_;
    DetectorConfig config_;
    std::vector<double> stream_;
    std::vector<CatoniCs> catoni_;
    std::vector<BernsteinCs> bernstein_;
    double max_lower_{-std::numeric_limits<double>::infinity()};
    double min_upper_{std::numeric_limits<double>::infinity()};
    std::optional<std::size_t> tripped_at_{};
    std::size_t next_grid_start_{1};
};

}  // namespace htb
