#pragma once
/*
Robust mean estimation for heavy-tailed samples.

A stream is "heavy-tailed" with parameters (epsilon, v) when the centered
absolute moment of order 1+epsilon is bounded by v; the variance may be
infinite for epsilon < 1. The Catoni M-estimator is the root m of

  f(m) = sum_i phi_eps(lambda_i * (X_i - m)) = 0,

where phi_eps is the odd log-truncated influence function

  phi_eps(x) = sign(x) * log(1 + |x| + |x|^(1+eps) / (1+eps)).

f is continuous and nonincreasing in m, so the root is located by bisection.
Median-of-means is kept alongside as the estimator used by Robust UCB.
*/

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace htb {

// Heavy-tail moment parameters: E|X - EX|^(1+epsilon) <= v.
struct HeavyTailParams {
    double epsilon{1.0};  // in (0, 1]
    double v{1.0};        // positive, units of reward^(1+epsilon)
};

// Bisection settings. A search_radius of 0 means "derive from the data":
// the root of f always lies inside [min(X), max(X)], and confidence-interval
// endpoints use the wider data-plus-moment-scale radius computed by callers.
struct SolverConfig {
    double tolerance_xi{1e-9};
    double search_radius{0.0};
    int max_iterations{200};
};

struct EmptyInput : std::runtime_error {
    EmptyInput() : std::runtime_error("empty sample sequence") {}
};

struct NoRootInRadius : std::runtime_error {
    explicit NoRootInRadius(double radius)
        : std::runtime_error("no sign change of the Catoni equation in [-" +
                             std::to_string(radius) + ", " + std::to_string(radius) +
                             "]; increase search_radius") {}
};

double catoni_influence(double x, double epsilon);

// f(m) with per-sample weights, and the constant-weight fast path.
double influence_sum(std::span<const double> samples, std::span<const double> lambdas,
                     double epsilon, double m);
double influence_sum(std::span<const double> samples, double lambda, double epsilon, double m);

double catoni_estimate(std::span<const double> samples, std::span<const double> lambdas,
                       double epsilon, const SolverConfig& solver);

// Lower-median of the means of `block_count` contiguous, near-equal blocks.
double median_of_means(std::span<const double> samples, std::size_t block_count);

// Default bisection radius |max| + |min| + v^(1/(1+eps)) * log(T)^(eps/(1+eps)) + 1,
// large enough to bracket confidence-interval endpoints as well as the root.
double default_search_radius(double min_sample, double max_sample, double v,
                             double epsilon, double horizon);

// One bisection step contract shared by the estimator and the confidence
// sequences: f nonincreasing, f(lo) >= target >= f(hi) on entry; on exit
// hi - lo <= xi and the crossing lies in [lo, hi].
struct Bracket {
    double lo;
    double hi;
    double mid() const { return 0.5 * (lo + hi); }
};

template <class F>
Bracket bisect_nonincreasing(F&& f, double lo, double hi, double target, double xi,
                             int max_iterations) {
    for (int it = 0; it < max_iterations && (hi - lo) > xi; ++it) {
        const double m = 0.5 * (lo + hi);
        if (f(m) >= target) {
            lo = m;
        } else {
            hi = m;
        }
    }
    return {lo, hi};
}

}  // namespace htb
