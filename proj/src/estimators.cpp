#include "htb/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace htb {

double catoni_influence(double x, double epsilon) {
    const double a = std::abs(x);
    const double tail = (epsilon == 1.0) ? 0.5 * a * a
                                         : std::pow(a, 1.0 + epsilon) / (1.0 + epsilon);
    const double mag = std::log1p(a + tail);
    return std::signbit(x) ? -mag : mag;
}

double influence_sum(std::span<const double> samples, std::span<const double> lambdas,
                     double epsilon, double m) {
    double s = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        s += catoni_influence(lambdas[i] * (samples[i] - m), epsilon);
    }
    return s;
}

double influence_sum(std::span<const double> samples, double lambda, double epsilon, double m) {
    double s = 0.0;
    for (double x : samples) {
        s += catoni_influence(lambda * (x - m), epsilon);
    }
    return s;
}

double catoni_estimate(std::span<const double> samples, std::span<const double> lambdas,
                       double epsilon, const SolverConfig& solver) {
    if (samples.empty()) {
        throw EmptyInput{};
    }
    if (lambdas.size() != samples.size()) {
        throw std::invalid_argument("catoni_estimate: samples and lambdas differ in length");
    }
    auto f = [&](double m) { return influence_sum(samples, lambdas, epsilon, m); };

    double radius = solver.search_radius;
    if (radius <= 0.0) {
        const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
        radius = std::max(std::abs(*lo_it), std::abs(*hi_it)) + 1.0;
    }
    if (!(f(-radius) >= 0.0 && f(radius) <= 0.0)) {
        throw NoRootInRadius{radius};
    }
    return bisect_nonincreasing(f, -radius, radius, 0.0, solver.tolerance_xi,
                                solver.max_iterations)
        .mid();
}

double median_of_means(std::span<const double> samples, std::size_t block_count) {
    if (samples.empty()) {
        throw EmptyInput{};
    }
    if (block_count == 0 || block_count > samples.size()) {
        throw std::invalid_argument("median_of_means: block_count must be in [1, n]");
    }
    const std::size_t n = samples.size();
    const std::size_t base = n / block_count;
    const std::size_t extra = n % block_count;

    std::vector<double> means;
    means.reserve(block_count);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < block_count; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            s += samples[pos + i];
        }
        means.push_back(s / static_cast<double>(len));
        pos += len;
    }
    // Lower median: element (k-1)/2 of the sorted block means.
    const std::size_t mid = (block_count - 1) / 2;
    std::nth_element(means.begin(), means.begin() + static_cast<std::ptrdiff_t>(mid), means.end());
    return means[mid];
}

double default_search_radius(double min_sample, double max_sample, double v,
                             double epsilon, double horizon) {
    const double log_t = std::log(std::max(horizon, 3.0));
    return std::abs(max_sample) + std::abs(min_sample) +
           std::pow(v, 1.0 / (1.0 + epsilon)) * std::pow(log_t, epsilon / (1.0 + epsilon)) + 1.0;
}

}  // namespace htb
