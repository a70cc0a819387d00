#include "htb/confseq.hpp"

#include <algorithm>
#include <cmath>

namespace htb {

namespace {

constexpr std::size_t kHugeCount = static_cast<std::size_t>(1) << 62;

// Expands `edge` away from the bracket until pred(edge) holds. pred is
// monotone in the expansion direction, so this always terminates: f drifts
// to +/- infinity in m.
template <class Pred>
double expand_until(double edge, double direction, Pred&& pred) {
    double step = std::max(1.0, std::abs(edge));
    while (!pred(edge)) {
        edge += direction * step;
        step *= 2.0;
        if (!std::isfinite(edge)) {
            return direction > 0 ? std::numeric_limits<double>::max()
                                 : std::numeric_limits<double>::lowest();
        }
    }
    return edge;
}

// Both threshold crossings of the nonincreasing f: lower solves f = +B,
// upper solves f = -B. Returns xi-wide outer brackets.
struct EndpointBrackets {
    Bracket lower;
    Bracket upper;
};

template <class F>
Bracket locate_crossing(F&& f, double target, double radius, double xi, int max_iterations) {
    double lo = -radius;
    double hi = radius;
    if (f(lo) < target) {
        lo = expand_until(lo, -1.0, [&](double m) { return f(m) >= target; });
    }
    if (f(hi) >= target) {
        hi = expand_until(hi, +1.0, [&](double m) { return f(m) < target; });
    }
    return bisect_nonincreasing(f, lo, hi, target, xi, max_iterations);
}

template <class F>
EndpointBrackets locate_interval(F&& f, double threshold, double radius, const SolverConfig& sc) {
    EndpointBrackets out;
    out.lower = locate_crossing(f, +threshold, radius, sc.tolerance_xi, sc.max_iterations);
    out.upper = locate_crossing(f, -threshold, radius, sc.tolerance_xi, sc.max_iterations);
    return out;
}

}  // namespace

std::size_t stitch_cell_end(int cell) {
    const double e = std::exp(static_cast<double>(cell + 1));
    if (e >= static_cast<double>(kHugeCount)) {
        return kHugeCount;
    }
    return static_cast<std::size_t>(std::floor(e));
}

int stitch_cell(std::size_t sample_ordinal) {
    int j = 0;
    while (sample_ordinal > stitch_cell_end(j)) {
        ++j;
    }
    return j;
}

double cell_gamma(const StitchSchedule& schedule, int cell) {
    const double k = static_cast<double>(cell) + 1.0;
    return schedule.gamma / (k * k);
}

double stitched_lambda(std::size_t sample_ordinal, const StitchSchedule& schedule) {
    const int j = stitch_cell(sample_ordinal);
    const double lg = std::log(2.0 / cell_gamma(schedule, j));
    return std::pow(lg * std::exp(-static_cast<double>(j)) / schedule.v,
                    1.0 / (1.0 + schedule.epsilon));
}

double catoni_threshold(std::size_t t, const StitchSchedule& schedule, double gamma_cell) {
    const double lambda = stitched_lambda(t, schedule);
    const double sum_pow = static_cast<double>(t) * std::pow(lambda, 1.0 + schedule.epsilon);
    return schedule.v / (1.0 + schedule.epsilon) * sum_pow + std::log(2.0 / gamma_cell);
}

bool width_control_feasible(std::size_t t, const StitchSchedule& schedule, double theta) {
    const double eps = schedule.epsilon;
    const double lambda = stitched_lambda(t, schedule);
    const double sum_pow = static_cast<double>(t) * std::pow(lambda, 1.0 + eps);
    const double sum_lam = static_cast<double>(t) * lambda;
    const double lhs = std::pow(sum_pow, 1.0 / eps) * std::pow(sum_lam, -(1.0 + eps) / eps) *
                       (5.0 * sum_pow * schedule.v / (1.0 + eps) +
                        2.0 * std::log(2.0 / schedule.gamma) + 2.0 * std::log(2.0 / theta));
    return lhs <= eps / (1.0 + eps);
}

double catoni_width_bound(std::size_t t, const StitchSchedule& schedule) {
    const double eps = schedule.epsilon;
    const double td = static_cast<double>(t);
    const double num = std::log(2.0 / schedule.gamma) + 2.0 * std::log(std::log(M_E * M_E * td));
    return 68.0 * std::pow(schedule.v, 1.0 / (1.0 + eps)) * (1.0 + eps) *
           std::pow(num / td, eps / (1.0 + eps));
}

ConfidenceInterval catoni_interval(std::span<const double> samples,
                                   const StitchSchedule& schedule, double gamma_cell,
                                   const SolverConfig& solver, std::size_t n_min) {
    const std::size_t t = samples.size();
    if (t == 0 || t < n_min || !width_control_feasible(t, schedule, schedule.gamma / 4.0)) {
        return {};
    }
    const double lambda = stitched_lambda(t, schedule);
    const double threshold = catoni_threshold(t, schedule, gamma_cell);
    auto f = [&](double m) { return influence_sum(samples, lambda, schedule.epsilon, m); };

    const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
    double radius = solver.search_radius;
    if (radius <= 0.0) {
        radius = default_search_radius(*min_it, *max_it, schedule.v, schedule.epsilon,
                                       static_cast<double>(std::max<std::size_t>(t, 3)));
    }
    const auto brackets = locate_interval(f, threshold, radius, solver);
    return {brackets.lower.lo, brackets.upper.hi};
}

ConfidenceInterval empirical_bernstein_interval(std::span<const double> samples, double gamma) {
    const std::size_t t = samples.size();
    if (t < kBernsteinMinCount) {
        return {};
    }
    double mean = 0.0;
    for (double x : samples) {
        mean += x;
    }
    mean /= static_cast<double>(t);
    double m2 = 0.0;
    for (double x : samples) {
        m2 += (x - mean) * (x - mean);
    }
    const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());

    const double td = static_cast<double>(t);
    const double sigma = std::sqrt(m2 / td);
    const double big_l = std::log(2.0 / (gamma / std::pow(stitch_cell(t) + 1.0, 2.0)));
    const double half = sigma * std::sqrt(2.0 * big_l / td) +
                        kBernsteinRangeSlack * (*max_it - *min_it) * big_l / td;
    return {mean - half, mean + half};
}

CatoniCs::CatoniCs(const StitchSchedule& schedule, std::size_t start_index, std::size_t n_min,
                   const SolverConfig& solver, double horizon_hint, std::optional<double> probe,
                   bool track_endpoints)
    : schedule_(schedule),
      solver_(solver),
      start_(start_index),
      n_min_(n_min),
      horizon_(horizon_hint),
      probe_(probe),
      track_endpoints_(track_endpoints) {}

double CatoniCs::threshold() const {
    return schedule_.v / (1.0 + schedule_.epsilon) * static_cast<double>(count_) * lambda_pow_ +
           log_term_;
}

double CatoniCs::search_radius(double reach) const {
    if (solver_.search_radius > 0.0) {
        return std::max(solver_.search_radius, reach);
    }
    return std::max(default_search_radius(min_x_, max_x_, schedule_.v, schedule_.epsilon,
                                          std::max(horizon_, static_cast<double>(count_))),
                    reach);
}

void CatoniCs::enter_cell(int cell) {
    cell_ = cell;
    cell_end_ = stitch_cell_end(cell);
    const double gamma_cell = cell_gamma(schedule_, cell);
    log_term_ = std::log(2.0 / gamma_cell);
    lambda_ = std::pow(log_term_ * std::exp(-static_cast<double>(cell)) / schedule_.v,
                       1.0 / (1.0 + schedule_.epsilon));
    lambda_pow_ = std::pow(lambda_, 1.0 + schedule_.epsilon);
}

void CatoniCs::rescan(std::span<const double> history) {
    if (probe_) {
        sum_probe_ = influence_sum(history, lambda_, schedule_.epsilon, *probe_);
    }
    if (informative_ && track_endpoints_ && !running_.trivial() && !running_.empty()) {
        sum_lo_ = influence_sum(history, lambda_, schedule_.epsilon, running_.lower);
        sum_hi_ = influence_sum(history, lambda_, schedule_.epsilon, running_.upper);
    }
}

void CatoniCs::update(double x, std::span<const double> history) {
    ++count_;
    min_x_ = std::min(min_x_, x);
    max_x_ = std::max(max_x_, x);

    if (count_ == 1 || count_ > cell_end_) {
        enter_cell(count_ == 1 ? 0 : cell_ + 1);
        rescan(history);
    } else {
        const double eps = schedule_.epsilon;
        if (probe_) {
            sum_probe_ += catoni_influence(lambda_ * (x - *probe_), eps);
        }
        if (informative_ && track_endpoints_ && !running_.empty()) {
            sum_lo_ += catoni_influence(lambda_ * (x - running_.lower), eps);
            sum_hi_ += catoni_influence(lambda_ * (x - running_.upper), eps);
        }
    }

    if (!informative_) {
        if (count_ >= n_min_ &&
            width_control_feasible(count_, schedule_, schedule_.gamma / 4.0)) {
            informative_ = true;
            const double b = threshold();
            if (probe_ && !probe_missed_ && std::abs(sum_probe_) > b) {
                probe_missed_ = true;
            }
            if (track_endpoints_) {
                auto f = [&](double m) {
                    return influence_sum(history, lambda_, schedule_.epsilon, m);
                };
                const auto brackets = locate_interval(f, b, search_radius(1.0), solver_);
                running_ = {brackets.lower.lo, brackets.upper.hi};
                sum_lo_ = f(running_.lower);
                sum_hi_ = f(running_.upper);
            }
        }
        return;
    }

    const double b = threshold();
    if (probe_ && !probe_missed_ && std::abs(sum_probe_) > b) {
        probe_missed_ = true;
    }
    if (!track_endpoints_ || running_.empty()) {
        return;  // once empty, stays empty: intersections never grow
    }

    auto f = [&](double m) { return influence_sum(history, lambda_, schedule_.epsilon, m); };

    // New interval's lower end moved past ours: re-locate the f = +B crossing.
    if (sum_lo_ > b) {
        double hi_edge = running_.upper;
        if (sum_hi_ > b) {
            hi_edge = expand_until(hi_edge, +1.0, [&](double m) { return f(m) < b; });
        }
        const Bracket br = bisect_nonincreasing(f, running_.lower, hi_edge, b,
                                                solver_.tolerance_xi, solver_.max_iterations);
        running_.lower = br.lo;
        sum_lo_ = f(running_.lower);
    }
    // New interval's upper end moved below ours: re-locate the f = -B crossing.
    if (sum_hi_ < -b) {
        double lo_edge = running_.lower;
        if (sum_lo_ < -b) {
            lo_edge = expand_until(lo_edge, -1.0, [&](double m) { return f(m) >= -b; });
        }
        const Bracket br = bisect_nonincreasing(f, lo_edge, running_.upper, -b,
                                                solver_.tolerance_xi, solver_.max_iterations);
        running_.upper = br.hi;
        sum_hi_ = f(running_.upper);
    }
}

BernsteinCs::BernsteinCs(double gamma, std::size_t start_index, std::size_t n_min)
    : gamma_(gamma), start_(start_index), n_min_(std::max(n_min, kBernsteinMinCount)) {}

void BernsteinCs::update(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
    min_x_ = std::min(min_x_, x);
    max_x_ = std::max(max_x_, x);

    if (count_ < n_min_) {
        return;
    }
    informative_ = true;
    if (running_.empty()) {
        return;
    }
    const double td = static_cast<double>(count_);
    const double sigma = std::sqrt(std::max(0.0, m2_ / td));
    const double big_l = std::log(2.0 / cell_gamma({gamma_, 1.0, 1.0}, stitch_cell(count_)));
    const double half = sigma * std::sqrt(2.0 * big_l / td) +
                        kBernsteinRangeSlack * (max_x_ - min_x_) * big_l / td;
    running_.lower = std::max(running_.lower, mean_ - half);
    running_.upper = std::min(running_.upper, mean_ + half);
}

}  // namespace htb
