#include "htb/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace htb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Adaptive Simpson with absolute-per-interval error control derived from a
// relative tolerance on the whole integral.
template <class F>
double simpson(F&& f, double a, double b) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

template <class F>
double adaptive_simpson_rec(F&& f, double a, double b, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m);
    const double right = simpson(f, m, b);
    const double delta = left + right - whole;
    // The negated comparison also stops on NaN instead of recursing forever.
    if (depth <= 0 || !(std::abs(delta) > 15.0 * tol)) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, m, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(F&& f, double a, double b, double rel_tol) {
    if (a >= b) {
        return 0.0;
    }
    // Composite pass anchors the absolute tolerance; a single Simpson estimate
    // can be near zero for peaked integrands, which would force full-depth
    // recursion everywhere.
    const int chunks = 256;
    const double h = (b - a) / chunks;
    double rough = 0.0;
    for (int i = 0; i < chunks; ++i) {
        rough += simpson(f, a + i * h, a + (i + 1) * h);
    }
    const double tol = rel_tol * std::max(std::abs(rough), 1e-12);
    return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 30);
}

double pareto_raw_mean(double shape, double scale) { return shape * scale / (shape - 1.0); }

// Centered absolute moment of the raw Pareto(shape, scale) about its mean.
// The bounded piece [scale, c] is integrated directly; the tail piece is
// integrated after the substitution u = w^(1/(shape-order)) that removes the
// endpoint singularity at u = 0.
double pareto_centered_moment(double shape, double scale, double order) {
    if (shape <= order) {
        throw MomentDiverges{};
    }
    const double c = pareto_raw_mean(shape, scale);
    auto density = [&](double x) { return shape * std::pow(scale / x, shape) / x; };
    const double inner = integrate(
        [&](double x) { return std::pow(std::max(0.0, c - x), order) * density(x); }, scale, c,
        1e-7);

    const double q = 1.0 / (shape - order);
    // Endpoint rounding can push scale - c u a hair negative; clamp to keep
    // the integrand real there.
    const double upper = std::pow(scale / c, shape - order);
    auto tail_integrand = [&](double w) {
        const double u = std::pow(w, q);
        return std::pow(std::max(0.0, scale - c * u), order);
    };
    // After u = scale/x the tail becomes alpha Int_0^(s/c) u^(a-1-p) (s - cu)^p du;
    // u = w^q removes the u^(a-1-p) endpoint singularity exactly.
    const double tail = shape * q * integrate(tail_integrand, 0.0, upper, 1e-7);
    return inner + tail;
}

struct QuoteAwareSplitter {
    static std::vector<std::string> split(const std::string& line, char delim) {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (char ch : line) {
            if (ch == '"') {
                quoted = !quoted;
            } else if (ch == delim && !quoted) {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        out.push_back(cur);
        return out;
    }
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

double dist_mean(const ArmDistribution& dist) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, TwoPoint>) {
                return (1.0 - d.mass_at_zero) * d.atom;
            } else {
                return d.mean;
            }
        },
        dist);
}

double sample_dist(const ArmDistribution& dist, Rng& rng) {
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return rng.normal(d.mean, d.sigma);
            } else if constexpr (std::is_same_v<T, Laplace>) {
                return rng.laplace(d.mean, d.scale);
            } else if constexpr (std::is_same_v<T, ShiftedPareto>) {
                const double shift = d.mean - pareto_raw_mean(d.shape, d.scale);
                return shift + rng.pareto(d.shape, d.scale);
            } else {
                const double u = rng.uniform();
                return u < d.mass_at_zero ? 0.0 : d.atom;
            }
        },
        dist);
}

double centered_moment(const ArmDistribution& dist, double order) {
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, TwoPoint>) {
                const double mu = (1.0 - d.mass_at_zero) * d.atom;
                return d.mass_at_zero * std::pow(std::abs(mu), order) +
                       (1.0 - d.mass_at_zero) * std::pow(std::abs(d.atom - mu), order);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                // E|Z|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi)
                return std::pow(d.sigma, order) * std::pow(2.0, order / 2.0) *
                       std::tgamma((order + 1.0) / 2.0) / std::sqrt(M_PI);
            } else if constexpr (std::is_same_v<T, Laplace>) {
                // |X - mu| is Exp(scale); integrate the density to 1e-6.
                const double b = d.scale;
                if (b == 0.0) {
                    return 0.0;
                }
                auto f = [&](double y) {
                    return std::pow(y, order) * std::exp(-y / b) / b;
                };
                const double cut = b * (60.0 + 20.0 * order);
                return integrate(f, 0.0, cut, 1e-7);
            } else {
                return pareto_centered_moment(d.shape, d.scale, order);
            }
        },
        dist);
}

ArmDistribution make_shifted_pareto(double mean, const HeavyTailParams& ht, double shape) {
    if (shape <= 1.0 + ht.epsilon) {
        throw MomentDiverges{};
    }
    const double order = 1.0 + ht.epsilon;
    auto moment_at = [&](double scale) {
        return pareto_centered_moment(shape, scale, order);
    };
    double scale = 1.0;
    if (moment_at(scale) > ht.v) {
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= 0.0) {
                break;
            }
            if (moment_at(mid) > ht.v) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        scale = lo;
    }
    if (scale <= 0.0 || moment_at(scale) > ht.v * (1.0 + 1e-6)) {
        throw InfeasibleMoment{};
    }
    return ShiftedPareto{mean, shape, scale};
}

int InstanceSpec::epoch_of(long t) const {
    const auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), t);
    return static_cast<int>(it - breakpoints.begin());
}

long InstanceSpec::epoch_length(int epoch) const {
    const long start = epoch == 0 ? 0 : breakpoints[static_cast<std::size_t>(epoch) - 1];
    const long end = epoch == epoch_count() - 1 ? horizon
                                                : breakpoints[static_cast<std::size_t>(epoch)];
    return end - start;
}

double InstanceSpec::mean(int epoch, int arm) const {
    return dist_mean(arms_per_epoch[static_cast<std::size_t>(epoch)][static_cast<std::size_t>(arm)]);
}

std::vector<std::string> InstanceSpec::validate() const {
    std::vector<std::string> bad;
    if (num_arms < 1) {
        bad.push_back("K must be >= 1");
    }
    if (horizon < 1) {
        bad.push_back("T must be >= 1");
    }
    if (!(ht.epsilon > 0.0 && ht.epsilon <= 1.0)) {
        bad.push_back("epsilon must lie in (0, 1]");
    }
    if (!(ht.v > 0.0)) {
        bad.push_back("v must be positive");
    }
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        const bool increasing = i == 0 || breakpoints[i] > breakpoints[i - 1];
        if (breakpoints[i] <= 0 || breakpoints[i] >= horizon || !increasing) {
            bad.push_back("breakpoint #" + std::to_string(i + 1) +
                          " must be strictly increasing inside (0, T)");
        }
    }
    if (arms_per_epoch.size() != static_cast<std::size_t>(epoch_count())) {
        bad.push_back("arms_per_epoch must have one row per epoch");
        return bad;
    }
    for (std::size_t j = 0; j < arms_per_epoch.size(); ++j) {
        if (arms_per_epoch[j].size() != static_cast<std::size_t>(num_arms)) {
            bad.push_back("epoch " + std::to_string(j) + " must list K arm distributions");
            continue;
        }
        for (std::size_t i = 0; i < arms_per_epoch[j].size(); ++i) {
            const auto& d = arms_per_epoch[j][i];
            if (const auto* tp = std::get_if<TwoPoint>(&d)) {
                if (tp->mass_at_zero < 0.0 || tp->mass_at_zero > 1.0) {
                    bad.push_back("epoch " + std::to_string(j) + " arm " + std::to_string(i) +
                                  ": two-point mass outside [0, 1]");
                    continue;
                }
            }
            try {
                const double m = centered_moment(d, 1.0 + ht.epsilon);
                if (m > ht.v * (1.0 + 1e-6)) {
                    bad.push_back("epoch " + std::to_string(j) + " arm " + std::to_string(i) +
                                  ": centered moment " + std::to_string(m) + " exceeds v");
                }
            } catch (const MomentDiverges&) {
                bad.push_back("epoch " + std::to_string(j) + " arm " + std::to_string(i) +
                              ": (1+eps)-moment diverges");
            }
        }
    }
    return bad;
}

GapSummary gap_summary(const InstanceSpec& spec) {
    GapSummary g;
    const int epochs = spec.epoch_count();
    const int k = spec.num_arms;

    g.change_into.assign(static_cast<std::size_t>(epochs), kInf);
    for (int j = 1; j < epochs; ++j) {
        double least = kInf;
        for (int i = 0; i < k; ++i) {
            least = std::min(least, std::abs(spec.mean(j, i) - spec.mean(j - 1, i)));
        }
        g.change_into[static_cast<std::size_t>(j)] = least;
    }
    g.delta_min = kInf;
    for (int j = 1; j < epochs; ++j) {
        g.delta_min = std::min(g.delta_min, g.change_into[static_cast<std::size_t>(j)]);
    }
    if (epochs == 1) {
        g.delta_min = 0.0;
    }

    g.delta_min_tilde.resize(static_cast<std::size_t>(epochs));
    for (int j = 0; j < epochs; ++j) {
        const double into = g.change_into[static_cast<std::size_t>(j)];
        const double out = j + 1 < epochs ? g.change_into[static_cast<std::size_t>(j) + 1] : kInf;
        g.delta_min_tilde[static_cast<std::size_t>(j)] = std::min(into, out);
    }

    g.gap_min.resize(static_cast<std::size_t>(epochs));
    g.gap_max.resize(static_cast<std::size_t>(epochs));
    g.optimal_arm.resize(static_cast<std::size_t>(epochs));
    for (int j = 0; j < epochs; ++j) {
        double best = -kInf;
        int best_arm = 0;
        for (int i = 0; i < k; ++i) {
            const double m = spec.mean(j, i);
            if (m > best) {
                best = m;
                best_arm = i;
            }
        }
        double gmin = kInf;
        double gmax = 0.0;
        for (int i = 0; i < k; ++i) {
            const double gap = best - spec.mean(j, i);
            gmax = std::max(gmax, gap);
            if (gap > 0.0) {
                gmin = std::min(gmin, gap);
            }
        }
        g.gap_min[static_cast<std::size_t>(j)] = std::isfinite(gmin) ? gmin : 0.0;
        g.gap_max[static_cast<std::size_t>(j)] = gmax;
        g.optimal_arm[static_cast<std::size_t>(j)] = best_arm;
    }
    return g;
}

double sample_reward(const InstanceSpec& spec, int arm, long t, Rng& rng) {
    const int epoch = spec.epoch_of(t);
    return sample_dist(spec.arms_per_epoch[static_cast<std::size_t>(epoch)]
                                          [static_cast<std::size_t>(arm)],
                       rng);
}

TwoPoint two_point_prototype(double y, double delta, double epsilon, double vtilde) {
    const double p = std::pow(vtilde, -1.0 / epsilon) * std::pow(y, (1.0 + epsilon) / epsilon);
    const double atom = std::pow(vtilde, 1.0 / epsilon) * std::pow(delta, -1.0 / epsilon);
    return TwoPoint{1.0 - p, atom};
}

InstanceSpec make_minimax_instance(int num_arms, int epochs, long horizon,
                                   const HeavyTailParams& ht) {
    const double eps = ht.epsilon;
    const double delta =
        std::pow(ht.v, 1.0 / (1.0 + eps)) *
        std::pow(2.0 * std::log(2.0) * num_arms * epochs / (16.0 * static_cast<double>(horizon)),
                 eps / (1.0 + eps));
    const double y_best = std::pow(2.0, eps / (1.0 + eps)) * delta;

    // The raw prototype family overshoots the moment class by a bounded
    // factor; shrink the internal normalization until both arms fit.
    auto family_ok = [&](double vt) {
        const TwoPoint lo = two_point_prototype(delta, delta, eps, vt);
        const TwoPoint hi = two_point_prototype(y_best, delta, eps, vt);
        if (lo.mass_at_zero < 0.0 || hi.mass_at_zero < 0.0) {
            return false;
        }
        return centered_moment(lo, 1.0 + eps) <= ht.v && centered_moment(hi, 1.0 + eps) <= ht.v;
    };
    double vtilde = ht.v;
    if (!family_ok(vtilde)) {
        double lo = ht.v * 1e-6;
        double hi = ht.v;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (family_ok(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        vtilde = lo;
    }
    if (!family_ok(vtilde)) {
        throw InfeasibleMoment{};
    }

    InstanceSpec spec;
    spec.num_arms = num_arms;
    spec.horizon = horizon;
    spec.ht = ht;
    spec.name = "minimax_two_point";
    const long len = horizon / epochs;
    for (int j = 1; j < epochs; ++j) {
        spec.breakpoints.push_back(static_cast<long>(j) * len);
    }
    for (int j = 0; j < epochs; ++j) {
        std::vector<ArmDistribution> row;
        const int star = j % num_arms;
        for (int i = 0; i < num_arms; ++i) {
            row.push_back(two_point_prototype(i == star ? y_best : delta, delta, eps, vtilde));
        }
        spec.arms_per_epoch.push_back(std::move(row));
    }
    return spec;
}

SegmentationResult fit_piecewise_constant(std::span<const double> series, int segment_count) {
    const std::size_t n = series.size();
    if (segment_count < 1 || static_cast<std::size_t>(segment_count) > n) {
        throw std::invalid_argument("segment_count must be in [1, len(series)]");
    }
    std::vector<double> s1(n + 1, 0.0);
    std::vector<double> s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s1[i + 1] = s1[i] + series[i];
        s2[i + 1] = s2[i] + series[i] * series[i];
    }
    // cost of segment covering [a, b) as half-open prefix indices
    auto cost = [&](std::size_t a, std::size_t b) {
        const double sum = s1[b] - s1[a];
        const double sq = s2[b] - s2[a];
        return sq - sum * sum / static_cast<double>(b - a);
    };

    const std::size_t segs = static_cast<std::size_t>(segment_count);
    const double inf = kInf;
    std::vector<std::vector<double>> dp(segs + 1, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> arg(segs + 1, std::vector<std::size_t>(n + 1, 0));
    dp[0][0] = 0.0;
    for (std::size_t s = 1; s <= segs; ++s) {
        for (std::size_t j = s; j <= n; ++j) {
            for (std::size_t k = s - 1; k < j; ++k) {
                if (dp[s - 1][k] == inf) {
                    continue;
                }
                const double c = dp[s - 1][k] + cost(k, j);
                if (c < dp[s][j]) {
                    dp[s][j] = c;
                    arg[s][j] = k;
                }
            }
        }
    }

    SegmentationResult res;
    res.sse = dp[segs][n];
    std::vector<std::size_t> bounds(segs + 1);
    bounds[segs] = n;
    for (std::size_t s = segs; s >= 1; --s) {
        bounds[s - 1] = arg[s][bounds[s]];
    }
    for (std::size_t s = 0; s < segs; ++s) {
        const std::size_t a = bounds[s];
        const std::size_t b = bounds[s + 1];
        res.levels.push_back((s1[b] - s1[a]) / static_cast<double>(b - a));
        if (s + 1 < segs) {
            res.breakpoints.push_back(b);  // 1-based last index of the segment
        }
    }
    return res;
}

std::vector<double> load_price_csv(const std::string& path, const std::string& close_column,
                                   char delimiter) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw MissingColumn{close_column};
    }
    const auto header = QuoteAwareSplitter::split(line, delimiter);
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == close_column) {
            col = i;
            break;
        }
    }
    if (col == header.size()) {
        throw MissingColumn{close_column};
    }

    std::vector<double> values;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = QuoteAwareSplitter::split(line, delimiter);
        if (col >= fields.size()) {
            throw ParseError{line_number};
        }
        const std::string cell = trim(fields[col]);
        if (cell.empty()) {
            throw ParseError{line_number};
        }
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(cell, &used);
        } catch (const std::exception&) {
            throw ParseError{line_number};
        }
        if (used != cell.size()) {
            throw ParseError{line_number};
        }
        values.push_back(value);
    }
    return values;
}

InstanceSpec instance_from_prices(const std::vector<std::vector<double>>& per_arm_series,
                                  const std::vector<int>& segment_counts,
                                  const HeavyTailParams& ht, double pareto_shape) {
    if (per_arm_series.empty()) {
        throw std::invalid_argument("need at least one price series");
    }
    if (segment_counts.size() != per_arm_series.size()) {
        throw std::invalid_argument("one segment count per series required");
    }
    const std::size_t n = per_arm_series.front().size();
    for (const auto& s : per_arm_series) {
        if (s.size() != n) {
            throw std::invalid_argument("all price series must have equal length");
        }
    }

    // Rescale each series to [0, 10] so arms live on a comparable scale.
    std::vector<std::vector<double>> scaled(per_arm_series.size());
    for (std::size_t a = 0; a < per_arm_series.size(); ++a) {
        const auto [mn, mx] = std::minmax_element(per_arm_series[a].begin(),
                                                  per_arm_series[a].end());
        const double span = *mx - *mn;
        scaled[a].reserve(n);
        for (double x : per_arm_series[a]) {
            scaled[a].push_back(span > 0.0 ? (x - *mn) / span * 10.0 : 5.0);
        }
    }

    std::vector<SegmentationResult> fits;
    std::set<long> global;
    for (std::size_t a = 0; a < scaled.size(); ++a) {
        fits.push_back(fit_piecewise_constant(scaled[a], segment_counts[a]));
        for (std::size_t b : fits.back().breakpoints) {
            global.insert(static_cast<long>(b));
        }
    }

    InstanceSpec spec;
    spec.num_arms = static_cast<int>(per_arm_series.size());
    spec.horizon = static_cast<long>(n);
    spec.breakpoints.assign(global.begin(), global.end());
    spec.ht = ht;
    spec.name = "prices";

    for (int j = 0; j < spec.epoch_count(); ++j) {
        const long start_round = (j == 0 ? 0L : spec.breakpoints[static_cast<std::size_t>(j) - 1]) + 1;
        std::vector<ArmDistribution> row;
        for (std::size_t a = 0; a < scaled.size(); ++a) {
            // The arm's own fitted segment containing this epoch's first round.
            const auto& bp = fits[a].breakpoints;
            const std::size_t seg = static_cast<std::size_t>(
                std::lower_bound(bp.begin(), bp.end(), static_cast<std::size_t>(start_round)) -
                bp.begin());
            row.push_back(make_shifted_pareto(fits[a].levels[seg], ht, pareto_shape));
        }
        spec.arms_per_epoch.push_back(std::move(row));
    }
    return spec;
}

nlohmann::json instance_to_json(const InstanceSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["K"] = spec.num_arms;
    j["T"] = spec.horizon;
    j["breakpoints"] = spec.breakpoints;
    j["ht"] = {{"epsilon", spec.ht.epsilon}, {"v", spec.ht.v}};
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& row : spec.arms_per_epoch) {
        nlohmann::json arms = nlohmann::json::array();
        for (const auto& d : row) {
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, Gaussian>) {
                        arms.push_back({{"kind", "gaussian"}, {"mean", v.mean}, {"sigma", v.sigma}});
                    } else if constexpr (std::is_same_v<T, Laplace>) {
                        arms.push_back({{"kind", "laplace"}, {"mean", v.mean}, {"scale", v.scale}});
                    } else if constexpr (std::is_same_v<T, ShiftedPareto>) {
                        arms.push_back({{"kind", "pareto"},
                                        {"mean", v.mean},
                                        {"shape", v.shape},
                                        {"scale", v.scale}});
                    } else {
                        arms.push_back({{"kind", "two_point"},
                                        {"mass_at_zero", v.mass_at_zero},
                                        {"atom", v.atom}});
                    }
                },
                d);
        }
        epochs.push_back(std::move(arms));
    }
    j["epochs"] = std::move(epochs);
    return j;
}

InstanceSpec instance_from_json(const nlohmann::json& j) {
    InstanceSpec spec;
    spec.name = j.value("name", "");
    spec.num_arms = j.at("K").get<int>();
    spec.horizon = j.at("T").get<long>();
    spec.breakpoints = j.value("breakpoints", std::vector<long>{});
    spec.ht.epsilon = j.at("ht").at("epsilon").get<double>();
    spec.ht.v = j.at("ht").at("v").get<double>();
    for (const auto& row : j.at("epochs")) {
        std::vector<ArmDistribution> arms;
        for (const auto& a : row) {
            const std::string kind = a.at("kind").get<std::string>();
            if (kind == "gaussian") {
                arms.push_back(Gaussian{a.at("mean").get<double>(), a.at("sigma").get<double>()});
            } else if (kind == "laplace") {
                arms.push_back(Laplace{a.at("mean").get<double>(), a.at("scale").get<double>()});
            } else if (kind == "pareto") {
                arms.push_back(ShiftedPareto{a.at("mean").get<double>(),
                                             a.at("shape").get<double>(),
                                             a.at("scale").get<double>()});
            } else if (kind == "two_point") {
                arms.push_back(TwoPoint{a.at("mass_at_zero").get<double>(),
                                        a.at("atom").get<double>()});
            } else {
                throw std::runtime_error("unknown distribution kind: " + kind);
            }
        }
        spec.arms_per_epoch.push_back(std::move(arms));
    }
    return spec;
}

}  // namespace htb
