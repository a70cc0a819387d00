#include "htb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace htb {

namespace {

constexpr std::uint64_t kEnvSalt = 0x5eed5a17ULL;
constexpr std::uint64_t kDelaySalt = 0xde7ec70eULL;
constexpr double kInf = std::numeric_limits<double>::infinity();

int thread_budget(int max_threads) {
    const unsigned hw = std::thread::hardware_concurrency();
    int p = max_threads > 0 ? max_threads : static_cast<int>(hw ? hw : 1);
    return std::max(1, p);
}

// Index-ordered parallel for: results land by index, so reductions never
// depend on scheduling.
template <class Fn>
void parallel_for(int n, int max_threads, Fn&& fn) {
    const int p = std::min(thread_budget(max_threads), std::max(1, n));
    if (p == 1) {
        for (int i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(p));
    for (int w = 0; w < p; ++w) {
        workers.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
}

double loglog_floor(double delta) {
    const double inner = std::log(1.0 / delta);
    return inner > 1.0 ? std::log(inner) : 0.0;
}

// L_j of the epoch-length condition; dtilde may be 0 (infinite) or inf (0).
double required_pulls_for(double dtilde, const HeavyTailParams& ht, double horizon) {
    if (std::isinf(dtilde)) {
        return 0.0;
    }
    if (dtilde <= 0.0) {
        return kInf;
    }
    const double eps = ht.epsilon;
    return 6.0 * std::pow(236.0, (1.0 + eps) / eps) * std::pow(ht.v, 1.0 / eps) *
           (loglog_floor(dtilde) + std::log(horizon)) / std::pow(dtilde, (1.0 + eps) / eps);
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

double RegretLedger::total() const {
    double s = 0.0;
    for (double r : per_round_regret) {
        s += r;
    }
    return s;
}

std::vector<double> RegretLedger::cumulative() const {
    std::vector<double> out;
    out.reserve(per_round_regret.size());
    double s = 0.0;
    for (double r : per_round_regret) {
        s += r;
        out.push_back(s);
    }
    return out;
}

RegretLedger run_trial(const InstanceSpec& spec, Policy& policy, std::uint64_t seed) {
    const int k = spec.num_arms;
    const int epochs = spec.epoch_count();

    // Per-epoch gap table: the pseudo-regret increment of playing arm i.
    std::vector<std::vector<double>> gap(static_cast<std::size_t>(epochs),
                                         std::vector<double>(static_cast<std::size_t>(k), 0.0));
    for (int j = 0; j < epochs; ++j) {
        double best = -kInf;
        for (int i = 0; i < k; ++i) {
            best = std::max(best, spec.mean(j, i));
        }
        for (int i = 0; i < k; ++i) {
            gap[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                best - spec.mean(j, i);
        }
    }

    policy.begin(k, spec.horizon, seed);
    Rng env(mix_seed(seed, kEnvSalt));

    RegretLedger ledger;
    ledger.seed = seed;
    ledger.arm_sequence.reserve(static_cast<std::size_t>(spec.horizon));
    ledger.per_round_regret.reserve(static_cast<std::size_t>(spec.horizon));
    ledger.pulls_per_epoch.assign(static_cast<std::size_t>(epochs),
                                  std::vector<long>(static_cast<std::size_t>(k), 0));

    for (long t = 1; t <= spec.horizon; ++t) {
        const int epoch = spec.epoch_of(t);
        const int arm = policy.choose(t);
        const double x = sample_dist(
            spec.arms_per_epoch[static_cast<std::size_t>(epoch)][static_cast<std::size_t>(arm)],
            env);
        policy.observe(arm, x);
        ledger.arm_sequence.push_back(arm);
        ledger.per_round_regret.push_back(
            gap[static_cast<std::size_t>(epoch)][static_cast<std::size_t>(arm)]);
        ++ledger.pulls_per_epoch[static_cast<std::size_t>(epoch)][static_cast<std::size_t>(arm)];
    }
    ledger.detection_times = policy.detections();
    return ledger;
}

std::unique_ptr<Policy> make_policy(const std::string& name, const InstanceSpec& spec,
                                    const AlgoConfig& cfg) {
    if (name == "robust_cpd_ucb") {
        return std::make_unique<RobustCpdUcb>(spec.ht, cfg);
    }
    if (name == "robust_ucb") {
        return std::make_unique<RobustUcb>(spec.ht, cfg);
    }
    if (name == "sliding_window_ucb") {
        return std::make_unique<SlidingWindowUcb>(cfg);
    }
    if (name == "monitored_ucb") {
        return std::make_unique<MonitoredUcb>(cfg);
    }
    if (name == "oracle") {
        return std::make_unique<OraclePolicy>(spec);
    }
    if (name == "uniform_random") {
        return std::make_unique<UniformRandomPolicy>();
    }
    throw std::invalid_argument("unknown policy: " + name);
}

ExperimentResult run_experiment(const InstanceSpec& spec,
                                const std::vector<std::string>& policy_names,
                                const AlgoConfig& cfg, int n_trials, std::uint64_t seed_base,
                                int max_threads) {
    if (n_trials < 1) {
        throw std::invalid_argument("n_trials must be >= 1");
    }
    ExperimentResult result;
    for (const auto& name : policy_names) {
        PolicyAggregate agg;
        agg.policy = name;
        agg.ledgers.resize(static_cast<std::size_t>(n_trials));

        parallel_for(n_trials, max_threads, [&](int trial) {
            auto policy = make_policy(name, spec, cfg);
            agg.ledgers[static_cast<std::size_t>(trial)] =
                run_trial(spec, *policy, seed_base + static_cast<std::uint64_t>(trial));
        });

        const std::size_t horizon = static_cast<std::size_t>(spec.horizon);
        agg.mean_cumulative.assign(horizon, 0.0);
        agg.std_cumulative.assign(horizon, 0.0);
        std::vector<std::vector<double>> cums;
        cums.reserve(static_cast<std::size_t>(n_trials));
        for (const auto& ledger : agg.ledgers) {
            cums.push_back(ledger.cumulative());
        }
        for (std::size_t t = 0; t < horizon; ++t) {
            double m = 0.0;
            for (const auto& c : cums) {
                m += c[t];
            }
            m /= n_trials;
            double var = 0.0;
            for (const auto& c : cums) {
                var += (c[t] - m) * (c[t] - m);
            }
            agg.mean_cumulative[t] = m;
            agg.std_cumulative[t] = std::sqrt(var / n_trials);
        }
        result.per_policy.push_back(std::move(agg));
    }

    nlohmann::json meta;
    meta["instance"] = {{"name", spec.name},
                        {"K", spec.num_arms},
                        {"T", spec.horizon},
                        {"hash", git_blob_sha1(instance_to_json(spec).dump())}};
    meta["n_trials"] = n_trials;
    meta["seed_base"] = seed_base;
    meta["algo_config"] = algo_config_to_json(cfg);
    nlohmann::json pol = nlohmann::json::object();
    for (const auto& name : policy_names) {
        auto probe = make_policy(name, spec, cfg);
        probe->begin(spec.num_arms, spec.horizon, seed_base);
        pol[name] = probe->describe();
    }
    meta["policies"] = pol;
    result.metadata = std::move(meta);
    return result;
}

double DelayOutcome::median_delay() const {
    if (delays.empty()) {
        return 0.0;
    }
    std::vector<double> s = delays;
    const std::size_t mid = (s.size() - 1) / 2;
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
    return s[mid];
}

DelayOutcome detection_delay_experiment(const ArmDistribution& pre, const ArmDistribution& post,
                                        long t_c, long horizon, CsKind kind, int n_trials,
                                        std::uint64_t seed_base, const DetectorConfig& config,
                                        int max_threads) {
    if (t_c >= horizon) {
        throw std::invalid_argument("t_c must be smaller than the horizon");
    }
    DelayOutcome out;
    out.delays.assign(static_cast<std::size_t>(n_trials), 0.0);
    out.censored.assign(static_cast<std::size_t>(n_trials), false);
    out.false_alarm.assign(static_cast<std::size_t>(n_trials), false);
    out.trip_times.assign(static_cast<std::size_t>(n_trials), 0);

    parallel_for(n_trials, max_threads, [&](int trial) {
        Rng rng(mix_seed(seed_base + static_cast<std::uint64_t>(trial), kDelaySalt));
        ChangeDetector detector(kind, config);
        long tripped = 0;
        for (long t = 1; t <= horizon; ++t) {
            const double x = sample_dist(t <= t_c ? pre : post, rng);
            if (detector.step(x)) {
                tripped = t;
                break;
            }
        }
        const auto idx = static_cast<std::size_t>(trial);
        out.trip_times[idx] = tripped;
        if (tripped == 0) {
            out.censored[idx] = true;
            out.delays[idx] = static_cast<double>(horizon - t_c);
        } else if (tripped <= t_c) {
            out.false_alarm[idx] = true;
            out.delays[idx] = 0.0;
        } else {
            out.delays[idx] = static_cast<double>(tripped - t_c);
        }
    });
    out.false_alarm_count = static_cast<int>(
        std::count(out.false_alarm.begin(), out.false_alarm.end(), true));
    return out;
}

EpochLengthCheck check_epoch_length_assumption(const InstanceSpec& spec, double eta,
                                               std::size_t n_min) {
    const GapSummary gaps = gap_summary(spec);
    const int epochs = spec.epoch_count();
    EpochLengthCheck check;
    check.required_pulls.resize(static_cast<std::size_t>(epochs));
    check.holds_per_epoch.resize(static_cast<std::size_t>(epochs));
    check.holds = true;
    for (int j = 0; j < epochs; ++j) {
        const double lj = required_pulls_for(gaps.delta_min_tilde[static_cast<std::size_t>(j)],
                                             spec.ht, static_cast<double>(spec.horizon));
        check.required_pulls[static_cast<std::size_t>(j)] = lj;
        bool ok = false;
        if (std::isfinite(lj)) {
            const double need = 2.0 * static_cast<double>(n_min) +
                                2.0 * std::ceil(lj * spec.num_arms / eta);
            ok = static_cast<double>(spec.epoch_length(j)) >= need;
        }
        check.holds_per_epoch[static_cast<std::size_t>(j)] = ok;
        check.holds = check.holds && ok;
    }
    return check;
}

double minimax_regret_lower_bound(int num_arms, int epochs, long horizon,
                                  const HeavyTailParams& ht) {
    const double eps = ht.epsilon;
    return (1.0 / 25.0) *
           std::pow(static_cast<double>(num_arms) * epochs, eps / (1.0 + eps)) *
           std::pow(ht.v * static_cast<double>(horizon), 1.0 / (1.0 + eps));
}

BoundReport regret_bound_report(const InstanceSpec& spec, double eta, std::size_t n_min) {
    const GapSummary gaps = gap_summary(spec);
    const double eps = spec.ht.epsilon;
    const double horizon = static_cast<double>(spec.horizon);
    const int epochs = spec.epoch_count();

    BoundReport report;
    report.lower_bound = minimax_regret_lower_bound(spec.num_arms, epochs, spec.horizon, spec.ht);

    const EpochLengthCheck check = check_epoch_length_assumption(spec, eta, n_min);
    report.required_pulls = check.required_pulls;
    report.assumption_holds = check.holds;

    const double v_pow = std::pow(spec.ht.v, 1.0 / eps);
    report.delay_bounds.resize(static_cast<std::size_t>(epochs));
    for (int j = 0; j < epochs; ++j) {
        const double dt = gaps.delta_min_tilde[static_cast<std::size_t>(j)];
        const double gmax = gaps.gap_max[static_cast<std::size_t>(j)];
        double delay = 0.0;
        double term_a = 0.0;
        if (std::isinf(dt)) {
            delay = 0.0;
        } else if (dt <= 0.0) {
            delay = kInf;
            term_a = kInf;
            report.infinite_bound = true;
        } else {
            delay = detection_delay_bound({dt, spec.ht, horizon});
            term_a = v_pow * std::log(horizon) * std::ceil(spec.num_arms / eta) * gmax /
                     std::pow(dt, (1.0 + eps) / eps);
        }
        report.delay_bounds[static_cast<std::size_t>(j)] = delay;
        report.term_detection += term_a;

        double term_b = 0.0;
        const double log_len = std::log(std::max<double>(2.0, spec.epoch_length(j)));
        for (int i = 0; i < spec.num_arms; ++i) {
            const double gap = spec.mean(j, gaps.optimal_arm[static_cast<std::size_t>(j)]) -
                               spec.mean(j, i);
            if (gap > 0.0) {
                term_b += v_pow * log_len / std::pow(gap, 1.0 / eps);
            }
        }
        report.term_stationary += term_b;
        report.term_exploration += eta * static_cast<double>(spec.epoch_length(j)) * gmax;
    }
    return report;
}

std::string git_blob_sha1(const std::string& content) {
    struct Sha1 {
        std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
        static std::uint32_t rol(std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }
        void process(const unsigned char* p) {
            std::uint32_t w[80];
            for (int i = 0; i < 16; ++i) {
                w[i] = static_cast<std::uint32_t>(p[4 * i]) << 24 |
                       static_cast<std::uint32_t>(p[4 * i + 1]) << 16 |
                       static_cast<std::uint32_t>(p[4 * i + 2]) << 8 |
                       static_cast<std::uint32_t>(p[4 * i + 3]);
            }
            for (int i = 16; i < 80; ++i) {
                w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
            }
            std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
            for (int i = 0; i < 80; ++i) {
                std::uint32_t f, k;
                if (i < 20) {
                    f = (b & c) | (~b & d);
                    k = 0x5A827999u;
                } else if (i < 40) {
                    f = b ^ c ^ d;
                    k = 0x6ED9EBA1u;
                } else if (i < 60) {
                    f = (b & c) | (b & d) | (c & d);
                    k = 0x8F1BBCDCu;
                } else {
                    f = b ^ c ^ d;
                    k = 0xCA62C1D6u;
                }
                const std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
                e = d;
                d = c;
                c = rol(b, 30);
                b = a;
                a = tmp;
            }
            h[0] += a;
            h[1] += b;
            h[2] += c;
            h[3] += d;
            h[4] += e;
        }
    };

    std::string msg = "blob " + std::to_string(content.size());
    msg.push_back('\0');
    msg += content;

    const std::uint64_t bitlen = static_cast<std::uint64_t>(msg.size()) * 8;
    msg.push_back('\x80');
    while (msg.size() % 64 != 56) {
        msg.push_back('\0');
    }
    for (int i = 7; i >= 0; --i) {
        msg.push_back(static_cast<char>((bitlen >> (8 * i)) & 0xff));
    }

    Sha1 sha;
    for (std::size_t off = 0; off < msg.size(); off += 64) {
        sha.process(reinterpret_cast<const unsigned char*>(msg.data()) + off);
    }
    char out[41];
    for (int i = 0; i < 5; ++i) {
        std::snprintf(out + 8 * i, 9, "%08x", sha.h[i]);
    }
    return std::string(out, 40);
}

void write_results_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    const bool with_policy = result.per_policy.size() > 1;
    out << "round,mean_regret,std_regret";
    if (with_policy) {
        out << ",policy";
    }
    out << "\n";
    for (const auto& agg : result.per_policy) {
        for (std::size_t t = 0; t < agg.mean_cumulative.size(); ++t) {
            out << (t + 1) << ',' << format_double(agg.mean_cumulative[t]) << ','
                << format_double(agg.std_cumulative[t]);
            if (with_policy) {
                out << ',' << agg.policy;
            }
            out << "\n";
        }
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

void write_metadata_json(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    nlohmann::json j = result.metadata;
    nlohmann::json det = nlohmann::json::object();
    for (const auto& agg : result.per_policy) {
        nlohmann::json times = nlohmann::json::array();
        for (const auto& ledger : agg.ledgers) {
            times.push_back(ledger.detection_times);
        }
        det[agg.policy] = times;
    }
    j["detection_times"] = det;
    out << j.dump(2) << "\n";
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

nlohmann::json algo_config_to_json(const AlgoConfig& cfg) {
    nlohmann::json j;
    j["eta0"] = cfg.eta0;
    j["adaptive_eta"] = cfg.adaptive_eta;
    if (cfg.fixed_eta) {
        j["fixed_eta"] = *cfg.fixed_eta;
    }
    j["gamma"] = cfg.gamma;
    if (cfg.n_min_override) {
        j["n_min"] = *cfg.n_min_override;
    }
    j["tolerance_xi"] = cfg.solver.tolerance_xi;
    j["search_radius"] = cfg.solver.search_radius;
    if (cfg.thinning) {
        j["thinning"] = *cfg.thinning;
    }
    j["ucb_scale"] = cfg.ucb_scale;
    if (cfg.mom_blocks) {
        j["mom_blocks"] = *cfg.mom_blocks;
    }
    if (cfg.sw_window) {
        j["sw_window"] = *cfg.sw_window;
    }
    j["sw_scale"] = cfg.sw_scale;
    j["mucb_window"] = cfg.mucb_window;
    if (cfg.mucb_threshold) {
        j["mucb_threshold"] = *cfg.mucb_threshold;
    }
    j["mucb_scale"] = cfg.mucb_scale;
    j["mucb_eta"] = cfg.mucb_eta;
    return j;
}

AlgoConfig algo_config_from_json(const nlohmann::json& j) {
    AlgoConfig cfg;
    cfg.eta0 = j.value("eta0", cfg.eta0);
    cfg.adaptive_eta = j.value("adaptive_eta", cfg.adaptive_eta);
    if (j.contains("fixed_eta")) {
        cfg.fixed_eta = j.at("fixed_eta").get<double>();
        cfg.adaptive_eta = false;
    }
    cfg.gamma = j.value("gamma", cfg.gamma);
    if (j.contains("n_min")) {
        cfg.n_min_override = j.at("n_min").get<std::size_t>();
    }
    cfg.solver.tolerance_xi = j.value("tolerance_xi", cfg.solver.tolerance_xi);
    cfg.solver.search_radius = j.value("search_radius", cfg.solver.search_radius);
    if (j.contains("thinning")) {
        cfg.thinning = j.at("thinning").get<double>();
    }
    cfg.ucb_scale = j.value("ucb_scale", cfg.ucb_scale);
    if (j.contains("mom_blocks")) {
        cfg.mom_blocks = j.at("mom_blocks").get<std::size_t>();
    }
    if (j.contains("sw_window")) {
        cfg.sw_window = j.at("sw_window").get<long>();
    }
    cfg.sw_scale = j.value("sw_scale", cfg.sw_scale);
    cfg.mucb_window = j.value("mucb_window", cfg.mucb_window);
    if (j.contains("mucb_threshold")) {
        cfg.mucb_threshold = j.at("mucb_threshold").get<double>();
    }
    cfg.mucb_scale = j.value("mucb_scale", cfg.mucb_scale);
    cfg.mucb_eta = j.value("mucb_eta", cfg.mucb_eta);
    return cfg;
}

}  // namespace htb
