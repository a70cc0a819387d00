// Experiment front end: binds JSON config files to the library's runners.
//
//   htb simulate -c experiments/table1_gaussian.json [-o out/prefix] [--set k=v ...]
//   htb detect -c experiments/delay_gaussian.json
//   htb fit-prices -c experiments/crypto_prices.json
//   htb check-instance -c instance.json
//   htb bounds -c config.json
//   htb lower-bound-instance -c config.json
//
// Overrides (--set key=value) take precedence over the config file; bare keys
// that are not top-level fields land in the "algo" section (n_min=50,
// eta0=1.0); dotted paths address nested fields. Every emitted file embeds
// the resolved configuration. Exit codes: 0 success, 1 validation error,
// 2 runtime error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "htb/detection.hpp"
#include "htb/environments.hpp"
#include "htb/harness.hpp"
#include "htb/policies.hpp"

namespace {

using nlohmann::json;

struct ValidationFailure : std::runtime_error {
    explicit ValidationFailure(std::vector<std::string> problems)
        : std::runtime_error("validation failed"), issues(std::move(problems)) {}
    std::vector<std::string> issues;
};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationFailure({"cannot open config file: " + path});
    }
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw ValidationFailure({std::string("config parse error: ") + e.what()});
    }
}

// "a.b.c=value" sets cfg[a][b][c]; a bare key that is not already top-level
// goes into the algo section.
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ValidationFailure({"override must look like key=value: " + kv});
        }
        std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const std::exception&) {
            value = raw;
        }

        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            const auto dot = key.find('.', pos);
            if (dot == std::string::npos) {
                parts.push_back(key.substr(pos));
                break;
            }
            parts.push_back(key.substr(pos, dot - pos));
            pos = dot + 1;
        }
        json* node = &cfg;
        if (parts.size() == 1 && !cfg.contains(parts[0]) && cfg.contains("algo")) {
            node = &cfg["algo"];
        }
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            node = &(*node)[parts[i]];
        }
        (*node)[parts.back()] = value;
    }
}

htb::InstanceSpec resolve_instance(const json& cfg, const std::string& config_dir) {
    if (cfg.contains("instance")) {
        return htb::instance_from_json(cfg.at("instance"));
    }
    if (cfg.contains("instance_file")) {
        std::filesystem::path p = cfg.at("instance_file").get<std::string>();
        if (p.is_relative()) {
            p = std::filesystem::path(config_dir) / p;
        }
        return htb::instance_from_json(load_json_file(p.string()));
    }
    throw ValidationFailure({"config needs either \"instance\" or \"instance_file\""});
}

json finite_or_string(double x) {
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    if (std::isnan(x)) {
        return "nan";
    }
    return x;
}

htb::ArmDistribution dist_from_json(const json& j) {
    json row = json::array({j});
    json wrapper;
    wrapper["K"] = 1;
    wrapper["T"] = 1;
    wrapper["ht"] = {{"epsilon", 1.0}, {"v", 1.0}};
    wrapper["epochs"] = json::array({row});
    return htb::instance_from_json(wrapper).arms_per_epoch[0][0];
}

std::string output_prefix(const json& cfg, const std::string& cli_output) {
    if (!cli_output.empty()) {
        return cli_output;
    }
    if (cfg.contains("output")) {
        return cfg.at("output").get<std::string>();
    }
    return "results";
}

int cmd_simulate(json cfg, const std::string& cli_output) {
    std::vector<std::string> issues;
    if (!cfg.contains("policies") || !cfg.at("policies").is_array() ||
        cfg.at("policies").empty()) {
        issues.push_back("\"policies\" must be a non-empty array");
    }
    const int n_trials = cfg.value("n_trials", 0);
    if (n_trials < 1) {
        issues.push_back("\"n_trials\" must be >= 1");
    }
    htb::InstanceSpec spec;
    try {
        spec = resolve_instance(cfg, cfg.value("__config_dir", "."));
        for (auto& msg : spec.validate()) {
            issues.push_back("instance: " + msg);
        }
    } catch (const ValidationFailure& v) {
        issues.insert(issues.end(), v.issues.begin(), v.issues.end());
    }
    if (!issues.empty()) {
        throw ValidationFailure(issues);
    }

    const auto algo = htb::algo_config_from_json(cfg.value("algo", json::object()));
    const auto seed_base = cfg.value("seed_base", 1ULL);
    std::vector<std::string> policies;
    for (const auto& p : cfg.at("policies")) {
        policies.push_back(p.get<std::string>());
    }

    auto result = htb::run_experiment(spec, policies, algo, n_trials, seed_base,
                                      cfg.value("max_threads", 0));
    cfg.erase("__config_dir");
    result.metadata["resolved_config"] = cfg;

    const std::string prefix = output_prefix(cfg, cli_output);
    htb::write_results_csv(result, prefix + ".csv");
    htb::write_metadata_json(result, prefix + ".meta.json");
    std::cout << "wrote " << prefix << ".csv and " << prefix << ".meta.json\n";
    for (const auto& agg : result.per_policy) {
        std::cout << agg.policy << ": final mean regret "
                  << agg.mean_cumulative.back() << "\n";
    }
    return 0;
}

int cmd_detect(json cfg, const std::string& cli_output) {
    std::vector<std::string> issues;
    for (const char* field : {"pre", "post", "t_c", "T"}) {
        if (!cfg.contains(field)) {
            issues.push_back(std::string("missing field \"") + field + "\"");
        }
    }
    const int n_trials = cfg.value("n_trials", 0);
    if (n_trials < 1) {
        issues.push_back("\"n_trials\" must be >= 1");
    }
    const std::string kind_str = cfg.value("detector", "catoni");
    if (kind_str != "catoni" && kind_str != "bernstein") {
        issues.push_back("\"detector\" must be catoni or bernstein");
    }
    if (!issues.empty()) {
        throw ValidationFailure(issues);
    }

    const long t_c = cfg.at("t_c").get<long>();
    const long horizon = cfg.at("T").get<long>();
    if (t_c < 1 || t_c >= horizon) {
        throw ValidationFailure({"need 1 <= t_c < T"});
    }

    htb::DetectorConfig dc;
    dc.schedule.gamma = cfg.value("gamma", 0.1);
    dc.schedule.epsilon = cfg.value("epsilon", 1.0);
    dc.schedule.v = cfg.value("v", 1.0);
    dc.n_min = cfg.value("n_min", htb::default_n_min(static_cast<double>(horizon),
                                                     dc.schedule.epsilon));
    dc.horizon_hint = static_cast<double>(horizon);
    if (cfg.contains("thinning")) {
        dc.thinning = cfg.at("thinning").get<double>();
    }
    const auto kind = kind_str == "catoni" ? htb::CsKind::catoni : htb::CsKind::bernstein;

    const auto pre = dist_from_json(cfg.at("pre"));
    const auto post = dist_from_json(cfg.at("post"));
    const auto outcome = htb::detection_delay_experiment(
        pre, post, t_c, horizon, kind, n_trials, cfg.value("seed_base", 1ULL), dc,
        cfg.value("max_threads", 0));

    const std::string prefix = output_prefix(cfg, cli_output);
    {
        std::ofstream out(prefix + ".csv", std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + prefix + ".csv");
        }
        out << "trial,delay,censored,false_alarm,trip_time\n";
        for (std::size_t i = 0; i < outcome.delays.size(); ++i) {
            out << i << ',' << outcome.delays[i] << ',' << (outcome.censored[i] ? 1 : 0) << ','
                << (outcome.false_alarm[i] ? 1 : 0) << ',' << outcome.trip_times[i] << "\n";
        }
    }
    json meta;
    cfg.erase("__config_dir");
    meta["resolved_config"] = cfg;
    meta["median_delay"] = outcome.median_delay();
    meta["false_alarms"] = outcome.false_alarm_count;
    std::ofstream mout(prefix + ".meta.json", std::ios::binary);
    mout << meta.dump(2) << "\n";

    std::cout << "median delay " << outcome.median_delay() << ", false alarms "
              << outcome.false_alarm_count << "\n";
    return 0;
}

int cmd_fit_prices(json cfg, const std::string& cli_output) {
    std::vector<std::string> issues;
    if (!cfg.contains("csv_files") || !cfg.at("csv_files").is_array() ||
        cfg.at("csv_files").empty()) {
        issues.push_back("\"csv_files\" must be a non-empty array");
    }
    if (!cfg.contains("segments")) {
        issues.push_back("missing field \"segments\"");
    }
    if (!issues.empty()) {
        throw ValidationFailure(issues);
    }

    const std::string dir = cfg.value("__config_dir", ".");
    const std::string column = cfg.value("close_column", "Close");
    const std::string delim_str = cfg.value("delimiter", ",");
    const char delim = delim_str.empty() ? ',' : delim_str[0];

    std::vector<std::vector<double>> series;
    for (const auto& f : cfg.at("csv_files")) {
        std::filesystem::path p = f.get<std::string>();
        if (p.is_relative()) {
            p = std::filesystem::path(dir) / p;
        }
        series.push_back(htb::load_price_csv(p.string(), column, delim));
    }
    std::vector<int> segments;
    if (cfg.at("segments").is_array()) {
        for (const auto& s : cfg.at("segments")) {
            segments.push_back(s.get<int>());
        }
    } else {
        segments.assign(series.size(), cfg.at("segments").get<int>());
    }
    if (segments.size() != series.size()) {
        throw ValidationFailure({"\"segments\" must match the number of csv files"});
    }

    htb::HeavyTailParams ht{cfg.value("epsilon", 0.45), cfg.value("v", 3.0)};
    auto spec = htb::instance_from_prices(series, segments, ht, cfg.value("pareto_shape", 1.5));
    spec.name = cfg.value("name", std::string("prices"));

    json out_doc = htb::instance_to_json(spec);
    cfg.erase("__config_dir");
    out_doc["resolved_config"] = cfg;

    const std::string prefix = output_prefix(cfg, cli_output);
    const std::string path = prefix.ends_with(".json") ? prefix : prefix + ".json";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << out_doc.dump(2) << "\n";
    std::cout << "wrote " << path << " (K=" << spec.num_arms << ", T=" << spec.horizon
              << ", breakpoints=" << spec.breakpoints.size() << ")\n";
    return 0;
}

int cmd_check_instance(json cfg, const std::string&) {
    htb::InstanceSpec spec;
    if (cfg.contains("K") && cfg.contains("epochs")) {
        spec = htb::instance_from_json(cfg);  // config *is* an instance file
    } else {
        spec = resolve_instance(cfg, cfg.value("__config_dir", "."));
    }

    const auto problems = spec.validate();
    std::cout << "instance " << (spec.name.empty() ? "(unnamed)" : spec.name) << ": K="
              << spec.num_arms << " T=" << spec.horizon << " epochs=" << spec.epoch_count()
              << "\n";
    for (int j = 0; j < spec.epoch_count(); ++j) {
        for (int i = 0; i < spec.num_arms; ++i) {
            double moment = std::numeric_limits<double>::infinity();
            try {
                moment = htb::centered_moment(spec.arms_per_epoch[j][i], 1.0 + spec.ht.epsilon);
            } catch (const htb::MomentDiverges&) {
            }
            std::cout << "  epoch " << j << " arm " << i << ": mean " << spec.mean(j, i)
                      << ", centered moment " << moment << (moment <= spec.ht.v * (1 + 1e-6)
                                                                ? " (ok)\n"
                                                                : " (exceeds v)\n");
        }
    }
    const double eta = cfg.value("eta", htb::eta_schedule(0, 1.0, spec.num_arms, spec.horizon));
    const std::size_t n_min = cfg.value(
        "n_min", htb::default_n_min(static_cast<double>(spec.horizon), spec.ht.epsilon));
    const auto check = htb::check_epoch_length_assumption(spec, eta, n_min);
    std::cout << "epoch-length assumption (eta=" << eta << ", n_min=" << n_min
              << "): " << (check.holds ? "holds" : "violated") << "\n";

    if (!problems.empty()) {
        throw ValidationFailure(problems);
    }
    return 0;
}

int cmd_bounds(json cfg, const std::string&) {
    const auto spec = resolve_instance(cfg, cfg.value("__config_dir", "."));
    const auto problems = spec.validate();
    if (!problems.empty()) {
        throw ValidationFailure(problems);
    }
    const double eta = cfg.value("eta", htb::eta_schedule(0, 1.0, spec.num_arms, spec.horizon));
    const std::size_t n_min = cfg.value(
        "n_min", htb::default_n_min(static_cast<double>(spec.horizon), spec.ht.epsilon));
    const auto report = htb::regret_bound_report(spec, eta, n_min);

    json j;
    j["lower_bound"] = report.lower_bound;
    j["assumption_holds"] = report.assumption_holds;
    j["infinite_bound"] = report.infinite_bound;
    j["term_detection"] = finite_or_string(report.term_detection);
    j["term_stationary"] = finite_or_string(report.term_stationary);
    j["term_exploration"] = finite_or_string(report.term_exploration);
    json lj = json::array();
    for (double v : report.required_pulls) {
        lj.push_back(finite_or_string(v));
    }
    j["required_pulls_per_epoch"] = lj;
    json db = json::array();
    for (double v : report.delay_bounds) {
        db.push_back(finite_or_string(v));
    }
    j["delay_bounds_per_epoch"] = db;
    j["eta"] = eta;
    j["n_min"] = n_min;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_lower_bound_instance(json cfg, const std::string& cli_output) {
    std::vector<std::string> issues;
    for (const char* field : {"K", "epochs", "T"}) {
        if (!cfg.contains(field)) {
            issues.push_back(std::string("missing field \"") + field + "\"");
        }
    }
    if (!issues.empty()) {
        throw ValidationFailure(issues);
    }
    htb::HeavyTailParams ht{cfg.value("epsilon", 1.0), cfg.value("v", 1.0)};
    const auto spec = htb::make_minimax_instance(cfg.at("K").get<int>(),
                                                 cfg.at("epochs").get<int>(),
                                                 cfg.at("T").get<long>(), ht);
    json out_doc = htb::instance_to_json(spec);
    cfg.erase("__config_dir");
    out_doc["resolved_config"] = cfg;
    out_doc["lower_bound"] = htb::minimax_regret_lower_bound(
        spec.num_arms, spec.epoch_count(), spec.horizon, ht);

    const std::string prefix = output_prefix(cfg, cli_output);
    const std::string path = prefix.ends_with(".json") ? prefix : prefix + ".json";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << out_doc.dump(2) << "\n";
    std::cout << "wrote " << path << ", lower bound "
              << out_doc["lower_bound"].get<double>() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heavy-tailed piecewise-stationary bandit experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output;
    std::vector<std::string> overrides;

    const std::vector<std::pair<std::string, int (*)(json, const std::string&)>> commands = {
        {"simulate", cmd_simulate},
        {"detect", cmd_detect},
        {"fit-prices", cmd_fit_prices},
        {"check-instance", cmd_check_instance},
        {"bounds", cmd_bounds},
        {"lower-bound-instance", cmd_lower_bound_instance},
    };

    int (*selected)(json, const std::string&) = nullptr;
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "JSON config file")->required();
        sub->add_option("-o,--output", output, "output path prefix (overrides config)");
        sub->add_option("--set", overrides, "override config values (key=value)");
        sub->callback([&selected, fn = fn] { selected = fn; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = load_json_file(config_path);
        apply_overrides(cfg, overrides);
        cfg["__config_dir"] = std::filesystem::path(config_path).parent_path().string();
        return selected(std::move(cfg), output);
    } catch (const ValidationFailure& v) {
        for (const auto& issue : v.issues) {
            std::cerr << "error: " << issue << "\n";
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
