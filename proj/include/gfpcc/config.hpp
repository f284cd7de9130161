#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gfpcc/error.hpp"
#include "gfpcc/harness.hpp"

namespace gfpcc {

inline constexpr const char* kDataRootEnv = "GFPCC_DATA_ROOT";

// Everything a run needs; ExperimentConfig plus output switches.
struct RunConfig {
    ExperimentConfig exp;
    bool timing = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::string bad_value(std::string_view key, std::string_view value, std::string_view want) {
    return "bad value '" + std::string(value) + "' for " + std::string(key) + " (expected " + std::string(want) + ")";
}

inline std::size_t to_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    if (!parse_int(trim(v), out)) throw ConfigError(bad_value(key, v, "a non-negative integer"));
    return out;
}

inline std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    if (!parse_int(trim(v), out)) throw ConfigError(bad_value(key, v, "a non-negative integer"));
    return out;
}

inline double to_double(std::string_view key, std::string_view v) {
    v = trim(v);
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) throw ConfigError(bad_value(key, v, "a number"));
    return out;
}

inline bool to_bool(std::string_view key, std::string_view v) {
    v = trim(v);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(bad_value(key, v, "true or false"));
}

template <typename F>
auto to_list(std::string_view v, F&& one) {
    std::vector<decltype(one(std::string_view{}))> out;
    v = trim(v);
    if (v.empty()) return out;
    for (auto f : split_fields(v, ",")) out.push_back(one(trim(f)));
    return out;
}

inline std::string fmt_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& one) {
    std::string out;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        if (k) out += ',';
        out += one(xs[k]);
    }
    return out;
}

}  // namespace detail

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

// Every accepted key, in echo order. Defaults are whatever RunConfig{} holds.
inline const std::vector<ConfigKey>& config_keys() {
    using namespace detail;
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        auto add = [&](std::string name, std::string help, auto set, auto get) {
            k.push_back({std::move(name), std::move(help), set, get});
        };
        add("data.format", "rating file layout: ml100k (tab separated) or ml1m (:: separated)",
            [](RunConfig& c, std::string_view v) { c.exp.format = parse_format(trim(v)); },
            [](const RunConfig& c) { return std::string(format_name(c.exp.format)); });
        add("data.path", "rating file; empty means $GFPCC_DATA_ROOT/u.data (ml100k) or ratings.dat (ml1m)",
            [](RunConfig& c, std::string_view v) { c.exp.data_path = std::string(trim(v)); },
            [](const RunConfig& c) { return c.exp.data_path; });
        add("data.train_fraction", "per-user share of events (chronological) used for training, in (0,1)",
            [](RunConfig& c, std::string_view v) { c.exp.train_fraction = to_double("data.train_fraction", v); },
            [](const RunConfig& c) { return fmt_double(c.exp.train_fraction); });
        add("model.dim", "embedding dimension d",
            [](RunConfig& c, std::string_view v) { c.exp.train.dim = to_size("model.dim", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.train.dim); });
        add("model.layers", "propagation layers K",
            [](RunConfig& c, std::string_view v) { c.exp.train.layers = to_size("model.layers", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.train.layers); });
        add("model.lambda", "L2 coefficient on layer-0 embeddings",
            [](RunConfig& c, std::string_view v) { c.exp.train.lambda = to_double("model.lambda", v); },
            [](const RunConfig& c) { return fmt_double(c.exp.train.lambda); });
        add("model.lr", "learning rate",
            [](RunConfig& c, std::string_view v) { c.exp.train.lr = to_double("model.lr", v); },
            [](const RunConfig& c) { return fmt_double(c.exp.train.lr); });
        add("model.batch_size", "BPR triples per mini-batch",
            [](RunConfig& c, std::string_view v) { c.exp.train.batch_size = to_size("model.batch_size", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.train.batch_size); });
        add("model.local_epochs", "local epochs per round (m_l)",
            [](RunConfig& c, std::string_view v) { c.exp.train.local_epochs = to_size("model.local_epochs", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.train.local_epochs); });
        add("model.neg_samples", "negatives per positive",
            [](RunConfig& c, std::string_view v) { c.exp.train.neg_samples = to_size("model.neg_samples", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.train.neg_samples); });
        add("model.optimizer", "sgd or adam",
            [](RunConfig& c, std::string_view v) { c.exp.train.optimizer = parse_optimizer(trim(v)); },
            [](const RunConfig& c) { return std::string(optimizer_name(c.exp.train.optimizer)); });
        add("model.freeze_weights", "keep every W^(k) at identity",
            [](RunConfig& c, std::string_view v) { c.exp.train.freeze_weights = to_bool("model.freeze_weights", v); },
            [](const RunConfig& c) { return std::string(c.exp.train.freeze_weights ? "true" : "false"); });
        add("model.beta", "K+1 layer weights, comma separated; empty means uniform",
            [](RunConfig& c, std::string_view v) {
                c.exp.train.beta = to_list(v, [](std::string_view f) { return to_double("model.beta", f); });
            },
            [](const RunConfig& c) { return join(c.exp.train.beta, fmt_double); });
        add("fed.users_per_client", "consecutive users grouped into one client",
            [](RunConfig& c, std::string_view v) { c.exp.users_per_client = to_size("fed.users_per_client", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.users_per_client); });
        add("fed.clients_per_round", "clients sampled per round; 0 means all",
            [](RunConfig& c, std::string_view v) {
                c.exp.agg.clients_per_round = to_size("fed.clients_per_round", v);
            },
            [](const RunConfig& c) { return std::to_string(c.exp.agg.clients_per_round); });
        add("fed.global_epochs", "federated rounds (m_g)",
            [](RunConfig& c, std::string_view v) { c.exp.agg.global_epochs = to_size("fed.global_epochs", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.agg.global_epochs); });
        add("fed.list_size", "length of each client's recommendation list; 0 means the largest cache size",
            [](RunConfig& c, std::string_view v) { c.exp.list_size = to_size("fed.list_size", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.list_size); });
        add("agg.q", "q-FedAvg fairness exponent (0 is plain averaging)",
            [](RunConfig& c, std::string_view v) { c.exp.agg.q = to_double("agg.q", v); },
            [](const RunConfig& c) { return fmt_double(c.exp.agg.q); });
        add("agg.G", "Lipschitz constant; 0 means 1/lr",
            [](RunConfig& c, std::string_view v) { c.exp.agg.lipschitz = to_double("agg.G", v); },
            [](const RunConfig& c) { return fmt_double(c.exp.agg.lipschitz); });
        add("cache.sizes", "cache sizes N, comma separated",
            [](RunConfig& c, std::string_view v) {
                c.exp.cache_sizes = to_list(v, [](std::string_view f) { return to_size("cache.sizes", f); });
            },
            [](const RunConfig& c) { return join(c.exp.cache_sizes, [](std::size_t n) { return std::to_string(n); }); });
        add("cache.policies", "policies to run: oracle,gfpcc,egreedy,thompson,random",
            [](RunConfig& c, std::string_view v) { c.exp.policies = to_list(v, parse_policy); },
            [](const RunConfig& c) {
                return join(c.exp.policies, [](PolicyKind p) { return std::string(policy_name(p)); });
            });
        add("cache.gfpcc_prefix", "count only the first N entries of each client list for a size-N cache",
            [](RunConfig& c, std::string_view v) { c.exp.pool_prefix = to_bool("cache.gfpcc_prefix", v); },
            [](const RunConfig& c) { return std::string(c.exp.pool_prefix ? "true" : "false"); });
        add("bandit.interval", "requests between bandit cache re-selections",
            [](RunConfig& c, std::string_view v) { c.exp.bandit_interval = to_size("bandit.interval", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.bandit_interval); });
        add("bandit.epsilon", "exploration probability of m-epsilon-greedy",
            [](RunConfig& c, std::string_view v) { c.exp.epsilon = to_double("bandit.epsilon", v); },
            [](const RunConfig& c) { return fmt_double(c.exp.epsilon); });
        add("bandit.thompson_feedback", "per_interval or per_miss",
            [](RunConfig& c, std::string_view v) { c.exp.thompson_feedback = parse_thompson_feedback(trim(v)); },
            [](const RunConfig& c) { return std::string(thompson_feedback_name(c.exp.thompson_feedback)); });
        add("run.seeds", "root seeds, comma separated; one full run per seed",
            [](RunConfig& c, std::string_view v) {
                c.exp.seeds = to_list(v, [](std::string_view f) { return to_u64("run.seeds", f); });
            },
            [](const RunConfig& c) {
                return join(c.exp.seeds, [](std::uint64_t s) { return std::to_string(s); });
            });
        add("run.jobs", "worker threads; results do not depend on it",
            [](RunConfig& c, std::string_view v) { c.exp.jobs = to_size("run.jobs", v); },
            [](const RunConfig& c) { return std::to_string(c.exp.jobs); });
        add("output.timing", "write wall-clock seconds into results (makes the CSV non-reproducible)",
            [](RunConfig& c, std::string_view v) { c.timing = to_bool("output.timing", v); },
            [](const RunConfig& c) { return std::string(c.timing ? "true" : "false"); });
        return k;
    }();
    return keys;
}

inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& k : config_keys()) {
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

// "key=value" as given to --set.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    set_config_value(cfg, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

// Line-oriented "key = value"; '#' starts a comment, blank lines are skipped.
inline void apply_config_stream(RunConfig& cfg, std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view s = line;
        if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            set_config_value(cfg, detail::trim(s.substr(0, eq)), s.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    apply_config_stream(cfg, in);
}

inline std::string default_data_path(RatingFormat format, const char* root) {
    if (!root || !*root) return {};
    std::string r(root);
    if (r.back() != '/') r += '/';
    return r + (format == RatingFormat::ml100k ? "u.data" : "ratings.dat");
}

// Fills data.path from the environment when unset and checks cross-key rules.
inline void resolve_config(RunConfig& cfg) {
    if (cfg.exp.data_path.empty()) cfg.exp.data_path = default_data_path(cfg.exp.format, std::getenv(kDataRootEnv));
    cfg.exp.train.validate();
    if (cfg.exp.cache_sizes.empty()) throw ConfigError("cache.sizes must not be empty");
    for (auto n : cfg.exp.cache_sizes) {
        if (n == 0) throw ConfigError("cache.sizes entries must be positive");
    }
    if (cfg.exp.policies.empty()) throw ConfigError("cache.policies must not be empty");
    if (cfg.exp.seeds.empty()) throw ConfigError("run.seeds must not be empty");
    if (cfg.exp.users_per_client == 0) throw ConfigError("fed.users_per_client must be positive");
    if (cfg.exp.bandit_interval == 0) throw ConfigError("bandit.interval must be positive");
    if (!(cfg.exp.epsilon > 0.0 && cfg.exp.epsilon < 1.0)) throw ConfigError("bandit.epsilon must lie in (0,1)");
    if (!(cfg.exp.train_fraction > 0.0 && cfg.exp.train_fraction < 1.0)) {
        throw ConfigError("data.train_fraction must lie in (0,1)");
    }
    if (!(cfg.exp.agg.q >= 0.0)) throw ConfigError("agg.q must be >= 0");
    if (!(cfg.exp.agg.lipschitz >= 0.0)) throw ConfigError("agg.G must be > 0 (or 0 for 1/lr)");
}

// Resolved config in the same "key = value" form the parser reads.
inline void write_config(const RunConfig& cfg, std::ostream& out) {
    for (const auto& k : config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
}

inline std::string config_help() {
    std::ostringstream out;
    RunConfig defaults;
    for (const auto& k : config_keys()) {
        out << "  " << k.name << " (default: " << k.get(defaults) << ")\n      " << k.help << '\n';
    }
    return out.str();
}

}  // namespace gfpcc
