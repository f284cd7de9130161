#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gfpcc/data.hpp"
#include "gfpcc/error.hpp"
#include "gfpcc/federated.hpp"
#include "gfpcc/model.hpp"
#include "gfpcc/parallel.hpp"
#include "gfpcc/policies.hpp"

namespace gfpcc {

struct ExperimentConfig {
    RatingFormat format = RatingFormat::ml100k;
    std::string data_path;
    double train_fraction = 0.8;
    std::vector<std::size_t> cache_sizes = {50, 100, 150, 200, 250, 300, 350, 400};
    std::vector<PolicyKind> policies = {PolicyKind::oracle, PolicyKind::gfpcc, PolicyKind::egreedy,
                                        PolicyKind::thompson, PolicyKind::random};
    TrainConfig train;
    AggregationConfig agg;
    std::size_t users_per_client = 1;
    // Length of each client's list; 0 means the largest cache size.
    std::size_t list_size = 0;
    // Count only the first N entries of each list when selecting a size-N
    // cache, instead of whole lists.
    bool pool_prefix = true;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t bandit_interval = 1000;
    double epsilon = 0.1;
    ThompsonFeedback thompson_feedback = ThompsonFeedback::per_interval;
    std::size_t jobs = 1;

    std::size_t resolved_list_size() const {
        if (list_size > 0) return list_size;
        return cache_sizes.empty() ? 0 : *std::max_element(cache_sizes.begin(), cache_sizes.end());
    }
};

struct ResultRow {
    std::string policy;
    std::size_t cache_size = 0;
    std::uint64_t seed = 0;
    double efficiency = 0.0;
    double seconds = 0.0;

    bool operator==(const ResultRow&) const = default;
};

struct ReplayResult {
    std::uint64_t hits = 0;
    std::uint64_t requests = 0;

    double efficiency() const { return requests == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(requests); }
};

// Static cache: fill once, replay the whole stream.
inline ReplayResult replay(std::span<const ItemId> cache_items, const RequestStream& test, std::size_t catalog) {
    if (test.empty()) throw DataError("replay needs a non-empty request stream");
    CacheState cache(catalog, cache_items.size());
    cache.assign(cache_items);
    for (const auto& e : test) cache.request(e.item);
    return {cache.hits(), cache.requests()};
}

// Online bandit cache, updated as requests arrive.
inline ReplayResult replay(BanditCache& policy, const RequestStream& test) {
    if (test.empty()) throw DataError("replay needs a non-empty request stream");
    std::uint64_t hits = 0;
    for (const auto& e : test) hits += policy.request(e.item) ? 1 : 0;
    return {hits, test.size()};
}

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::size_t policy_rank(const ExperimentConfig& cfg, const std::string& name) {
    for (std::size_t k = 0; k < cfg.policies.size(); ++k) {
        if (policy_name(cfg.policies[k]) == name) return k;
    }
    return cfg.policies.size();
}

}  // namespace detail

// Orders rows canonically: policy (as listed in the config), cache size, seed.
inline void sort_rows(const ExperimentConfig& cfg, std::vector<ResultRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
        auto ra = detail::policy_rank(cfg, a.policy), rb = detail::policy_rank(cfg, b.policy);
        if (ra != rb) return ra < rb;
        if (a.cache_size != b.cache_size) return a.cache_size < b.cache_size;
        return a.seed < b.seed;
    });
}

// Runs every (policy, cache size, seed) cell on a loaded dataset. GFPCC trains
// one federation per seed and derives every cache size from its pool. If a
// cell throws, the rows finished so far are left in `partial` (canonical
// order) before the exception propagates.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const Dataset& ds,
                                             std::vector<ResultRow>* partial = nullptr) {
    cfg.train.validate();
    if (cfg.cache_sizes.empty()) throw ConfigError("cache.sizes must not be empty");
    for (auto n : cfg.cache_sizes) {
        if (n == 0 || n > ds.num_items) throw ConfigError("cache sizes must lie in 1..catalog size");
    }
    auto split = split_chronological(ds, cfg.train_fraction);
    const std::size_t catalog = ds.num_items;
    const bool need_fed = std::find(cfg.policies.begin(), cfg.policies.end(), PolicyKind::gfpcc) != cfg.policies.end();
    std::vector<ClientState> clients;
    if (need_fed) clients = make_clients(split.train, ds.num_users, ds.num_items, cfg.users_per_client);

    std::vector<ResultRow> rows;
    auto flush_partial = [&] {
        if (!partial) return;
        *partial = rows;
        sort_rows(cfg, *partial);
    };

    try {
        for (auto seed : cfg.seeds) {
            std::vector<std::vector<ItemId>> pool;
            double fed_seconds = 0.0;
            if (need_fed) {
                auto t0 = std::chrono::steady_clock::now();
                FederationOptions opt;
                opt.seed = seed;
                opt.m_list = cfg.resolved_list_size();
                opt.jobs = cfg.jobs;
                auto fed = run_federation(clients, cfg.train, cfg.agg, opt);
                pool = std::move(fed.pool);
                fed_seconds = detail::elapsed_since(t0);
            }

            struct Cell {
                PolicyKind policy;
                std::size_t size_index;
            };
            std::vector<Cell> cells;
            for (auto p : cfg.policies) {
                for (std::size_t s = 0; s < cfg.cache_sizes.size(); ++s) cells.push_back({p, s});
            }
            std::vector<ResultRow> out(cells.size());
            parallel_for(cells.size(), cfg.jobs, [&](std::size_t k) {
                const auto& cell = cells[k];
                const std::size_t n = cfg.cache_sizes[cell.size_index];
                auto t0 = std::chrono::steady_clock::now();
                ReplayResult r;
                switch (cell.policy) {
                    case PolicyKind::oracle: r = replay(oracle_select(split.test, n), split.test, catalog); break;
                    case PolicyKind::gfpcc:
                        r = replay(gfpcc_select(pool, n, cfg.pool_prefix ? n : 0), split.test, catalog);
                        break;
                    case PolicyKind::random: {
                        Rng rng = make_rng(seed, "random", n);
                        r = replay(random_select(catalog, n, rng), split.test, catalog);
                        break;
                    }
                    case PolicyKind::egreedy:
                    case PolicyKind::thompson: {
                        BanditCache bandit(cell.policy, catalog, n, cfg.bandit_interval, cfg.epsilon,
                                           derive_seed(seed, policy_name(cell.policy), n), cfg.thompson_feedback);
                        r = replay(bandit, split.test);
                        break;
                    }
                }
                double secs = detail::elapsed_since(t0);
                if (cell.policy == PolicyKind::gfpcc) secs += fed_seconds;
                out[k] = {std::string(policy_name(cell.policy)), n, seed, r.efficiency(), secs};
            });
            rows.insert(rows.end(), out.begin(), out.end());
        }
    } catch (...) {
        flush_partial();
        throw;
    }
    sort_rows(cfg, rows);
    flush_partial();
    return rows;
}

// CSV: policy,N,seed,efficiency,seconds. Efficiency is written with 17
// significant digits so it re-parses bit-exactly. When `with_timing` is false
// the seconds column is written as 0 so the file is reproducible byte for
// byte.
inline void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out, bool with_timing) {
    out << "policy,N,seed,efficiency,seconds\n";
    char eff[64], secs[64];
    for (const auto& r : rows) {
        std::snprintf(eff, sizeof eff, "%.17g", r.efficiency);
        std::snprintf(secs, sizeof secs, "%.3f", with_timing ? r.seconds : 0.0);
        out << r.policy << ',' << r.cache_size << ',' << r.seed << ',' << eff << ',' << secs << '\n';
    }
}

inline std::vector<ResultRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "policy,N,seed,efficiency,seconds") {
        throw ParseError("missing results header 'policy,N,seed,efficiency,seconds'", 1);
    }
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split_fields(line, ",");
        ResultRow r;
        if (f.size() != 5 || f[0].empty() || !detail::parse_int(f[1], r.cache_size) || !detail::parse_int(f[2], r.seed)) {
            throw ParseError("malformed results row", line_no);
        }
        r.policy = std::string(f[0]);
        try {
            r.efficiency = std::stod(std::string(f[3]));
            r.seconds = std::stod(std::string(f[4]));
        } catch (const std::exception&) {
            throw ParseError("malformed number in results row", line_no);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

struct SummaryRow {
    std::string policy;
    std::size_t cache_size = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for a single seed
    std::size_t count = 0;
};

// Mean and spread across seeds per (policy, N), in first-seen policy order.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw DataError("no result rows to report");
    std::vector<std::string> policy_order;
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
    for (const auto& r : rows) {
        if (std::find(policy_order.begin(), policy_order.end(), r.policy) == policy_order.end()) {
            policy_order.push_back(r.policy);
        }
        groups[{r.policy, r.cache_size}].push_back(r.efficiency);
    }
    std::vector<SummaryRow> out;
    for (const auto& p : policy_order) {
        for (const auto& [key, vals] : groups) {
            if (key.first != p) continue;
            SummaryRow s{p, key.second, 0.0, 0.0, vals.size()};
            for (double v : vals) s.mean += v;
            s.mean /= static_cast<double>(vals.size());
            if (vals.size() > 1) {
                double ss = 0.0;
                for (double v : vals) ss += (v - s.mean) * (v - s.mean);
                s.stddev = std::sqrt(ss / static_cast<double>(vals.size() - 1));
            }
            out.push_back(s);
        }
    }
    return out;
}

// Aligned table: one row per cache size, one column per policy, cells are
// "mean% ± stddev".
inline void write_table(const std::vector<SummaryRow>& summary, std::ostream& out) {
    std::vector<std::string> policies;
    std::vector<std::size_t> sizes;
    for (const auto& s : summary) {
        if (std::find(policies.begin(), policies.end(), s.policy) == policies.end()) policies.push_back(s.policy);
        if (std::find(sizes.begin(), sizes.end(), s.cache_size) == sizes.end()) sizes.push_back(s.cache_size);
    }
    std::sort(sizes.begin(), sizes.end());
    constexpr int width = 18;
    out << std::left << std::setw(8) << "N";
    for (const auto& p : policies) out << std::setw(width) << p;
    out << '\n';
    char cell[64];
    for (auto n : sizes) {
        out << std::setw(8) << n;
        for (const auto& p : policies) {
            auto it = std::find_if(summary.begin(), summary.end(),
                                   [&](const SummaryRow& s) { return s.policy == p && s.cache_size == n; });
            if (it == summary.end()) {
                out << std::setw(width) << "-";
                continue;
            }
            std::snprintf(cell, sizeof cell, "%.2f%% ± %.2f", 100.0 * it->mean, 100.0 * it->stddev);
            out << std::setw(width) << cell;
        }
        out << '\n';
    }
}

}  // namespace gfpcc
