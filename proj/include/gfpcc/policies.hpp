#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gfpcc/data.hpp"
#include "gfpcc/error.hpp"
#include "gfpcc/random.hpp"

namespace gfpcc {

enum class PolicyKind { oracle, gfpcc, egreedy, thompson, random };

inline std::string_view policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::oracle: return "oracle";
        case PolicyKind::gfpcc: return "gfpcc";
        case PolicyKind::egreedy: return "egreedy";
        case PolicyKind::thompson: return "thompson";
        case PolicyKind::random: return "random";
    }
    return "?";
}

inline PolicyKind parse_policy(std::string_view s) {
    for (auto p : {PolicyKind::oracle, PolicyKind::gfpcc, PolicyKind::egreedy, PolicyKind::thompson,
                   PolicyKind::random}) {
        if (policy_name(p) == s) return p;
    }
    throw ConfigError("unknown policy '" + std::string(s) + "'");
}

// Edge cache holding at most `capacity` items, with hit counters.
class CacheState {
public:
    CacheState(std::size_t catalog, std::size_t capacity) : capacity_(capacity), member_(catalog, 0) {}

    void assign(std::span<const ItemId> items) {
        for (ItemId i : contents_) member_[static_cast<std::size_t>(i)] = 0;
        contents_.clear();
        for (ItemId i : items) {
            if (contents_.size() == capacity_) break;
            auto k = static_cast<std::size_t>(i);
            if (k >= member_.size()) throw DataError("cached item outside the catalog");
            if (member_[k]) continue;
            member_[k] = 1;
            contents_.push_back(i);
        }
    }

    bool contains(ItemId i) const { return member_[static_cast<std::size_t>(i)] != 0; }

    bool request(ItemId i) {
        ++requests_;
        bool hit = contains(i);
        if (hit) ++hits_;
        return hit;
    }

    const std::vector<ItemId>& contents() const noexcept { return contents_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::uint64_t hits() const noexcept { return hits_; }
    std::uint64_t requests() const noexcept { return requests_; }

private:
    std::size_t capacity_;
    std::vector<char> member_;
    std::vector<ItemId> contents_;
    std::uint64_t hits_ = 0;
    std::uint64_t requests_ = 0;
};

// Indices of the `n` largest values, ties broken by ascending index. With
// `positive_only`, indices whose value is zero or less are never returned.
template <typename T>
std::vector<ItemId> top_n(std::span<const T> values, std::size_t n, bool positive_only) {
    std::vector<ItemId> ids;
    ids.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!positive_only || values[i] > T{}) ids.push_back(static_cast<ItemId>(i));
    }
    std::size_t keep = std::min(n, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                      [&](ItemId a, ItemId b) {
                          auto va = values[static_cast<std::size_t>(a)], vb = values[static_cast<std::size_t>(b)];
                          if (va != vb) return va > vb;
                          return a < b;
                      });
    ids.resize(keep);
    return ids;
}

// Server-side cache choice: the N items that appear in the most client lists.
// With `prefix` > 0 only the first `prefix` entries of each list are counted.
inline std::vector<ItemId> gfpcc_select(const std::vector<std::vector<ItemId>>& pool, std::size_t n,
                                        std::size_t prefix = 0) {
    if (pool.empty()) throw DataError("gfpcc_select needs a non-empty recommendation pool");
    auto head = [&](const std::vector<ItemId>& l) {
        std::size_t len = prefix == 0 ? l.size() : std::min(prefix, l.size());
        return std::span<const ItemId>(l.data(), len);
    };
    ItemId max_id = -1;
    for (const auto& l : pool) {
        for (ItemId i : head(l)) max_id = std::max(max_id, i);
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(max_id + 1), 0);
    for (const auto& l : pool) {
        for (ItemId i : head(l)) ++counts[static_cast<std::size_t>(i)];
    }
    return top_n<std::uint64_t>(counts, n, true);
}

inline std::vector<std::uint64_t> request_counts(const RequestStream& stream, std::size_t catalog) {
    std::vector<std::uint64_t> counts(catalog, 0);
    for (const auto& e : stream) ++counts.at(static_cast<std::size_t>(e.item));
    return counts;
}

// Upper bound: the N most requested items of the stream being replayed.
inline std::vector<ItemId> oracle_select(const RequestStream& stream, std::size_t n) {
    if (stream.empty()) throw DataError("oracle_select needs a non-empty stream");
    ItemId max_id = 0;
    for (const auto& e : stream) max_id = std::max(max_id, e.item);
    auto counts = request_counts(stream, static_cast<std::size_t>(max_id) + 1);
    return top_n<std::uint64_t>(counts, n, true);
}

// N distinct items uniformly at random, in draw order.
inline std::vector<ItemId> random_select(std::size_t catalog, std::size_t n, Rng& rng) {
    if (n > catalog) throw ConfigError("random_select: cache larger than catalog");
    std::vector<ItemId> ids(catalog);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, catalog - 1);
        std::swap(ids[k], ids[pick(rng)]);
    }
    ids.resize(n);
    return ids;
}

struct BanditState {
    std::vector<double> reward;          // m-epsilon-greedy
    std::vector<std::uint64_t> wins;     // Thompson sampling
    std::vector<std::uint64_t> losses;

    explicit BanditState(std::size_t catalog = 0) : reward(catalog, 0.0), wins(catalog, 0), losses(catalog, 0) {}

    std::size_t catalog() const noexcept { return reward.size(); }
};

// With probability 1-eps the N highest-reward items, otherwise N random ones.
inline std::vector<ItemId> egreedy_step(const BanditState& state, std::size_t n, double eps, Rng& rng,
                                        bool* explored = nullptr) {
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    bool explore = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps;
    if (explored) *explored = explore;
    if (explore) return random_select(state.catalog(), std::min(n, state.catalog()), rng);
    return top_n<double>(state.reward, n, false);
}

// Top N items by a Beta(wins+1, losses+1) draw per item.
inline std::vector<ItemId> thompson_step(const BanditState& state, std::size_t n, Rng& rng) {
    std::vector<double> draw(state.catalog());
    for (std::size_t i = 0; i < draw.size(); ++i) {
        draw[i] = sample_beta(rng, static_cast<double>(state.wins[i]) + 1.0,
                              static_cast<double>(state.losses[i]) + 1.0);
    }
    return top_n<double>(draw, n, false);
}

// How Thompson sampling turns cache outcomes into wins and losses.
//   per_miss:     a hit is a win for the requested item; every miss is a loss
//                 for each item currently cached.
//   per_interval: each re-selection interval is one trial per cached item: a
//                 win if it was requested at least once, a loss otherwise.
enum class ThompsonFeedback { per_miss, per_interval };

inline ThompsonFeedback parse_thompson_feedback(std::string_view s) {
    if (s == "per_miss") return ThompsonFeedback::per_miss;
    if (s == "per_interval") return ThompsonFeedback::per_interval;
    throw ConfigError("unknown Thompson feedback '" + std::string(s) + "' (expected per_miss or per_interval)");
}

inline std::string_view thompson_feedback_name(ThompsonFeedback f) {
    return f == ThompsonFeedback::per_miss ? "per_miss" : "per_interval";
}

// Online bandit cache: re-selects every `interval` requests and learns from
// hits. m-epsilon-greedy credits one reward per hit to the requested item.
class BanditCache {
public:
    BanditCache(PolicyKind kind, std::size_t catalog, std::size_t capacity, std::size_t interval, double epsilon,
                std::uint64_t seed, ThompsonFeedback feedback = ThompsonFeedback::per_interval)
        : kind_(kind), feedback_(feedback), state_(catalog), cache_(catalog, capacity), interval_(interval),
          epsilon_(epsilon), rng_(seed), hit_in_interval_(catalog, 0) {
        if (kind != PolicyKind::egreedy && kind != PolicyKind::thompson) {
            throw ConfigError("BanditCache only runs egreedy or thompson");
        }
        if (interval == 0) throw ConfigError("bandit.interval must be positive");
        reselect();
    }

    bool request(ItemId item) {
        if (since_select_ == interval_) {
            close_interval();
            reselect();
        }
        ++since_select_;
        bool hit = cache_.request(item);
        auto k = static_cast<std::size_t>(item);
        if (kind_ == PolicyKind::egreedy) {
            if (hit) state_.reward[k] += 1.0;
        } else if (feedback_ == ThompsonFeedback::per_interval) {
            if (hit) hit_in_interval_[k] = 1;
        } else if (hit) {
            ++state_.wins[k];
        } else {
            for (ItemId c : cache_.contents()) ++state_.losses[static_cast<std::size_t>(c)];
        }
        return hit;
    }

    const CacheState& cache() const noexcept { return cache_; }
    const BanditState& state() const noexcept { return state_; }

private:
    void close_interval() {
        if (kind_ != PolicyKind::thompson || feedback_ != ThompsonFeedback::per_interval) return;
        for (ItemId c : cache_.contents()) {
            auto k = static_cast<std::size_t>(c);
            if (hit_in_interval_[k]) {
                ++state_.wins[k];
            } else {
                ++state_.losses[k];
            }
            hit_in_interval_[k] = 0;
        }
    }

    void reselect() {
        std::vector<ItemId> next = kind_ == PolicyKind::egreedy
                                       ? egreedy_step(state_, cache_.capacity(), epsilon_, rng_)
                                       : thompson_step(state_, cache_.capacity(), rng_);
        cache_.assign(next);
        since_select_ = 0;
    }

    PolicyKind kind_;
    ThompsonFeedback feedback_;
    BanditState state_;
    CacheState cache_;
    std::size_t interval_;
    double epsilon_;
    Rng rng_;
    std::vector<char> hit_in_interval_;
    std::size_t since_select_ = 0;
};

}  // namespace gfpcc
