#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gfpcc/data.hpp"
#include "gfpcc/error.hpp"
#include "gfpcc/graph.hpp"
#include "gfpcc/model.hpp"
#include "gfpcc/parallel.hpp"
#include "gfpcc/random.hpp"

namespace gfpcc {

using ClientId = std::int32_t;

// One simulated device. Its graph holds only its own users' training edges,
// over the global user and item id space.
struct ClientState {
    ClientId id = 0;
    std::vector<UserId> users;
    InteractionGraph local_graph;
};

// Everything a client sends to the server. Deliberately holds no events.
struct ClientUpdate {
    ClientId client_id = 0;
    ModelParams params;
    std::vector<ItemId> list;
    double local_loss = 0.0;
};

struct AggregationConfig {
    double q = 0.0;
    // Lipschitz constant; 0 means "use 1/lr".
    double lipschitz = 0.0;
    // Clients sampled per round; 0 means all clients.
    std::size_t clients_per_round = 0;
    std::size_t global_epochs = 10;

    double resolved_lipschitz(const TrainConfig& train) const {
        if (lipschitz > 0.0) return lipschitz;
        return train.lr > 0.0 ? 1.0 / train.lr : 1.0;
    }

    std::size_t resolved_clients(std::size_t num_clients) const {
        return clients_per_round == 0 ? num_clients : clients_per_round;
    }

    void validate(std::size_t num_clients) const {
        if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("agg.q must be finite and >= 0");
        if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) throw ConfigError("agg.G must be > 0 (or 0 for auto)");
        if (clients_per_round > num_clients) {
            throw ConfigError("fed.clients_per_round exceeds the number of clients");
        }
    }
};

// Groups consecutive users into clients of `users_per_client`.
inline std::vector<ClientState> make_clients(const std::vector<std::vector<RatingEvent>>& train, std::size_t num_users,
                                             std::size_t num_items, std::size_t users_per_client = 1) {
    if (users_per_client == 0) throw ConfigError("fed.users_per_client must be positive");
    std::vector<ClientState> clients;
    for (std::size_t first = 0; first < num_users; first += users_per_client) {
        ClientState c;
        c.id = static_cast<ClientId>(clients.size());
        std::vector<std::pair<UserId, ItemId>> edges;
        for (std::size_t u = first; u < std::min(num_users, first + users_per_client); ++u) {
            c.users.push_back(static_cast<UserId>(u));
            if (u < train.size()) {
                for (const auto& e : train[u]) edges.emplace_back(e.user, e.item);
            }
        }
        c.local_graph = InteractionGraph::from_edges(std::move(edges), num_users, num_items);
        clients.push_back(std::move(c));
    }
    return clients;
}

// Uniform sample of `count` client indices without replacement, ascending.
inline std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t count, Rng& rng) {
    if (count > num_clients) throw ConfigError("cannot sample more clients than exist");
    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), 0);
    if (count == num_clients) return ids;
    for (std::size_t k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, num_clients - 1);
        std::swap(ids[k], ids[pick(rng)]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline std::uint64_t client_seed(std::uint64_t root, std::size_t round, ClientId client) {
    return derive_seed(root, "client", round, static_cast<std::uint64_t>(client));
}

// One local step: start from the global model, train on local
// edges, score and list the top `m_list` unseen items. `w_bar` is not touched.
inline ClientUpdate client_round(const ClientState& state, const ModelParams& w_bar, TrainConfig cfg,
                                 std::size_t m_list, std::uint64_t seed) {
    ClientUpdate up;
    up.client_id = state.id;
    if (state.local_graph.num_edges() == 0) {
        up.params = w_bar;
        return up;
    }
    cfg.seed = seed;
    auto trained = train_local(w_bar, state.local_graph, cfg);
    up.params = std::move(trained.params);
    up.local_loss = trained.final_loss;
    up.list = recommend_local(up.params, state.local_graph, state.users, m_list);
    return up;
}

// Streaming q-FedAvg. Updates must arrive in strictly ascending client id, so
// the floating-point summation order is fixed no matter how clients ran.
//
//   dw_c    = G (w - w_c)
//   dtheta_c = L_c^q dw_c
//   h_c     = q L_c^(q-1) ||dw_c||^2 + G L_c^q
//   w'      = w - sum dtheta_c / sum h_c
class QFedAvgAccumulator {
public:
    QFedAvgAccumulator(const ModelParams& w_bar, double q, double lipschitz)
        : w_bar_(w_bar), q_(q), g_(lipschitz), numerator_(w_bar.trainable_size(), 0.0) {
        if (!(lipschitz > 0.0)) throw AggregationError("Lipschitz constant must be positive");
        if (!(q >= 0.0)) throw AggregationError("q must be >= 0");
    }

    // Returns false (and ignores the update) for a loss that is negative or not
    // finite, or when the update's weights come out non-finite.
    bool add(const ClientUpdate& up) {
        if (last_id_ && up.client_id <= *last_id_) {
            throw AggregationError("updates must be added in ascending client id order");
        }
        if (!up.params.same_shape(w_bar_)) throw AggregationError("client parameter shape mismatch");
        const double loss = up.local_loss;
        if (!(loss >= 0.0) || !std::isfinite(loss)) return false;

        double sq = 0.0;
        std::size_t offset = 0;
        std::vector<double> delta(numerator_.size());
        auto w_spans = spans(w_bar_);
        auto c_spans = spans(up.params);
        for (std::size_t s = 0; s < w_spans.size(); ++s) {
            for (std::size_t k = 0; k < w_spans[s].size(); ++k) {
                double dk = w_spans[s][k] - c_spans[s][k];
                delta[offset + k] = dk;
                sq += dk * dk;
            }
            offset += w_spans[s].size();
        }
        sq *= g_ * g_;  // ||dw_c||^2

        const double lq = std::pow(loss, q_);
        const double coeff = g_ * lq;
        double h = g_ * lq;
        if (q_ > 0.0 && sq > 0.0) h += q_ * std::pow(loss, q_ - 1.0) * sq;
        if (!std::isfinite(coeff) || !std::isfinite(h)) return false;

        for (std::size_t k = 0; k < delta.size(); ++k) numerator_[k] += coeff * delta[k];
        denominator_ += h;
        last_id_ = up.client_id;
        ++accepted_;
        if (accepted_ == 1) {
            single_ = up.params;
            single_coeff_ = coeff;
        } else {
            single_.reset();
        }
        return true;
    }

    std::size_t accepted() const noexcept { return accepted_; }

    // The new global model. With nothing accepted or a zero denominator the
    // global model is returned unchanged.
    ModelParams finish() const {
        if (accepted_ == 0 || denominator_ == 0.0) return w_bar_;
        // A lone update whose weight is exactly one is the update itself; this
        // avoids the rounding of w - (w - w_c).
        if (single_ && single_coeff_ / denominator_ == 1.0) return *single_;
        ModelParams out = w_bar_;
        std::size_t offset = 0;
        out.for_each_trainable([&](std::span<double> s) {
            for (std::size_t k = 0; k < s.size(); ++k) s[k] -= numerator_[offset + k] / denominator_;
            offset += s.size();
        });
        if (!out.all_finite()) throw AggregationError("aggregated model is not finite");
        return out;
    }

private:
    static std::vector<std::span<const double>> spans(const ModelParams& p) {
        std::vector<std::span<const double>> out;
        p.for_each_trainable([&](std::span<const double> s) { out.push_back(s); });
        return out;
    }

    const ModelParams& w_bar_;
    double q_;
    double g_;
    std::vector<double> numerator_;
    double denominator_ = 0.0;
    std::optional<ClientId> last_id_;
    std::size_t accepted_ = 0;
    std::optional<ModelParams> single_;
    double single_coeff_ = 0.0;
};

// One server aggregation over a batch of updates, in canonical client order.
inline ModelParams qfedavg_aggregate(const ModelParams& w_bar, const std::vector<ClientUpdate>& updates, double q,
                                     double lipschitz) {
    if (updates.empty()) throw AggregationError("aggregation needs at least one update");
    std::vector<const ClientUpdate*> order;
    for (const auto& u : updates) order.push_back(&u);
    std::sort(order.begin(), order.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });
    QFedAvgAccumulator acc(w_bar, q, lipschitz);
    for (const auto* u : order) acc.add(*u);
    return acc.finish();
}

struct RoundLog {
    std::size_t round = 0;
    std::vector<ClientId> clients;  // accepted into the aggregate
    std::size_t failed = 0;
    double mean_loss = 0.0;
    double param_norm = 0.0;
};

struct FederationResult {
    ModelParams global;
    std::vector<std::vector<ItemId>> pool;  // last round's lists, by client id
    std::vector<RoundLog> rounds;
};

inline double param_l2_norm(const ModelParams& p) {
    double s = 0.0;
    p.for_each_trainable([&](std::span<const double> v) { s += squared_norm(v); });
    return std::sqrt(s);
}

struct FederationOptions {
    std::uint64_t seed = 0;
    std::size_t m_list = 400;
    std::size_t jobs = 1;
    // Called after each aggregation with the round log and new global model.
    std::function<void(const RoundLog&, const ModelParams&)> on_round;
};

// Global rounds of {sample clients, local updates, q-FedAvg}. Clients run in
// chunks of `jobs`; results are folded in client-id order, so the outcome is
// the same for any job count. A client whose training diverges is dropped
// from its round; a round where every client fails aborts the run.
inline FederationResult run_federation(const std::vector<ClientState>& clients, const TrainConfig& train_cfg,
                                       const AggregationConfig& agg_cfg, const FederationOptions& opt,
                                       std::optional<ModelParams> initial = std::nullopt) {
    if (clients.empty()) throw DataError("federation needs at least one client");
    agg_cfg.validate(clients.size());
    train_cfg.validate();
    const std::size_t num_users = clients.front().local_graph.num_users();
    const std::size_t num_items = clients.front().local_graph.num_items();

    FederationResult result;
    result.global = initial ? std::move(*initial) : init_params(num_users, num_items, train_cfg, opt.seed);
    const double lipschitz = agg_cfg.resolved_lipschitz(train_cfg);
    const std::size_t per_round = agg_cfg.resolved_clients(clients.size());
    const std::size_t chunk = std::max<std::size_t>(1, opt.jobs);

    for (std::size_t round = 0; round < agg_cfg.global_epochs; ++round) {
        Rng sampler = make_rng(opt.seed, "sample", round);
        auto chosen = sample_clients(clients.size(), per_round, sampler);
        const bool last = round + 1 == agg_cfg.global_epochs;

        QFedAvgAccumulator acc(result.global, agg_cfg.q, lipschitz);
        RoundLog log;
        log.round = round;
        double loss_sum = 0.0;
        std::vector<std::vector<ItemId>> pool;

        for (std::size_t begin = 0; begin < chosen.size(); begin += chunk) {
            std::size_t n = std::min(chunk, chosen.size() - begin);
            std::vector<std::optional<ClientUpdate>> slot(n);
            parallel_for(n, opt.jobs, [&](std::size_t k) {
                const auto& c = clients[chosen[begin + k]];
                try {
                    slot[k] = client_round(c, result.global, train_cfg, opt.m_list, client_seed(opt.seed, round, c.id));
                } catch (const TrainingDiverged&) {
                    slot[k].reset();
                }
            });
            for (auto& up : slot) {
                if (!up || !acc.add(*up)) {
                    ++log.failed;
                    continue;
                }
                log.clients.push_back(up->client_id);
                loss_sum += up->local_loss;
                if (last) pool.push_back(std::move(up->list));
            }
        }
        if (acc.accepted() == 0) {
            throw AggregationError("round " + std::to_string(round) + ": every participating client failed");
        }
        result.global = acc.finish();
        log.mean_loss = loss_sum / static_cast<double>(acc.accepted());
        log.param_norm = param_l2_norm(result.global);
        if (opt.on_round) opt.on_round(log, result.global);
        result.rounds.push_back(std::move(log));
        if (last) result.pool = std::move(pool);
    }
    return result;
}

// "round,clients,mean_loss,param_norm"; client ids joined by ';'.
inline void write_round_log(const std::vector<RoundLog>& rounds, std::ostream& out) {
    out << "round,clients,mean_loss,param_norm\n";
    char buf[64];
    for (const auto& r : rounds) {
        out << r.round << ',';
        for (std::size_t k = 0; k < r.clients.size(); ++k) out << (k ? ";" : "") << r.clients[k];
        std::snprintf(buf, sizeof buf, ",%.17g", r.mean_loss);
        out << buf;
        std::snprintf(buf, sizeof buf, ",%.17g\n", r.param_norm);
        out << buf;
    }
}

}  // namespace gfpcc
