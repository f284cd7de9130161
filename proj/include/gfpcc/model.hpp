#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gfpcc/error.hpp"
#include "gfpcc/graph.hpp"
#include "gfpcc/matrix.hpp"
#include "gfpcc/random.hpp"

namespace gfpcc {

enum class Optimizer { sgd, adam };

inline Optimizer parse_optimizer(std::string_view s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

inline std::string_view optimizer_name(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

struct TrainConfig {
    std::size_t dim = 64;
    std::size_t layers = 3;
    double lambda = 1e-4;
    double lr = 0.01;
    std::size_t batch_size = 2048;
    std::size_t local_epochs = 5;
    std::size_t neg_samples = 1;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::sgd;
    // Keep every W^(k) at identity (plain LightGCN).
    bool freeze_weights = false;
    // Layer weights; empty means uniform 1/(K+1).
    std::vector<double> beta;

    void validate() const {
        if (dim == 0) throw ConfigError("model.dim must be positive");
        if (batch_size == 0) throw ConfigError("model.batch_size must be positive");
        if (local_epochs == 0) throw ConfigError("model.local_epochs must be positive");
        if (neg_samples == 0) throw ConfigError("model.neg_samples must be positive");
        if (!(lambda >= 0.0)) throw ConfigError("model.lambda must be >= 0");
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("model.lr must be finite and >= 0");
        if (!beta.empty()) {
            if (beta.size() != layers + 1) throw ConfigError("model.beta needs layers+1 entries");
            for (double b : beta) {
                if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("model.beta entries must be finite and >= 0");
            }
        }
    }

    std::vector<double> resolved_beta() const {
        if (!beta.empty()) return beta;
        return std::vector<double>(layers + 1, 1.0 / static_cast<double>(layers + 1));
    }
};

struct ModelParams {
    std::size_t dim = 0;
    std::size_t layers = 0;
    Matrix user_emb;               // p_u^(0), num_users x dim
    Matrix item_emb;               // p_i^(0), num_items x dim
    std::vector<Matrix> weights;   // W^(k), one dim x dim matrix per layer
    std::vector<double> beta;      // layers + 1 combination weights

    std::size_t num_users() const noexcept { return user_emb.rows(); }
    std::size_t num_items() const noexcept { return item_emb.rows(); }

    // Embeddings and layer weights, in checkpoint order. beta is configuration,
    // not a trainable.
    template <typename F>
    void for_each_trainable(F&& f) {
        f(user_emb.flat());
        f(item_emb.flat());
        for (auto& w : weights) f(w.flat());
    }
    template <typename F>
    void for_each_trainable(F&& f) const {
        f(user_emb.flat());
        f(item_emb.flat());
        for (const auto& w : weights) f(w.flat());
    }

    std::size_t trainable_size() const {
        std::size_t n = 0;
        for_each_trainable([&](std::span<const double> s) { n += s.size(); });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_trainable([&](std::span<const double> s) {
            for (double v : s) ok = ok && std::isfinite(v);
        });
        for (double b : beta) ok = ok && std::isfinite(b);
        return ok;
    }

    bool same_shape(const ModelParams& o) const {
        if (dim != o.dim || layers != o.layers || num_users() != o.num_users() || num_items() != o.num_items() ||
            weights.size() != o.weights.size())
            return false;
        return true;
    }

    bool operator==(const ModelParams&) const = default;
};

inline ModelParams init_params(std::size_t num_users, std::size_t num_items, const TrainConfig& cfg,
                               std::uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.dim = cfg.dim;
    p.layers = cfg.layers;
    p.user_emb = Matrix(num_users, cfg.dim);
    p.item_emb = Matrix(num_items, cfg.dim);
    Rng rng = make_rng(seed, "init");
    std::normal_distribution<double> normal(0.0, 0.1);
    for (double& v : p.user_emb.flat()) v = normal(rng);
    for (double& v : p.item_emb.flat()) v = normal(rng);
    p.weights.assign(cfg.layers, Matrix::identity(cfg.dim));
    p.beta = cfg.resolved_beta();
    return p;
}

// Per-layer embeddings after K rounds of light graph convolution.
//
// Layer 0 is read straight from the parameters (the object keeps a pointer, so
// the ModelParams must outlive it). Layers 1..K are stored only for nodes with
// nonzero degree; every other node is zero at those layers, which keeps
// propagation on a single client's graph proportional to its own edges.
class PropagatedEmbeddings {
public:
    std::size_t layers() const noexcept { return layers_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const UserId> active_users() const noexcept { return active_users_; }
    std::span<const ItemId> active_items() const noexcept { return active_items_; }
    std::int32_t user_slot(UserId u) const { return user_slot_[static_cast<std::size_t>(u)]; }
    std::int32_t item_slot(ItemId i) const { return item_slot_[static_cast<std::size_t>(i)]; }

    std::span<const double> user_layer(std::size_t k, UserId u) const {
        if (k == 0) return params_->user_emb.row(static_cast<std::size_t>(u));
        auto s = user_slot(u);
        if (s < 0) return zeros_;
        return user_layers_[k - 1].row(static_cast<std::size_t>(s));
    }
    std::span<const double> item_layer(std::size_t k, ItemId i) const {
        if (k == 0) return params_->item_emb.row(static_cast<std::size_t>(i));
        auto s = item_slot(i);
        if (s < 0) return zeros_;
        return item_layers_[k - 1].row(static_cast<std::size_t>(s));
    }

    // Pre-W neighbor aggregate feeding layer k+1, by compact slot.
    const Matrix& user_aggregate(std::size_t k) const { return user_agg_[k]; }
    const Matrix& item_aggregate(std::size_t k) const { return item_agg_[k]; }

    // out = sum_k beta_k p^(k)
    void final_user(UserId u, std::span<const double> beta, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t k = 0; k <= layers_; ++k) axpy(beta[k], user_layer(k, u), out);
    }
    void final_item(ItemId i, std::span<const double> beta, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t k = 0; k <= layers_; ++k) axpy(beta[k], item_layer(k, i), out);
    }

    Matrix dense_user_layer(std::size_t k) const {
        Matrix m(user_slot_.size(), dim_);
        for (std::size_t u = 0; u < user_slot_.size(); ++u) {
            auto r = user_layer(k, static_cast<UserId>(u));
            std::copy(r.begin(), r.end(), m.row(u).begin());
        }
        return m;
    }
    Matrix dense_item_layer(std::size_t k) const {
        Matrix m(item_slot_.size(), dim_);
        for (std::size_t i = 0; i < item_slot_.size(); ++i) {
            auto r = item_layer(k, static_cast<ItemId>(i));
            std::copy(r.begin(), r.end(), m.row(i).begin());
        }
        return m;
    }

private:
    friend PropagatedEmbeddings propagate(const ModelParams&, const InteractionGraph&);

    const ModelParams* params_ = nullptr;
    std::size_t layers_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::int32_t> user_slot_, item_slot_;
    std::vector<UserId> active_users_;
    std::vector<ItemId> active_items_;
    std::vector<double> user_inv_sqrt_, item_inv_sqrt_;  // by slot
    std::vector<Matrix> user_layers_, item_layers_;      // layers 1..K
    std::vector<Matrix> user_agg_, item_agg_;            // aggregates 0..K-1
    std::vector<double> zeros_;

    friend class BprBackward;
};

// p_u^(k+1) = W^(k) sum_{i in N_u} p_i^(k) / (sqrt|N_u| sqrt|N_i|), and the
// mirror image for items. No self term, no nonlinearity.
inline PropagatedEmbeddings propagate(const ModelParams& params, const InteractionGraph& g) {
    if (g.num_users() != params.num_users() || g.num_items() != params.num_items()) {
        throw DataError("graph and parameter shapes disagree");
    }
    PropagatedEmbeddings pe;
    pe.params_ = &params;
    pe.layers_ = params.layers;
    pe.dim_ = params.dim;
    pe.zeros_.assign(params.dim, 0.0);
    pe.user_slot_.assign(g.num_users(), -1);
    pe.item_slot_.assign(g.num_items(), -1);
    for (std::size_t u = 0; u < g.num_users(); ++u) {
        auto deg = g.user_degree(static_cast<UserId>(u));
        if (deg == 0) continue;
        pe.user_slot_[u] = static_cast<std::int32_t>(pe.active_users_.size());
        pe.active_users_.push_back(static_cast<UserId>(u));
        pe.user_inv_sqrt_.push_back(1.0 / std::sqrt(static_cast<double>(deg)));
    }
    for (std::size_t i = 0; i < g.num_items(); ++i) {
        auto deg = g.item_degree(static_cast<ItemId>(i));
        if (deg == 0) continue;
        pe.item_slot_[i] = static_cast<std::int32_t>(pe.active_items_.size());
        pe.active_items_.push_back(static_cast<ItemId>(i));
        pe.item_inv_sqrt_.push_back(1.0 / std::sqrt(static_cast<double>(deg)));
    }

    const std::size_t d = params.dim;
    const std::size_t nu = pe.active_users_.size();
    const std::size_t ni = pe.active_items_.size();
    for (std::size_t k = 0; k < params.layers; ++k) {
        Matrix uagg(nu, d), iagg(ni, d), uout(nu, d), iout(ni, d);
        const bool plain = is_identity(params.weights[k]);
        auto transform = [&](std::span<const double> in, std::span<double> out) {
            if (plain) {
                std::copy(in.begin(), in.end(), out.begin());
            } else {
                matvec(params.weights[k], in, out);
            }
        };
        for (std::size_t s = 0; s < nu; ++s) {
            UserId u = pe.active_users_[s];
            auto acc = uagg.row(s);
            for (ItemId i : g.user_neighbors(u)) {
                double c = pe.user_inv_sqrt_[s] * pe.item_inv_sqrt_[static_cast<std::size_t>(pe.item_slot(i))];
                axpy(c, pe.item_layer(k, i), acc);
            }
            transform(acc, uout.row(s));
        }
        for (std::size_t s = 0; s < ni; ++s) {
            ItemId i = pe.active_items_[s];
            auto acc = iagg.row(s);
            for (UserId u : g.item_neighbors(i)) {
                double c = pe.item_inv_sqrt_[s] * pe.user_inv_sqrt_[static_cast<std::size_t>(pe.user_slot(u))];
                axpy(c, pe.user_layer(k, u), acc);
            }
            transform(acc, iout.row(s));
        }
        pe.user_agg_.push_back(std::move(uagg));
        pe.item_agg_.push_back(std::move(iagg));
        // Layer k+1 must be appended only after both sides read layer k.
        pe.user_layers_.push_back(std::move(uout));
        pe.item_layers_.push_back(std::move(iout));
    }
    return pe;
}

// Final representations P = sum_k beta_k p^(k) for every user and item.
inline std::pair<Matrix, Matrix> combine_layers(const PropagatedEmbeddings& pe, std::span<const double> beta) {
    if (beta.size() != pe.layers() + 1) throw ConfigError("beta must have layers+1 entries");
    Matrix pu = pe.dense_user_layer(0);
    Matrix pi = pe.dense_item_layer(0);
    for (double& v : pu.flat()) v *= beta[0];
    for (double& v : pi.flat()) v *= beta[0];
    for (std::size_t k = 1; k <= pe.layers(); ++k) {
        for (UserId u : pe.active_users()) axpy(beta[k], pe.user_layer(k, u), pu.row(static_cast<std::size_t>(u)));
        for (ItemId i : pe.active_items()) axpy(beta[k], pe.item_layer(k, i), pi.row(static_cast<std::size_t>(i)));
    }
    return {std::move(pu), std::move(pi)};
}

inline double score(std::span<const double> user_final, std::span<const double> item_final) {
    if (user_final.size() != item_final.size()) throw DataError("score: dimension mismatch");
    return dot(user_final, item_final);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

struct BprTriple {
    UserId user = 0;
    ItemId pos = 0;
    ItemId neg = 0;

    bool operator==(const BprTriple&) const = default;
};

// Gradient with the same layout as the trainables of ModelParams.
struct Gradients {
    Matrix user_emb, item_emb;
    std::vector<Matrix> weights;

    static Gradients zeros_like(const ModelParams& p) {
        Gradients g;
        g.user_emb = Matrix(p.num_users(), p.dim);
        g.item_emb = Matrix(p.num_items(), p.dim);
        g.weights.assign(p.layers, Matrix(p.dim, p.dim));
        return g;
    }
};

// Scratch gradient for training: remembers which embedding rows it touched so
// clearing and applying stay proportional to the batch, not the catalog.
class GradWorkspace {
public:
    explicit GradWorkspace(const ModelParams& p)
        : grad_(Gradients::zeros_like(p)), user_seen_(p.num_users(), 0), item_seen_(p.num_items(), 0) {}

    std::span<double> user_row(UserId u) {
        auto k = static_cast<std::size_t>(u);
        if (!user_seen_[k]) {
            user_seen_[k] = 1;
            user_rows_.push_back(u);
        }
        return grad_.user_emb.row(k);
    }
    std::span<double> item_row(ItemId i) {
        auto k = static_cast<std::size_t>(i);
        if (!item_seen_[k]) {
            item_seen_[k] = 1;
            item_rows_.push_back(i);
        }
        return grad_.item_emb.row(k);
    }
    Matrix& weight(std::size_t k) { return grad_.weights[k]; }

    const std::vector<UserId>& touched_users() const noexcept { return user_rows_; }
    const std::vector<ItemId>& touched_items() const noexcept { return item_rows_; }
    const Gradients& gradients() const noexcept { return grad_; }

    void clear() {
        for (UserId u : user_rows_) {
            auto r = grad_.user_emb.row(static_cast<std::size_t>(u));
            std::fill(r.begin(), r.end(), 0.0);
            user_seen_[static_cast<std::size_t>(u)] = 0;
        }
        for (ItemId i : item_rows_) {
            auto r = grad_.item_emb.row(static_cast<std::size_t>(i));
            std::fill(r.begin(), r.end(), 0.0);
            item_seen_[static_cast<std::size_t>(i)] = 0;
        }
        user_rows_.clear();
        item_rows_.clear();
        for (auto& w : grad_.weights) w.fill(0.0);
    }

private:
    Gradients grad_;
    std::vector<char> user_seen_, item_seen_;
    std::vector<UserId> user_rows_;
    std::vector<ItemId> item_rows_;
};

// Backward pass through the propagation for one batch of triples.
class BprBackward {
public:
    // Returns sum_t softplus(-(y_ui - y_uj)) and adds its gradient (no L2 term)
    // into `ws`.
    static double run(const ModelParams& params, const InteractionGraph& g, const PropagatedEmbeddings& pe,
                      std::span<const BprTriple> triples, GradWorkspace* ws, bool train_weights) {
        const std::size_t d = params.dim;
        const std::size_t K = params.layers;
        const auto& beta = params.beta;
        const std::size_t nu = pe.active_users_.size();
        const std::size_t ni = pe.active_items_.size();

        // Final embeddings: active nodes precomputed, the rest are beta_0 p^(0).
        Matrix fu(nu, d), fi(ni, d);
        for (std::size_t s = 0; s < nu; ++s) pe.final_user(pe.active_users_[s], beta, fu.row(s));
        for (std::size_t s = 0; s < ni; ++s) pe.final_item(pe.active_items_[s], beta, fi.row(s));

        std::vector<double> tmp_u(d), tmp_i(d), tmp_j(d);
        auto user_final = [&](UserId u, std::vector<double>& buf) -> std::span<const double> {
            auto s = pe.user_slot(u);
            if (s >= 0) return fu.row(static_cast<std::size_t>(s));
            auto r = params.user_emb.row(static_cast<std::size_t>(u));
            for (std::size_t a = 0; a < d; ++a) buf[a] = beta[0] * r[a];
            return buf;
        };
        auto item_final = [&](ItemId i, std::vector<double>& buf) -> std::span<const double> {
            auto s = pe.item_slot(i);
            if (s >= 0) return fi.row(static_cast<std::size_t>(s));
            auto r = params.item_emb.row(static_cast<std::size_t>(i));
            for (std::size_t a = 0; a < d; ++a) buf[a] = beta[0] * r[a];
            return buf;
        };

        Matrix dfu(ws ? nu : 0, d), dfi(ws ? ni : 0, d);
        auto add_user = [&](UserId u, double alpha, std::span<const double> v) {
            auto s = pe.user_slot(u);
            if (s >= 0) {
                axpy(alpha, v, dfu.row(static_cast<std::size_t>(s)));
            } else {
                axpy(alpha * beta[0], v, ws->user_row(u));
            }
        };
        auto add_item = [&](ItemId i, double alpha, std::span<const double> v) {
            auto s = pe.item_slot(i);
            if (s >= 0) {
                axpy(alpha, v, dfi.row(static_cast<std::size_t>(s)));
            } else {
                axpy(alpha * beta[0], v, ws->item_row(i));
            }
        };

        double loss = 0.0;
        std::vector<double> diff(d);
        for (const auto& t : triples) {
            auto pu = user_final(t.user, tmp_u);
            auto pi = item_final(t.pos, tmp_i);
            auto pj = item_final(t.neg, tmp_j);
            double x = dot(pu, pi) - dot(pu, pj);
            loss += softplus(-x);
            if (!ws) continue;
            double gx = -sigmoid(-x);
            for (std::size_t a = 0; a < d; ++a) diff[a] = pi[a] - pj[a];
            add_user(t.user, gx, diff);
            add_item(t.pos, gx, pu);
            add_item(t.neg, -gx, pu);
        }
        if (!ws || K == 0) {
            if (ws) {
                for (std::size_t s = 0; s < nu; ++s) axpy(beta[0], dfu.row(s), ws->user_row(pe.active_users_[s]));
                for (std::size_t s = 0; s < ni; ++s) axpy(beta[0], dfi.row(s), ws->item_row(pe.active_items_[s]));
            }
            return loss;
        }

        // gu/gi hold dL/dp^(k+1) for active nodes, walking k from K-1 down to 0.
        Matrix gu(nu, d), gi(ni, d);
        for (std::size_t s = 0; s < nu; ++s) axpy(beta[K], dfu.row(s), gu.row(s));
        for (std::size_t s = 0; s < ni; ++s) axpy(beta[K], dfi.row(s), gi.row(s));
        Matrix dzu(nu, d), dzi(ni, d);
        for (std::size_t kk = K; kk-- > 0;) {
            const Matrix& w = params.weights[kk];
            if (train_weights) {
                Matrix& dw = ws->weight(kk);
                const Matrix& zu = pe.user_agg_[kk];
                const Matrix& zi = pe.item_agg_[kk];
                for (std::size_t s = 0; s < nu; ++s) {
                    for (std::size_t a = 0; a < d; ++a) axpy(gu(s, a), zu.row(s), dw.row(a));
                }
                for (std::size_t s = 0; s < ni; ++s) {
                    for (std::size_t a = 0; a < d; ++a) axpy(gi(s, a), zi.row(s), dw.row(a));
                }
            }
            if (is_identity(w)) {
                dzu = gu;
                dzi = gi;
            } else {
                dzu.fill(0.0);
                dzi.fill(0.0);
                for (std::size_t s = 0; s < nu; ++s) matvec_transposed_add(w, gu.row(s), dzu.row(s));
                for (std::size_t s = 0; s < ni; ++s) matvec_transposed_add(w, gi.row(s), dzi.row(s));
            }

            // dL/dp^(kk): direct beta term plus what flows back through the
            // neighbor sums (users receive from items and vice versa).
            Matrix nu_grad(nu, d), ni_grad(ni, d);
            for (std::size_t s = 0; s < nu; ++s) {
                UserId u = pe.active_users_[s];
                for (ItemId i : g.user_neighbors(u)) {
                    auto is = static_cast<std::size_t>(pe.item_slot(i));
                    double c = pe.user_inv_sqrt_[s] * pe.item_inv_sqrt_[is];
                    axpy(c, dzi.row(is), nu_grad.row(s));
                }
                axpy(beta[kk], dfu.row(s), nu_grad.row(s));
            }
            for (std::size_t s = 0; s < ni; ++s) {
                ItemId i = pe.active_items_[s];
                for (UserId u : g.item_neighbors(i)) {
                    auto us = static_cast<std::size_t>(pe.user_slot(u));
                    double c = pe.item_inv_sqrt_[s] * pe.user_inv_sqrt_[us];
                    axpy(c, dzu.row(us), ni_grad.row(s));
                }
                axpy(beta[kk], dfi.row(s), ni_grad.row(s));
            }
            gu = std::move(nu_grad);
            gi = std::move(ni_grad);
        }
        for (std::size_t s = 0; s < nu; ++s) axpy(1.0, gu.row(s), ws->user_row(pe.active_users_[s]));
        for (std::size_t s = 0; s < ni; ++s) axpy(1.0, gi.row(s), ws->item_row(pe.active_items_[s]));
        return loss;
    }
};

inline double embedding_sq_norm(const ModelParams& p) {
    return squared_norm(p.user_emb.flat()) + squared_norm(p.item_emb.flat());
}

// L = -sum ln sigma(y_ui - y_uj) + lambda ||P^(0)||^2
inline double bpr_loss(const ModelParams& params, const InteractionGraph& g, std::span<const BprTriple> triples,
                       double lambda) {
    auto pe = propagate(params, g);
    double data = BprBackward::run(params, g, pe, triples, nullptr, false);
    return data + lambda * embedding_sq_norm(params);
}

// Analytic gradient of bpr_loss, including the L2 term. Weight gradients are
// left at zero when `train_weights` is false.
inline Gradients bpr_gradient(const ModelParams& params, const InteractionGraph& g,
                              std::span<const BprTriple> triples, double lambda, bool train_weights = true) {
    auto pe = propagate(params, g);
    GradWorkspace ws(params);
    BprBackward::run(params, g, pe, triples, &ws, train_weights);
    Gradients out = ws.gradients();
    auto add_l2 = [&](Matrix& grad, const Matrix& p) {
        auto gs = grad.flat();
        auto ps = p.flat();
        for (std::size_t k = 0; k < gs.size(); ++k) gs[k] += 2.0 * lambda * ps[k];
    };
    add_l2(out.user_emb, params.user_emb);
    add_l2(out.item_emb, params.item_emb);
    return out;
}

// Draws `count` positives uniformly over edges of users that have at least one
// non-interacted item, and `neg_samples` rejection-sampled negatives for each.
inline std::vector<BprTriple> sample_triples(const InteractionGraph& g, Rng& rng, std::size_t count,
                                             std::size_t neg_samples) {
    std::vector<BprTriple> out;
    const std::size_t n_items = g.num_items();
    std::size_t eligible = 0;
    for (std::size_t u = 0; u < g.num_users(); ++u) {
        auto deg = g.user_degree(static_cast<UserId>(u));
        if (deg > 0 && deg < n_items) eligible += deg;
    }
    if (eligible == 0 || g.num_edges() == 0) return out;

    std::uniform_int_distribution<std::size_t> edge_dist(0, g.num_edges() - 1);
    std::uniform_int_distribution<ItemId> item_dist(0, static_cast<ItemId>(n_items - 1));
    out.reserve(count * neg_samples);
    for (std::size_t c = 0; c < count; ++c) {
        UserId u;
        ItemId i;
        do {
            std::tie(u, i) = g.edge(edge_dist(rng));
        } while (g.user_degree(u) >= n_items);
        for (std::size_t s = 0; s < neg_samples; ++s) {
            ItemId j;
            do {
                j = item_dist(rng);
            } while (g.has_edge(u, j));
            out.push_back({u, i, j});
        }
    }
    return out;
}

// Triples for local epoch `epoch`: one positive per eligible edge in
// expectation, drawn from a stream derived from cfg.seed.
inline std::vector<BprTriple> epoch_triples(const InteractionGraph& g, const TrainConfig& cfg, std::size_t epoch) {
    Rng rng = make_rng(cfg.seed, "triples", epoch);
    return sample_triples(g, rng, g.num_edges(), cfg.neg_samples);
}

struct TrainResult {
    ModelParams params;
    double final_loss = 0.0;
};

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;
};

inline void check_finite_loss(double loss, std::size_t epoch) {
    if (!std::isfinite(loss)) {
        throw TrainingDiverged("training diverged: non-finite loss in local epoch " + std::to_string(epoch + 1));
    }
}

}  // namespace detail

// m_l epochs of mini-batch training on `g`. final_loss is bpr_loss of the
// returned parameters on the last epoch's triples.
inline TrainResult train_local(ModelParams params, const InteractionGraph& g, const TrainConfig& cfg) {
    cfg.validate();
    if (g.num_edges() == 0) throw DataError("train_local needs a graph with at least one edge");
    const bool train_w = !cfg.freeze_weights;
    GradWorkspace ws(params);
    detail::AdamState adam;
    if (cfg.optimizer == Optimizer::adam) {
        adam.m.assign(params.trainable_size(), 0.0);
        adam.v.assign(params.trainable_size(), 0.0);
    }

    std::vector<BprTriple> triples;
    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        triples = epoch_triples(g, cfg, epoch);
        for (std::size_t begin = 0; begin < triples.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(triples.size(), begin + cfg.batch_size);
            std::span<const BprTriple> batch(triples.data() + begin, end - begin);
            auto pe = propagate(params, g);
            ws.clear();
            double data_loss = BprBackward::run(params, g, pe, batch, &ws, train_w);
            detail::check_finite_loss(data_loss, epoch);

            if (cfg.optimizer == Optimizer::sgd) {
                // p <- p - lr (2 lambda p + grad) applied as a uniform decay plus
                // a sparse step on touched rows.
                double decay = 1.0 - 2.0 * cfg.lr * cfg.lambda;
                if (decay != 1.0) {
                    for (double& v : params.user_emb.flat()) v *= decay;
                    for (double& v : params.item_emb.flat()) v *= decay;
                }
                const auto& grad = ws.gradients();
                for (UserId u : ws.touched_users()) {
                    axpy(-cfg.lr, grad.user_emb.row(static_cast<std::size_t>(u)),
                         params.user_emb.row(static_cast<std::size_t>(u)));
                }
                for (ItemId i : ws.touched_items()) {
                    axpy(-cfg.lr, grad.item_emb.row(static_cast<std::size_t>(i)),
                         params.item_emb.row(static_cast<std::size_t>(i)));
                }
                if (train_w) {
                    for (std::size_t k = 0; k < params.layers; ++k) {
                        axpy(-cfg.lr, grad.weights[k].flat(), params.weights[k].flat());
                    }
                }
            } else {
                constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                ++adam.t;
                double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
                double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
                std::size_t offset = 0;
                const auto& grad = ws.gradients();
                auto step = [&](std::span<double> p, std::span<const double> gsrc, bool l2) {
                    for (std::size_t k = 0; k < p.size(); ++k) {
                        double gk = gsrc[k] + (l2 ? 2.0 * cfg.lambda * p[k] : 0.0);
                        double& m = adam.m[offset + k];
                        double& v = adam.v[offset + k];
                        m = b1 * m + (1.0 - b1) * gk;
                        v = b2 * v + (1.0 - b2) * gk * gk;
                        p[k] -= cfg.lr * (m / c1) / (std::sqrt(v / c2) + eps);
                    }
                    offset += p.size();
                };
                step(params.user_emb.flat(), grad.user_emb.flat(), true);
                step(params.item_emb.flat(), grad.item_emb.flat(), true);
                for (std::size_t k = 0; k < params.layers; ++k) {
                    if (train_w) {
                        step(params.weights[k].flat(), grad.weights[k].flat(), false);
                    } else {
                        offset += params.weights[k].size();
                    }
                }
            }
        }
    }

    double final_loss = bpr_loss(params, g, triples, cfg.lambda);
    detail::check_finite_loss(final_loss, cfg.local_epochs - 1);
    if (!params.all_finite()) throw TrainingDiverged("training diverged: non-finite parameters");
    return {std::move(params), final_loss};
}

// Top `m_list` items for the given users by predicted score, excluding items
// they already interacted with. For several users the item score is the sum
// over users who have not interacted with it. Ties go to the lower item id.
inline std::vector<ItemId> recommend_local(const ModelParams& params, const InteractionGraph& g,
                                           std::span<const UserId> users, std::size_t m_list) {
    auto pe = propagate(params, g);
    const std::size_t d = params.dim;
    const std::size_t n_items = params.num_items();
    std::vector<double> total(n_items, 0.0);
    std::vector<char> candidate(n_items, 0);
    std::vector<std::vector<double>> user_final(users.size(), std::vector<double>(d));
    for (std::size_t k = 0; k < users.size(); ++k) pe.final_user(users[k], params.beta, user_final[k]);

    std::vector<double> item_final(d);
    for (std::size_t i = 0; i < n_items; ++i) {
        bool any = false;
        for (std::size_t k = 0; k < users.size(); ++k) {
            if (g.has_edge(users[k], static_cast<ItemId>(i))) continue;
            if (!any) pe.final_item(static_cast<ItemId>(i), params.beta, item_final);
            any = true;
            total[i] += dot(user_final[k], item_final);
        }
        candidate[i] = any;
    }

    std::vector<ItemId> ranked;
    for (std::size_t i = 0; i < n_items; ++i) {
        if (candidate[i]) ranked.push_back(static_cast<ItemId>(i));
    }
    auto better = [&](ItemId a, ItemId b) {
        double sa = total[static_cast<std::size_t>(a)], sb = total[static_cast<std::size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    };
    std::size_t keep = std::min(m_list, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), better);
    ranked.resize(keep);
    return ranked;
}

}  // namespace gfpcc
