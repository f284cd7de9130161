#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "gfpcc/data.hpp"
#include "gfpcc/error.hpp"

namespace gfpcc {

// Bipartite user-item interaction graph in CSR form, both directions.
// Neighbor lists are sorted ascending and deduplicated.
class InteractionGraph {
public:
    InteractionGraph() : user_offsets_(1, 0), item_offsets_(1, 0) {}

    std::size_t num_users() const noexcept { return user_offsets_.size() - 1; }
    std::size_t num_items() const noexcept { return item_offsets_.size() - 1; }
    std::size_t num_edges() const noexcept { return user_adj_.size(); }

    std::span<const ItemId> user_neighbors(UserId u) const {
        auto b = user_offsets_[static_cast<std::size_t>(u)];
        auto e = user_offsets_[static_cast<std::size_t>(u) + 1];
        return {user_adj_.data() + b, e - b};
    }
    std::span<const UserId> item_neighbors(ItemId i) const {
        auto b = item_offsets_[static_cast<std::size_t>(i)];
        auto e = item_offsets_[static_cast<std::size_t>(i) + 1];
        return {item_adj_.data() + b, e - b};
    }

    std::size_t user_degree(UserId u) const { return user_neighbors(u).size(); }
    std::size_t item_degree(ItemId i) const { return item_neighbors(i).size(); }

    bool has_edge(UserId u, ItemId i) const {
        auto n = user_neighbors(u);
        return std::binary_search(n.begin(), n.end(), i);
    }

    // Offset of the first edge of `u` in the user-major edge order.
    std::size_t user_edge_offset(UserId u) const { return user_offsets_[static_cast<std::size_t>(u)]; }

    // Edge by its index in user-major order.
    std::pair<UserId, ItemId> edge(std::size_t index) const {
        auto it = std::upper_bound(user_offsets_.begin(), user_offsets_.end(), index);
        auto u = static_cast<UserId>((it - user_offsets_.begin()) - 1);
        return {u, user_adj_[index]};
    }

    static InteractionGraph from_edges(std::vector<std::pair<UserId, ItemId>> edges, std::size_t num_users,
                                       std::size_t num_items) {
        for (auto [u, i] : edges) {
            if (u < 0 || static_cast<std::size_t>(u) >= num_users || i < 0 ||
                static_cast<std::size_t>(i) >= num_items) {
                throw DataError("edge (" + std::to_string(u) + "," + std::to_string(i) + ") outside id range");
            }
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

        InteractionGraph g;
        g.user_offsets_.assign(num_users + 1, 0);
        g.item_offsets_.assign(num_items + 1, 0);
        for (auto [u, i] : edges) {
            ++g.user_offsets_[static_cast<std::size_t>(u) + 1];
            ++g.item_offsets_[static_cast<std::size_t>(i) + 1];
        }
        for (std::size_t k = 0; k < num_users; ++k) g.user_offsets_[k + 1] += g.user_offsets_[k];
        for (std::size_t k = 0; k < num_items; ++k) g.item_offsets_[k + 1] += g.item_offsets_[k];

        g.user_adj_.resize(edges.size());
        g.item_adj_.resize(edges.size());
        // Edges are sorted by (u, i), so user rows fill in order and item rows
        // receive users in ascending order.
        std::vector<std::size_t> cursor(g.item_offsets_.begin(), g.item_offsets_.end() - 1);
        for (std::size_t k = 0; k < edges.size(); ++k) {
            auto [u, i] = edges[k];
            g.user_adj_[k] = i;
            g.item_adj_[cursor[static_cast<std::size_t>(i)]++] = u;
        }
        return g;
    }

    bool operator==(const InteractionGraph&) const = default;

private:
    std::vector<std::size_t> user_offsets_;
    std::vector<ItemId> user_adj_;
    std::vector<std::size_t> item_offsets_;
    std::vector<UserId> item_adj_;
};

inline InteractionGraph build_graph(const std::vector<std::vector<RatingEvent>>& train, std::size_t num_users,
                                    std::size_t num_items) {
    std::vector<std::pair<UserId, ItemId>> edges;
    for (const auto& events : train) {
        for (const auto& e : events) edges.emplace_back(e.user, e.item);
    }
    return InteractionGraph::from_edges(std::move(edges), num_users, num_items);
}

// Symmetric normalization 1/(sqrt|N_u| sqrt|N_i|). Only defined on edges.
inline double norm_coeff(std::size_t user_degree, std::size_t item_degree) {
    return 1.0 / (std::sqrt(static_cast<double>(user_degree)) * std::sqrt(static_cast<double>(item_degree)));
}

inline double norm_coeff(const InteractionGraph& g, UserId u, ItemId i) {
    if (!g.has_edge(u, i)) {
        throw DataError("norm_coeff queried on non-edge (" + std::to_string(u) + "," + std::to_string(i) + ")");
    }
    return norm_coeff(g.user_degree(u), g.item_degree(i));
}

// Debug dump, one "u i" line per edge.
inline void write_edges(const InteractionGraph& g, std::ostream& out) {
    for (std::size_t u = 0; u < g.num_users(); ++u) {
        for (ItemId i : g.user_neighbors(static_cast<UserId>(u))) out << u << ' ' << i << '\n';
    }
}

}  // namespace gfpcc
