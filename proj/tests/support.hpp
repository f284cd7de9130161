#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gfpcc/data.hpp"
#include "gfpcc/graph.hpp"
#include "gfpcc/matrix.hpp"
#include "gfpcc/model.hpp"

namespace testing_support {

using namespace gfpcc;

inline bool file_exists(const char* path) { return std::filesystem::exists(path); }

inline Dataset parse(const std::string& text, RatingFormat fmt = RatingFormat::ml100k) {
    std::istringstream in(text);
    return read_ratings(in, fmt);
}

// Random bipartite graph with nu users, ni items, each pair present with
// probability p.
inline InteractionGraph random_graph(std::mt19937_64& rng, std::size_t nu, std::size_t ni, double p) {
    std::bernoulli_distribution coin(p);
    std::vector<std::pair<UserId, ItemId>> edges;
    for (std::size_t u = 0; u < nu; ++u) {
        for (std::size_t i = 0; i < ni; ++i) {
            if (coin(rng)) edges.emplace_back(static_cast<UserId>(u), static_cast<ItemId>(i));
        }
    }
    return InteractionGraph::from_edges(edges, nu, ni);
}

// Symmetrically normalized bipartite adjacency over users then items, built
// densely from the edge list without touching the CSR helpers.
inline Matrix dense_norm_adjacency(const std::vector<std::pair<UserId, ItemId>>& edges, std::size_t nu,
                                   std::size_t ni) {
    std::set<std::pair<UserId, ItemId>> uniq(edges.begin(), edges.end());
    std::vector<double> du(nu, 0.0), di(ni, 0.0);
    for (auto [u, i] : uniq) {
        du[static_cast<std::size_t>(u)] += 1.0;
        di[static_cast<std::size_t>(i)] += 1.0;
    }
    Matrix a(nu + ni, nu + ni);
    for (auto [u, i] : uniq) {
        double c = 1.0 / std::sqrt(du[static_cast<std::size_t>(u)] * di[static_cast<std::size_t>(i)]);
        a(static_cast<std::size_t>(u), nu + static_cast<std::size_t>(i)) = c;
        a(nu + static_cast<std::size_t>(i), static_cast<std::size_t>(u)) = c;
    }
    return a;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double v = a(r, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(r, j) += v * b(k, j);
        }
    }
    return c;
}

inline std::vector<std::pair<UserId, ItemId>> edge_list(const InteractionGraph& g) {
    std::vector<std::pair<UserId, ItemId>> out;
    for (std::size_t e = 0; e < g.num_edges(); ++e) out.push_back(g.edge(e));
    return out;
}

inline TrainConfig small_config(std::size_t dim, std::size_t layers) {
    TrainConfig cfg;
    cfg.dim = dim;
    cfg.layers = layers;
    cfg.batch_size = 16;
    cfg.local_epochs = 1;
    return cfg;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gfpcc_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace testing_support
