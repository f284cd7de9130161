#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gfpcc/harness.hpp"
#include "support.hpp"

using namespace gfpcc;

namespace {

RequestStream stream_of(std::initializer_list<ItemId> items) {
    RequestStream s;
    std::int64_t t = 0;
    for (ItemId i : items) s.push_back({0, i, 3, t++});
    return s;
}

// 24 users rating items drawn from a skewed popularity, timestamps rising.
Dataset synthetic_dataset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> w(40);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / static_cast<double>(i + 1);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::ostringstream text;
    int ts = 0;
    for (int round = 0; round < 12; ++round) {
        for (int u = 1; u <= 24; ++u) text << u << '\t' << pick(rng) + 1 << '\t' << 4 << '\t' << ++ts << '\n';
    }
    return testing_support::parse(text.str());
}

ExperimentConfig small_experiment() {
    ExperimentConfig cfg;
    cfg.cache_sizes = {5, 10};
    cfg.train = testing_support::small_config(8, 1);
    cfg.train.lr = 0.1;
    cfg.train.local_epochs = 2;
    cfg.agg.global_epochs = 2;
    cfg.seeds = {1, 2};
    cfg.bandit_interval = 10;
    return cfg;
}

}  // namespace

TEST(Replay, StaticExamples) {
    std::vector<ItemId> cache = {1, 2};
    EXPECT_DOUBLE_EQ(replay(cache, stream_of({1, 3, 2, 4, 5}), 6).efficiency(), 0.4);
    EXPECT_DOUBLE_EQ(replay(cache, stream_of({1, 1, 2}), 6).efficiency(), 1.0);
    EXPECT_DOUBLE_EQ(replay(cache, stream_of({0, 3}), 6).efficiency(), 0.0);
    std::vector<ItemId> none;
    EXPECT_EQ(replay(none, stream_of({0, 3}), 6).hits, 0u);
    EXPECT_THROW(replay(cache, RequestStream{}, 6), DataError);
}

TEST(ResultsCsv, RoundTripIsBitExact) {
    std::vector<ResultRow> rows = {{"oracle", 50, 1, 2491.0 / 19633.0, 1.5},
                                   {"random", 400, 3, 1.0 / 3.0, 0.25}};
    std::ostringstream out;
    write_results_csv(rows, out, false);
    EXPECT_EQ(out.str(),
              "policy,N,seed,efficiency,seconds\n"
              "oracle,50,1,0.12687821524983448,0.000\n"
              "random,400,3,0.33333333333333331,0.000\n");
    std::istringstream in(out.str());
    auto back = read_results_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].efficiency, rows[0].efficiency);
    EXPECT_EQ(back[1].efficiency, rows[1].efficiency);
    EXPECT_EQ(back[1].policy, "random");
    EXPECT_EQ(back[1].cache_size, 400u);
    EXPECT_EQ(back[1].seed, 3u);

    std::ostringstream timed;
    write_results_csv(rows, timed, true);
    EXPECT_NE(timed.str().find(",1.500\n"), std::string::npos);
}

TEST(ResultsCsv, RejectsMalformedInput) {
    std::istringstream empty("");
    EXPECT_THROW(read_results_csv(empty), ParseError);
    std::istringstream bad("policy,N,seed,efficiency,seconds\noracle,x,1,0.5,0\n");
    EXPECT_THROW(read_results_csv(bad), ParseError);
    std::istringstream short_row("policy,N,seed,efficiency,seconds\noracle,5,1\n");
    EXPECT_THROW(read_results_csv(short_row), ParseError);
}

TEST(Summarize, MeanAndSampleStddev) {
    std::vector<ResultRow> rows = {{"gfpcc", 50, 1, 0.1, 0}, {"gfpcc", 50, 2, 0.2, 0}, {"gfpcc", 50, 3, 0.3, 0},
                                   {"oracle", 50, 1, 0.5, 0}, {"oracle", 50, 2, 0.5, 0}};
    auto s = summarize(rows);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].policy, "gfpcc");
    EXPECT_NEAR(s[0].mean, 0.2, 1e-15);
    EXPECT_NEAR(s[0].stddev, 0.1, 1e-15);
    EXPECT_EQ(s[0].count, 3u);
    EXPECT_EQ(s[1].stddev, 0.0);

    auto one = summarize({{"random", 100, 7, 0.25, 0}});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].mean, 0.25);
    EXPECT_EQ(one[0].stddev, 0.0);
    EXPECT_THROW(summarize({}), DataError);
}

TEST(WriteTable, OneRowPerSizeOneColumnPerPolicy) {
    auto s = summarize({{"oracle", 100, 1, 0.25, 0}, {"oracle", 50, 1, 0.125, 0}, {"random", 50, 1, 0.03, 0}});
    std::ostringstream out;
    write_table(s, out);
    std::istringstream lines(out.str());
    std::string header, r50, r100;
    std::getline(lines, header);
    std::getline(lines, r50);
    std::getline(lines, r100);
    EXPECT_EQ(header.rfind("N ", 0), 0u);
    EXPECT_NE(header.find("oracle"), std::string::npos);
    EXPECT_LT(header.find("oracle"), header.find("random"));
    EXPECT_EQ(r50.rfind("50 ", 0), 0u);
    EXPECT_NE(r50.find("12.50% ± 0.00"), std::string::npos);
    EXPECT_NE(r50.find("3.00% ± 0.00"), std::string::npos);
    EXPECT_NE(r100.find("25.00%"), std::string::npos);
    EXPECT_NE(r100.find('-'), std::string::npos);
}

TEST(RunExperiment, SmallRunIsDeterministicAndConsistent) {
    auto ds = synthetic_dataset(3);
    auto cfg = small_experiment();
    auto rows = run_experiment(cfg, ds);
    ASSERT_EQ(rows.size(), 5u * 2u * 2u);
    EXPECT_EQ(rows.front().policy, "oracle");
    EXPECT_EQ(rows.back().policy, "random");
    for (const auto& r : rows) {
        EXPECT_GE(r.efficiency, 0.0);
        EXPECT_LE(r.efficiency, 1.0);
    }
    auto find = [&](const std::string& p, std::size_t n, std::uint64_t seed) {
        for (const auto& r : rows) {
            if (r.policy == p && r.cache_size == n && r.seed == seed) return r.efficiency;
        }
        ADD_FAILURE() << "missing row " << p;
        return -1.0;
    };
    for (std::size_t n : cfg.cache_sizes) {
        for (auto seed : cfg.seeds) {
            EXPECT_GE(find("oracle", n, seed), find("gfpcc", n, seed));
            EXPECT_GE(find("oracle", n, seed), find("random", n, seed));
        }
        EXPECT_EQ(find("oracle", n, 1), find("oracle", n, 2));
    }

    cfg.jobs = 3;
    auto again = run_experiment(cfg, ds);
    std::ostringstream a, b;
    write_results_csv(rows, a, false);
    write_results_csv(again, b, false);
    EXPECT_EQ(a.str(), b.str());
}

TEST(RunExperiment, ConfigErrorsAndPartialRows) {
    auto ds = synthetic_dataset(4);
    auto cfg = small_experiment();
    cfg.cache_sizes = {41};
    EXPECT_THROW(run_experiment(cfg, ds), ConfigError);
    cfg.cache_sizes = {};
    EXPECT_THROW(run_experiment(cfg, ds), ConfigError);

    cfg = small_experiment();
    cfg.train.lr = 1e200;
    cfg.agg.lipschitz = 1.0;
    std::vector<ResultRow> partial = {{"stale", 1, 1, 0, 0}};
    EXPECT_THROW(run_experiment(cfg, ds, &partial), AggregationError);
    EXPECT_TRUE(partial.empty());
}

TEST(RunExperiment, Ml100kOracleEfficiency) {
    if (!testing_support::file_exists(GFPCC_ML100K)) GTEST_SKIP() << "MovieLens 100K not found";
    auto ds = load_ratings(GFPCC_ML100K, RatingFormat::ml100k);
    ExperimentConfig cfg;
    cfg.policies = {PolicyKind::oracle, PolicyKind::random};
    cfg.seeds = {1};
    auto rows = run_experiment(cfg, ds);
    // tests/oracles/ml100k_oracles.py
    const std::uint64_t hits[] = {2491, 4435, 6105, 7603, 8962, 10186, 11272, 12249};
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(rows[k].policy, "oracle");
        EXPECT_EQ(rows[k].cache_size, 50 * (k + 1));
        EXPECT_EQ(rows[k].efficiency, static_cast<double>(hits[k]) / 19633.0);
    }
    for (std::size_t k = 8; k < 16; ++k) EXPECT_LT(rows[k].efficiency, rows[k - 8].efficiency);
}
