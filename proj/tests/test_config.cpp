#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "gfpcc/config.hpp"

using namespace gfpcc;

namespace {

RunConfig from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    apply_config_stream(cfg, in);
    return cfg;
}

}  // namespace

TEST(Config, DefaultsMatchExperimentDefaults) {
    RunConfig cfg;
    EXPECT_EQ(cfg.exp.train.dim, 64u);
    EXPECT_EQ(cfg.exp.train.layers, 3u);
    EXPECT_EQ(cfg.exp.train.batch_size, 2048u);
    EXPECT_EQ(cfg.exp.bandit_interval, 1000u);
    EXPECT_EQ(cfg.exp.epsilon, 0.1);
    EXPECT_EQ(cfg.exp.cache_sizes.size(), 8u);
    EXPECT_FALSE(cfg.timing);
}

TEST(Config, ParsesFileSyntax) {
    auto cfg = from_text(
        "# comment\n"
        "\n"
        "model.dim = 16   # trailing comment\n"
        "  cache.sizes=5, 10 ,20\n"
        "cache.policies = oracle,random\n"
        "model.optimizer = adam\n"
        "model.freeze_weights = yes\n"
        "data.format = ml1m\n"
        "agg.q = 1.5\n"
        "run.seeds = 7,8\n"
        "bandit.thompson_feedback = per_miss\n");
    EXPECT_EQ(cfg.exp.train.dim, 16u);
    EXPECT_EQ(cfg.exp.cache_sizes, (std::vector<std::size_t>{5, 10, 20}));
    EXPECT_EQ(cfg.exp.policies, (std::vector<PolicyKind>{PolicyKind::oracle, PolicyKind::random}));
    EXPECT_EQ(cfg.exp.train.optimizer, Optimizer::adam);
    EXPECT_TRUE(cfg.exp.train.freeze_weights);
    EXPECT_EQ(cfg.exp.format, RatingFormat::ml1m);
    EXPECT_EQ(cfg.exp.agg.q, 1.5);
    EXPECT_EQ(cfg.exp.seeds, (std::vector<std::uint64_t>{7, 8}));
    EXPECT_EQ(cfg.exp.thompson_feedback, ThompsonFeedback::per_miss);
}

TEST(Config, ErrorsNameTheLineAndKey) {
    try {
        from_text("model.dim = 8\nmodel.dimm = 8\n");
        FAIL();
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos);
        EXPECT_NE(msg.find("model.dimm"), std::string::npos);
    }
    EXPECT_THROW(from_text("model.dim\n"), ConfigError);
    EXPECT_THROW(from_text("model.dim = -3\n"), ConfigError);
    EXPECT_THROW(from_text("model.lr = fast\n"), ConfigError);
    EXPECT_THROW(from_text("model.freeze_weights = maybe\n"), ConfigError);
    EXPECT_THROW(from_text("cache.policies = oracle,lru\n"), ConfigError);
    EXPECT_THROW(from_text("data.format = netflix\n"), ConfigError);
}

TEST(Config, OverridesReplaceFileValues) {
    auto cfg = from_text("model.dim = 16\ncache.sizes = 5\n");
    apply_override(cfg, "model.dim=32");
    apply_override(cfg, "cache.sizes=50,100");
    EXPECT_EQ(cfg.exp.train.dim, 32u);
    EXPECT_EQ(cfg.exp.cache_sizes, (std::vector<std::size_t>{50, 100}));
    EXPECT_THROW(apply_override(cfg, "model.dim"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "nope=1"), ConfigError);
}

TEST(Config, ResolveChecksCrossKeyRules) {
    RunConfig cfg;
    cfg.exp.data_path = "x";
    EXPECT_NO_THROW(resolve_config(cfg));
    auto bad = [](auto mutate) {
        RunConfig c;
        c.exp.data_path = "x";
        mutate(c);
        EXPECT_THROW(resolve_config(c), ConfigError);
    };
    bad([](RunConfig& c) { c.exp.cache_sizes.clear(); });
    bad([](RunConfig& c) { c.exp.cache_sizes = {0}; });
    bad([](RunConfig& c) { c.exp.seeds.clear(); });
    bad([](RunConfig& c) { c.exp.epsilon = 1.0; });
    bad([](RunConfig& c) { c.exp.train_fraction = 1.0; });
    bad([](RunConfig& c) { c.exp.train.beta = {0.5}; });
    bad([](RunConfig& c) { c.exp.bandit_interval = 0; });
}

TEST(Config, DataRootFromEnvironment) {
    EXPECT_EQ(default_data_path(RatingFormat::ml100k, "/d/ml-100k"), "/d/ml-100k/u.data");
    EXPECT_EQ(default_data_path(RatingFormat::ml1m, "/d/ml-1m/"), "/d/ml-1m/ratings.dat");
    EXPECT_EQ(default_data_path(RatingFormat::ml1m, nullptr), "");

    ::setenv(kDataRootEnv, "/env/root", 1);
    RunConfig cfg;
    resolve_config(cfg);
    EXPECT_EQ(cfg.exp.data_path, "/env/root/u.data");
    RunConfig explicit_path;
    explicit_path.exp.data_path = "/mine/u.data";
    resolve_config(explicit_path);
    EXPECT_EQ(explicit_path.exp.data_path, "/mine/u.data");
    ::unsetenv(kDataRootEnv);
}

TEST(Config, EchoParsesBackToSameConfig) {
    auto cfg = from_text(
        "model.lr = 0.123456789012345\n"
        "model.beta = 0.1,0.2,0.3,0.4\n"
        "agg.G = 3.5\n"
        "cache.sizes = 7,9\n"
        "cache.gfpcc_prefix = false\n"
        "data.path = /tmp/some file.data\n"
        "output.timing = true\n");
    std::ostringstream first;
    write_config(cfg, first);
    auto back = from_text(first.str());
    std::ostringstream second;
    write_config(back, second);
    EXPECT_EQ(first.str(), second.str());
    EXPECT_EQ(back.exp.train.lr, 0.123456789012345);
    EXPECT_EQ(back.exp.data_path, "/tmp/some file.data");
    EXPECT_FALSE(back.exp.pool_prefix);
    EXPECT_TRUE(back.timing);
    EXPECT_EQ(back.exp.train.beta, (std::vector<double>{0.1, 0.2, 0.3, 0.4}));
}

TEST(Config, HelpListsEveryKey) {
    auto help = config_help();
    for (const auto& k : config_keys()) EXPECT_NE(help.find(k.name), std::string::npos) << k.name;
}
