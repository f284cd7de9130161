#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "gfpcc/data.hpp"
#include "support.hpp"

using namespace gfpcc;
using testing_support::parse;

TEST(LoadRatings, Ml100kLineMapsFields) {
    auto ds = parse("196\t242\t3\t881250949\n");
    ASSERT_EQ(ds.events.size(), 1u);
    EXPECT_EQ(ds.users.dense(196), 0);
    EXPECT_EQ(ds.items.dense(242), 0);
    EXPECT_EQ(ds.events[0], (RatingEvent{0, 0, 3, 881250949}));
}

TEST(LoadRatings, Ml1mUsesDoubleColon) {
    auto ds = parse("1::1193::5::978300760\r\n2::661::3::978302109\n", RatingFormat::ml1m);
    ASSERT_EQ(ds.events.size(), 2u);
    EXPECT_EQ(ds.items.raw(ds.events[0].item), 1193);
    EXPECT_EQ(ds.events[1].rating, 3);
    EXPECT_EQ(ds.events[1].timestamp, 978302109);
}

TEST(LoadRatings, MalformedLineReportsLineNumber) {
    try {
        parse("1\t2\t3\t4\n1\t2\t3\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(parse("1\t2\tx\t4\n"), ParseError);
    EXPECT_THROW(parse("1\t2\t6\t4\n"), ParseError);
    EXPECT_THROW(parse("1::2::3::4\n"), ParseError);
}

TEST(LoadRatings, DuplicatePairsStayDistinctEventsInFileOrder) {
    auto ds = parse("5\t9\t4\t100\n5\t9\t2\t50\n3\t9\t1\t70\n");
    ASSERT_EQ(ds.events.size(), 3u);
    EXPECT_EQ(ds.events[0].timestamp, 100);
    EXPECT_EQ(ds.events[1].timestamp, 50);
    EXPECT_EQ(ds.events[0].user, ds.events[1].user);
    EXPECT_EQ(ds.events[0].item, ds.events[1].item);
}

TEST(LoadRatings, DenseIdsFollowAscendingRawIds) {
    auto ds = parse("30\t7\t1\t1\n10\t700\t1\t2\n20\t70\t1\t3\n");
    EXPECT_EQ(ds.num_users, 3u);
    EXPECT_EQ(ds.num_items, 3u);
    EXPECT_EQ(ds.users.dense(10), 0);
    EXPECT_EQ(ds.users.dense(20), 1);
    EXPECT_EQ(ds.users.dense(30), 2);
    EXPECT_EQ(ds.items.dense(7), 0);
    EXPECT_EQ(ds.items.dense(700), 2);
    EXPECT_EQ(ds.users.dense(11), -1);
    for (std::int32_t d = 0; d < 3; ++d) EXPECT_EQ(ds.users.dense(ds.users.raw(d)), d);
}

TEST(LoadRatings, MissingFileIsIoError) {
    EXPECT_THROW(load_ratings("/nonexistent/u.data", RatingFormat::ml100k), IoError);
}

TEST(LoadRatings, FullMl100kCounts) {
    if (!testing_support::file_exists(GFPCC_ML100K)) GTEST_SKIP() << "MovieLens 100K not found";
    auto ds = load_ratings(GFPCC_ML100K, RatingFormat::ml100k);
    // "100,000 ratings from 943 users on 1682 movies"
    EXPECT_EQ(ds.events.size(), 100000u);
    EXPECT_EQ(ds.num_users, 943u);
    EXPECT_EQ(ds.num_items, 1682u);
}

TEST(LoadRatings, FullMl1mCounts) {
    if (!testing_support::file_exists(GFPCC_ML1M)) GTEST_SKIP() << "MovieLens 1M not found";
    auto ds = load_ratings(GFPCC_ML1M, RatingFormat::ml1m);
    EXPECT_EQ(ds.events.size(), 1000209u);
    EXPECT_EQ(ds.num_users, 6040u);
    // ratings.dat only mentions the 3706 movies that were rated at least once;
    // the 3883 figure counts movies.dat, which the loader does not read.
    EXPECT_EQ(ds.num_items, 3706u);
}

TEST(LoadRatings, TwoLoadsGiveIdenticalIdMaps) {
    if (!testing_support::file_exists(GFPCC_ML100K)) GTEST_SKIP() << "MovieLens 100K not found";
    auto a = load_ratings(GFPCC_ML100K, RatingFormat::ml100k);
    auto b = load_ratings(GFPCC_ML100K, RatingFormat::ml100k);
    std::ostringstream ua, ub, ia, ib;
    write_id_map(a.users, ua);
    write_id_map(b.users, ub);
    write_id_map(a.items, ia);
    write_id_map(b.items, ib);
    EXPECT_EQ(ua.str(), ub.str());
    EXPECT_EQ(ia.str(), ib.str());
    EXPECT_EQ(a, b);
}

TEST(Canonical, RoundTripIsStable) {
    auto ds = parse("3\t9\t4\t100\n1\t9\t2\t50\n3\t2\t1\t50\n1\t9\t5\t50\n2\t4\t0\t7\n");
    std::ostringstream first;
    write_canonical(ds, first);
    EXPECT_EQ(first.str(),
              "user,item,rating,ts\n"
              "1,1,0,7\n"
              "0,2,2,50\n"
              "0,2,5,50\n"
              "2,0,1,50\n"
              "2,2,4,100\n");
    std::istringstream in(first.str());
    auto back = read_canonical(in);
    EXPECT_EQ(back.events, canonical_order(ds.events));
    EXPECT_EQ(back.num_users, ds.num_users);
    EXPECT_EQ(back.num_items, ds.num_items);

    std::ostringstream second;
    write_canonical(back, second);
    EXPECT_EQ(second.str(), first.str());
    std::istringstream in2(second.str());
    EXPECT_EQ(read_canonical(in2), back);
}

TEST(Canonical, RejectsMissingHeaderAndBadRows) {
    std::istringstream none("0,0,1,1\n");
    EXPECT_THROW(read_canonical(none), ParseError);
    std::istringstream bad("user,item,rating,ts\n0,0,1\n");
    EXPECT_THROW(read_canonical(bad), ParseError);
}

TEST(Split, TwentyEventsGiveSixteenTrain) {
    std::string text;
    for (int k = 0; k < 20; ++k) text += "1\t" + std::to_string(k + 1) + "\t3\t" + std::to_string(1000 + k) + "\n";
    auto s = split_chronological(parse(text), 0.8);
    EXPECT_EQ(s.train[0].size(), 16u);
    EXPECT_EQ(s.test.size(), 4u);
}

TEST(Split, HalfOfThreeEvents) {
    auto s = split_chronological(parse("1\t3\t1\t3\n1\t1\t1\t1\n1\t2\t1\t2\n"), 0.5);
    ASSERT_EQ(s.train[0].size(), 2u);
    EXPECT_EQ(s.train[0][0].timestamp, 1);
    EXPECT_EQ(s.train[0][1].timestamp, 2);
    ASSERT_EQ(s.test.size(), 1u);
    EXPECT_EQ(s.test[0].timestamp, 3);
}

TEST(Split, TrainCountIsCeiling) {
    EXPECT_EQ(train_count(0.8, 20), 16u);
    EXPECT_EQ(train_count(0.8, 21), 17u);
    EXPECT_EQ(train_count(0.7, 10), 7u);
    EXPECT_EQ(train_count(0.5, 3), 2u);
    EXPECT_EQ(train_count(0.01, 1), 1u);
}

TEST(Split, ErrorsOnBadFractionOrEmptyTest) {
    auto ds = parse("1\t1\t1\t1\n1\t2\t1\t2\n");
    EXPECT_THROW(split_chronological(ds, 0.0), ConfigError);
    EXPECT_THROW(split_chronological(ds, 1.0), ConfigError);
    // one event per user: ceil puts everything in train
    EXPECT_THROW(split_chronological(parse("1\t1\t1\t1\n2\t2\t1\t2\n"), 0.8), DataError);
}

TEST(Split, TiesKeepInputOrder) {
    auto s = split_chronological(parse("1\t1\t1\t5\n1\t2\t1\t5\n2\t3\t1\t5\n2\t4\t1\t5\n1\t5\t1\t5\n2\t6\t1\t5\n"),
                                 0.5);
    // user 1 events (file order): items 1,2,5 -> train 1,2; user 2: 3,4,6 -> train 3,4.
    ASSERT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.test[0].item, 4);  // raw 5, file position 4
    EXPECT_EQ(s.test[1].item, 5);  // raw 6, file position 5
}

TEST(Split, Ml100kTestSize) {
    if (!testing_support::file_exists(GFPCC_ML100K)) GTEST_SKIP() << "MovieLens 100K not found";
    auto ds = load_ratings(GFPCC_ML100K, RatingFormat::ml100k);
    auto s = split_chronological(ds, 0.8);
    // tests/oracles/ml100k_oracles.py: 100000 - sum ceil(0.8 n_u)
    EXPECT_EQ(s.test.size(), 19633u);
    std::size_t train = 0;
    for (const auto& t : s.train) train += t.size();
    EXPECT_EQ(train, 80367u);
}

namespace {

using Key = std::tuple<UserId, ItemId, int, std::int64_t>;

std::map<Key, int> multiset(const std::vector<RatingEvent>& evs) {
    std::map<Key, int> m;
    for (const auto& e : evs) ++m[{e.user, e.item, e.rating, e.timestamp}];
    return m;
}

}  // namespace

TEST(SplitProperty, PartitionAndChronologyOnRandomData) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 60; ++trial) {
        std::ostringstream text;
        int users = 1 + static_cast<int>(rng() % 6);
        int n = 2 * users + static_cast<int>(rng() % 60);
        for (int k = 0; k < n; ++k) {
            int u = k < 2 * users ? k % users : static_cast<int>(rng() % users);
            text << u + 1 << '\t' << rng() % 9 + 1 << '\t' << rng() % 6 << '\t' << rng() % 15 << '\n';
        }
        auto ds = parse(text.str());
        double frac = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
        SplitStreams s;
        try {
            s = split_chronological(ds, frac);
        } catch (const DataError&) {
            continue;  // everything landed in train
        }
        std::vector<RatingEvent> all = s.test;
        for (const auto& t : s.train) all.insert(all.end(), t.begin(), t.end());
        EXPECT_EQ(multiset(all), multiset(ds.events));

        for (std::size_t u = 0; u < ds.num_users; ++u) {
            std::int64_t max_train = INT64_MIN;
            for (const auto& e : s.train[u]) max_train = std::max(max_train, e.timestamp);
            for (const auto& e : s.test) {
                if (static_cast<std::size_t>(e.user) == u) {
                    EXPECT_LE(max_train, e.timestamp);
                }
            }
            EXPECT_TRUE(std::is_sorted(s.train[u].begin(), s.train[u].end(),
                                       [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
        }
        EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end(),
                                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
    }
}
