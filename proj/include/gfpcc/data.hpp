#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gfpcc/error.hpp"

namespace gfpcc {

using UserId = std::int32_t;
using ItemId = std::int32_t;

// One rating, which doubles as one content request.
struct RatingEvent {
    UserId user = 0;
    ItemId item = 0;
    int rating = 0;
    std::int64_t timestamp = 0;

    bool operator==(const RatingEvent&) const = default;
};

using RequestStream = std::vector<RatingEvent>;

enum class RatingFormat { ml100k, ml1m };

inline std::string_view format_name(RatingFormat f) {
    return f == RatingFormat::ml100k ? "ml100k" : "ml1m";
}

inline RatingFormat parse_format(std::string_view name) {
    if (name == "ml100k") return RatingFormat::ml100k;
    if (name == "ml1m") return RatingFormat::ml1m;
    throw ConfigError("unknown dataset format '" + std::string(name) + "' (expected ml100k or ml1m)");
}

// Raw <-> dense id bijection. Dense ids are assigned in ascending raw-id order,
// so two loads of the same file always agree.
class IdMap {
public:
    IdMap() = default;
    explicit IdMap(std::vector<std::int64_t> raw_sorted_unique) : raw_(std::move(raw_sorted_unique)) {}

    std::size_t size() const noexcept { return raw_.size(); }
    std::int64_t raw(std::int32_t dense) const { return raw_.at(static_cast<std::size_t>(dense)); }

    // -1 when the raw id is unknown.
    std::int32_t dense(std::int64_t raw) const {
        auto it = std::lower_bound(raw_.begin(), raw_.end(), raw);
        if (it == raw_.end() || *it != raw) return -1;
        return static_cast<std::int32_t>(it - raw_.begin());
    }

    const std::vector<std::int64_t>& raw_ids() const noexcept { return raw_; }

    bool operator==(const IdMap&) const = default;

private:
    std::vector<std::int64_t> raw_;
};

struct Dataset {
    std::vector<RatingEvent> events;
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    IdMap users;
    IdMap items;

    bool operator==(const Dataset&) const = default;
};

struct SplitStreams {
    std::vector<std::vector<RatingEvent>> train;  // per user, chronological
    RequestStream test;                           // global, chronological
};

namespace detail {

struct RawEvent {
    std::int64_t user;
    std::int64_t item;
    int rating;
    std::int64_t timestamp;
};

template <typename T>
bool parse_int(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, next - pos));
        pos = next + sep.size();
    }
}

inline IdMap build_id_map(std::vector<std::int64_t> raw) {
    std::sort(raw.begin(), raw.end());
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
    return IdMap(std::move(raw));
}

}  // namespace detail

// Parses one line of a ratings file. Throws ParseError tagged with `line_no`.
inline detail::RawEvent parse_rating_line(std::string_view line, RatingFormat format, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fields = detail::split_fields(line, format == RatingFormat::ml100k ? "\t" : "::");
    if (fields.size() != 4) {
        throw ParseError("expected 4 fields in " + std::string(format_name(format)) + " record, got " +
                             std::to_string(fields.size()),
                         line_no);
    }
    detail::RawEvent ev{};
    if (!detail::parse_int(fields[0], ev.user)) throw ParseError("bad user id", line_no);
    if (!detail::parse_int(fields[1], ev.item)) throw ParseError("bad item id", line_no);
    if (!detail::parse_int(fields[2], ev.rating)) throw ParseError("bad rating", line_no);
    if (!detail::parse_int(fields[3], ev.timestamp)) throw ParseError("bad timestamp", line_no);
    if (ev.rating < 0 || ev.rating > 5) throw ParseError("rating outside 0..5", line_no);
    return ev;
}

inline Dataset read_ratings(std::istream& in, RatingFormat format) {
    std::vector<detail::RawEvent> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        raw.push_back(parse_rating_line(line, format, line_no));
    }

    std::vector<std::int64_t> raw_users, raw_items;
    raw_users.reserve(raw.size());
    raw_items.reserve(raw.size());
    for (const auto& r : raw) {
        raw_users.push_back(r.user);
        raw_items.push_back(r.item);
    }

    Dataset ds;
    ds.users = detail::build_id_map(std::move(raw_users));
    ds.items = detail::build_id_map(std::move(raw_items));
    ds.num_users = ds.users.size();
    ds.num_items = ds.items.size();
    ds.events.reserve(raw.size());
    for (const auto& r : raw) {
        ds.events.push_back({ds.users.dense(r.user), ds.items.dense(r.item), r.rating, r.timestamp});
    }
    return ds;
}

inline Dataset load_ratings(const std::string& path, RatingFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ratings file '" + path + "'");
    return read_ratings(in, format);
}

// Events ordered by (timestamp, user, item); stable for exact duplicates.
inline std::vector<RatingEvent> canonical_order(std::vector<RatingEvent> events) {
    std::stable_sort(events.begin(), events.end(), [](const RatingEvent& a, const RatingEvent& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        if (a.user != b.user) return a.user < b.user;
        return a.item < b.item;
    });
    return events;
}

inline void write_canonical(const Dataset& ds, std::ostream& out) {
    out << "user,item,rating,ts\n";
    for (const auto& e : canonical_order(ds.events)) {
        out << e.user << ',' << e.item << ',' << e.rating << ',' << e.timestamp << '\n';
    }
}

// Reads a canonical dump back. Dense ids in the dump become both the dense and
// raw ids; counts are taken as max id + 1 so isolated trailing ids survive only
// if they appear in at least one row.
inline Dataset read_canonical(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "user,item,rating,ts") {
        throw ParseError("missing canonical header 'user,item,rating,ts'", 1);
    }
    Dataset ds;
    std::size_t line_no = 1;
    std::int32_t max_user = -1, max_item = -1;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = detail::split_fields(line, ",");
        RatingEvent e;
        if (f.size() != 4 || !detail::parse_int(f[0], e.user) || !detail::parse_int(f[1], e.item) ||
            !detail::parse_int(f[2], e.rating) || !detail::parse_int(f[3], e.timestamp) || e.user < 0 ||
            e.item < 0) {
            throw ParseError("malformed canonical row", line_no);
        }
        max_user = std::max(max_user, e.user);
        max_item = std::max(max_item, e.item);
        ds.events.push_back(e);
    }
    ds.num_users = static_cast<std::size_t>(max_user + 1);
    ds.num_items = static_cast<std::size_t>(max_item + 1);
    std::vector<std::int64_t> u(ds.num_users), i(ds.num_items);
    std::iota(u.begin(), u.end(), 0);
    std::iota(i.begin(), i.end(), 0);
    ds.users = IdMap(std::move(u));
    ds.items = IdMap(std::move(i));
    return ds;
}

// "dense,raw" rows, one per id.
inline void write_id_map(const IdMap& map, std::ostream& out) {
    out << "dense,raw\n";
    for (std::size_t d = 0; d < map.size(); ++d) out << d << ',' << map.raw(static_cast<std::int32_t>(d)) << '\n';
}

// Number of training events for a user with `n` events: ceil(fraction * n),
// computed with a small tolerance so products like 0.7 * 10 land on 7.
inline std::size_t train_count(double fraction, std::size_t n) {
    double x = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(x - 1e-9));
    return std::min(k, n);
}

inline SplitStreams split_chronological(const Dataset& ds, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0,1)");
    }
    // Per-user lists keep file order, so a stable sort on timestamp breaks ties
    // by input order.
    std::vector<std::vector<std::size_t>> per_user(ds.num_users);
    for (std::size_t idx = 0; idx < ds.events.size(); ++idx) {
        per_user[static_cast<std::size_t>(ds.events[idx].user)].push_back(idx);
    }

    SplitStreams out;
    out.train.resize(ds.num_users);
    std::vector<std::size_t> test_idx;
    for (std::size_t u = 0; u < ds.num_users; ++u) {
        auto& idx = per_user[u];
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return ds.events[a].timestamp < ds.events[b].timestamp;
        });
        std::size_t k = train_count(train_fraction, idx.size());
        for (std::size_t p = 0; p < idx.size(); ++p) {
            if (p < k) {
                out.train[u].push_back(ds.events[idx[p]]);
            } else {
                test_idx.push_back(idx[p]);
            }
        }
    }
    if (test_idx.empty()) throw DataError("chronological split produced an empty test stream");

    std::sort(test_idx.begin(), test_idx.end(), [&](std::size_t a, std::size_t b) {
        if (ds.events[a].timestamp != ds.events[b].timestamp) return ds.events[a].timestamp < ds.events[b].timestamp;
        return a < b;
    });
    out.test.reserve(test_idx.size());
    for (auto idx : test_idx) out.test.push_back(ds.events[idx]);
    return out;
}

}  // namespace gfpcc
