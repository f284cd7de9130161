#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gfpcc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a over the tag bytes.
constexpr std::uint64_t tag_hash(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Every random stream in the pipeline is derived from one root seed:
//   seed = mix(root ^ mix(tag ^ mix(a ^ mix(b))))
// where `tag` names the component ("init", "sample", "client", "random", ...),
// `a` is usually the round index and `b` a client or cache-size index.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = splitmix64(b);
    s = splitmix64(a ^ s);
    s = splitmix64(tag_hash(tag) ^ s);
    return splitmix64(root ^ s);
}

inline Rng make_rng(std::uint64_t root, std::string_view tag, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    return Rng(derive_seed(root, tag, a, b));
}

// Beta(a, b) via two gamma draws; the standard library has no beta distribution.
inline double sample_beta(Rng& rng, double a, double b) {
    double x = std::gamma_distribution<double>(a, 1.0)(rng);
    double y = std::gamma_distribution<double>(b, 1.0)(rng);
    double s = x + y;
    return s > 0.0 ? x / s : 0.5;
}

}  // namespace gfpcc
