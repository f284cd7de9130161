#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "gfpcc/error.hpp"
#include "gfpcc/model.hpp"

namespace gfpcc {

// Binary checkpoint layout (all integers and floats little-endian):
//   8 bytes  magic "GFPCCKPT"
//   u32      format version
//   u64 x 4  dim, layers, num_users, num_items
//   f64      user_emb0 (row-major), item_emb0, W^(0..K-1), beta
inline constexpr std::array<char, 8> kCheckpointMagic = {'G', 'F', 'P', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    out.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bits{};
    if (!in.read(reinterpret_cast<char*>(bits.data()), sizeof(T))) throw DataError("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
}

}  // namespace detail

inline void write_checkpoint(const ModelParams& p, std::ostream& out) {
    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    detail::write_le<std::uint64_t>(out, p.dim);
    detail::write_le<std::uint64_t>(out, p.layers);
    detail::write_le<std::uint64_t>(out, p.num_users());
    detail::write_le<std::uint64_t>(out, p.num_items());
    p.for_each_trainable([&](std::span<const double> s) {
        for (double v : s) detail::write_le<double>(out, v);
    });
    for (double b : p.beta) detail::write_le<double>(out, b);
}

inline ModelParams read_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw DataError("not a checkpoint file");
    auto version = detail::read_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelParams p;
    p.dim = detail::read_le<std::uint64_t>(in);
    p.layers = detail::read_le<std::uint64_t>(in);
    auto nu = detail::read_le<std::uint64_t>(in);
    auto ni = detail::read_le<std::uint64_t>(in);
    constexpr std::uint64_t cap = 1ULL << 32;
    if (p.dim == 0 || p.dim > cap / 8 || p.layers > 1024 || nu > cap || ni > cap || (nu + ni) > cap / p.dim) {
        throw DataError("checkpoint header has implausible sizes");
    }
    p.user_emb = Matrix(nu, p.dim);
    p.item_emb = Matrix(ni, p.dim);
    p.weights.assign(p.layers, Matrix(p.dim, p.dim));
    p.beta.assign(p.layers + 1, 0.0);
    p.for_each_trainable([&](std::span<double> s) {
        for (double& v : s) v = detail::read_le<double>(in);
    });
    for (double& b : p.beta) b = detail::read_le<double>(in);
    return p;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    write_checkpoint(p, out);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

}  // namespace gfpcc
