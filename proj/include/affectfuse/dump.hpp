#pragma once

// On-disk dumps of feature sequences and map sequences.
//
//   AFF1: "AFF1" | u32 rows | u32 cols | u32 reserved(0) | rows*cols f32, row-major, LE
//   AFM1: "AFM1" | u32 tile_count | tile_count * 34*34 f32, each tile row-major, LE

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/seqmap.hpp"
#include "affectfuse/stfeat.hpp"

namespace affectfuse::dump {

static_assert(std::endian::native == std::endian::little, "dump formats assume a little-endian host");

namespace detail {
inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}
inline void put_f32(std::string& out, double v) {
    const auto f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    out.append(b, 4);
}
inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw DataError("truncated dump");
    std::uint32_t v;
    std::memcpy(&v, in.data() + pos, 4);
    pos += 4;
    return v;
}
inline float get_f32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw DataError("truncated dump");
    float v;
    std::memcpy(&v, in.data() + pos, 4);
    pos += 4;
    return v;
}
inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
inline void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}
}  // namespace detail

inline std::string features_binary(const FeatureSequence& seq) {
    std::string out = "AFF1";
    detail::put_u32(out, static_cast<std::uint32_t>(seq.vectors.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(kNumFeatures));
    detail::put_u32(out, 0);
    for (const auto& v : seq.vectors)
        for (double x : v) detail::put_f32(out, x);
    return out;
}

/// Values come back at f32 precision.
inline FeatureSequence parse_features_binary(const std::string& bytes, const std::string& clip_id = {}) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "AFF1") != 0) throw DataError("not an AFF1 dump");
    std::size_t pos = 4;
    const auto rows = detail::get_u32(bytes, pos);
    const auto cols = detail::get_u32(bytes, pos);
    detail::get_u32(bytes, pos);
    if (cols != kNumFeatures) throw DataError("AFF1 dump has " + std::to_string(cols) + " columns");
    FeatureSequence seq;
    seq.clip_id = clip_id;
    seq.vectors.resize(rows);
    for (auto& v : seq.vectors)
        for (auto& x : v) x = detail::get_f32(bytes, pos);
    seq.original_length = rows;
    return seq;
}

inline std::string features_csv(const FeatureSequence& seq) {
    std::ostringstream out;
    out << "clip_id,frame_index";
    for (std::size_t d = 0; d < kNumFeatures; ++d) out << ",f" << (d < 10 ? "0" : "") << d;
    out << '\n' << std::setprecision(9);
    for (std::size_t t = 0; t < seq.vectors.size(); ++t) {
        out << seq.clip_id << ',' << t;
        for (double x : seq.vectors[t]) out << ',' << x;
        out << '\n';
    }
    return out.str();
}

inline std::string maps_binary(const MapSequence& seq) {
    std::string out = "AFM1";
    detail::put_u32(out, static_cast<std::uint32_t>(seq.tiles.size()));
    for (const auto& tile : seq.tiles)
        for (double x : tile.data()) detail::put_f32(out, x);
    return out;
}

inline MapSequence parse_maps_binary(const std::string& bytes, const std::string& clip_id = {}) {
    if (bytes.size() < 8 || bytes.compare(0, 4, "AFM1") != 0) throw DataError("not an AFM1 dump");
    std::size_t pos = 4;
    const auto count = detail::get_u32(bytes, pos);
    MapSequence seq;
    seq.clip_id = clip_id;
    for (std::uint32_t t = 0; t < count; ++t) {
        ImageMap tile(kTileSide, kTileSide);
        for (auto& x : tile.data()) x = detail::get_f32(bytes, pos);
        seq.tiles.push_back(std::move(tile));
    }
    seq.pre_pad_tile_count = count;
    return seq;
}

/// One tile as a 34-line CSV (no header), for eyeballing.
inline std::string tile_csv(const ImageMap& tile) {
    std::ostringstream out;
    out << std::setprecision(9);
    for (std::size_t r = 0; r < tile.rows(); ++r) {
        for (std::size_t c = 0; c < tile.cols(); ++c) out << (c ? "," : "") << tile(r, c);
        out << '\n';
    }
    return out.str();
}

}  // namespace affectfuse::dump
