#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/stfeat.hpp"

namespace affectfuse {

// ---------------------------------------------------------------------------
// Sequence-length converter

/// Replicates the last vector until the sequence has `min_len` entries.
inline FeatureSequence pad_min_length(FeatureSequence seq, std::size_t min_len = 16) {
    if (seq.vectors.empty()) throw std::invalid_argument("pad_min_length: empty sequence");
    if (seq.vectors.size() < min_len) seq.vectors.resize(min_len, seq.vectors.back());
    return seq;
}

// ---------------------------------------------------------------------------
// Holistic functionals

enum class Functional { Mean, Std, Min, Max, Median, P25, P75, Range, Skewness, Kurtosis };

inline constexpr std::array<Functional, 10> kAllFunctionals = {
    Functional::Mean,   Functional::Std, Functional::Min,   Functional::Max,      Functional::Median,
    Functional::P25,    Functional::P75, Functional::Range, Functional::Skewness, Functional::Kurtosis};

inline std::string_view to_string(Functional f) {
    switch (f) {
        case Functional::Mean: return "mean";
        case Functional::Std: return "std";
        case Functional::Min: return "min";
        case Functional::Max: return "max";
        case Functional::Median: return "median";
        case Functional::P25: return "p25";
        case Functional::P75: return "p75";
        case Functional::Range: return "range";
        case Functional::Skewness: return "skewness";
        case Functional::Kurtosis: return "kurtosis";
    }
    return "?";
}

inline Functional parse_functional(std::string_view name) {
    const auto t = detail::lower(detail::trim(name));
    for (auto f : kAllFunctionals)
        if (t == to_string(f)) return f;
    throw DataError("unknown functional '" + std::string(name) + "'");
}

inline std::vector<Functional> parse_functionals(const std::vector<std::string>& names) {
    std::vector<Functional> out;
    for (const auto& n : names) out.push_back(parse_functional(n));
    return out;
}

struct HolisticVector {
    std::string clip_id;
    std::vector<double> values;  // functional-major: values[f * 34 + d]
    std::vector<std::string> functional_names;
};

namespace detail {

/// Linear-interpolation quantile on sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double apply_functional(Functional f, std::span<const double> xs, std::span<const double> sorted) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    auto central = [&](int k) {
        double acc = 0.0;
        for (double x : xs) acc += std::pow(x - mean, k);
        return acc / n;
    };
    switch (f) {
        case Functional::Mean: return mean;
        case Functional::Std: return std::sqrt(central(2));
        case Functional::Min: return sorted.front();
        case Functional::Max: return sorted.back();
        case Functional::Median: return quantile_sorted(sorted, 0.5);
        case Functional::P25: return quantile_sorted(sorted, 0.25);
        case Functional::P75: return quantile_sorted(sorted, 0.75);
        case Functional::Range: return sorted.back() - sorted.front();
        case Functional::Skewness: {
            const double m2 = central(2);
            return m2 > 0.0 ? central(3) / std::pow(m2, 1.5) : 0.0;
        }
        case Functional::Kurtosis: {  // excess
            const double m2 = central(2);
            return m2 > 0.0 ? central(4) / (m2 * m2) - 3.0 : 0.0;
        }
    }
    return 0.0;
}

}  // namespace detail

/// Applies each functional per feature dimension over the first `original_length` vectors.
inline HolisticVector summarize_holistic(const FeatureSequence& seq,
                                         std::span<const Functional> functionals = kAllFunctionals) {
    if (seq.vectors.empty()) throw std::invalid_argument("summarize_holistic: empty sequence");
    const std::size_t n = seq.original_length > 0 ? std::min(seq.original_length, seq.vectors.size())
                                                  : seq.vectors.size();
    HolisticVector out;
    out.clip_id = seq.clip_id;
    out.values.assign(functionals.size() * kNumFeatures, 0.0);
    for (auto f : functionals) out.functional_names.emplace_back(to_string(f));

    std::vector<double> column(n), sorted(n);
    for (std::size_t d = 0; d < kNumFeatures; ++d) {
        for (std::size_t t = 0; t < n; ++t) column[t] = seq.vectors[t][d];
        sorted = column;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t fi = 0; fi < functionals.size(); ++fi)
            out.values[fi * kNumFeatures + d] = detail::apply_functional(functionals[fi], column, sorted);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image-like maps

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline constexpr std::size_t kTileSide = 34;
inline constexpr std::size_t kTileStride = 17;
inline constexpr std::size_t kMinTiles = 8;

using ImageMap = Matrix;  // always kTileSide x kTileSide

struct MapSequence {
    std::string clip_id;
    std::vector<ImageMap> tiles;
    std::size_t pre_pad_tile_count = 0;
};

/// Column j holds feature vector j.
inline Matrix build_column_map(const FeatureSequence& seq) {
    if (seq.vectors.empty()) throw std::invalid_argument("build_column_map: empty sequence");
    Matrix m(kNumFeatures, seq.vectors.size());
    for (std::size_t j = 0; j < seq.vectors.size(); ++j)
        for (std::size_t i = 0; i < kNumFeatures; ++i) m(i, j) = seq.vectors[j][i];
    return m;
}

/// Smallest multiple of `stride` that is >= max(n, side).
inline std::size_t padded_width(std::size_t n, std::size_t side = kTileSide,
                                std::size_t stride = kTileStride) {
    const std::size_t need = std::max(n, side);
    return (need + stride - 1) / stride * stride;
}

/// Tiles produced from a padded width: (n' - stride) / stride at the default geometry.
inline std::size_t tile_count(std::size_t padded, std::size_t side = kTileSide,
                              std::size_t stride = kTileStride) {
    return (padded - side) / stride + 1;
}

struct PaddedMap {
    Matrix map;
    std::size_t width = 0;
};

/// Replicates the last column out to the padded width.
inline PaddedMap pad_columns(const Matrix& map, std::size_t side = kTileSide,
                             std::size_t stride = kTileStride) {
    if (map.cols() == 0) throw std::invalid_argument("pad_columns: empty map");
    const std::size_t width = padded_width(map.cols(), side, stride);
    Matrix out(map.rows(), width);
    for (std::size_t r = 0; r < map.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) out(r, c) = map(r, std::min(c, map.cols() - 1));
    return {std::move(out), width};
}

/// Tile t covers columns [t * stride, t * stride + side).
inline std::vector<ImageMap> tile_map(const Matrix& map, std::size_t side = kTileSide,
                                      std::size_t stride = kTileStride) {
    if (map.rows() != side) throw std::invalid_argument("tile_map: map must have tile_side rows");
    if (map.cols() < side || map.cols() % stride != 0)
        throw std::invalid_argument("tile_map: width must be a multiple of the stride and >= tile side");
    const std::size_t count = tile_count(map.cols(), side, stride);
    std::vector<ImageMap> tiles;
    tiles.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        ImageMap tile(side, side);
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c) tile(r, c) = map(r, t * stride + c);
        tiles.push_back(std::move(tile));
    }
    return tiles;
}

inline MapSequence pad_tile_sequence(std::vector<ImageMap> tiles, std::size_t min_len = kMinTiles) {
    if (tiles.empty()) throw std::invalid_argument("pad_tile_sequence: no tiles");
    MapSequence seq;
    seq.pre_pad_tile_count = tiles.size();
    if (tiles.size() < min_len) tiles.resize(min_len, tiles.back());
    seq.tiles = std::move(tiles);
    return seq;
}

/// Map path from an already featurized clip. Uses the raw (unpadded) sequence.
inline MapSequence maps_for_sequence(const FeatureSequence& seq, std::size_t min_tiles = kMinTiles) {
    FeatureSequence raw = seq;
    raw.vectors.resize(std::min(seq.original_length > 0 ? seq.original_length : seq.vectors.size(),
                                seq.vectors.size()));
    const auto padded = pad_columns(build_column_map(raw));
    auto out = pad_tile_sequence(tile_map(padded.map), min_tiles);
    out.clip_id = seq.clip_id;
    return out;
}

inline MapSequence maps_for_clip(const AudioClip& clip, FramingParams p = {},
                                 std::size_t min_tiles = kMinTiles) {
    return maps_for_sequence(featurize_clip(clip, p), min_tiles);
}

}  // namespace affectfuse
