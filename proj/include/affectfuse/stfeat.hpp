#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/fft.hpp"
#include "affectfuse/ingest.hpp"

namespace affectfuse {

inline constexpr std::size_t kNumFeatures = 34;

/// Index layout of the short-term feature vector.
namespace feat {
inline constexpr std::size_t kZcr = 0;
inline constexpr std::size_t kEnergy = 1;
inline constexpr std::size_t kEnergyEntropy = 2;
inline constexpr std::size_t kCentroid = 3;
inline constexpr std::size_t kSpread = 4;
inline constexpr std::size_t kSpectralEntropy = 5;
inline constexpr std::size_t kFlux = 6;
inline constexpr std::size_t kRolloff = 7;
inline constexpr std::size_t kMfccBegin = 8;  // 13 coefficients
inline constexpr std::size_t kNumMfcc = 13;
inline constexpr std::size_t kChromaBegin = 21;  // 12 pitch classes
inline constexpr std::size_t kNumChroma = 12;
inline constexpr std::size_t kChromaDeviation = 33;

inline constexpr std::size_t kEntropySubFrames = 10;
inline constexpr std::size_t kEntropyBands = 10;
inline constexpr std::size_t kMelFilters = 26;
inline constexpr double kRolloffFraction = 0.90;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kChromaMinHz = 10.0;
}  // namespace feat

using ShortTermFeatureVector = std::array<double, kNumFeatures>;

struct Frame {
    std::vector<double> samples;
    std::size_t index = 0;
    std::int64_t start_ms = 0;
    int sample_rate = kCanonicalSampleRate;
};

struct FramingParams {
    int window_ms = 100;
    int step_ms = 50;
};

/// Number of full windows in a clip of `duration_ms`: floor((m - window) / step) + 1,
/// which is floor((m - 50) / 50) at the 100/50 defaults.
inline std::int64_t frame_count(std::int64_t duration_ms, FramingParams p = {}) {
    if (duration_ms < p.window_ms) return 0;
    return (duration_ms - p.window_ms) / p.step_ms + 1;
}

inline std::vector<Frame> frame_signal(const AudioClip& clip, FramingParams p = {}) {
    if (p.step_ms <= 0 || p.window_ms < p.step_ms)
        throw std::invalid_argument("framing requires window_ms >= step_ms > 0");
    const std::int64_t m = clip.duration_ms();
    if (m < p.window_ms)
        throw DataError("clip '" + clip.clip_id + "' is " + std::to_string(m) +
                        " ms, shorter than one " + std::to_string(p.window_ms) + " ms window");
    const auto win = static_cast<std::size_t>(std::int64_t{p.window_ms} * clip.sample_rate / 1000);
    const auto step = static_cast<std::size_t>(std::int64_t{p.step_ms} * clip.sample_rate / 1000);
    if (win < 2) throw DataError("window of fewer than 2 samples at this sample rate");

    const auto n = static_cast<std::size_t>(frame_count(m, p));
    std::vector<Frame> frames;
    frames.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t start = k * step;
        if (start + win > clip.samples.size()) break;
        Frame f;
        f.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                         clip.samples.begin() + static_cast<std::ptrdiff_t>(start + win));
        f.index = k;
        f.start_ms = static_cast<std::int64_t>(k) * p.step_ms;
        f.sample_rate = clip.sample_rate;
        frames.push_back(std::move(f));
    }
    return frames;
}

namespace detail {

/// -sum p log2 p over `blocks` equal-length blocks of `energies` (trailing remainder ignored).
inline double block_entropy(std::span<const double> energies, std::size_t blocks) {
    const std::size_t len = energies.size() / blocks;
    if (len == 0) return 0.0;
    std::vector<double> sums(blocks, 0.0);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t i = 0; i < len; ++i) sums[b] += energies[b * len + i];
    const double total = std::accumulate(sums.begin(), sums.end(), 0.0);
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double s : sums) {
        const double pj = s / total;
        if (pj > 0.0) h -= pj * std::log2(pj);
    }
    return std::max(h, 0.0);
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace detail

/// Precomputed filterbank and pitch-class map for one (frame length, sample rate) pair.
class ShortTermExtractor {
public:
    ShortTermExtractor(std::size_t frame_length, int sample_rate)
        : frame_length_(frame_length), sample_rate_(sample_rate), bins_(frame_length / 2) {
        if (frame_length < 2) throw std::invalid_argument("frame length must be at least 2");
        const double nyquist = sample_rate / 2.0;
        bin_hz_.resize(bins_);
        for (std::size_t k = 0; k < bins_; ++k)
            bin_hz_[k] = static_cast<double>(k) * sample_rate / static_cast<double>(frame_length);

        const double mel_hi = detail::hz_to_mel(nyquist);
        std::array<double, feat::kMelFilters + 2> edges{};
        for (std::size_t j = 0; j < edges.size(); ++j)
            edges[j] = detail::mel_to_hz(mel_hi * static_cast<double>(j) / (feat::kMelFilters + 1));
        filters_.assign(feat::kMelFilters, std::vector<double>(bins_, 0.0));
        for (std::size_t m = 0; m < feat::kMelFilters; ++m) {
            const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
            for (std::size_t k = 0; k < bins_; ++k) {
                const double f = bin_hz_[k];
                if (f >= lo && f <= mid && mid > lo) filters_[m][k] = (f - lo) / (mid - lo);
                else if (f > mid && f <= hi && hi > mid) filters_[m][k] = (hi - f) / (hi - mid);
            }
        }

        pitch_class_.assign(bins_, -1);
        for (std::size_t k = 0; k < bins_; ++k) {
            if (bin_hz_[k] < feat::kChromaMinHz) continue;
            const long note = std::lround(12.0 * std::log2(bin_hz_[k] / 440.0));
            pitch_class_[k] = static_cast<int>(((note % 12) + 12) % 12);
        }
    }

    std::size_t frame_length() const { return frame_length_; }
    int sample_rate() const { return sample_rate_; }
    std::size_t bins() const { return bins_; }

    /// Returns the feature vector and this frame's magnitude spectrum. Without a previous
    /// spectrum, flux is taken against the frame's own spectrum (so it is 0).
    std::pair<ShortTermFeatureVector, std::vector<double>> extract(
        std::span<const double> x, const std::vector<double>* prev_spectrum) const {
        if (x.size() != frame_length_)
            throw std::invalid_argument("frame length does not match extractor");
        for (double v : x)
            if (!std::isfinite(v)) throw DataError("non-finite sample in frame");

        ShortTermFeatureVector out{};
        const std::size_t n = x.size();

        std::size_t crossings = 0;
        for (std::size_t i = 1; i < n; ++i)
            if ((x[i - 1] > 0.0 && x[i] < 0.0) || (x[i - 1] < 0.0 && x[i] > 0.0)) ++crossings;
        out[feat::kZcr] = static_cast<double>(crossings) / static_cast<double>(n - 1);

        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) sq[i] = x[i] * x[i];
        out[feat::kEnergy] = std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(n);
        out[feat::kEnergyEntropy] = detail::block_entropy(sq, feat::kEntropySubFrames);

        std::vector<double> mag = fft::magnitude_spectrum(x);
        const double mag_sum = std::accumulate(mag.begin(), mag.end(), 0.0);
        std::vector<double> power(bins_);
        for (std::size_t k = 0; k < bins_; ++k) power[k] = mag[k] * mag[k];
        const double power_sum = std::accumulate(power.begin(), power.end(), 0.0);

        // centroid / spread on frequencies normalized by Nyquist (f_k / Nyquist = 2k / N)
        if (mag_sum > 0.0) {
            double c = 0.0;
            for (std::size_t k = 0; k < bins_; ++k) c += norm_freq(k) * (mag[k] / mag_sum);
            double s = 0.0;
            for (std::size_t k = 0; k < bins_; ++k) {
                const double d = norm_freq(k) - c;
                s += d * d * (mag[k] / mag_sum);
            }
            out[feat::kCentroid] = c;
            out[feat::kSpread] = std::sqrt(s);
        } else {
            out[feat::kCentroid] = 0.5;
            out[feat::kSpread] = 0.0;
        }

        out[feat::kSpectralEntropy] = detail::block_entropy(power, feat::kEntropyBands);

        const std::vector<double>& prev = prev_spectrum ? *prev_spectrum : mag;
        if (prev.size() != bins_) throw std::invalid_argument("previous spectrum size mismatch");
        const double prev_sum = std::accumulate(prev.begin(), prev.end(), 0.0);
        double flux = 0.0;
        for (std::size_t k = 0; k < bins_; ++k) {
            const double a = mag_sum > 0.0 ? mag[k] / mag_sum : 0.0;
            const double b = prev_sum > 0.0 ? prev[k] / prev_sum : 0.0;
            flux += (a - b) * (a - b);
        }
        out[feat::kFlux] = flux;

        if (power_sum > 0.0) {
            const double threshold = feat::kRolloffFraction * power_sum;
            double cum = 0.0;
            std::size_t b = 0;
            for (; b < bins_; ++b) {
                cum += power[b];
                if (cum >= threshold) break;
            }
            out[feat::kRolloff] = static_cast<double>(std::min(b, bins_ - 1)) / static_cast<double>(bins_);
        }

        std::array<double, feat::kMelFilters> log_mel{};
        for (std::size_t m = 0; m < feat::kMelFilters; ++m) {
            double e = 0.0;
            for (std::size_t k = 0; k < bins_; ++k) e += filters_[m][k] * power[k];
            log_mel[m] = std::log(std::max(e, feat::kLogFloor));
        }
        constexpr double M = feat::kMelFilters;
        for (std::size_t q = 0; q < feat::kNumMfcc; ++q) {
            double acc = 0.0;
            for (std::size_t m = 0; m < feat::kMelFilters; ++m)
                acc += log_mel[m] * std::cos(std::numbers::pi * static_cast<double>(q) *
                                             (static_cast<double>(m) + 0.5) / M);
            out[feat::kMfccBegin + q] = acc * (q == 0 ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M));
        }

        if (power_sum > 0.0) {
            for (std::size_t k = 0; k < bins_; ++k)
                if (pitch_class_[k] >= 0)
                    out[feat::kChromaBegin + static_cast<std::size_t>(pitch_class_[k])] += power[k];
            for (std::size_t c = 0; c < feat::kNumChroma; ++c) out[feat::kChromaBegin + c] /= power_sum;
        }
        double mean = 0.0;
        for (std::size_t c = 0; c < feat::kNumChroma; ++c) mean += out[feat::kChromaBegin + c];
        mean /= feat::kNumChroma;
        double var = 0.0;
        for (std::size_t c = 0; c < feat::kNumChroma; ++c) {
            const double d = out[feat::kChromaBegin + c] - mean;
            var += d * d;
        }
        out[feat::kChromaDeviation] = std::sqrt(var / feat::kNumChroma);

        return {out, std::move(mag)};
    }

private:
    double norm_freq(std::size_t k) const {
        return 2.0 * static_cast<double>(k) / static_cast<double>(frame_length_);
    }

    std::size_t frame_length_;
    int sample_rate_;
    std::size_t bins_;
    std::vector<double> bin_hz_;
    std::vector<std::vector<double>> filters_;
    std::vector<int> pitch_class_;
};

inline std::pair<ShortTermFeatureVector, std::vector<double>> extract_features(
    const Frame& frame, const std::vector<double>* prev_spectrum = nullptr) {
    return ShortTermExtractor(frame.samples.size(), frame.sample_rate)
        .extract(frame.samples, prev_spectrum);
}

struct FeatureSequence {
    std::string clip_id;
    std::vector<ShortTermFeatureVector> vectors;
    std::size_t original_length = 0;
};

inline FeatureSequence featurize_clip(const AudioClip& clip, FramingParams p = {}) {
    const auto frames = frame_signal(clip, p);
    FeatureSequence seq;
    seq.clip_id = clip.clip_id;
    seq.vectors.reserve(frames.size());
    const ShortTermExtractor ex(frames.front().samples.size(), clip.sample_rate);
    std::vector<double> prev;
    for (const auto& f : frames) {
        auto [v, spectrum] = ex.extract(f.samples, prev.empty() ? nullptr : &prev);
        seq.vectors.push_back(v);
        prev = std::move(spectrum);
    }
    seq.original_length = seq.vectors.size();
    return seq;
}

}  // namespace affectfuse
