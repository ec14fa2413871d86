#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/csv.hpp"

namespace affectfuse {

inline constexpr int kCanonicalSampleRate = 16000;

struct AudioClip {
    std::string clip_id;
    std::vector<double> samples;  // mono, each in [-1, 1]
    int sample_rate = kCanonicalSampleRate;

    std::int64_t duration_ms() const {
        return static_cast<std::int64_t>(samples.size()) * 1000 / sample_rate;
    }
};

// ---------------------------------------------------------------------------
// WAV decoding

class WavError : public DataError {
public:
    enum class Kind { Unreadable, Unsupported, Empty };

    WavError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

namespace detail {

inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline constexpr std::uint16_t kFormatPcm = 0x1;
inline constexpr std::uint16_t kFormatFloat = 0x3;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline double decode_sample(const unsigned char* p, std::uint16_t format, int bits) {
    if (format == kFormatFloat) {
        float f;
        const std::uint32_t u = read_u32le(p);
        std::memcpy(&f, &u, sizeof f);
        return static_cast<double>(f);
    }
    switch (bits) {
        case 8:
            return (static_cast<int>(p[0]) - 128) / 128.0;
        case 16:
            return static_cast<std::int16_t>(read_u16le(p)) / 32768.0;
        case 24: {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v -= 0x1000000;
            return v / 8388608.0;
        }
        default:
            return 0.0;
    }
}

}  // namespace detail

/// Decodes RIFF/WAVE PCM (8/16/24-bit integer, 32-bit float), mono or stereo.
/// Stereo is averaged per sample; integers are scaled by the type's maximum magnitude.
inline AudioClip decode_wav_bytes(const std::string& bytes, const std::string& clip_id,
                                  const std::string& origin = "<memory>") {
    using detail::read_u16le;
    using detail::read_u32le;
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t size = bytes.size();
    if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
        throw WavError(WavError::Kind::Unreadable, origin + ": not a RIFF/WAVE file");

    std::optional<std::uint16_t> format;
    int channels = 0, bits = 0, block_align = 0;
    std::uint32_t rate = 0;
    const unsigned char* payload = nullptr;
    std::size_t payload_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= size) {
        const unsigned char* chunk = data + pos;
        const std::uint32_t chunk_size = read_u32le(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min<std::size_t>(chunk_size, size - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (avail < 16) throw WavError(WavError::Kind::Unreadable, origin + ": short fmt chunk");
            format = read_u16le(data + body);
            channels = read_u16le(data + body + 2);
            rate = read_u32le(data + body + 4);
            block_align = read_u16le(data + body + 12);
            bits = read_u16le(data + body + 14);
            if (*format == detail::kFormatExtensible && avail >= 26)
                format = read_u16le(data + body + 24);  // first two bytes of the subformat GUID
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            payload = data + body;
            payload_size = avail;
        }
        pos = body + chunk_size + (chunk_size & 1u);
    }
    if (!format) throw WavError(WavError::Kind::Unreadable, origin + ": missing fmt chunk");
    if (!payload) throw WavError(WavError::Kind::Unreadable, origin + ": missing data chunk");

    const bool int_ok = *format == detail::kFormatPcm && (bits == 8 || bits == 16 || bits == 24);
    const bool float_ok = *format == detail::kFormatFloat && bits == 32;
    if (!int_ok && !float_ok)
        throw WavError(WavError::Kind::Unsupported,
                       origin + ": unsupported codec " + std::to_string(*format) + " at " +
                           std::to_string(bits) + " bits");
    if (channels != 1 && channels != 2)
        throw WavError(WavError::Kind::Unsupported,
                       origin + ": unsupported channel count " + std::to_string(channels));
    if (rate == 0) throw WavError(WavError::Kind::Unreadable, origin + ": zero sample rate");

    const int bytes_per_sample = bits / 8;
    const int frame_bytes = std::max(block_align, bytes_per_sample * channels);
    const std::size_t frames = payload_size / static_cast<std::size_t>(frame_bytes);
    if (frames == 0) throw WavError(WavError::Kind::Empty, origin + ": zero-length audio stream");

    AudioClip clip;
    clip.clip_id = clip_id;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const unsigned char* p = payload + i * static_cast<std::size_t>(frame_bytes);
        double v = detail::decode_sample(p, *format, bits);
        if (channels == 2) v = (v + detail::decode_sample(p + bytes_per_sample, *format, bits)) / 2.0;
        if (!std::isfinite(v))
            throw WavError(WavError::Kind::Unsupported, origin + ": non-finite float sample");
        clip.samples[i] = std::clamp(v, -1.0, 1.0);
    }
    return clip;
}

inline AudioClip decode_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError(WavError::Kind::Unreadable, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_wav_bytes(ss.str(), std::filesystem::path(path).stem().string(), path);
}

enum class WavEncoding { Pcm8, Pcm16, Pcm24, Float32 };

/// Encodes interleaved frames; `channels` consecutive values per frame.
inline std::string encode_wav(const std::vector<double>& interleaved, int channels, int sample_rate,
                              WavEncoding enc = WavEncoding::Pcm16) {
    const int bits = enc == WavEncoding::Pcm8 ? 8 : enc == WavEncoding::Pcm16 ? 16
                                                  : enc == WavEncoding::Pcm24   ? 24
                                                                                : 32;
    const std::uint16_t format = enc == WavEncoding::Float32 ? detail::kFormatFloat : detail::kFormatPcm;
    const auto block = static_cast<std::uint16_t>(channels * bits / 8);
    const auto data_size = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

    std::string out;
    out.reserve(44 + data_size);
    out += "RIFF";
    detail::put_u32le(out, 36 + data_size);
    out += "WAVEfmt ";
    detail::put_u32le(out, 16);
    detail::put_u16le(out, format);
    detail::put_u16le(out, static_cast<std::uint16_t>(channels));
    detail::put_u32le(out, static_cast<std::uint32_t>(sample_rate));
    detail::put_u32le(out, static_cast<std::uint32_t>(sample_rate) * block);
    detail::put_u16le(out, block);
    detail::put_u16le(out, static_cast<std::uint16_t>(bits));
    out += "data";
    detail::put_u32le(out, data_size);
    for (double v : interleaved) {
        v = std::clamp(v, -1.0, 1.0);
        switch (enc) {
            case WavEncoding::Pcm8:
                out.push_back(static_cast<char>(
                    std::clamp<long>(std::lround(v * 128.0) + 128, 0, 255)));
                break;
            case WavEncoding::Pcm16:
                detail::put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(
                                           std::clamp<long>(std::lround(v * 32768.0), -32768, 32767))));
                break;
            case WavEncoding::Pcm24: {
                const auto s = static_cast<std::int32_t>(
                    std::clamp<long>(std::lround(v * 8388608.0), -8388608, 8388607));
                const auto u = static_cast<std::uint32_t>(s);
                for (int i = 0; i < 3; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
                break;
            }
            case WavEncoding::Float32: {
                const auto f = static_cast<float>(v);
                detail::put_u32le(out, std::bit_cast<std::uint32_t>(f));
                break;
            }
        }
    }
    return out;
}

inline void write_wav(const std::string& path, const std::vector<double>& interleaved, int channels,
                      int sample_rate, WavEncoding enc = WavEncoding::Pcm16) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    const auto bytes = encode_wav(interleaved, channels, sample_rate, enc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Resampling

/// Linear-interpolation resampler. Output length is floor(len * target / rate), which keeps
/// the duration within one output sample of the input.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw std::invalid_argument("target_rate must be positive");
    if (clip.sample_rate == target_rate) return clip;

    const auto n_in = static_cast<std::int64_t>(clip.samples.size());
    const std::int64_t n_out = n_in * target_rate / clip.sample_rate;
    AudioClip out;
    out.clip_id = clip.clip_id;
    out.sample_rate = target_rate;
    out.samples.resize(static_cast<std::size_t>(n_out));
    for (std::int64_t i = 0; i < n_out; ++i) {
        // exact rational position i * rate / target
        const std::int64_t num = i * clip.sample_rate;
        const std::int64_t left = num / target_rate;
        const double frac = static_cast<double>(num % target_rate) / target_rate;
        const double a = clip.samples[static_cast<std::size_t>(left)];
        const double b = left + 1 < n_in ? clip.samples[static_cast<std::size_t>(left + 1)] : a;
        out.samples[static_cast<std::size_t>(i)] = a + frac * (b - a);
    }
    return out;
}

/// Decode then bring to the canonical rate.
inline AudioClip load_clip(const std::string& path, const std::string& clip_id,
                           int target_rate = kCanonicalSampleRate) {
    AudioClip clip = resample(decode_wav(path), target_rate);
    clip.clip_id = clip_id;
    return clip;
}

// ---------------------------------------------------------------------------
// Manifests

enum class Split { Train, Validation, Test };

inline std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

inline std::optional<Split> parse_split(std::string_view token) {
    const auto t = detail::lower(detail::trim(token));
    if (t == "train") return Split::Train;
    if (t == "validation" || t == "val") return Split::Validation;
    if (t == "test") return Split::Test;
    return std::nullopt;
}

struct ManifestEntry {
    std::string clip_id;
    Split split = Split::Train;
    std::optional<EmotionLabel> label;
    std::string audio_path;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split(Split s) const {
        std::vector<ManifestEntry> out;
        std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                     [s](const ManifestEntry& e) { return e.split == s; });
        return out;
    }

    std::map<std::string, EmotionLabel> labels(std::optional<Split> only = std::nullopt) const {
        std::map<std::string, EmotionLabel> out;
        for (const auto& e : entries)
            if (e.label && (!only || e.split == *only)) out.emplace(e.clip_id, *e.label);
        return out;
    }
};

inline void validate(const DatasetManifest& m) {
    std::set<std::string> seen;
    for (const auto& e : m.entries) {
        if (!seen.insert(e.clip_id).second) throw DataError("duplicate clip_id '" + e.clip_id + "'");
        if (e.split != Split::Test && !e.label)
            throw DataError("clip '" + e.clip_id + "' in " + std::string(to_string(e.split)) +
                            " split has no label");
    }
}

inline DatasetManifest parse_manifest_table(const csv::Table& t, const std::string& path) {
    csv::expect_header(t, {"clip_id", "split", "label", "audio_path"}, path);
    DatasetManifest m;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
        if (row.size() != 4) throw DataError(where + ": expected 4 fields");
        ManifestEntry e;
        e.clip_id = row[0];
        if (e.clip_id.empty()) throw DataError(where + ": empty clip_id");
        const auto split = parse_split(row[1]);
        if (!split) throw DataError(where + ": unknown split '" + row[1] + "'");
        e.split = *split;
        if (!row[2].empty()) {
            e.label = parse_label(row[2]);
            if (!e.label) throw DataError(where + ": unknown label '" + row[2] + "'");
        }
        e.audio_path = row[3];
        m.entries.push_back(std::move(e));
    }
    validate(m);
    return m;
}

/// Relative audio paths are resolved against the manifest's directory.
inline DatasetManifest parse_manifest(const std::string& path) {
    auto m = parse_manifest_table(csv::read(path), path);
    const auto base = std::filesystem::path(path).parent_path();
    for (auto& e : m.entries) {
        std::filesystem::path p(e.audio_path);
        if (p.is_relative() && !base.empty()) e.audio_path = (base / p).string();
    }
    return m;
}

inline std::string serialize_manifest(const DatasetManifest& m) {
    std::string out = "clip_id,split,label,audio_path\n";
    for (const auto& e : m.entries) {
        out += e.clip_id + "," + std::string(to_string(e.split)) + "," +
               (e.label ? std::string(to_code(*e.label)) : "") + "," + e.audio_path + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// External score sets

using ScoreVector = std::array<double, kNumClasses>;

struct ExternalScoreSet {
    std::string model_id;
    std::map<std::string, ScoreVector> scores;
};

inline ExternalScoreSet parse_scores_table(const csv::Table& t, const std::string& model_id,
                                           const std::string& path) {
    csv::expect_header(t, {"clip_id", "AN", "DI", "FE", "HA", "NE", "SA", "SU"}, path);
    ExternalScoreSet set{model_id, {}};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
        if (row.size() != kNumClasses + 1)
            throw DataError(where + ": expected " + std::to_string(kNumClasses) +
                            " score cells, got " + std::to_string(row.size() - 1));
        ScoreVector v{};
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            const std::string& cell = row[c + 1];
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (cell.empty() || used != cell.size() || !std::isfinite(x))
                throw DataError(where + ": non-numeric score '" + cell + "'");
            v[c] = x;
        }
        if (!set.scores.emplace(row[0], v).second)
            throw DataError(where + ": duplicate clip_id '" + row[0] + "'");
    }
    return set;
}

inline ExternalScoreSet parse_scores(const std::string& path, const std::string& model_id) {
    return parse_scores_table(csv::read(path), model_id, path);
}

/// Writes with 17 significant digits so a re-parse is exact.
inline std::string serialize_scores(const ExternalScoreSet& set) {
    std::ostringstream out;
    out << "clip_id,AN,DI,FE,HA,NE,SA,SU\n" << std::setprecision(17);
    for (const auto& [id, v] : set.scores) {
        out << id;
        for (double x : v) out << ',' << x;
        out << '\n';
    }
    return out.str();
}

}  // namespace affectfuse
