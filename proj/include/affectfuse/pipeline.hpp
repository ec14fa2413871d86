#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/csv.hpp"
#include "affectfuse/ingest.hpp"
#include "affectfuse/models.hpp"
#include "affectfuse/seqmap.hpp"
#include "affectfuse/stfeat.hpp"

namespace affectfuse {

// ---------------------------------------------------------------------------
// Logging (AFFECTFUSE_LOG = error | warn | info | debug)

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("AFFECTFUSE_LOG");
        if (!env) return LogLevel::Warn;
        const auto v = detail::lower(env);
        if (v == "error") return LogLevel::Error;
        if (v == "info") return LogLevel::Info;
        if (v == "debug" || v == "trace") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
    static std::mutex mu;
    if (level > log_level()) return;
    static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(mu);
    std::cerr << "[affectfuse " << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Flattened tiles

/// Each 34x34 tile becomes a 1156-vector, row-major, order preserved.
inline std::vector<std::vector<double>> flatten_tiles(const MapSequence& seq) {
    std::vector<std::vector<double>> out;
    out.reserve(seq.tiles.size());
    for (const auto& tile : seq.tiles) out.emplace_back(tile.data().begin(), tile.data().end());
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

enum class Representation : std::uint8_t { HolisticSvm = 0, SeqLstm = 1, MapLstm = 2 };

inline std::string_view to_string(Representation r) {
    switch (r) {
        case Representation::HolisticSvm: return "holistic-svm";
        case Representation::SeqLstm: return "seq-lstm";
        case Representation::MapLstm: return "map-lstm";
    }
    return "?";
}

inline std::optional<Representation> parse_representation(std::string_view s) {
    for (auto r : {Representation::HolisticSvm, Representation::SeqLstm, Representation::MapLstm})
        if (s == to_string(r)) return r;
    return std::nullopt;
}

struct PipelineConfig {
    int sample_rate = kCanonicalSampleRate;
    int window_ms = 100;
    int step_ms = 50;
    std::size_t min_seq_len = 16;
    std::size_t tile_side = kTileSide;
    std::size_t tile_stride = kTileStride;
    std::size_t min_tiles = kMinTiles;
    std::vector<Functional> functionals{kAllFunctionals.begin(), kAllFunctionals.end()};
    SvmHyperParams svm;
    std::size_t seq_hidden = 512;
    LstmHyperParams seq_lstm;
    std::size_t map_hidden = 128;
    LstmHyperParams map_lstm = LstmHyperParams::map_sequence_defaults();
    int fusion_grid = 20;
    std::uint64_t seed = 1;
    unsigned jobs = 1;

    FramingParams framing() const { return {window_ms, step_ms}; }

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
        if (sample_rate <= 0) fail("sample_rate must be positive");
        if (step_ms <= 0 || window_ms < step_ms) fail("need window_ms >= step_ms > 0");
        if (min_seq_len == 0 || min_tiles == 0) fail("min_seq_len and min_tiles must be positive");
        if (tile_side != kNumFeatures) fail("tile_side must equal the feature dimension (34)");
        if (tile_stride == 0 || tile_stride > tile_side) fail("tile_stride must be in 1..tile_side");
        if (functionals.empty()) fail("functional set is empty");
        if (seq_hidden == 0 || map_hidden == 0) fail("hidden sizes must be positive");
        if (fusion_grid < 1) fail("grid must be >= 1");
        if (jobs == 0) fail("jobs must be >= 1");
    }

    /// Applies one key=value setting.
    void set(const std::string& key, const std::string& value) {
        auto as_int = [&](auto& target) {
            std::size_t used = 0;
            long long v = 0;
            try {
                v = std::stoll(value, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != value.size() || v < 0)
                throw std::invalid_argument("config: '" + key + "' expects a nonnegative integer");
            target = static_cast<std::remove_reference_t<decltype(target)>>(v);
        };
        auto as_real = [&](double& target) {
            std::size_t used = 0;
            try {
                target = std::stod(value, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != value.size())
                throw std::invalid_argument("config: '" + key + "' expects a number");
        };
        auto lstm_key = [&](LstmHyperParams& hp, std::string_view sub) {
            if (sub == "lr") as_real(hp.learning_rate);
            else if (sub == "epochs") as_int(hp.epochs);
            else if (sub == "clip") as_real(hp.clip_norm);
            else if (sub == "batch") as_int(hp.batch_size);
            else if (sub == "weight_decay") as_real(hp.weight_decay);
            else if (sub == "lr_decay_every") as_int(hp.lr_decay_every);
            else if (sub == "lr_decay_factor") as_real(hp.lr_decay_factor);
            else if (sub == "max_iterations") as_int(hp.max_iterations);
            else return false;
            return true;
        };
        if (key == "sample_rate") as_int(sample_rate);
        else if (key == "window_ms") as_int(window_ms);
        else if (key == "step_ms") as_int(step_ms);
        else if (key == "min_seq_len") as_int(min_seq_len);
        else if (key == "tile_side") as_int(tile_side);
        else if (key == "tile_stride") as_int(tile_stride);
        else if (key == "min_tiles") as_int(min_tiles);
        else if (key == "functionals") {
            functionals.clear();
            for (const auto& name : csv::split(value)) functionals.push_back(parse_functional(name));
        } else if (key == "svm.lambda") as_real(svm.lambda);
        else if (key == "svm.epochs") as_int(svm.epochs);
        else if (key == "seq.hidden") as_int(seq_hidden);
        else if (key == "map.hidden") as_int(map_hidden);
        else if (key.starts_with("seq.") && lstm_key(seq_lstm, std::string_view(key).substr(4))) {
        } else if (key.starts_with("map.") && lstm_key(map_lstm, std::string_view(key).substr(4))) {
        } else if (key == "grid") as_int(fusion_grid);
        else if (key == "seed") as_int(seed);
        else if (key == "jobs") as_int(jobs);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    /// key=value lines; '#' starts a comment.
    void load(std::istream& in, const std::string& origin = "<config>") {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto body = detail::trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos)
                throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key=value");
            set(std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))));
        }
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config " + path);
        load(in, path);
    }
};

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results land at their index, so
/// ordering follows the input regardless of completion order.
template <typename Fn>
auto parallel_map(std::size_t n, unsigned jobs, Fn&& fn) {
    using R = decltype(fn(std::size_t{0}));
    std::vector<std::optional<R>> slots(n);
    std::vector<std::string> errors(n);
    auto run = [&](std::size_t i) {
        try {
            slots[i].emplace(fn(i));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) run(i);
            });
    }
    return std::make_pair(std::move(slots), std::move(errors));
}

// ---------------------------------------------------------------------------
// Trained models and their container format
//
// AFMD1 layout (little-endian):
//   "AFMD1" | u8 version(1) | u8 kind (1 svm, 2 lstm) | u8 representation
//   u32 sample_rate, window_ms, step_ms, min_seq_len, tile_stride, min_tiles
//   u32 functional_count | u8 functional ids...
//   svm : u32 classes | u32 dim | f64 weights[classes*dim] | f64 biases[classes]
//         | f64 mean[dim] | f64 std[dim]
//   lstm: u32 classes | u32 input | u32 hidden | f64 tensors (w_input, w_recurrent,
//         b_gates, w_readout, b_readout) | f64 mean[input] | f64 std[input]

struct TrainedModel {
    Representation representation = Representation::HolisticSvm;
    std::variant<LinearSvmModel, LstmModel> model;
    // pipeline shape the model was trained under
    int sample_rate = kCanonicalSampleRate;
    FramingParams framing;
    std::size_t min_seq_len = 16;
    std::size_t tile_stride = kTileStride;
    std::size_t min_tiles = kMinTiles;
    std::vector<Functional> functionals;
};

namespace detail {

class ByteWriter {
public:
    void bytes(std::string_view s) { out_.append(s); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint64_t v) {
        if (v > 0xFFFFFFFFull) throw DataError("model field exceeds 32 bits");
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        const auto u = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
    }
    void f64s(std::span<const double> vs) {
        for (double v : vs) f64(v);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view in) : in_(in) {}
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
        return std::bit_cast<double>(u);
    }
    std::vector<double> f64s(std::size_t n) {
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) throw DataError("model file truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const TrainedModel& tm) {
    detail::ByteWriter w;
    w.bytes("AFMD1");
    w.u8(1);
    w.u8(std::holds_alternative<LinearSvmModel>(tm.model) ? 1 : 2);
    w.u8(static_cast<std::uint8_t>(tm.representation));
    w.u32(static_cast<std::uint64_t>(tm.sample_rate));
    w.u32(static_cast<std::uint64_t>(tm.framing.window_ms));
    w.u32(static_cast<std::uint64_t>(tm.framing.step_ms));
    w.u32(tm.min_seq_len);
    w.u32(tm.tile_stride);
    w.u32(tm.min_tiles);
    w.u32(tm.functionals.size());
    for (auto f : tm.functionals) w.u8(static_cast<std::uint8_t>(f));
    if (const auto* svm = std::get_if<LinearSvmModel>(&tm.model)) {
        w.u32(kNumClasses);
        w.u32(svm->dim);
        w.f64s(svm->weights);
        w.f64s(svm->biases);
        w.f64s(svm->standardization.mean);
        w.f64s(svm->standardization.std);
    } else {
        const auto& lstm = std::get<LstmModel>(tm.model);
        w.u32(kNumClasses);
        w.u32(lstm.input_dim);
        w.u32(lstm.hidden_dim);
        for (const auto* t : lstm.params.tensors()) w.f64s(*t);
        w.f64s(lstm.standardization.mean);
        w.f64s(lstm.standardization.std);
    }
    return w.take();
}

inline TrainedModel deserialize_model(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (bytes.size() < 5 || r.bytes(5) != "AFMD1") throw DataError("not an AFMD1 model file");
    if (const auto version = r.u8(); version != 1)
        throw DataError("unsupported model version " + std::to_string(version));
    const auto kind = r.u8();
    const auto rep = r.u8();
    if (rep > 2) throw DataError("unknown representation in model file");
    TrainedModel tm;
    tm.representation = static_cast<Representation>(rep);
    tm.sample_rate = static_cast<int>(r.u32());
    tm.framing.window_ms = static_cast<int>(r.u32());
    tm.framing.step_ms = static_cast<int>(r.u32());
    tm.min_seq_len = r.u32();
    tm.tile_stride = r.u32();
    tm.min_tiles = r.u32();
    const auto nf = r.u32();
    for (std::uint32_t i = 0; i < nf; ++i) {
        const auto id = r.u8();
        if (id >= kAllFunctionals.size()) throw DataError("unknown functional id in model file");
        tm.functionals.push_back(static_cast<Functional>(id));
    }
    if (r.u32() != kNumClasses) throw DataError("model file class count mismatch");
    if (kind == 1) {
        LinearSvmModel m;
        m.dim = r.u32();
        m.weights = r.f64s(kNumClasses * m.dim);
        const auto b = r.f64s(kNumClasses);
        std::copy(b.begin(), b.end(), m.biases.begin());
        m.standardization.mean = r.f64s(m.dim);
        m.standardization.std = r.f64s(m.dim);
        tm.model = std::move(m);
    } else if (kind == 2) {
        const std::size_t input = r.u32();
        const std::size_t hidden = r.u32();
        LstmModel m(input, hidden);
        for (auto* t : m.params.tensors()) *t = r.f64s(t->size());
        m.standardization.mean = r.f64s(input);
        m.standardization.std = r.f64s(input);
        tm.model = std::move(m);
    } else {
        throw DataError("unknown model kind " + std::to_string(kind));
    }
    if (!r.done()) throw DataError("trailing bytes in model file");
    return tm;
}

inline void save_model(const std::string& path, const TrainedModel& tm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    const auto bytes = serialize_model(tm);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

// ---------------------------------------------------------------------------
// Representations

/// Ordered model input for one clip under a representation: a single row for the SVM,
/// a step sequence for the LSTMs.
inline std::vector<std::vector<double>> represent(const FeatureSequence& seq, Representation rep,
                                                  const std::vector<Functional>& functionals,
                                                  std::size_t min_seq_len, std::size_t tile_stride,
                                                  std::size_t min_tiles) {
    switch (rep) {
        case Representation::HolisticSvm:
            return {summarize_holistic(seq, functionals).values};
        case Representation::SeqLstm: {
            const auto padded = pad_min_length(seq, min_seq_len);
            std::vector<std::vector<double>> steps;
            for (const auto& v : padded.vectors) steps.emplace_back(v.begin(), v.end());
            return steps;
        }
        case Representation::MapLstm: {
            FeatureSequence raw = seq;
            raw.vectors.resize(std::min(seq.original_length, seq.vectors.size()));
            const auto padded = pad_columns(build_column_map(raw), kTileSide, tile_stride);
            auto maps = pad_tile_sequence(tile_map(padded.map, kTileSide, tile_stride), min_tiles);
            maps.clip_id = seq.clip_id;
            return flatten_tiles(maps);
        }
    }
    return {};
}

inline std::vector<std::vector<double>> represent(const FeatureSequence& seq, const TrainedModel& tm) {
    return represent(seq, tm.representation, tm.functionals, tm.min_seq_len, tm.tile_stride, tm.min_tiles);
}

inline FeatureSequence featurize_entry(const ManifestEntry& e, int sample_rate, FramingParams framing) {
    return featurize_clip(load_clip(e.audio_path, e.clip_id, sample_rate), framing);
}

/// Featurizes entries in manifest order; failures are collected as "clip_id: reason".
inline std::vector<FeatureSequence> featurize_entries(const std::vector<ManifestEntry>& entries,
                                                      int sample_rate, FramingParams framing,
                                                      unsigned jobs, std::vector<std::string>& failures) {
    auto [slots, errors] = parallel_map(entries.size(), jobs, [&](std::size_t i) {
        return featurize_entry(entries[i], sample_rate, framing);
    });
    std::vector<FeatureSequence> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (slots[i]) out.push_back(std::move(*slots[i]));
        else failures.push_back(entries[i].clip_id + ": " + errors[i]);
    }
    return out;
}

inline ScoreVector score_sequence(const TrainedModel& tm, const FeatureSequence& seq) {
    const auto input = represent(seq, tm);
    if (const auto* svm = std::get_if<LinearSvmModel>(&tm.model)) return predict_svm(*svm, input.front());
    return predict_lstm(std::get<LstmModel>(tm.model), input);
}

/// Trains the requested representation on labeled feature sequences.
inline TrainedModel train_model(const std::vector<std::pair<FeatureSequence, EmotionLabel>>& data,
                                Representation rep, const PipelineConfig& cfg,
                                TrainingLog* log = nullptr) {
    cfg.validate();
    TrainedModel tm;
    tm.representation = rep;
    tm.sample_rate = cfg.sample_rate;
    tm.framing = cfg.framing();
    tm.min_seq_len = cfg.min_seq_len;
    tm.tile_stride = cfg.tile_stride;
    tm.min_tiles = cfg.min_tiles;
    if (rep == Representation::HolisticSvm) tm.functionals = cfg.functionals;

    if (rep == Representation::HolisticSvm) {
        std::vector<LabeledVector> train;
        for (const auto& [seq, label] : data) train.push_back({represent(seq, tm).front(), label});
        SvmHyperParams hp = cfg.svm;
        hp.seed = cfg.seed;
        tm.model = train_svm(train, hp, log);
    } else {
        std::vector<LabeledSequence> train;
        for (const auto& [seq, label] : data) train.push_back({represent(seq, tm), label});
        if (train.empty()) throw DataError("train_model: empty training set");
        const bool is_map = rep == Representation::MapLstm;
        LstmHyperParams hp = is_map ? cfg.map_lstm : cfg.seq_lstm;
        hp.seed = cfg.seed;
        const std::size_t input = train.front().steps.front().size();
        auto init = LstmModel::random(input, is_map ? cfg.map_hidden : cfg.seq_hidden, cfg.seed);
        tm.model = lstm_train(std::move(init), train, hp, log);
    }
    return tm;
}

/// One normalized score vector per clip, keyed by clip_id.
inline ExternalScoreSet score_clips(const TrainedModel& tm, const std::vector<ManifestEntry>& entries,
                                    const std::string& model_id, unsigned jobs,
                                    std::vector<std::string>& failures) {
    auto [slots, errors] = parallel_map(entries.size(), jobs, [&](std::size_t i) {
        return normalize_scores(score_sequence(tm, featurize_entry(entries[i], tm.sample_rate, tm.framing)));
    });
    ExternalScoreSet set{model_id, {}};
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (slots[i]) set.scores[entries[i].clip_id] = *slots[i];
        else failures.push_back(entries[i].clip_id + ": " + errors[i]);
    }
    return set;
}

}  // namespace affectfuse
