#pragma once

// Subcommand implementations behind tools/affectfuse. Each returns a process exit code:
// 0 success, 1 data/runtime failure, 2 usage error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "affectfuse/core.hpp"
#include "affectfuse/dump.hpp"
#include "affectfuse/eval.hpp"
#include "affectfuse/fusion.hpp"
#include "affectfuse/ingest.hpp"
#include "affectfuse/pipeline.hpp"

namespace affectfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("write failed for " + path);
}

inline std::optional<Split> split_or_usage(const std::string& s) {
    auto sp = parse_split(s);
    if (!sp) log_message(LogLevel::Error, "unknown split '" + s + "' (train, validation, test)");
    return sp;
}

template <typename Fn>
int guarded(const char* cmd, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        log_message(LogLevel::Error, std::string(cmd) + ": " + e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        log_message(LogLevel::Error, std::string(cmd) + ": " + e.what());
        return kExitFailure;
    }
}

}  // namespace detail

inline std::string predictions_csv(const std::map<std::string, EmotionLabel>& preds) {
    std::string out = "clip_id,label\n";
    for (const auto& [id, l] : preds) out += id + "," + std::string(to_code(l)) + "\n";
    return out;
}

inline std::map<std::string, EmotionLabel> parse_predictions(const std::string& path) {
    const auto t = csv::read(path);
    csv::expect_header(t, {"clip_id", "label"}, path);
    std::map<std::string, EmotionLabel> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
        if (row.size() != 2) throw DataError(where + ": expected 2 fields");
        const auto l = parse_label(row[1]);
        if (!l) throw DataError(where + ": unknown label '" + row[1] + "'");
        if (!out.emplace(row[0], *l).second) throw DataError(where + ": duplicate clip_id '" + row[0] + "'");
    }
    return out;
}

inline nlohmann::json to_json(const FusionResult& r) {
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [id, w] : r.best_weights.weights) weights[id] = w;
    return {{"weights", weights},
            {"validation_accuracy", r.validation_accuracy},
            {"evaluated_points", r.evaluated_points}};
}

inline std::string fusion_log_csv(const FusionResult& r) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& id : r.model_ids) out << id << ',';
    out << "accuracy\n";
    for (const auto& e : r.per_point_log) {
        for (double w : e.weights) out << w << ',';
        out << e.accuracy << '\n';
    }
    return out.str();
}

inline nlohmann::json to_json(const MetricsSummary& m) {
    nlohmann::json recall = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) recall[std::string(kLabelCodes[c])] = m.per_class_recall[c];
    return {{"overall_accuracy", m.overall_accuracy},
            {"unweighted_average", m.unweighted_average},
            {"per_class_recall", recall}};
}

// ---------------------------------------------------------------------------

struct ExtractOptions {
    std::string manifest;
    std::string out_dir;
    std::optional<std::string> split;  // all entries when absent
    bool maps = false;                 // also write AFM1 map dumps
};

inline int cmd_extract(const ExtractOptions& opt, const PipelineConfig& cfg) {
    return detail::guarded("extract", [&] {
        cfg.validate();
        const auto manifest = parse_manifest(opt.manifest);
        auto entries = manifest.entries;
        if (opt.split) {
            const auto sp = detail::split_or_usage(*opt.split);
            if (!sp) return kExitUsage;
            entries = manifest.split(*sp);
        }
        std::filesystem::create_directories(opt.out_dir);
        const std::filesystem::path dir(opt.out_dir);

        std::vector<std::string> failures;
        auto [slots, errors] = parallel_map(entries.size(), cfg.jobs, [&](std::size_t i) {
            const auto& e = entries[i];
            const auto seq = featurize_entry(e, cfg.sample_rate, cfg.framing());
            detail::write_text((dir / (e.clip_id + ".csv")).string(), dump::features_csv(seq));
            detail::write_text((dir / (e.clip_id + ".aff")).string(), dump::features_binary(seq));
            if (opt.maps) {
                auto maps = pad_tile_sequence(
                    tile_map(pad_columns(build_column_map(seq), kTileSide, cfg.tile_stride).map,
                             kTileSide, cfg.tile_stride),
                    cfg.min_tiles);
                detail::write_text((dir / (e.clip_id + ".afm")).string(), dump::maps_binary(maps));
            }
            return seq.vectors.size();
        });

        std::string index = "clip_id,split,label,frames,csv,bin\n";
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            if (!slots[i]) {
                failures.push_back(e.clip_id + ": " + errors[i]);
                continue;
            }
            index += e.clip_id + "," + std::string(to_string(e.split)) + "," +
                     (e.label ? std::string(to_code(*e.label)) : "") + "," + std::to_string(*slots[i]) +
                     "," + e.clip_id + ".csv," + e.clip_id + ".aff\n";
        }
        detail::write_text((dir / "index.csv").string(), index);
        for (const auto& f : failures) log_message(LogLevel::Error, "extract: " + f);
        log_message(LogLevel::Info, "extract: " + std::to_string(entries.size() - failures.size()) + " of " +
                                        std::to_string(entries.size()) + " clips written");
        return failures.empty() ? kExitOk : kExitFailure;
    });
}

struct TrainOptions {
    std::string manifest;
    std::string representation;
    std::string out_model;
    std::optional<std::string> log_csv;  // default: <out_model>.log.csv
};

inline int cmd_train(const TrainOptions& opt, const PipelineConfig& cfg) {
    const auto rep = parse_representation(opt.representation);
    if (!rep) {
        log_message(LogLevel::Error, "train: unknown representation '" + opt.representation +
                                         "' (holistic-svm, seq-lstm, map-lstm)");
        return kExitUsage;
    }
    return detail::guarded("train", [&] {
        cfg.validate();
        const auto manifest = parse_manifest(opt.manifest);
        const auto entries = manifest.split(Split::Train);
        if (entries.empty()) throw DataError("manifest has no train entries");

        std::vector<std::string> failures;
        auto seqs = featurize_entries(entries, cfg.sample_rate, cfg.framing(), cfg.jobs, failures);
        if (!failures.empty()) {
            for (const auto& f : failures) log_message(LogLevel::Error, "train: " + f);
            return kExitFailure;
        }
        std::vector<std::pair<FeatureSequence, EmotionLabel>> data;
        for (std::size_t i = 0; i < entries.size(); ++i) data.emplace_back(std::move(seqs[i]), *entries[i].label);

        TrainingLog log;
        TrainedModel tm;
        try {
            tm = train_model(data, *rep, cfg, &log);
        } catch (const std::exception& e) {
            throw DataError(std::string(to_string(*rep)) + " training failed: " + e.what());
        }
        save_model(opt.out_model, tm);

        std::ostringstream log_out;
        log_out << "epoch,loss\n" << std::setprecision(17);
        for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) log_out << e << ',' << log.epoch_loss[e] << '\n';
        detail::write_text(opt.log_csv.value_or(opt.out_model + ".log.csv"), log_out.str());
        log_message(LogLevel::Info, "train: wrote " + opt.out_model);
        return kExitOk;
    });
}

struct ScoreOptions {
    std::string model;
    std::string manifest;
    std::string split = "validation";
    std::string out_csv;
    std::optional<std::string> model_id;  // default: model file stem
};

inline int cmd_score(const ScoreOptions& opt, const PipelineConfig& cfg) {
    const auto sp = parse_split(opt.split);
    if (!sp) {
        log_message(LogLevel::Error, "score: unknown split '" + opt.split + "'");
        return kExitUsage;
    }
    return detail::guarded("score", [&] {
        const auto tm = load_model(opt.model);
        const auto entries = parse_manifest(opt.manifest).split(*sp);
        const auto id = opt.model_id.value_or(std::filesystem::path(opt.model).stem().string());
        std::vector<std::string> failures;
        const auto set = score_clips(tm, entries, id, cfg.jobs, failures);
        for (const auto& f : failures) log_message(LogLevel::Error, "score: " + f);
        if (!failures.empty()) return kExitFailure;
        detail::write_text(opt.out_csv, serialize_scores(set));
        return kExitOk;
    });
}

struct FuseOptions {
    std::vector<std::string> score_files;  // "path" or "model_id=path"
    std::string manifest;                  // ground truth source
    std::string split = "validation";
    int grid = 20;
    std::optional<std::string> out_json;  // stdout when absent
    std::optional<std::string> log_csv;
    std::optional<std::string> preds_csv;
};

inline ExternalScoreSet load_score_arg(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq != std::string::npos && eq > 0)
        return parse_scores(arg.substr(eq + 1), arg.substr(0, eq));
    return parse_scores(arg, std::filesystem::path(arg).stem().string());
}

inline int cmd_fuse(const FuseOptions& opt, const PipelineConfig& cfg) {
    if (opt.score_files.empty()) {
        log_message(LogLevel::Error, "fuse: at least one score file is required");
        return kExitUsage;
    }
    if (opt.grid < 1) {
        log_message(LogLevel::Error, "fuse: grid must be >= 1");
        return kExitUsage;
    }
    const auto sp = parse_split(opt.split);
    if (!sp) {
        log_message(LogLevel::Error, "fuse: unknown split '" + opt.split + "'");
        return kExitUsage;
    }
    return detail::guarded("fuse", [&] {
        std::vector<ExternalScoreSet> sets;
        for (const auto& f : opt.score_files) sets.push_back(load_score_arg(f));
        const auto labels = parse_manifest(opt.manifest).labels(*sp);
        if (labels.empty()) throw DataError("no labeled clips in split " + opt.split);

        const auto result = grid_search(sets, labels, opt.grid, opt.log_csv.has_value(), cfg.jobs);
        const std::string json = to_json(result).dump(2) + "\n";
        if (opt.out_json) detail::write_text(*opt.out_json, json);
        else std::cout << json;
        if (opt.log_csv) detail::write_text(*opt.log_csv, fusion_log_csv(result));
        if (opt.preds_csv) {
            std::vector<std::string> ids;
            for (const auto& [id, _] : labels) ids.push_back(id);
            detail::write_text(*opt.preds_csv, predictions_csv(fuse(sets, result.best_weights, ids)));
        }
        return kExitOk;
    });
}

struct EvalOptions {
    std::string preds_csv;
    std::string manifest;
    std::string split = "validation";
    std::optional<std::string> out_prefix;  // <prefix>.metrics.json, .counts.csv, .percent.csv
};

inline int cmd_eval(const EvalOptions& opt) {
    const auto sp = parse_split(opt.split);
    if (!sp) {
        log_message(LogLevel::Error, "eval: unknown split '" + opt.split + "'");
        return kExitUsage;
    }
    return detail::guarded("eval", [&] {
        const auto preds = parse_predictions(opt.preds_csv);
        if (preds.empty()) throw DataError("prediction file " + opt.preds_csv + " is empty");
        const auto truth = parse_manifest(opt.manifest).labels(*sp);
        const auto cm = confusion(preds, truth);
        const auto summary = metrics(cm);
        const std::string json = to_json(summary).dump(2) + "\n";
        std::cout << json;
        if (opt.out_prefix) {
            detail::write_text(*opt.out_prefix + ".metrics.json", json);
            detail::write_text(*opt.out_prefix + ".counts.csv", confusion_counts_csv(cm));
            detail::write_text(*opt.out_prefix + ".percent.csv", confusion_percent_csv(cm));
        }
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthOptions {
    std::string out_dir;
    int train_per_class = 6;
    int validation_per_class = 3;
    int test_per_class = 2;
    std::uint64_t seed = 1;
};

/// Class c is a harmonic tone near 180 * 1.25^c Hz with a class-specific tremolo rate and
/// noise floor; per-clip pitch jitter makes neighboring classes overlap. Durations span
/// 0.8 to 2.6 s so both padding paths are exercised. Every third clip is written as
/// 22.05 kHz stereo to go through downmix and resampling.
inline DatasetManifest generate_synthetic_corpus(const SynthOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    const std::filesystem::path dir(opt.out_dir);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    DatasetManifest manifest;
    int counter = 0;
    const std::array<std::pair<Split, int>, 3> plan = {
        std::pair{Split::Train, opt.train_per_class}, std::pair{Split::Validation, opt.validation_per_class},
        std::pair{Split::Test, opt.test_per_class}};
    for (const auto& [split, per_class] : plan) {
        for (int k = 0; k < per_class; ++k) {
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                const bool odd_format = counter % 3 == 2;
                const int rate = odd_format ? 22050 : kCanonicalSampleRate;
                const int channels = odd_format ? 2 : 1;
                const double seconds = 0.8 + 1.8 * unit(rng);
                const double f0 = 180.0 * std::pow(1.25, static_cast<double>(c)) * (0.88 + 0.24 * unit(rng));
                const double tremolo = 2.0 + static_cast<double>(c);
                const double noise = 0.02 + 0.03 * static_cast<double>(c % 4) + 0.02 * unit(rng);
                const double phase = 2.0 * std::numbers::pi * unit(rng);
                const auto n = static_cast<std::size_t>(seconds * rate);
                std::vector<double> out;
                out.reserve(n * static_cast<std::size_t>(channels));
                for (std::size_t i = 0; i < n; ++i) {
                    const double t = static_cast<double>(i) / rate;
                    const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * tremolo * t + phase);
                    double s = 0.0;
                    for (int h = 1; h <= 3; ++h)
                        s += std::sin(2.0 * std::numbers::pi * f0 * h * t) / (h * (c % 2 ? 1.0 : h));
                    const double v = 0.3 * env * s + noise * gauss(rng);
                    for (int ch = 0; ch < channels; ++ch) out.push_back(v);
                }
                char name[32];
                std::snprintf(name, sizeof name, "clip%04d", counter);
                const std::string file = std::string(name) + ".wav";
                write_wav((dir / file).string(), out, channels, rate);
                ManifestEntry e;
                e.clip_id = name;
                e.split = split;
                if (split != Split::Test) e.label = label_from_index(c);
                e.audio_path = file;
                manifest.entries.push_back(std::move(e));
                ++counter;
            }
        }
    }
    detail::write_text((dir / "manifest.csv").string(), serialize_manifest(manifest));
    return manifest;
}

inline int cmd_synth(const SynthOptions& opt) {
    if (opt.train_per_class < 0 || opt.validation_per_class < 0 || opt.test_per_class < 0) {
        log_message(LogLevel::Error, "synth: clip counts must be nonnegative");
        return kExitUsage;
    }
    return detail::guarded("synth", [&] {
        const auto m = generate_synthetic_corpus(opt);
        log_message(LogLevel::Info, "synth: wrote " + std::to_string(m.entries.size()) + " clips to " + opt.out_dir);
        return kExitOk;
    });
}

}  // namespace affectfuse::cli
