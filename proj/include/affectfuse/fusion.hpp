#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/ingest.hpp"
#include "affectfuse/models.hpp"

namespace affectfuse {

struct FusionWeights {
    std::map<std::string, double> weights;
    int grid_resolution = 20;
};

struct FusionLogEntry {
    std::vector<double> weights;  // aligned with FusionResult::model_ids
    double accuracy = 0.0;
};

struct FusionResult {
    FusionWeights best_weights;
    double validation_accuracy = 0.0;
    std::size_t evaluated_points = 0;
    std::vector<std::string> model_ids;  // sorted; the enumeration order of weight tuples
    std::vector<FusionLogEntry> per_point_log;
};

/// Integer compositions of G into k nonnegative parts, lexicographically ascending.
inline std::vector<std::vector<int>> enumerate_compositions(int k, int G) {
    if (k < 1 || G < 1) throw std::invalid_argument("enumerate_simplex: need k >= 1 and G >= 1");
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(k), 0);
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == k - 1) {
            cur[static_cast<std::size_t>(pos)] = remaining;
            out.push_back(cur);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            cur[static_cast<std::size_t>(pos)] = v;
            self(self, pos + 1, remaining - v);
        }
    };
    rec(rec, 0, G);
    return out;
}

/// Every point of the simplex lattice with spacing 1/G; C(G+k-1, k-1) tuples.
inline std::vector<std::vector<double>> enumerate_simplex(int k, int G) {
    std::vector<std::vector<double>> out;
    for (const auto& c : enumerate_compositions(k, G)) {
        std::vector<double> w(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) w[i] = static_cast<double>(c[i]) / G;
        out.push_back(std::move(w));
    }
    return out;
}

namespace detail {

/// Normalized scores per model (sorted by model_id), per clip (in `clip_ids` order).
struct FusionTable {
    std::vector<std::string> model_ids;
    std::vector<std::vector<ScoreVector>> scores;  // [model][clip]
};

inline FusionTable build_fusion_table(const std::vector<ExternalScoreSet>& sets,
                                      const std::vector<std::string>& clip_ids) {
    if (sets.empty()) throw DataError("fusion: no score sets");
    std::vector<const ExternalScoreSet*> sorted;
    for (const auto& s : sets) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->model_id < b->model_id; });
    FusionTable t;
    for (std::size_t m = 0; m < sorted.size(); ++m) {
        if (m > 0 && sorted[m]->model_id == sorted[m - 1]->model_id)
            throw DataError("fusion: duplicate model_id '" + sorted[m]->model_id + "'");
        std::vector<std::string> missing;
        std::vector<ScoreVector> rows;
        rows.reserve(clip_ids.size());
        for (const auto& id : clip_ids) {
            auto it = sorted[m]->scores.find(id);
            if (it == sorted[m]->scores.end()) {
                missing.push_back(id);
                continue;
            }
            rows.push_back(normalize_scores(it->second));
        }
        if (!missing.empty()) {
            std::string msg = "fusion: model '" + sorted[m]->model_id + "' has no scores for";
            for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
            if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
            throw DataError(msg);
        }
        t.model_ids.push_back(sorted[m]->model_id);
        t.scores.push_back(std::move(rows));
    }
    return t;
}

inline EmotionLabel fuse_one(const FusionTable& t, std::size_t clip, const std::vector<double>& w) {
    ScoreVector acc{};
    for (std::size_t m = 0; m < t.model_ids.size(); ++m) {
        if (w[m] == 0.0) continue;
        for (std::size_t c = 0; c < kNumClasses; ++c) acc[c] += w[m] * t.scores[m][clip][c];
    }
    return argmax_label(acc);
}

}  // namespace detail

/// Weighted sum of normalized score vectors; argmax with ties to the lowest class index.
inline std::map<std::string, EmotionLabel> fuse(const std::vector<ExternalScoreSet>& sets,
                                                const FusionWeights& weights,
                                                const std::vector<std::string>& clip_ids) {
    const auto table = detail::build_fusion_table(sets, clip_ids);
    std::set<std::string> models(table.model_ids.begin(), table.model_ids.end());
    std::set<std::string> weighted;
    for (const auto& [id, _] : weights.weights) weighted.insert(id);
    if (models != weighted) throw DataError("fuse: weights do not cover exactly the given models");
    std::vector<double> w;
    for (const auto& id : table.model_ids) w.push_back(weights.weights.at(id));
    std::map<std::string, EmotionLabel> out;
    for (std::size_t i = 0; i < clip_ids.size(); ++i) out[clip_ids[i]] = detail::fuse_one(table, i, w);
    return out;
}

/// Exhaustive search over the weight lattice for the highest validation accuracy. Points
/// are visited in lexicographic order of weight tuples (models sorted by id); the first
/// maximizer wins. With jobs > 1 the points are evaluated concurrently and reduced in
/// enumeration order.
inline FusionResult grid_search(const std::vector<ExternalScoreSet>& sets,
                                const std::map<std::string, EmotionLabel>& labels, int G = 20,
                                bool keep_log = false, unsigned jobs = 1) {
    if (labels.empty()) throw DataError("grid_search: no labeled clips");
    std::vector<std::string> clip_ids;
    std::vector<EmotionLabel> truth;
    for (const auto& [id, l] : labels) {
        clip_ids.push_back(id);
        truth.push_back(l);
    }
    const auto table = detail::build_fusion_table(sets, clip_ids);
    const auto compositions = enumerate_compositions(static_cast<int>(table.model_ids.size()), G);

    std::vector<std::uint64_t> correct(compositions.size(), 0);
    auto evaluate = [&](std::size_t p) {
        std::vector<double> w(compositions[p].size());
        for (std::size_t m = 0; m < w.size(); ++m) w[m] = static_cast<double>(compositions[p][m]) / G;
        std::uint64_t hits = 0;
        for (std::size_t i = 0; i < clip_ids.size(); ++i)
            if (detail::fuse_one(table, i, w) == truth[i]) ++hits;
        correct[p] = hits;
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(compositions.size())));
    if (jobs == 1) {
        for (std::size_t p = 0; p < compositions.size(); ++p) evaluate(p);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t p; (p = next.fetch_add(1)) < compositions.size();) evaluate(p);
            });
    }

    std::size_t best = 0;
    for (std::size_t p = 1; p < compositions.size(); ++p)
        if (correct[p] > correct[best]) best = p;

    const double n = static_cast<double>(clip_ids.size());
    FusionResult r;
    r.model_ids = table.model_ids;
    r.evaluated_points = compositions.size();
    r.validation_accuracy = static_cast<double>(correct[best]) / n;
    r.best_weights.grid_resolution = G;
    for (std::size_t m = 0; m < table.model_ids.size(); ++m)
        r.best_weights.weights[table.model_ids[m]] = static_cast<double>(compositions[best][m]) / G;
    if (keep_log) {
        r.per_point_log.reserve(compositions.size());
        for (std::size_t p = 0; p < compositions.size(); ++p) {
            FusionLogEntry e;
            for (int v : compositions[p]) e.weights.push_back(static_cast<double>(v) / G);
            e.accuracy = static_cast<double>(correct[p]) / n;
            r.per_point_log.push_back(std::move(e));
        }
    }
    return r;
}

}  // namespace affectfuse
