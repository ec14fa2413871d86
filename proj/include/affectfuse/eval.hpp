#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "affectfuse/core.hpp"

namespace affectfuse {

/// Rows are true classes, columns predicted classes, both in AN..SU order.
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

    std::array<std::uint64_t, kNumClasses> class_totals() const {
        std::array<std::uint64_t, kNumClasses> t{};
        for (std::size_t i = 0; i < kNumClasses; ++i)
            for (auto v : counts[i]) t[i] += v;
        return t;
    }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto t : class_totals()) s += t;
        return s;
    }
    std::uint64_t correct() const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < kNumClasses; ++i) s += counts[i][i];
        return s;
    }
    void add(EmotionLabel truth, EmotionLabel pred) { ++counts[to_index(truth)][to_index(pred)]; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    ConfusionMatrix out = a;
    for (std::size_t i = 0; i < kNumClasses; ++i)
        for (std::size_t j = 0; j < kNumClasses; ++j) out.counts[i][j] += b.counts[i][j];
    return out;
}

inline ConfusionMatrix confusion(const std::map<std::string, EmotionLabel>& preds,
                                 const std::map<std::string, EmotionLabel>& truth) {
    if (preds.empty() && truth.empty()) throw DataError("confusion: no clips to evaluate");
    std::vector<std::string> missing_pred, missing_truth;
    for (const auto& [id, _] : truth)
        if (!preds.contains(id)) missing_pred.push_back(id);
    for (const auto& [id, _] : preds)
        if (!truth.contains(id)) missing_truth.push_back(id);
    if (!missing_pred.empty() || !missing_truth.empty()) {
        std::string msg = "confusion: clip sets differ;";
        auto list = [&msg](const char* what, const std::vector<std::string>& ids) {
            if (ids.empty()) return;
            msg += std::string(" ") + what + ":";
            for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg += " " + ids[i];
            if (ids.size() > 20) msg += " ... (" + std::to_string(ids.size()) + " total)";
        };
        list("no prediction for", missing_pred);
        list("no ground truth for", missing_truth);
        throw DataError(msg);
    }
    ConfusionMatrix cm;
    for (const auto& [id, t] : truth) cm.add(t, preds.at(id));
    return cm;
}

struct MetricsSummary {
    double overall_accuracy = 0.0;
    double unweighted_average = 0.0;  // mean recall over classes present in the truth
    std::array<double, kNumClasses> per_class_recall{};
};

inline double overall_accuracy(const ConfusionMatrix& cm) {
    const auto n = cm.total();
    if (n == 0) throw DataError("metrics: empty confusion matrix");
    return static_cast<double>(cm.correct()) / static_cast<double>(n);
}

inline MetricsSummary metrics(const ConfusionMatrix& cm) {
    MetricsSummary m;
    m.overall_accuracy = overall_accuracy(cm);
    const auto totals = cm.class_totals();
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        if (totals[i] == 0) continue;
        m.per_class_recall[i] = static_cast<double>(cm.counts[i][i]) / static_cast<double>(totals[i]);
        sum += m.per_class_recall[i];
        ++present;
    }
    m.unweighted_average = sum / static_cast<double>(present);
    return m;
}

/// Two-decimal rendering as printf does it: the exact binary value, ties to even.
/// 34/64 = 53.125 renders as 53.12.
inline std::string format_percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

using PercentTable = std::array<std::array<double, kNumClasses>, kNumClasses>;

/// Row-normalized percentages at 2-decimal precision; empty rows stay 0.
inline PercentTable percentages(const ConfusionMatrix& cm) {
    PercentTable out{};
    const auto totals = cm.class_totals();
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        if (totals[i] == 0) continue;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            const double pct = 100.0 * static_cast<double>(cm.counts[i][j]) / static_cast<double>(totals[i]);
            out[i][j] = std::strtod(format_percent(pct).c_str(), nullptr);
        }
    }
    return out;
}

/// Inverse of the table rendering: counts[i][j] = round(pct[i][j] / 100 * totals[i]).
inline ConfusionMatrix counts_from_percentages(const PercentTable& pct,
                                               const std::array<std::uint64_t, kNumClasses>& totals) {
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < kNumClasses; ++i)
        for (std::size_t j = 0; j < kNumClasses; ++j)
            cm.counts[i][j] = static_cast<std::uint64_t>(
                std::llround(pct[i][j] / 100.0 * static_cast<double>(totals[i])));
    return cm;
}

inline std::string confusion_counts_csv(const ConfusionMatrix& cm) {
    std::ostringstream out;
    out << "truth";
    for (auto c : kLabelCodes) out << ',' << c;
    out << ",total\n";
    const auto totals = cm.class_totals();
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        out << kLabelCodes[i];
        for (auto v : cm.counts[i]) out << ',' << v;
        out << ',' << totals[i] << '\n';
    }
    return out.str();
}

inline std::string confusion_percent_csv(const ConfusionMatrix& cm) {
    const auto pct = percentages(cm);
    std::ostringstream out;
    out << "truth";
    for (auto c : kLabelCodes) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        out << kLabelCodes[i];
        for (double v : pct[i]) out << ',' << format_percent(v);
        out << '\n';
    }
    return out.str();
}

}  // namespace affectfuse
