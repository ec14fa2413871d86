#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "affectfuse/eval.hpp"
#include "reference_tables.hpp"

using namespace affectfuse;

namespace {

std::map<std::string, EmotionLabel> labels_of(const std::vector<EmotionLabel>& ls) {
    std::map<std::string, EmotionLabel> out;
    for (std::size_t i = 0; i < ls.size(); ++i) out["c" + std::to_string(i)] = ls[i];
    return out;
}

ConfusionMatrix random_matrix(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<std::size_t> cls(0, kNumClasses - 1);
    ConfusionMatrix cm;
    for (int i = 0; i < n; ++i) cm.add(label_from_index(cls(rng)), label_from_index(cls(rng)));
    return cm;
}

}  // namespace

TEST(Confusion, PerfectPredictionsAreDiagonal) {
    std::vector<EmotionLabel> ls;
    for (std::size_t c = 0; c < kNumClasses; ++c)
        for (int k = 0; k < 3; ++k) ls.push_back(label_from_index(c));
    const auto truth = labels_of(ls);
    const auto cm = confusion(truth, truth);
    for (std::size_t i = 0; i < kNumClasses; ++i)
        for (std::size_t j = 0; j < kNumClasses; ++j) EXPECT_EQ(cm.counts[i][j], i == j ? 3u : 0u);
    const auto m = metrics(cm);
    EXPECT_EQ(m.overall_accuracy, 1.0);
    EXPECT_EQ(m.unweighted_average, 1.0);
}

TEST(Confusion, AlwaysAngryFillsFirstColumn) {
    std::vector<EmotionLabel> ls;
    for (std::size_t c = 0; c < kNumClasses; ++c)
        for (std::size_t k = 0; k <= c; ++k) ls.push_back(label_from_index(c));
    const auto truth = labels_of(ls);
    std::map<std::string, EmotionLabel> preds;
    for (const auto& [id, _] : truth) preds[id] = EmotionLabel::AN;
    const auto cm = confusion(preds, truth);
    for (std::size_t i = 0; i < kNumClasses; ++i) EXPECT_EQ(cm.counts[i][0], i + 1);
    const auto m = metrics(cm);
    EXPECT_DOUBLE_EQ(m.overall_accuracy, 1.0 / 28.0);
    EXPECT_DOUBLE_EQ(m.unweighted_average, 1.0 / 7.0);
}

TEST(Confusion, ErrorsNameClips) {
    EXPECT_THROW(confusion({}, {}), DataError);
    try {
        confusion({{"a", EmotionLabel::AN}}, {{"a", EmotionLabel::AN}, {"zz_missing", EmotionLabel::HA}});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("zz_missing"), std::string::npos);
    }
}

TEST(Metrics, SingleClip) {
    const auto cm = confusion({{"x", EmotionLabel::SA}}, {{"x", EmotionLabel::SA}});
    const auto m = metrics(cm);
    EXPECT_EQ(m.overall_accuracy, 1.0);
    EXPECT_EQ(m.unweighted_average, 1.0);  // absent classes are excluded from the mean
}

TEST(Metrics, PublishedTablesMatchCaptions) {
    for (const auto& t : reftab::tables()) {
        const auto cm = counts_from_percentages(t.pct, reftab::kValidationTotals);
        EXPECT_EQ(cm.class_totals(), reftab::kValidationTotals) << t.name;
        const auto m = metrics(cm);
        EXPECT_NEAR(100.0 * m.overall_accuracy, t.overall, 0.02) << t.name;
        EXPECT_NEAR(100.0 * m.unweighted_average, t.unweighted, 0.02) << t.name;
        EXPECT_EQ(percentages(cm), t.pct) << t.name;
    }
}

TEST(Percentages, RenderingMatchesPublishedConvention) {
    ConfusionMatrix cm;
    cm.counts[0][0] = 34;
    cm.counts[0][1] = 30;
    cm.counts[1][1] = 1;
    cm.counts[1][2] = 6;
    const auto pct = percentages(cm);
    EXPECT_EQ(format_percent(100.0 * 34 / 64), "53.12");
    EXPECT_DOUBLE_EQ(pct[0][0], 53.12);
    EXPECT_DOUBLE_EQ(pct[1][1], 14.29);
    for (std::size_t j = 0; j < kNumClasses; ++j) EXPECT_EQ(pct[4][j], 0.0);
    EXPECT_NE(confusion_percent_csv(cm).find("AN,53.12,46.88,"), std::string::npos);
}

TEST(Percentages, RowsSumToHundred) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cm = random_matrix(rng, 1 + trial * 7);
        const auto pct = percentages(cm);
        const auto totals = cm.class_totals();
        for (std::size_t i = 0; i < kNumClasses; ++i) {
            if (totals[i] == 0) continue;
            double s = 0.0;
            for (double v : pct[i]) s += v;
            EXPECT_NEAR(s, 100.0, 0.05);
        }
    }
}

TEST(Confusion, MergeAddsAndPermutationInvariant) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> cls(0, kNumClasses - 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<EmotionLabel, EmotionLabel>> pairs(40);
        for (auto& p : pairs) p = {label_from_index(cls(rng)), label_from_index(cls(rng))};
        auto build = [](const std::vector<std::pair<EmotionLabel, EmotionLabel>>& ps, std::size_t from,
                        std::size_t to) {
            std::map<std::string, EmotionLabel> truth, preds;
            for (std::size_t i = from; i < to; ++i) {
                truth["k" + std::to_string(i)] = ps[i].first;
                preds["k" + std::to_string(i)] = ps[i].second;
            }
            return confusion(preds, truth);
        };
        const auto whole = build(pairs, 0, 40);
        EXPECT_EQ(merge(build(pairs, 0, 17), build(pairs, 17, 40)), whole);
        ConfusionMatrix shuffled;
        auto copy = pairs;
        std::shuffle(copy.begin(), copy.end(), rng);
        for (const auto& [t, p] : copy) shuffled.add(t, p);
        EXPECT_EQ(shuffled, whole);
    }
}

TEST(Csv, CountsLayout) {
    ConfusionMatrix cm;
    cm.add(EmotionLabel::HA, EmotionLabel::NE);
    const auto s = confusion_counts_csv(cm);
    EXPECT_EQ(s.substr(0, s.find('\n')), "truth,AN,DI,FE,HA,NE,SA,SU,total");
    EXPECT_NE(s.find("HA,0,0,0,0,1,0,0,1"), std::string::npos);
}
