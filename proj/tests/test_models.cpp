#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "affectfuse/models.hpp"
#include "affectfuse/pipeline.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace affectfuse;

namespace {

double svm_train_accuracy(const LinearSvmModel& m, const std::vector<LabeledVector>& data) {
    int hits = 0;
    for (const auto& s : data) hits += argmax_label(predict_svm(m, s.x)) == s.label;
    return hits / static_cast<double>(data.size());
}

double lstm_train_accuracy(const LstmModel& m, const std::vector<LabeledSequence>& data) {
    int hits = 0;
    for (const auto& s : data) hits += argmax_label(predict_lstm(m, s.steps)) == s.label;
    return hits / static_cast<double>(data.size());
}

LstmModel random_net(std::uint64_t seed, std::size_t in, std::size_t hidden) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    LstmModel m(in, hidden);
    for (auto* t : m.params.tensors())
        for (auto& v : *t) v = u(rng);
    return m;
}

}  // namespace

// --- scores ---------------------------------------------------------------

TEST(Scores, NormalizeAndArgmax) {
    const auto p = normalize_scores({1, 0, 0, 0, 0, 0, 0});
    EXPECT_EQ(p[0], 1.0);
    const auto q = normalize_scores({-1, 2, 0.5, 0, 0, 0, 0});
    EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12);
    EXPECT_EQ(argmax_label(q), EmotionLabel::DI);
    EXPECT_EQ(argmax_label({0.5, 0.5, 0, 0, 0, 0, 0}), EmotionLabel::AN);
    const auto z = normalize_scores({0, 0, 0, 0, 0, 0, 0});
    for (double v : z) EXPECT_NEAR(v, 1.0 / 7.0, 1e-15);
}

// --- SVM ------------------------------------------------------------------

TEST(Svm, SeparableBlobsFitPerfectly) {
    const auto data = fixture::separable_blobs();
    const auto m = train_svm(data);
    EXPECT_EQ(svm_train_accuracy(m, data), 1.0);
}

TEST(Svm, DeepPointLandsInItsClass) {
    const auto m = train_svm(fixture::separable_blobs());
    EXPECT_EQ(argmax_label(predict_svm(m, std::vector<double>{8.0, 0.0, 0.0, 0.0})), EmotionLabel::HA);
    EXPECT_EQ(argmax_label(predict_svm(m, std::vector<double>{4.0, 6.928, 0.0, 0.0})), EmotionLabel::SU);
}

TEST(Svm, ScoresAreADistribution) {
    const auto m = train_svm(fixture::separable_blobs());
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(3.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(4);
        for (auto& v : x) v = g(rng);
        const auto s = predict_svm(m, x);
        EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 1.0, 1e-9);
        for (double v : s) EXPECT_GE(v, 0.0);
    }
}

TEST(Svm, EqualDecisionValuesGiveUniformScores) {
    LinearSvmModel m;
    m.dim = 3;
    m.weights.assign(kNumClasses * 3, 0.0);
    m.biases.fill(0.25);
    m.standardization = Standardizer::identity(3);
    for (double v : predict_svm(m, std::vector<double>{1.0, -2.0, 3.0})) EXPECT_NEAR(v, 1.0 / 7.0, 1e-15);
}

TEST(Svm, ArgmaxInvariantToConstantShift) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        ScoreVector z;
        for (auto& v : z) v = g(rng);
        ScoreVector shifted = z;
        const double k = g(rng) * 10.0;
        for (auto& v : shifted) v += k;
        EXPECT_EQ(argmax_label(softmax(z)), argmax_label(softmax(shifted)));
    }
}

TEST(Svm, ConflictingDuplicateStillTrains) {
    auto data = fixture::separable_blobs();
    auto dup = data.front();
    dup.label = EmotionLabel::SU;
    data.push_back(dup);
    const auto m = train_svm(data);
    EXPECT_LT(svm_train_accuracy(m, data), 1.0);
}

TEST(Svm, ZeroVarianceGuard) {
    std::vector<LabeledVector> data;
    for (int i = 0; i < 10; ++i) data.push_back({{1.0, 2.0, 3.0}, i % 2 ? EmotionLabel::AN : EmotionLabel::NE});
    const auto m = train_svm(data);
    for (double s : m.standardization.std) EXPECT_EQ(s, 1.0);
    for (double w : m.weights) EXPECT_TRUE(std::isfinite(w));
    for (double b : m.biases) EXPECT_TRUE(std::isfinite(b));
}

TEST(Svm, Errors) {
    std::vector<LabeledVector> one_class = {{{1.0}, EmotionLabel::AN}, {{2.0}, EmotionLabel::AN}};
    EXPECT_THROW(train_svm(one_class), DataError);
    std::vector<LabeledVector> ragged = {{{1.0}, EmotionLabel::AN}, {{2.0, 1.0}, EmotionLabel::HA}};
    EXPECT_THROW(train_svm(ragged), DataError);
    const auto m = train_svm(fixture::separable_blobs());
    EXPECT_THROW(predict_svm(m, std::vector<double>{1.0}), DataError);
}

TEST(Svm, ObjectiveNonIncreasingAcrossEpochs) {
    TrainingLog log;
    SvmHyperParams hp;
    hp.epochs = 60;
    auto data = fixture::separable_blobs(9);
    auto dup = data[3];
    dup.label = EmotionLabel::AN;
    data.push_back(dup);  // non-separable, so the hinge term stays active
    train_svm(data, hp, &log);
    ASSERT_EQ(log.epoch_loss.size(), 60u);
    for (std::size_t e = 1; e < log.epoch_loss.size(); ++e) EXPECT_LE(log.epoch_loss[e], log.epoch_loss[e - 1] + 1e-8);
}

TEST(Svm, SeedDeterminism) {
    const auto data = fixture::separable_blobs();
    const auto a = train_svm(data);
    const auto b = train_svm(data);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.biases, b.biases);
}

// --- LSTM -----------------------------------------------------------------

TEST(Lstm, ZeroParametersGiveUniformScores) {
    const LstmModel m(5, 6);
    std::vector<std::vector<double>> xs(4, std::vector<double>{1, -2, 3, 0.5, 7});
    const auto [p, cache] = lstm_forward(m, xs);
    for (double v : p) EXPECT_NEAR(v, 1.0 / 7.0, 1e-15);
    for (const auto& s : cache.steps)
        for (double h : s.h) EXPECT_EQ(h, 0.0);
}

TEST(Lstm, SaturatedGatesFreezeStateAfterFirstStep) {
    // Step 1 (h0 = 0): input gate open, forget gate saturated to retain, output open.
    // Step 2: strongly negative recurrent weights on the input gate shut it because h1 > 0,
    // so the cell keeps c1 and the final hidden state equals the single-step one.
    constexpr std::size_t I = 2, H = 3;
    LstmModel m(I, H);
    auto& p = m.params;
    for (std::size_t k = 0; k < H; ++k) {
        p.b_gates[k] = 20.0;          // input
        p.b_gates[H + k] = 20.0;      // forget (retain)
        p.b_gates[2 * H + k] = 20.0;  // output
        for (std::size_t d = 0; d < I; ++d) p.w_input[(3 * H + k) * I + d] = 0.5 + 0.1 * static_cast<double>(k);
        for (std::size_t d = 0; d < H; ++d) p.w_recurrent[k * H + d] = -1000.0;
    }
    const std::vector<double> x = {0.7, 0.4};
    const auto one = lstm_forward(m, std::vector<std::vector<double>>{x}).second;
    const auto two = lstm_forward(m, std::vector<std::vector<double>>{x, x}).second;
    for (std::size_t k = 0; k < H; ++k) {
        ASSERT_GT(one.steps[0].h[k], 0.1);
        EXPECT_NEAR(two.steps[1].h[k], one.steps[0].h[k], 1e-7);
    }
}

TEST(Lstm, ForwardMatchesIndependentRecurrence) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto m = random_net(seed, 3, 4);
        m.standardization.mean = {0.1, -0.2, 0.3};
        m.standardization.std = {1.5, 0.5, 2.0};
        std::vector<std::vector<double>> xs(5, std::vector<double>(3));
        for (auto& x : xs)
            for (auto& v : x) v = u(rng);
        const auto got = lstm_forward(m, xs).first;
        const auto want = oracle::lstm_probs(m, xs);
        for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_NEAR(got[c], want[c], 1e-10);
    }
}

TEST(Lstm, AppendingStepLeavesEarlierActivations) {
    const auto m = random_net(3, 3, 5);
    std::vector<std::vector<double>> xs = {{0.1, 0.2, 0.3}, {-1, 0, 1}, {0.5, 0.5, -0.5}};
    const auto short_cache = lstm_forward(m, xs).second;
    xs.push_back({2, -2, 0});
    const auto long_cache = lstm_forward(m, xs).second;
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_EQ(short_cache.steps[t].h, long_cache.steps[t].h);
        EXPECT_EQ(short_cache.steps[t].c, long_cache.steps[t].c);
    }
}

TEST(Lstm, GradientCheckEveryTensor) {
    for (const auto& r : gradcheck::run()) {
        EXPECT_LT(r.max_rel_error, 1e-4) << LstmParams::kTensorNames[r.tensor];
        EXPECT_GT(r.entries, 0u);
    }
}

TEST(Lstm, LearnsRampFixture) {
    const auto data = fixture::ramp_sequences();
    TrainingLog log;
    const auto m = lstm_train(LstmModel::random(3, 16, 11), data, fixture::ramp_hyper(), &log);
    EXPECT_EQ(lstm_train_accuracy(m, data), 1.0);
    EXPECT_LT(log.epoch_loss.back(), log.epoch_loss.front());
}

TEST(Lstm, ZeroLearningRateLeavesParameters) {
    const auto data = fixture::ramp_sequences();
    auto hp = fixture::ramp_hyper();
    hp.learning_rate = 0.0;
    hp.epochs = 3;
    const auto init = LstmModel::random(3, 8, 1);
    const auto out = lstm_train(init, data, hp);
    EXPECT_EQ(out.params.w_input, init.params.w_input);
    EXPECT_EQ(out.params.w_recurrent, init.params.w_recurrent);
    EXPECT_EQ(out.params.b_gates, init.params.b_gates);
    EXPECT_EQ(out.params.w_readout, init.params.w_readout);
    EXPECT_EQ(out.params.b_readout, init.params.b_readout);
}

TEST(Lstm, SeedDeterminism) {
    const auto data = fixture::ramp_sequences();
    auto hp = fixture::ramp_hyper();
    hp.epochs = 5;
    const auto a = lstm_train(LstmModel::random(3, 8, 1), data, hp);
    const auto b = lstm_train(LstmModel::random(3, 8, 1), data, hp);
    EXPECT_EQ(a.params.w_input, b.params.w_input);
    EXPECT_EQ(a.params.w_readout, b.params.w_readout);
}

TEST(Lstm, Errors) {
    const LstmModel m(3, 2);
    EXPECT_THROW(lstm_forward(m, std::vector<std::vector<double>>{}), DataError);
    EXPECT_THROW(lstm_forward(m, std::vector<std::vector<double>>{{1.0, 2.0}}), DataError);
    EXPECT_THROW(lstm_forward(m, std::vector<std::vector<double>>{{1.0, std::nan(""), 2.0}}), DataError);
    EXPECT_THROW(lstm_train(m, {}, {}), DataError);
}

TEST(Lstm, DivergenceReportsEpoch) {
    const auto data = fixture::ramp_sequences(1, 6, 4);
    auto hp = fixture::ramp_hyper();
    hp.learning_rate = std::numeric_limits<double>::max();  // first Adam step overflows the weights
    hp.epochs = 3;
    try {
        lstm_train(LstmModel::random(3, 4, 1), data, hp);
        FAIL() << "expected divergence";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

// --- tiles and model files ------------------------------------------------

TEST(FlattenTiles, RowMajorAndOrdered) {
    MapSequence s;
    ImageMap t(34, 34);
    t(0, 0) = 5.0;
    s.tiles.assign(8, t);
    s.tiles[1](2, 3) = 9.0;
    const auto flat = flatten_tiles(s);
    ASSERT_EQ(flat.size(), 8u);
    ASSERT_EQ(flat[0].size(), 1156u);
    EXPECT_EQ(flat[0][0], 5.0);
    EXPECT_EQ(std::accumulate(flat[0].begin(), flat[0].end(), 0.0), 5.0);
    EXPECT_EQ(flat[1][2 * 34 + 3], 9.0);
    for (std::size_t i = 2; i < 8; ++i) EXPECT_EQ(flat[i], flat[0]);
}

TEST(ModelFile, RoundTripBothKinds) {
    TrainedModel svm;
    svm.representation = Representation::HolisticSvm;
    svm.functionals = {Functional::Mean, Functional::Kurtosis};
    svm.model = train_svm(fixture::separable_blobs());
    const auto svm_back = deserialize_model(serialize_model(svm));
    const auto& a = std::get<LinearSvmModel>(svm.model);
    const auto& b = std::get<LinearSvmModel>(svm_back.model);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.biases, b.biases);
    EXPECT_EQ(a.standardization.std, b.standardization.std);
    EXPECT_EQ(svm_back.functionals, svm.functionals);

    TrainedModel lstm;
    lstm.representation = Representation::MapLstm;
    lstm.min_tiles = 8;
    lstm.model = random_net(4, 6, 5);
    const auto bytes = serialize_model(lstm);
    EXPECT_EQ(bytes.substr(0, 5), "AFMD1");
    const auto back = deserialize_model(bytes);
    EXPECT_EQ(back.representation, Representation::MapLstm);
    EXPECT_EQ(std::get<LstmModel>(back.model).params.w_recurrent, std::get<LstmModel>(lstm.model).params.w_recurrent);
    EXPECT_EQ(serialize_model(back), bytes);

    EXPECT_THROW(deserialize_model("AFMD2xxxx"), DataError);
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), DataError);
}

TEST(Config, KeyValueAndValidation) {
    PipelineConfig cfg;
    std::istringstream in("# comment\nseq.hidden = 8\nmap.lr=0.01\nfunctionals=mean,std\ngrid=5\n");
    cfg.load(in);
    EXPECT_EQ(cfg.seq_hidden, 8u);
    EXPECT_DOUBLE_EQ(cfg.map_lstm.learning_rate, 0.01);
    EXPECT_EQ(cfg.functionals.size(), 2u);
    EXPECT_EQ(cfg.fusion_grid, 5);
    EXPECT_THROW(cfg.set("bogus", "1"), std::invalid_argument);
    EXPECT_THROW(cfg.set("window_ms", "abc"), std::invalid_argument);
    cfg.step_ms = 200;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    const PipelineConfig defaults;
    EXPECT_EQ(defaults.window_ms, 100);
    EXPECT_EQ(defaults.step_ms, 50);
    EXPECT_EQ(defaults.min_seq_len, 16u);
    EXPECT_EQ(defaults.tile_side, 34u);
    EXPECT_EQ(defaults.tile_stride, 17u);
    EXPECT_EQ(defaults.min_tiles, 8u);
    EXPECT_EQ(defaults.seq_hidden, 512u);
    EXPECT_EQ(defaults.map_hidden, 128u);
    EXPECT_EQ(defaults.map_lstm.lr_decay_every, 3000u);
    EXPECT_EQ(defaults.map_lstm.max_iterations, 10000u);
    EXPECT_DOUBLE_EQ(defaults.map_lstm.weight_decay, 0.002);
    EXPECT_EQ(defaults.map_lstm.batch_size, 16u);
}
