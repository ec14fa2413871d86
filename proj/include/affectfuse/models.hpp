#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "affectfuse/core.hpp"
#include "affectfuse/ingest.hpp"

namespace affectfuse {

// ---------------------------------------------------------------------------
// Score helpers

inline ScoreVector softmax(const ScoreVector& z) {
    const double hi = *std::max_element(z.begin(), z.end());
    ScoreVector p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) sum += p[c] = std::exp(z[c] - hi);
    for (auto& v : p) v /= sum;
    return p;
}

/// Nonnegative vectors with a positive sum are divided by their sum; anything else
/// (negative entries, all zeros) goes through a softmax. Both maps preserve the argmax.
inline ScoreVector normalize_scores(const ScoreVector& raw) {
    for (double v : raw)
        if (!std::isfinite(v)) throw DataError("non-finite score");
    const bool nonneg = std::all_of(raw.begin(), raw.end(), [](double v) { return v >= 0.0; });
    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    if (nonneg && sum > 0.0) {
        ScoreVector p{};
        for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = raw[c] / sum;
        return p;
    }
    return softmax(raw);
}

/// Ties resolve to the lowest class index.
inline EmotionLabel argmax_label(const ScoreVector& s) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c)
        if (s[c] > s[best]) best = c;
    return label_from_index(best);
}

// ---------------------------------------------------------------------------
// Input standardization

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;  // zero-variance dimensions get 1

    static Standardizer identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

    /// Population statistics over all rows.
    static Standardizer fit(std::span<const std::vector<double>> rows, std::size_t dim) {
        Standardizer s = identity(dim);
        if (rows.empty()) return s;
        const double n = static_cast<double>(rows.size());
        for (const auto& r : rows)
            for (std::size_t d = 0; d < dim; ++d) s.mean[d] += r[d];
        for (auto& m : s.mean) m /= n;
        std::vector<double> var(dim, 0.0);
        for (const auto& r : rows)
            for (std::size_t d = 0; d < dim; ++d) var[d] += (r[d] - s.mean[d]) * (r[d] - s.mean[d]);
        for (std::size_t d = 0; d < dim; ++d) {
            const double sd = std::sqrt(var[d] / n);
            s.std[d] = (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
        }
        return s;
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> out(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) out[d] = (x[d] - mean[d]) / std[d];
        return out;
    }
};

// ---------------------------------------------------------------------------
// One-vs-rest linear SVM

struct SvmHyperParams {
    double lambda = 1e-3;
    int epochs = 100;
    std::uint64_t seed = 1;
};

struct LinearSvmModel {
    std::size_t dim = 0;
    std::vector<double> weights;  // kNumClasses x dim, row-major
    std::array<double, kNumClasses> biases{};
    Standardizer standardization;
    SvmHyperParams hyper;

    std::span<const double> row(std::size_t c) const { return {weights.data() + c * dim, dim}; }
};

struct LabeledVector {
    std::vector<double> x;
    EmotionLabel label;
};

struct TrainingLog {
    std::vector<double> epoch_loss;  // one entry per completed epoch
};

namespace detail {

/// lambda/2 |w|^2 + mean hinge, with the bias folded in as a regularized weight on a
/// constant input of 1.
inline double svm_binary_objective(std::span<const double> w, double b,
                                   const std::vector<std::vector<double>>& xs,
                                   const std::vector<int>& ys, double lambda) {
    double reg = b * b;
    for (double v : w) reg += v * v;
    double hinge = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double m = b;
        for (std::size_t d = 0; d < w.size(); ++d) m += w[d] * xs[i][d];
        hinge += std::max(0.0, 1.0 - ys[i] * m);
    }
    return 0.5 * lambda * reg + hinge / static_cast<double>(xs.size());
}

}  // namespace detail

/// Pegasos-schedule stochastic subgradient descent (step 1 / (lambda t)) on standardized
/// inputs, one binary problem per class. After each epoch the per-class iterate is kept
/// only if it lowers that class's full objective, so the logged objective never increases.
inline LinearSvmModel train_svm(const std::vector<LabeledVector>& train, const SvmHyperParams& hp = {},
                                TrainingLog* log = nullptr) {
    if (train.empty()) throw DataError("train_svm: empty training set");
    if (hp.lambda <= 0.0) throw std::invalid_argument("train_svm: lambda must be positive");
    const std::size_t dim = train.front().x.size();
    std::array<bool, kNumClasses> present{};
    std::vector<std::vector<double>> raw;
    raw.reserve(train.size());
    for (const auto& s : train) {
        if (s.x.size() != dim) throw DataError("train_svm: dimension mismatch in training vectors");
        for (double v : s.x)
            if (!std::isfinite(v)) throw DataError("train_svm: non-finite feature value");
        present[to_index(s.label)] = true;
        raw.push_back(s.x);
    }
    if (std::count(present.begin(), present.end(), true) < 2)
        throw DataError("train_svm: training set needs at least two distinct labels");

    LinearSvmModel model;
    model.dim = dim;
    model.hyper = hp;
    model.standardization = Standardizer::fit(raw, dim);
    model.weights.assign(kNumClasses * dim, 0.0);

    std::vector<std::vector<double>> xs;
    xs.reserve(raw.size());
    for (const auto& r : raw) xs.push_back(model.standardization.apply(r));

    std::mt19937_64 rng(hp.seed);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double radius = 1.0 / std::sqrt(hp.lambda);

    std::array<std::vector<int>, kNumClasses> ys;
    std::array<std::vector<double>, kNumClasses> w_cur, w_best;
    std::array<double, kNumClasses> b_cur{}, b_best{}, obj_best{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        ys[c].resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) ys[c][i] = to_index(train[i].label) == c ? 1 : -1;
        w_cur[c].assign(dim, 0.0);
        w_best[c] = w_cur[c];
        obj_best[c] = detail::svm_binary_objective(w_best[c], 0.0, xs, ys[c], hp.lambda);
    }

    std::uint64_t t = 0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (hp.lambda * static_cast<double>(t));
            const auto& x = xs[i];
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                auto& w = w_cur[c];
                double m = b_cur[c];
                for (std::size_t d = 0; d < dim; ++d) m += w[d] * x[d];
                const double y = ys[c][i];
                const double shrink = 1.0 - eta * hp.lambda;
                for (auto& v : w) v *= shrink;
                b_cur[c] *= shrink;
                if (y * m < 1.0) {
                    for (std::size_t d = 0; d < dim; ++d) w[d] += eta * y * x[d];
                    b_cur[c] += eta * y;
                }
                double norm2 = b_cur[c] * b_cur[c];
                for (double v : w) norm2 += v * v;
                if (norm2 > radius * radius) {
                    const double s = radius / std::sqrt(norm2);
                    for (auto& v : w) v *= s;
                    b_cur[c] *= s;
                }
            }
        }
        double total = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            const double obj = detail::svm_binary_objective(w_cur[c], b_cur[c], xs, ys[c], hp.lambda);
            if (obj < obj_best[c]) {
                obj_best[c] = obj;
                w_best[c] = w_cur[c];
                b_best[c] = b_cur[c];
            }
            total += obj_best[c];
        }
        if (!std::isfinite(total))
            throw NumericError("train_svm: non-finite objective at epoch " + std::to_string(epoch));
        if (log) log->epoch_loss.push_back(total);
    }

    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::copy(w_best[c].begin(), w_best[c].end(), model.weights.begin() + static_cast<std::ptrdiff_t>(c * dim));
        model.biases[c] = b_best[c];
    }
    return model;
}

/// Raw one-vs-rest margins on the standardized input.
inline ScoreVector svm_decision_values(const LinearSvmModel& model, std::span<const double> x) {
    if (x.size() != model.dim)
        throw DataError("svm: expected dimension " + std::to_string(model.dim) + ", got " +
                        std::to_string(x.size()));
    const auto z = model.standardization.apply(x);
    ScoreVector out{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto w = model.row(c);
        out[c] = std::inner_product(w.begin(), w.end(), z.begin(), model.biases[c]);
    }
    return out;
}

inline ScoreVector predict_svm(const LinearSvmModel& model, std::span<const double> x) {
    return softmax(svm_decision_values(model, x));
}

// ---------------------------------------------------------------------------
// Single-layer LSTM with final-state softmax readout

struct LstmHyperParams {
    double learning_rate = 1e-3;
    int epochs = 30;
    double clip_norm = 5.0;
    std::uint64_t seed = 1;
    std::size_t batch_size = 16;
    double weight_decay = 0.0;
    std::size_t lr_decay_every = 0;  // iterations; 0 disables the step schedule
    double lr_decay_factor = 0.1;
    std::size_t max_iterations = 0;  // 0 = bounded by epochs only
    bool standardize = true;

    /// Trainer defaults for the map-sequence path, carried over from the tile CNN recipe.
    static LstmHyperParams map_sequence_defaults() {
        LstmHyperParams hp;
        hp.learning_rate = 0.001;
        hp.lr_decay_every = 3000;
        hp.lr_decay_factor = 0.1;
        hp.batch_size = 16;
        hp.weight_decay = 0.002;
        hp.max_iterations = 10000;
        return hp;
    }
};

/// Gate rows are stacked in the order input, forget, output, candidate.
struct LstmParams {
    std::vector<double> w_input;      // 4H x I
    std::vector<double> w_recurrent;  // 4H x H
    std::vector<double> b_gates;      // 4H
    std::vector<double> w_readout;    // C x H
    std::vector<double> b_readout;    // C

    static constexpr std::size_t kNumTensors = 5;
    static constexpr std::array<std::string_view, kNumTensors> kTensorNames = {
        "w_input", "w_recurrent", "b_gates", "w_readout", "b_readout"};

    std::array<std::vector<double>*, kNumTensors> tensors() {
        return {&w_input, &w_recurrent, &b_gates, &w_readout, &b_readout};
    }
    std::array<const std::vector<double>*, kNumTensors> tensors() const {
        return {&w_input, &w_recurrent, &b_gates, &w_readout, &b_readout};
    }

    static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
        const std::size_t g = 4 * hidden_dim;
        return {std::vector<double>(g * input_dim, 0.0), std::vector<double>(g * hidden_dim, 0.0),
                std::vector<double>(g, 0.0), std::vector<double>(kNumClasses * hidden_dim, 0.0),
                std::vector<double>(kNumClasses, 0.0)};
    }
};

struct LstmModel {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    LstmParams params;
    Standardizer standardization;
    LstmHyperParams hyper;

    LstmModel() = default;
    LstmModel(std::size_t input, std::size_t hidden)
        : input_dim(input), hidden_dim(hidden), params(LstmParams::zeros(input, hidden)),
          standardization(Standardizer::identity(input)) {}

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases.
    static LstmModel random(std::size_t input, std::size_t hidden, std::uint64_t seed) {
        LstmModel m(input, hidden);
        std::mt19937_64 rng(seed);
        const double s = 1.0 / std::sqrt(static_cast<double>(hidden));
        std::uniform_real_distribution<double> u(-s, s);
        for (auto* t : {&m.params.w_input, &m.params.w_recurrent, &m.params.w_readout})
            for (auto& v : *t) v = u(rng);
        return m;
    }
};

struct LstmStep {
    std::vector<double> x;  // standardized input
    std::vector<double> i, f, o, g;
    std::vector<double> c, h;
};

struct LstmCache {
    std::vector<LstmStep> steps;
    ScoreVector logits{};
    ScoreVector probs{};
};

namespace detail {
inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }
}  // namespace detail

/// Zero initial state; the readout sees only the final hidden state.
inline std::pair<ScoreVector, LstmCache> lstm_forward(const LstmModel& model,
                                                      std::span<const std::vector<double>> inputs) {
    if (inputs.empty()) throw DataError("lstm_forward: empty sequence");
    const std::size_t I = model.input_dim, H = model.hidden_dim;
    const auto& p = model.params;
    LstmCache cache;
    cache.steps.reserve(inputs.size());
    std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0), a(4 * H);
    for (const auto& raw : inputs) {
        if (raw.size() != I)
            throw DataError("lstm_forward: expected input dimension " + std::to_string(I) + ", got " +
                            std::to_string(raw.size()));
        for (double v : raw)
            if (!std::isfinite(v)) throw DataError("lstm_forward: non-finite input");
        LstmStep s;
        s.x = model.standardization.apply(raw);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            double acc = p.b_gates[r];
            const double* wx = p.w_input.data() + r * I;
            for (std::size_t d = 0; d < I; ++d) acc += wx[d] * s.x[d];
            const double* wh = p.w_recurrent.data() + r * H;
            for (std::size_t d = 0; d < H; ++d) acc += wh[d] * h_prev[d];
            a[r] = acc;
        }
        s.i.resize(H), s.f.resize(H), s.o.resize(H), s.g.resize(H), s.c.resize(H), s.h.resize(H);
        for (std::size_t k = 0; k < H; ++k) {
            s.i[k] = detail::sigmoid(a[k]);
            s.f[k] = detail::sigmoid(a[H + k]);
            s.o[k] = detail::sigmoid(a[2 * H + k]);
            s.g[k] = std::tanh(a[3 * H + k]);
            s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
            s.h[k] = s.o[k] * std::tanh(s.c[k]);
        }
        h_prev = s.h;
        c_prev = s.c;
        cache.steps.push_back(std::move(s));
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        double acc = p.b_readout[c];
        const double* w = p.w_readout.data() + c * H;
        for (std::size_t k = 0; k < H; ++k) acc += w[k] * h_prev[k];
        cache.logits[c] = acc;
    }
    cache.probs = softmax(cache.logits);
    return {cache.probs, std::move(cache)};
}

/// Cross-entropy loss of the cached forward pass.
inline double lstm_loss(const LstmCache& cache, EmotionLabel target) {
    return -std::log(std::max(cache.probs[to_index(target)], std::numeric_limits<double>::min()));
}

/// Backpropagation through time of the cross-entropy loss; gradients are accumulated into
/// `grad` (same shapes as the model parameters).
inline void lstm_backward(const LstmModel& model, const LstmCache& cache, EmotionLabel target,
                          LstmParams& grad) {
    const std::size_t I = model.input_dim, H = model.hidden_dim;
    const auto& p = model.params;
    const std::size_t T = cache.steps.size();
    const auto& h_last = cache.steps.back().h;

    std::vector<double> dh(H, 0.0), dc(H, 0.0), da(4 * H);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double dz = cache.probs[c] - (c == to_index(target) ? 1.0 : 0.0);
        grad.b_readout[c] += dz;
        for (std::size_t k = 0; k < H; ++k) {
            grad.w_readout[c * H + k] += dz * h_last[k];
            dh[k] += dz * p.w_readout[c * H + k];
        }
    }
    const std::vector<double> zeros(H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        const auto& s = cache.steps[t];
        const auto& c_prev = t > 0 ? cache.steps[t - 1].c : zeros;
        const auto& h_prev = t > 0 ? cache.steps[t - 1].h : zeros;
        for (std::size_t k = 0; k < H; ++k) {
            const double tc = std::tanh(s.c[k]);
            const double d_o = dh[k] * tc;
            dc[k] += dh[k] * s.o[k] * (1.0 - tc * tc);
            const double d_i = dc[k] * s.g[k];
            const double d_g = dc[k] * s.i[k];
            const double d_f = dc[k] * c_prev[k];
            da[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            da[H + k] = d_f * s.f[k] * (1.0 - s.f[k]);
            da[2 * H + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            da[3 * H + k] = d_g * (1.0 - s.g[k] * s.g[k]);
            dc[k] *= s.f[k];
        }
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const double g = da[r];
            if (g == 0.0) continue;
            grad.b_gates[r] += g;
            double* gx = grad.w_input.data() + r * I;
            for (std::size_t d = 0; d < I; ++d) gx[d] += g * s.x[d];
            double* gh = grad.w_recurrent.data() + r * H;
            const double* wh = p.w_recurrent.data() + r * H;
            for (std::size_t d = 0; d < H; ++d) {
                gh[d] += g * h_prev[d];
                dh[d] += g * wh[d];
            }
        }
    }
}

struct LabeledSequence {
    std::vector<std::vector<double>> steps;
    EmotionLabel label;
};

/// Mini-batch Adam on the mean cross-entropy, global-norm clipping, optional L2 weight decay
/// on weight matrices and a step learning-rate schedule. Deterministic for a given seed.
inline LstmModel lstm_train(LstmModel model, const std::vector<LabeledSequence>& train,
                            const LstmHyperParams& hp, TrainingLog* log = nullptr) {
    if (train.empty()) throw DataError("lstm_train: empty training set");
    for (const auto& s : train) {
        if (s.steps.empty()) throw DataError("lstm_train: empty sequence in training set");
        for (const auto& x : s.steps)
            if (x.size() != model.input_dim) throw DataError("lstm_train: inconsistent input dimension");
    }
    model.hyper = hp;
    if (hp.standardize) {
        std::vector<std::vector<double>> rows;
        for (const auto& s : train) rows.insert(rows.end(), s.steps.begin(), s.steps.end());
        model.standardization = Standardizer::fit(rows, model.input_dim);
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    LstmParams m1 = LstmParams::zeros(model.input_dim, model.hidden_dim);
    LstmParams m2 = m1;
    std::mt19937_64 rng(hp.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = std::max<std::size_t>(hp.batch_size, 1);
    std::size_t iteration = 0;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        if (hp.max_iterations && iteration >= hp.max_iterations) break;
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            if (hp.max_iterations && iteration >= hp.max_iterations) break;
            const std::size_t end = std::min(start + batch, order.size());
            LstmParams grad = LstmParams::zeros(model.input_dim, model.hidden_dim);
            for (std::size_t j = start; j < end; ++j) {
                const auto& sample = train[order[j]];
                const auto [probs, cache] = lstm_forward(model, sample.steps);
                const double loss = lstm_loss(cache, sample.label);
                if (!std::isfinite(loss))
                    throw NumericError("lstm_train: non-finite loss at epoch " + std::to_string(epoch));
                epoch_loss += loss;
                lstm_backward(model, cache, sample.label, grad);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            auto gt = grad.tensors();
            auto pt = model.params.tensors();
            double norm2 = 0.0;
            for (std::size_t k = 0; k < LstmParams::kNumTensors; ++k) {
                const bool is_weight = k == 0 || k == 1 || k == 3;
                for (std::size_t e = 0; e < gt[k]->size(); ++e) {
                    double& gv = (*gt[k])[e];
                    gv *= scale;
                    if (is_weight && hp.weight_decay > 0.0) gv += hp.weight_decay * (*pt[k])[e];
                    norm2 += gv * gv;
                }
            }
            const double norm = std::sqrt(norm2);
            const double clip = (hp.clip_norm > 0.0 && norm > hp.clip_norm) ? hp.clip_norm / norm : 1.0;

            double lr = hp.learning_rate;
            if (hp.lr_decay_every)
                lr *= std::pow(hp.lr_decay_factor, static_cast<double>(iteration / hp.lr_decay_every));
            ++iteration;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(iteration));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(iteration));
            auto a1 = m1.tensors();
            auto a2 = m2.tensors();
            for (std::size_t k = 0; k < LstmParams::kNumTensors; ++k) {
                for (std::size_t e = 0; e < gt[k]->size(); ++e) {
                    const double gv = (*gt[k])[e] * clip;
                    double& u = (*a1[k])[e];
                    double& v = (*a2[k])[e];
                    u = beta1 * u + (1.0 - beta1) * gv;
                    v = beta2 * v + (1.0 - beta2) * gv * gv;
                    (*pt[k])[e] -= lr * (u / bc1) / (std::sqrt(v / bc2) + eps);
                }
            }
        }
        for (const auto* t : model.params.tensors())
            for (double v : *t)
                if (!std::isfinite(v))
                    throw NumericError("lstm_train: parameters diverged at epoch " + std::to_string(epoch));
        if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
    }
    return model;
}

inline ScoreVector predict_lstm(const LstmModel& model, std::span<const std::vector<double>> inputs) {
    return lstm_forward(model, inputs).first;
}

}  // namespace affectfuse
