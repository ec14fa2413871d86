#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "affectfuse/models.hpp"

namespace gradcheck {

struct TensorReport {
    std::size_t tensor = 0;
    double max_rel_error = 0.0;
    std::size_t entries = 0;
};

/// Relative error with a 1e-8 floor in the denominator so exact zeros compare cleanly.
inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Tiny random net (input 3, hidden 4, length 5) with random target; compares BPTT against
/// central finite differences of the loss, per parameter tensor.
inline std::vector<TensorReport> run(std::uint64_t seed = 17, double step = 1e-5) {
    using namespace affectfuse;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    LstmModel model(3, 4);
    for (auto* t : model.params.tensors())
        for (auto& v : *t) v = u(rng);
    std::vector<std::vector<double>> xs(5, std::vector<double>(3));
    for (auto& x : xs)
        for (auto& v : x) v = 1.5 * u(rng);
    const EmotionLabel target = label_from_index(rng() % kNumClasses);

    LstmParams grad = LstmParams::zeros(3, 4);
    {
        const auto [_, cache] = lstm_forward(model, xs);
        lstm_backward(model, cache, target, grad);
    }
    auto loss_at = [&](const LstmModel& m) { return lstm_loss(lstm_forward(m, xs).second, target); };

    std::vector<TensorReport> out;
    auto tensors = model.params.tensors();
    const auto grads = grad.tensors();
    for (std::size_t k = 0; k < LstmParams::kNumTensors; ++k) {
        TensorReport rep{k, 0.0, tensors[k]->size()};
        for (std::size_t e = 0; e < tensors[k]->size(); ++e) {
            const double orig = (*tensors[k])[e];
            (*tensors[k])[e] = orig + step;
            const double up = loss_at(model);
            (*tensors[k])[e] = orig - step;
            const double down = loss_at(model);
            (*tensors[k])[e] = orig;
            const double numeric = (up - down) / (2.0 * step);
            rep.max_rel_error = std::max(rep.max_rel_error, rel_error((*grads[k])[e], numeric));
        }
        out.push_back(rep);
    }
    return out;
}

}  // namespace gradcheck
