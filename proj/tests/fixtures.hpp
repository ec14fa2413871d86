#pragma once

// Synthetic training fixtures shared by the unit and acceptance suites.

#include <random>
#include <vector>

#include "affectfuse/models.hpp"

namespace fixture {

using affectfuse::EmotionLabel;

inline constexpr std::array<EmotionLabel, 3> kBlobLabels = {EmotionLabel::AN, EmotionLabel::HA, EmotionLabel::SU};

/// Three blobs of radius 1 centred on the vertices of a triangle with side 8 in the first
/// two coordinates (plus two small nuisance dimensions). Each blob is separated from the
/// union of the others by a line with margin >= 1, so one-vs-rest linear training can fit
/// all 100 points.
inline std::vector<affectfuse::LabeledVector> separable_blobs(std::uint64_t seed = 42, int n = 100) {
    const double centres[3][2] = {{0.0, 0.0}, {8.0, 0.0}, {4.0, 6.928}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(0.0, 6.283185307179586);
    std::uniform_real_distribution<double> rad(0.0, 1.0);
    std::uniform_real_distribution<double> nuisance(-0.1, 0.1);
    std::vector<affectfuse::LabeledVector> out;
    for (int i = 0; i < n; ++i) {
        const int c = i % 3;
        const double a = ang(rng), r = std::sqrt(rad(rng));
        out.push_back({{centres[c][0] + r * std::cos(a), centres[c][1] + r * std::sin(a), nuisance(rng), nuisance(rng)},
                       kBlobLabels[static_cast<std::size_t>(c)]});
    }
    return out;
}

/// Class c (AN, DI, FE) carries a 0 -> 1 ramp on input dimension c; every dimension also
/// gets Gaussian noise with sd 0.1.
inline std::vector<affectfuse::LabeledSequence> ramp_sequences(std::uint64_t seed = 7, int n = 60,
                                                               std::size_t length = 12) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<affectfuse::LabeledSequence> out;
    for (int i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(i % 3);
        affectfuse::LabeledSequence s;
        s.label = affectfuse::label_from_index(c);
        for (std::size_t t = 0; t < length; ++t) {
            std::vector<double> x(3);
            for (auto& v : x) v = noise(rng);
            x[c] += static_cast<double>(t) / static_cast<double>(length - 1);
            s.steps.push_back(std::move(x));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline affectfuse::LstmHyperParams ramp_hyper() {
    affectfuse::LstmHyperParams hp;
    hp.learning_rate = 0.01;
    hp.epochs = 200;
    hp.batch_size = 10;
    hp.clip_norm = 5.0;
    hp.seed = 3;
    return hp;
}

}  // namespace fixture
