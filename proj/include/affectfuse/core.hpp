#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace affectfuse {

inline constexpr std::size_t kNumClasses = 7;

/// Emotion classes in the fixed row/column order of the confusion tables.
enum class EmotionLabel : std::uint8_t { AN = 0, DI, FE, HA, NE, SA, SU };

inline constexpr std::array<std::string_view, kNumClasses> kLabelCodes = {"AN", "DI", "FE", "HA",
                                                                          "NE", "SA", "SU"};
inline constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "anger", "disgust", "fear", "happiness", "neutral", "sad", "surprise"};

constexpr std::size_t to_index(EmotionLabel l) { return static_cast<std::size_t>(l); }

inline EmotionLabel label_from_index(std::size_t i) {
    if (i >= kNumClasses) throw std::out_of_range("label index " + std::to_string(i));
    return static_cast<EmotionLabel>(i);
}

inline std::string_view to_code(EmotionLabel l) { return kLabelCodes[to_index(l)]; }

namespace detail {
inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}
}  // namespace detail

/// Accepts two-letter codes or full names, case-insensitively. "happy"/"sadness" are
/// accepted as aliases since both spellings show up in dataset folders.
inline std::optional<EmotionLabel> parse_label(std::string_view token) {
    const std::string t = detail::lower(detail::trim(token));
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        if (t == detail::lower(kLabelCodes[i]) || t == kLabelNames[i]) return label_from_index(i);
    }
    if (t == "angry") return EmotionLabel::AN;
    if (t == "happy") return EmotionLabel::HA;
    if (t == "sadness") return EmotionLabel::SA;
    return std::nullopt;
}

/// Malformed or inconsistent input data (files, manifests, shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during training (non-finite loss and the like).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace affectfuse
