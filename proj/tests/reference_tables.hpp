#pragma once

// Published validation confusion tables (row percentages, AN..SU) and their reported
// overall / unweighted accuracies. Class totals are the validation-set sizes.

#include <array>
#include <cstdint>

#include "affectfuse/eval.hpp"

namespace reftab {

struct Published {
    const char* name;
    affectfuse::PercentTable pct;
    double overall;     // percent
    double unweighted;  // percent
};

inline constexpr std::array<std::uint64_t, affectfuse::kNumClasses> kValidationTotals = {64, 40, 46, 63, 63, 61, 46};

inline const std::array<Published, 5>& tables() {
    static const std::array<Published, 5> t = {{
        {"face-aligned",
         {{{53.12, 6.25, 7.81, 0, 17.19, 3.12, 12.50},
           {17.50, 27.50, 7.50, 2.50, 25.00, 15.00, 5.00},
           {21.74, 4.35, 23.91, 13.04, 6.52, 17.39, 13.04},
           {7.94, 1.59, 0, 84.13, 0, 4.76, 1.59},
           {11.11, 11.11, 7.94, 6.35, 53.97, 6.35, 3.17},
           {8.20, 4.92, 1.64, 6.56, 22.95, 55.74, 0},
           {21.74, 6.52, 17.39, 4.35, 17.39, 4.35, 28.26}}},
         49.61, 46.66},
        {"face-provided",
         {{{64.06, 1.56, 7.81, 1.56, 12.50, 6.25, 6.25},
           {22.50, 15.00, 5.00, 10.00, 25.00, 20.00, 2.50},
           {32.61, 8.70, 26.09, 4.35, 13.04, 8.70, 6.52},
           {9.52, 3.17, 0, 73.02, 6.35, 6.35, 1.59},
           {14.29, 11.11, 1.59, 3.17, 63.49, 6.35, 0},
           {16.39, 11.48, 6.56, 8.20, 13.11, 40.98, 3.28},
           {32.61, 6.52, 17.39, 0, 15.22, 8.70, 19.57}}},
         46.74, 43.17},
        {"holistic-svm",
         {{{76.56, 0, 3.12, 9.38, 7.81, 3.12, 0},
           {25.00, 0, 0, 42.50, 20.00, 12.50, 0},
           {23.91, 0, 30.43, 23.91, 13.04, 8.70, 0},
           {15.87, 1.59, 9.52, 42.86, 20.63, 9.52, 0},
           {12.70, 1.59, 3.17, 34.92, 46.03, 1.59, 0},
           {11.48, 0, 11.48, 26.23, 21.31, 27.87, 1.64},
           {19.57, 0, 17.39, 36.96, 13.04, 13.04, 0}}},
         35.51, 31.97},
        {"seq-lstm",
         {{{48.44, 1.56, 0, 15.62, 15.62, 18.75, 0},
           {15.00, 2.50, 0, 35.00, 32.50, 15.00, 0},
           {30.43, 0, 0, 19.57, 28.26, 21.74, 0},
           {12.70, 4.76, 0, 33.33, 30.16, 19.05, 0},
           {6.35, 3.17, 0, 17.46, 52.38, 20.63, 0},
           {11.48, 6.56, 0, 22.95, 32.79, 26.23, 0},
           {17.39, 0, 2.17, 30.43, 36.96, 13.04, 0}}},
         26.63, 23.27},
        {"map-lstm",
         {{{56.25, 0, 0, 29.69, 10.94, 3.12, 0},
           {12.50, 0, 0, 57.50, 27.50, 2.50, 0},
           {13.04, 0, 2.17, 45.65, 36.96, 2.17, 0},
           {11.11, 0, 0, 52.38, 26.98, 9.52, 0},
           {6.35, 0, 0, 52.38, 39.68, 1.59, 0},
           {8.20, 0, 0, 63.93, 16.39, 11.48, 0},
           {6.52, 2.17, 2.17, 56.52, 26.09, 6.52, 0}}},
         26.63, 23.14},
    }};
    return t;
}

}  // namespace reftab
