#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace affectfuse::fft {

using cplx = std::complex<double>;

namespace detail {

inline std::size_t smallest_factor(std::size_t n) {
    for (std::size_t p = 2; p * p <= n; ++p)
        if (n % p == 0) return p;
    return n;
}

// Mixed-radix decimation in time. Reads in[k * stride] for k < n, writes out[0..n).
inline void transform(const cplx* in, std::size_t stride, std::size_t n, cplx* out) {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = smallest_factor(n);
    const std::size_t m = n / p;
    if (m == 1) {  // prime length: direct sum
        for (std::size_t k = 0; k < n; ++k) {
            cplx acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double ang = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) /
                                   static_cast<double>(n);
                acc += in[j * stride] * cplx(std::cos(ang), std::sin(ang));
            }
            out[k] = acc;
        }
        return;
    }
    // p sub-transforms of length m, sub-transform r holds samples r, r+p, r+2p, ...
    std::vector<cplx> sub(n);
    for (std::size_t r = 0; r < p; ++r) transform(in + r * stride, stride * p, m, sub.data() + r * m);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (std::size_t r = 0; r < p; ++r) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((r * k) % n) /
                               static_cast<double>(n);
            acc += sub[r * m + (k % m)] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
}

}  // namespace detail

/// Forward DFT of a real sequence, any length.
inline std::vector<cplx> forward(std::span<const double> x) {
    std::vector<cplx> in(x.begin(), x.end());
    std::vector<cplx> out(x.size());
    if (!x.empty()) detail::transform(in.data(), 1, x.size(), out.data());
    return out;
}

/// |X_k| for the positive-frequency bins k = 0 .. N/2 - 1.
inline std::vector<double> magnitude_spectrum(std::span<const double> x) {
    const auto full = forward(x);
    std::vector<double> mag(x.size() / 2);
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(full[k]);
    return mag;
}

}  // namespace affectfuse::fft
