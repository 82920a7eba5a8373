// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

// Brute-force reference implementations, written independently of the
// library so that tests compare two routes to the same number.

#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "audiokv/rng.hpp"

namespace oracle {

using Complex = std::complex<double>;

/// X[k] = sum_n x[n] exp(-2 pi i k n / L) for k = 0 .. L/2, by direct summation.
inline std::vector<Complex> dft_half(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<Complex> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        Complex acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            // Reduce k*j mod n before the angle to keep the argument small.
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) /
                                 static_cast<double>(n);
            acc += x[j] * Complex(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

/// Inverse of dft_half: rebuilds the full Hermitian spectrum and sums directly.
inline std::vector<double> idft_half(const std::vector<Complex>& half, std::size_t n) {
    std::vector<Complex> full(n);
    for (std::size_t k = 0; k < n; ++k) {
        full[k] = k < half.size() ? half[k] : std::conj(half[n - k]);
    }
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        Complex acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * j) % n) /
                                 static_cast<double>(n);
            acc += full[k] * Complex(std::cos(angle), std::sin(angle));
        }
        out[j] = acc.real() / static_cast<double>(n);
    }
    return out;
}

/// Hand cutoff: first k with cumulative energy >= ratio * total.
inline std::size_t cutoff(const std::vector<Complex>& half, double ratio) {
    double total = 0.0;
    for (const auto& b : half) {
        total += std::norm(b);
    }
    double run = 0.0;
    for (std::size_t k = 0; k < half.size(); ++k) {
        run += std::norm(half[k]);
        if (run >= ratio * total - 1e-12 * total) {
            return k;
        }
    }
    return half.size() - 1;
}

/// Low-pass plus residual mixing through the brute-force transforms.
inline std::vector<double> sss(const std::vector<double>& x, double ratio, double alpha,
                               std::size_t transition) {
    auto half = dft_half(x);
    const std::size_t k = cutoff(half, ratio);
    for (std::size_t i = 0; i < half.size(); ++i) {
        double w = 0.0;
        if (i <= k) {
            w = 1.0;
        } else if (i - k <= transition) {
            w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(i - k) /
                                      static_cast<double>(transition)));
        }
        half[i] *= w;
    }
    const auto low = idft_half(half, x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (1.0 - alpha) * x[i] + alpha * low[i];
    }
    return out;
}

inline std::vector<double> random_signal(audiokv::Rng& rng, std::size_t n) {
    std::vector<double> x(n);
    for (auto& v : x) {
        v = rng.uniform(-1.0, 1.0);
    }
    return x;
}

inline double total_variation(const std::vector<double>& x) {
    double tv = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        tv += std::abs(x[i] - x[i - 1]);
    }
    return tv;
}

/// Scratch directory for file-based tests.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* base = std::getenv("AUDIOKV_TEST_TMP");
    std::filesystem::path dir = base ? std::filesystem::path(base)
                                     : std::filesystem::temp_directory_path() / "audiokv_tests";
    dir /= name;
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
