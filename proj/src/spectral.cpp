// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "audiokv/error.hpp"

namespace audiokv {

namespace {

constexpr double kPi = std::numbers::pi;

void fft_pow2(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1) {
        return;
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    // Twiddles from a table evaluated directly, not by recurrence.
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<Complex> twiddle(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
        const double angle = sign * 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
        twiddle[j] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const Complex u = a[start + j];
                const Complex v = a[start + j + half] * twiddle[j * stride];
                a[start + j] = u + v;
                a[start + j + half] = u - v;
            }
        }
    }
}

// Bluestein: a length-n DFT as a circular convolution of power-of-two length.
void fft_bluestein(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = std::bit_ceil(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<Complex> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small.
        const std::size_t k2 = (k * k) % (2 * n);
        const double angle = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(angle), std::sin(angle)};
    }
    std::vector<Complex> x(m), y(m);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = a[k] * chirp[k];
    }
    y[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        y[k] = y[m - k] = std::conj(chirp[k]);
    }
    fft_pow2(x, false);
    fft_pow2(y, false);
    for (std::size_t k = 0; k < m; ++k) {
        x[k] *= y[k];
    }
    fft_pow2(x, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) {
        a[k] = x[k] * scale * chirp[k];
    }
}

}  // namespace

void SssConfig::validate() const {
    if (!(cutoff_ratio > 0.0 && cutoff_ratio <= 1.0)) {
        throw ConfigError("cutoff ratio must be in (0, 1], got " + std::to_string(cutoff_ratio));
    }
    if (!(mix_alpha >= 0.0 && mix_alpha <= 1.0)) {
        throw ConfigError("mix alpha must be in [0, 1], got " + std::to_string(mix_alpha));
    }
}

std::size_t default_transition_bins(std::size_t half_length) {
    const auto five_percent =
        static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(half_length)));
    return std::max<std::size_t>(2, five_percent);
}

void fft(std::vector<Complex>& data, bool inverse) {
    if (data.size() <= 1) {
        return;
    }
    if (std::has_single_bit(data.size())) {
        fft_pow2(data, inverse);
    } else {
        fft_bluestein(data, inverse);
    }
}

Spectrum rfft(std::span<const double> signal) {
    const std::size_t n = signal.size();
    std::vector<Complex> full(signal.begin(), signal.end());
    fft(full, false);
    full.resize(n / 2 + 1);
    // Exact zeros where Hermitian symmetry demands them.
    if (!full.empty()) {
        full.front().imag(0.0);
        if (n % 2 == 0 && n > 0) {
            full.back().imag(0.0);
        }
    }
    return {std::move(full), n};
}

std::vector<double> irfft(const Spectrum& spectrum, std::size_t n) {
    if (n != spectrum.original_length || spectrum.bins.size() != n / 2 + 1) {
        throw LengthMismatchError("irfft length " + std::to_string(n) +
                                  " does not match a spectrum of " +
                                  std::to_string(spectrum.bins.size()) + " bins for length " +
                                  std::to_string(spectrum.original_length));
    }
    if (n == 0) {
        return {};
    }
    std::vector<Complex> full(n);
    const std::size_t half = spectrum.bins.size();
    for (std::size_t k = 0; k < half; ++k) {
        full[k] = spectrum.bins[k];
    }
    for (std::size_t k = half; k < n; ++k) {
        full[k] = std::conj(spectrum.bins[n - k]);
    }
    fft(full, true);
    std::vector<double> out(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = full[i].real() * scale;
    }
    return out;
}

std::size_t energy_cutoff(const Spectrum& spectrum, double cutoff_ratio) {
    const std::size_t half = spectrum.bins.size();
    if (half == 0) {
        return 0;
    }
    std::vector<double> cumulative(half);
    double running = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        running += std::norm(spectrum.bins[i]);
        cumulative[i] = running;
    }
    if (!(running > 0.0) || cutoff_ratio >= 1.0) {
        return half - 1;
    }
    // The relative slack absorbs rounding in running * ratio.
    const double target = running * cutoff_ratio * (1.0 - 1e-12);
    for (std::size_t k = 0; k < half; ++k) {
        if (cumulative[k] >= target) {
            return k;
        }
    }
    return half - 1;
}

SpectralMask build_mask(std::size_t cutoff_index, std::size_t length,
                        std::size_t transition_bins) {
    if (cutoff_index >= length) {
        throw LengthMismatchError("cutoff index " + std::to_string(cutoff_index) +
                                  " outside a mask of length " + std::to_string(length));
    }
    SpectralMask mask{std::vector<double>(length, 0.0), cutoff_index};
    for (std::size_t i = 0; i < length; ++i) {
        if (i <= cutoff_index) {
            mask.weights[i] = 1.0;
        } else if (i - cutoff_index <= transition_bins) {
            const double phase = static_cast<double>(i - cutoff_index) /
                                 static_cast<double>(transition_bins);
            mask.weights[i] = 0.5 * (1.0 + std::cos(kPi * phase));
        }
    }
    return mask;
}

std::vector<double> sss(std::span<const double> signal, const SssConfig& config) {
    config.validate();
    std::vector<double> out(signal.begin(), signal.end());
    const std::size_t n = signal.size();
    if (n <= 1 || config.mix_alpha == 0.0) {
        return out;
    }
    Spectrum spectrum = rfft(signal);
    const std::size_t half = spectrum.bins.size();
    const std::size_t cutoff = energy_cutoff(spectrum, config.cutoff_ratio);
    const SpectralMask mask =
        build_mask(cutoff, half, config.transition_bins.value_or(default_transition_bins(half)));
    for (std::size_t k = 0; k < half; ++k) {
        spectrum.bins[k] *= mask.weights[k];
    }
    const std::vector<double> filtered = irfft(spectrum, n);
    const double alpha = config.mix_alpha;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (1.0 - alpha) * signal[i] + alpha * filtered[i];
    }
    return out;
}

}  // namespace audiokv
