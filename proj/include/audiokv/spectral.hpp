// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace audiokv {

using Complex = std::complex<double>;

/// Non-redundant half of the DFT of a real signal: floor(L/2) + 1 bins.
struct Spectrum {
    std::vector<Complex> bins;
    std::size_t original_length = 0;
};

struct SpectralMask {
    std::vector<double> weights;
    std::size_t cutoff_index = 0;
};

struct SssConfig {
    double cutoff_ratio = 0.7;
    double mix_alpha = 0.5;
    /// Width of the cosine roll-off in bins; 0 is a hard cutoff. Unset picks
    /// default_transition_bins() for the signal at hand.
    std::optional<std::size_t> transition_bins;

    /// Throws ConfigError unless cutoff_ratio is in (0, 1] and mix_alpha in [0, 1].
    void validate() const;
};

/// max(2, ceil(0.05 * half_length)).
std::size_t default_transition_bins(std::size_t half_length);

/// Unnormalized complex DFT of any length, in place. `inverse` flips the
/// exponent sign but does not scale.
void fft(std::vector<Complex>& data, bool inverse);

/// bins[k] = sum_n x[n] exp(-2 pi i k n / L), k = 0 .. L/2.
Spectrum rfft(std::span<const double> signal);

/// Inverse of rfft with 1/L scaling. Throws LengthMismatchError when n is not
/// the spectrum's original length.
std::vector<double> irfft(const Spectrum& spectrum, std::size_t n);

/// Smallest k whose cumulative bin energy reaches cutoff_ratio of the total,
/// meaning bins 0..k are kept. Returns the last bin for zero-energy spectra.
std::size_t energy_cutoff(const Spectrum& spectrum, double cutoff_ratio);

/// 1 up to cutoff_index, raised-cosine roll-off over transition_bins, then 0.
SpectralMask build_mask(std::size_t cutoff_index, std::size_t length,
                        std::size_t transition_bins);

/// Spectral score smoothing: (1 - alpha) x + alpha irfft(mask * rfft(x)).
std::vector<double> sss(std::span<const double> signal, const SssConfig& config);

}  // namespace audiokv
