// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "audiokv/trace.hpp"

namespace audiokv {

/// Knobs of the synthetic trace generator. Mass weights are per head kind
/// (planted audio heads vs the rest) and are renormalized per row.
struct FixtureParams {
    std::size_t num_layers = 4;
    std::size_t num_heads = 5;
    double planted_fraction = 0.1;
    std::size_t audio_start = 4;
    std::size_t prompt_tokens = 16;     // text tokens between audio and generation
    std::size_t num_words = 32;
    std::size_t tokens_per_word = 24;   // audio tokens per spoken word
    double seconds_per_token = 0.04;
    std::size_t min_future_steps = 8;
    std::size_t first_epoch_steps = 32;
    std::size_t epoch_steps = 8;

    bool uniform = false;               // every row uniform up to jitter

    double plateau_min = 0.5;           // plateau width as a fraction of audio
    double plateau_max = 0.8;
    double plateau_edge = 0.08;         // soft edge as a fraction of plateau width
    double hot_zone = 0.08;             // cluster zone width as a fraction of audio
    std::size_t clusters = 4;
    std::size_t cluster_width = 6;
    std::size_t heavy_hitters = 6;
    std::size_t recent_tokens = 8;

    struct Mix {
        double sink = 0.0;
        double plateau = 0.0;
        double word = 0.0;
        double recent = 0.0;
        double clusters = 0.0;
        double heavy = 0.0;
    };
    Mix planted{0.05, 0.6, 0.15, 0.05, 0.02, 0.0};
    Mix background{0.4, 0.15, 0.0, 0.1, 0.01, 0.3};

    double epoch_jitter = 0.2;          // lognormal sigma, redrawn per epoch
    double step_jitter = 0.1;           // lognormal sigma, redrawn per step
    double low_confidence_share = 0.12;
};

struct Fixture {
    AttentionTrace trace;
    std::vector<WordAlignment> words;
    std::vector<std::size_t> planted_heads;  // flat layer * H + head, ascending
};

inline constexpr std::string_view kProfileSpecializedHeads = "specialized-heads";
inline constexpr std::string_view kProfileSpikePlateau = "spike-plateau";
inline constexpr std::string_view kProfileUniform = "uniform";

/// Throws ConfigError for unknown profile names.
FixtureParams profile_params(std::string_view profile);

Fixture generate_fixture(const FixtureParams& params, std::uint64_t seed);
Fixture generate_fixture(std::string_view profile, std::uint64_t seed);

}  // namespace audiokv
