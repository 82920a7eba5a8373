// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "audiokv/trace.hpp"

namespace audiokv {

/// Per-head audio-grounding scores in [0, 1], layer-major.
struct HeadScoreMatrix {
    std::size_t num_layers = 0;
    std::size_t num_heads = 0;
    std::size_t num_samples = 0;
    std::vector<double> scores;

    static HeadScoreMatrix zeros(std::size_t num_layers, std::size_t num_heads);

    std::size_t size() const { return scores.size(); }
    double at(std::size_t layer, std::size_t head) const { return scores[layer * num_heads + head]; }
    double& at(std::size_t layer, std::size_t head) { return scores[layer * num_heads + head]; }
};

struct TopKConfig {
    std::size_t k = 24;
};

/// Indices of the k largest entries, ascending. Ties go to the lower index.
std::vector<std::size_t> topk_indices(std::span<const float> row, std::size_t k);
std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k);

/// |topk within span| / k.
double step_hit_ratio(std::span<const std::size_t> topk, const AudioSpan& span, std::size_t k);

/// Mean hit ratio per head over every word-aligned step, each step scored
/// against the span of its own word. `map` indexes into `words`.
HeadScoreMatrix score_heads(const AttentionTrace& trace, std::span<const WordAlignment> words,
                            const WordStepMap& map, TopKConfig cfg = {});

/// Filters words by tau, aligns them to the trace's token texts and scores.
HeadScoreMatrix score_trace(const AttentionTrace& trace, std::span<const WordAlignment> words,
                            double tau, TopKConfig cfg = {});

/// Sample-weighted mean of two score matrices over the same head grid.
HeadScoreMatrix merge_scores(const HeadScoreMatrix& a, const HeadScoreMatrix& b);

}  // namespace audiokv
