// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "audiokv/budget.hpp"
#include "audiokv/spectral.hpp"
#include "audiokv/trace.hpp"

namespace audiokv {

/// Mean attention rows over a run of decoding steps. Rows shorter than the
/// final context are zero-padded at the end.
struct ObservationWindow {
    std::size_t num_layers = 0;
    std::size_t num_heads = 0;
    std::size_t width = 0;
    std::size_t context_length = 0;
    std::vector<double> aggregated;  // [layer][head][context_length]
    /// Audio token positions, when the source trace has any.
    std::optional<AudioSpan> audio;

    std::span<const double> row(std::size_t layer, std::size_t head) const {
        return {aggregated.data() + (layer * num_heads + head) * context_length, context_length};
    }
    std::span<const double> row(std::size_t slot) const {
        return {aggregated.data() + slot * context_length, context_length};
    }
};

/// Window over the last `width` steps of the trace.
ObservationWindow build_observation_window(const AttentionTrace& trace, std::size_t width);
/// Window over steps [end - width, end).
ObservationWindow build_observation_window(const AttentionTrace& trace, std::size_t width,
                                           std::size_t end);

struct EvictionResult {
    std::string policy_name;
    std::size_t num_layers = 0;
    std::size_t num_heads = 0;
    std::size_t context_length = 0;
    std::size_t recent = 0;
    /// The plan the policy ran under. AdaKV stores its realized per-head counts.
    BudgetPlan plan;
    std::vector<std::vector<std::size_t>> retained;  // per head, ascending

    const std::vector<std::size_t>& retained_at(std::size_t layer, std::size_t head) const {
        return retained[layer * num_heads + head];
    }
    std::size_t total_retained() const;
};

inline constexpr std::size_t kDefaultPoolWidth = 7;

/// Plan with the same capacity for every head.
BudgetPlan uniform_plan(std::size_t num_layers, std::size_t num_heads, std::size_t capacity);

/// Keeps the `recent` newest positions plus the best-scored older ones.
/// With `sss` set, older-segment scores are smoothed first (only the audio
/// positions when the window knows them).
EvictionResult select_audiokv(const ObservationWindow& window, const BudgetPlan& plan,
                              const std::optional<SssConfig>& sss, std::size_t recent);

/// Uniform capacity; older scores are centered moving averages of width
/// pool_width (odd, zero padded).
EvictionResult select_snapkv(const ObservationWindow& window, std::size_t capacity_per_head,
                             std::size_t pool_width, std::size_t recent);

/// SnapKV with spectral smoothing in place of pooling.
EvictionResult select_snapkv_sss(const ObservationWindow& window, std::size_t capacity_per_head,
                                 const SssConfig& sss, std::size_t recent);

/// Pooled SnapKV scoring under a per-head plan (PyramidKV with a pyramid plan).
EvictionResult select_pyramidkv(const ObservationWindow& window, const BudgetPlan& plan,
                                std::size_t pool_width, std::size_t recent);

/// Heavy hitters by attention mass accumulated over steps [0, end_step)
/// (all steps when unset).
EvictionResult select_h2o(const AttentionTrace& trace, std::size_t capacity_per_head,
                          std::size_t recent, std::optional<std::size_t> end_step = std::nullopt);

/// Per layer, the best (score, head, index) triples across heads share the
/// layer budget left after every head's recent window.
EvictionResult select_adakv(const ObservationWindow& window, std::size_t layer_budget,
                            std::size_t recent, std::size_t pool_width = kDefaultPoolWidth);

/// Centered moving average with zero padding.
std::vector<double> avg_pool(std::span<const double> scores, std::size_t pool_width);

}  // namespace audiokv
