// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "audiokv/head_scoring.hpp"

namespace audiokv {

enum class AllocationMode {
    combined,            // w + r + score-proportional share of the rest
    proportional_floor,  // max(w, floor(B * S / sum S))
    uniform,
    pyramid,
};

std::string to_string(AllocationMode mode);
/// Throws ConfigError for unknown names.
AllocationMode parse_allocation_mode(std::string_view name);

/// Per-head KV capacities, layer-major.
struct BudgetPlan {
    std::size_t num_layers = 0;
    std::size_t num_heads = 0;
    std::vector<std::size_t> capacities;
    std::size_t window = 0;
    std::size_t base = 0;
    std::size_t global_budget = 0;
    AllocationMode mode = AllocationMode::combined;

    std::size_t capacity(std::size_t layer, std::size_t head) const {
        return capacities[layer * num_heads + head];
    }
    std::size_t total() const;
};

struct AllocationOptions {
    /// Upper bound on any head's capacity, typically the context length.
    /// Budget that would exceed it is handed to the remaining heads.
    std::optional<std::size_t> head_cap;
    double pyramid_decay = 0.8;
};

/// Per-head base tokens r from a fraction of the even per-head share.
std::size_t base_from_fraction(double fraction, std::size_t budget, std::size_t num_heads);

/// Splits `total` units across heads proportionally to `weights`, with every
/// share in [lower, upper] and the shares summing to exactly
/// min(total, n * upper). Rounding leftovers go one each in `priority` order.
/// All-zero weights split evenly. Throws BudgetTooSmallError when
/// total < n * lower.
std::vector<std::size_t> distribute(std::size_t total, std::span<const double> weights,
                                    std::size_t lower, std::optional<std::size_t> upper,
                                    std::span<const std::size_t> priority);

/// Head order used for rounding leftovers: descending score, ties to the
/// lower (layer, head).
std::vector<std::size_t> score_priority(std::span<const double> scores);

BudgetPlan allocate(const HeadScoreMatrix& scores, std::size_t budget, std::size_t window,
                    std::size_t base, AllocationMode mode, const AllocationOptions& options = {});

/// Geometrically decaying per-layer budgets (layer 0 largest) that sum to
/// num_layers * per_layer_budget.
std::vector<std::size_t> pyramid_schedule(std::size_t num_layers, std::size_t per_layer_budget,
                                          double decay);

/// sum min(capacity, context) / (heads * context).
double effective_retention_ratio(const BudgetPlan& plan, std::size_t context_length);

}  // namespace audiokv
