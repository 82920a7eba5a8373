// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/eviction.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "audiokv/error.hpp"
#include "audiokv/head_scoring.hpp"
#include "audiokv/parallel.hpp"

namespace audiokv {

namespace {

// Scores for the older (evictable) segment of one head's row.
using OlderScorer = std::function<std::vector<double>(std::span<const double> older)>;

void check_recent(std::size_t capacity, std::size_t recent, std::size_t context) {
    if (std::min(capacity, context) < std::min(recent, context)) {
        throw CapacityBelowRecentError("capacity " + std::to_string(capacity) +
                                       " is below the recent window " + std::to_string(recent));
    }
}

std::vector<std::size_t> keep_head(std::span<const double> row, std::size_t capacity,
                                   std::size_t recent, const OlderScorer& scorer) {
    const std::size_t length = row.size();
    const std::size_t r = std::min(recent, length);
    const std::size_t cap = std::min(capacity, length);
    check_recent(capacity, recent, length);
    const std::size_t older_length = length - r;
    std::vector<std::size_t> kept;
    if (cap > r) {
        const std::vector<double> scores = scorer(row.first(older_length));
        kept = topk_indices(std::span<const double>(scores), cap - r);
    }
    for (std::size_t i = older_length; i < length; ++i) {
        kept.push_back(i);
    }
    return kept;
}

EvictionResult select_with(const ObservationWindow& window, const BudgetPlan& plan,
                           std::size_t recent, const OlderScorer& scorer, std::string name) {
    if (plan.num_layers != window.num_layers || plan.num_heads != window.num_heads ||
        plan.capacities.size() != window.num_layers * window.num_heads) {
        throw DimensionMismatchError("plan is " + std::to_string(plan.num_layers) + "x" +
                                     std::to_string(plan.num_heads) + " but the window is " +
                                     std::to_string(window.num_layers) + "x" +
                                     std::to_string(window.num_heads));
    }
    for (const std::size_t c : plan.capacities) {
        check_recent(c, recent, window.context_length);
    }
    EvictionResult result;
    result.policy_name = std::move(name);
    result.num_layers = window.num_layers;
    result.num_heads = window.num_heads;
    result.context_length = window.context_length;
    result.recent = recent;
    result.plan = plan;
    result.retained.resize(plan.capacities.size());
    parallel_for(plan.capacities.size(), [&](std::size_t slot) {
        result.retained[slot] = keep_head(window.row(slot), plan.capacities[slot], recent, scorer);
    });
    return result;
}

void check_pool_width(std::size_t pool_width) {
    if (pool_width == 0 || pool_width % 2 == 0) {
        throw ConfigError("pool width must be odd and at least 1, got " +
                          std::to_string(pool_width));
    }
}

OlderScorer pooled_scorer(std::size_t pool_width) {
    return [pool_width](std::span<const double> older) { return avg_pool(older, pool_width); };
}

OlderScorer raw_scorer() {
    return [](std::span<const double> older) {
        return std::vector<double>(older.begin(), older.end());
    };
}

OlderScorer sss_scorer(const SssConfig& cfg, std::optional<AudioSpan> audio) {
    cfg.validate();
    return [cfg, audio](std::span<const double> older) {
        std::vector<double> scores(older.begin(), older.end());
        std::size_t begin = 0;
        std::size_t end = scores.size();
        if (audio) {
            begin = std::min(audio->start_index, end);
            end = std::min(audio->end_index + 1, end);
        }
        if (end > begin + 1) {
            const auto smoothed =
                sss(std::span<const double>(scores).subspan(begin, end - begin), cfg);
            std::copy(smoothed.begin(), smoothed.end(), scores.begin() + static_cast<std::ptrdiff_t>(begin));
        }
        return scores;
    };
}

}  // namespace

ObservationWindow build_observation_window(const AttentionTrace& trace, std::size_t width) {
    return build_observation_window(trace, width, trace.num_steps());
}

ObservationWindow build_observation_window(const AttentionTrace& trace, std::size_t width,
                                           std::size_t end) {
    if (width == 0 || end > trace.num_steps() || width > end) {
        throw ConfigError("observation window of width " + std::to_string(width) +
                          " ending at step " + std::to_string(end) + " does not fit a " +
                          std::to_string(trace.num_steps()) + "-step trace");
    }
    ObservationWindow window;
    window.num_layers = trace.num_layers();
    window.num_heads = trace.num_heads();
    window.width = width;
    window.context_length = trace.context_length(end - 1);
    if (trace.audio_count() > 0) {
        window.audio = AudioSpan{trace.audio_start(), trace.audio_start() + trace.audio_count() - 1};
    }
    const std::size_t length = window.context_length;
    window.aggregated.assign(trace.num_head_slots() * length, 0.0);
    for (std::size_t t = end - width; t < end; ++t) {
        for (std::size_t layer = 0; layer < window.num_layers; ++layer) {
            for (std::size_t head = 0; head < window.num_heads; ++head) {
                const auto row = trace.row(t, layer, head);
                double* out = window.aggregated.data() + (layer * window.num_heads + head) * length;
                for (std::size_t i = 0; i < row.size(); ++i) {
                    out[i] += row[i];
                }
            }
        }
    }
    const double scale = 1.0 / static_cast<double>(width);
    for (double& v : window.aggregated) {
        v *= scale;
    }
    return window;
}

std::size_t EvictionResult::total_retained() const {
    std::size_t total = 0;
    for (const auto& r : retained) {
        total += r.size();
    }
    return total;
}

BudgetPlan uniform_plan(std::size_t num_layers, std::size_t num_heads, std::size_t capacity) {
    BudgetPlan plan;
    plan.num_layers = num_layers;
    plan.num_heads = num_heads;
    plan.capacities.assign(num_layers * num_heads, capacity);
    plan.global_budget = capacity * num_layers * num_heads;
    plan.mode = AllocationMode::uniform;
    return plan;
}

std::vector<double> avg_pool(std::span<const double> scores, std::size_t pool_width) {
    check_pool_width(pool_width);
    const std::size_t n = scores.size();
    const std::size_t half = pool_width / 2;
    std::vector<double> out(n, 0.0);
    const double scale = 1.0 / static_cast<double>(pool_width);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            sum += scores[j];
        }
        out[i] = sum * scale;
    }
    return out;
}

EvictionResult select_audiokv(const ObservationWindow& window, const BudgetPlan& plan,
                              const std::optional<SssConfig>& sss, std::size_t recent) {
    if (sss) {
        return select_with(window, plan, recent, sss_scorer(*sss, window.audio), "audiokv");
    }
    return select_with(window, plan, recent, raw_scorer(), "audiokv-sss");
}

EvictionResult select_snapkv(const ObservationWindow& window, std::size_t capacity_per_head,
                             std::size_t pool_width, std::size_t recent) {
    check_pool_width(pool_width);
    const BudgetPlan plan = uniform_plan(window.num_layers, window.num_heads, capacity_per_head);
    return select_with(window, plan, recent, pooled_scorer(pool_width), "snapkv");
}

EvictionResult select_snapkv_sss(const ObservationWindow& window, std::size_t capacity_per_head,
                                 const SssConfig& sss, std::size_t recent) {
    const BudgetPlan plan = uniform_plan(window.num_layers, window.num_heads, capacity_per_head);
    return select_with(window, plan, recent, sss_scorer(sss, window.audio), "snapkv+sss");
}

EvictionResult select_pyramidkv(const ObservationWindow& window, const BudgetPlan& plan,
                                std::size_t pool_width, std::size_t recent) {
    check_pool_width(pool_width);
    return select_with(window, plan, recent, pooled_scorer(pool_width), "pyramidkv");
}

EvictionResult select_h2o(const AttentionTrace& trace, std::size_t capacity_per_head,
                          std::size_t recent, std::optional<std::size_t> end_step) {
    const std::size_t end = end_step.value_or(trace.num_steps());
    // Accumulated mass is the window mean times its width; the ranking is the same.
    ObservationWindow window = build_observation_window(trace, end, end);
    const BudgetPlan plan = uniform_plan(window.num_layers, window.num_heads, capacity_per_head);
    return select_with(window, plan, recent, raw_scorer(), "h2o");
}

EvictionResult select_adakv(const ObservationWindow& window, std::size_t layer_budget,
                            std::size_t recent, std::size_t pool_width) {
    check_pool_width(pool_width);
    const std::size_t heads = window.num_heads;
    const std::size_t length = window.context_length;
    const std::size_t r = std::min(recent, length);
    if (layer_budget < heads * r) {
        throw CapacityBelowRecentError("layer budget " + std::to_string(layer_budget) +
                                       " cannot hold a " + std::to_string(r) +
                                       "-token recent window for " + std::to_string(heads) +
                                       " heads");
    }
    const std::size_t older_length = length - r;

    EvictionResult result;
    result.policy_name = "adakv";
    result.num_layers = window.num_layers;
    result.num_heads = heads;
    result.context_length = length;
    result.recent = recent;
    result.plan = uniform_plan(window.num_layers, heads, 0);
    result.plan.mode = AllocationMode::proportional_floor;
    result.plan.global_budget = layer_budget * window.num_layers;
    result.retained.resize(window.num_layers * heads);

    parallel_for(window.num_layers, [&](std::size_t layer) {
        struct Candidate {
            double score;
            std::size_t head;
            std::size_t index;
        };
        std::vector<Candidate> pool;
        pool.reserve(heads * older_length);
        for (std::size_t head = 0; head < heads; ++head) {
            const auto older = window.row(layer, head).first(older_length);
            const auto scores = avg_pool(older, pool_width);
            for (std::size_t i = 0; i < older_length; ++i) {
                pool.push_back({scores[i], head, i});
            }
        }
        const std::size_t take = std::min(layer_budget - heads * r, pool.size());
        std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                          [](const Candidate& a, const Candidate& b) {
                              if (a.score != b.score) {
                                  return a.score > b.score;
                              }
                              return a.head != b.head ? a.head < b.head : a.index < b.index;
                          });
        for (std::size_t j = 0; j < take; ++j) {
            result.retained[layer * heads + pool[j].head].push_back(pool[j].index);
        }
        for (std::size_t head = 0; head < heads; ++head) {
            auto& kept = result.retained[layer * heads + head];
            std::sort(kept.begin(), kept.end());
            for (std::size_t i = older_length; i < length; ++i) {
                kept.push_back(i);
            }
            result.plan.capacities[layer * heads + head] = kept.size();
        }
    });
    return result;
}

}  // namespace audiokv
