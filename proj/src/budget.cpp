// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/budget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "audiokv/error.hpp"

namespace audiokv {

namespace {

// Shares within this distance below an integer are treated as that integer,
// so 0.3 * 100 floors to 30 rather than 29.
constexpr double kFloorSnap = 1e-9;

std::size_t snapped_floor(double x) {
    const double f = std::floor(x + kFloorSnap);
    return f <= 0.0 ? 0 : static_cast<std::size_t>(f);
}

std::vector<std::size_t> index_order(std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    return order;
}

// Spreads `count` units one each from the last entry backwards, cycling.
void top_up_from_last(std::vector<std::size_t>& shares, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        shares[shares.size() - 1 - i % shares.size()] += 1;
    }
}

}  // namespace

std::string to_string(AllocationMode mode) {
    switch (mode) {
        case AllocationMode::combined:
            return "combined";
        case AllocationMode::proportional_floor:
            return "proportional_floor";
        case AllocationMode::uniform:
            return "uniform";
        case AllocationMode::pyramid:
            return "pyramid";
    }
    return "combined";
}

AllocationMode parse_allocation_mode(std::string_view name) {
    for (const auto mode : {AllocationMode::combined, AllocationMode::proportional_floor,
                            AllocationMode::uniform, AllocationMode::pyramid}) {
        if (name == to_string(mode)) {
            return mode;
        }
    }
    throw ConfigError("unknown allocation mode '" + std::string(name) +
                      "' (expected combined, proportional_floor, uniform or pyramid)");
}

std::size_t BudgetPlan::total() const {
    return std::accumulate(capacities.begin(), capacities.end(), std::size_t{0});
}

std::size_t base_from_fraction(double fraction, std::size_t budget, std::size_t num_heads) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ConfigError("base fraction must be in [0, 1], got " + std::to_string(fraction));
    }
    if (num_heads == 0) {
        return 0;
    }
    return snapped_floor(fraction * static_cast<double>(budget) / static_cast<double>(num_heads));
}

std::vector<std::size_t> score_priority(std::span<const double> scores) {
    std::vector<std::size_t> order = index_order(scores.size());
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<std::size_t> distribute(std::size_t total, std::span<const double> weights,
                                    std::size_t lower, std::optional<std::size_t> upper,
                                    std::span<const std::size_t> priority) {
    const std::size_t n = weights.size();
    if (n == 0) {
        return {};
    }
    if (priority.size() != n) {
        throw LengthMismatchError("priority order does not cover every head");
    }
    if (upper && *upper < lower) {
        throw ConfigError("head capacity " + std::to_string(*upper) + " is below the floor " +
                          std::to_string(lower));
    }
    if (total < n * lower) {
        throw BudgetTooSmallError("budget " + std::to_string(total) + " cannot give " +
                                  std::to_string(n) + " heads " + std::to_string(lower) +
                                  " tokens each");
    }
    const std::size_t target = upper ? std::min(total, n * *upper) : total;
    const double lo = static_cast<double>(lower);
    const double hi = upper ? static_cast<double>(*upper) : std::numeric_limits<double>::infinity();

    std::vector<double> w(weights.begin(), weights.end());
    for (const double v : w) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ConfigError("head scores must be finite and non-negative");
        }
    }
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0);
    }

    // Continuous water-filling: proportional shares, pinning whichever side
    // of the box is violated more until every free share fits.
    enum class Pin { free, low, high };
    std::vector<Pin> pin(n, Pin::free);
    std::vector<double> share(n, 0.0);
    for (;;) {
        double remaining = static_cast<double>(target);
        double free_weight = 0.0;
        std::size_t free_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pin[i] == Pin::low) {
                remaining -= lo;
            } else if (pin[i] == Pin::high) {
                remaining -= hi;
            } else {
                free_weight += w[i];
                ++free_count;
            }
        }
        if (free_count == 0) {
            break;
        }
        double low_violation = 0.0;
        double high_violation = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pin[i] != Pin::free) {
                continue;
            }
            share[i] = free_weight > 0.0 ? remaining * (w[i] / free_weight)
                                         : remaining / static_cast<double>(free_count);
            if (share[i] < lo - kFloorSnap) {
                low_violation += lo - share[i];
            } else if (share[i] > hi + kFloorSnap) {
                high_violation += share[i] - hi;
            }
        }
        if (low_violation == 0.0 && high_violation == 0.0) {
            break;
        }
        const bool pin_low = low_violation >= high_violation;
        for (std::size_t i = 0; i < n; ++i) {
            if (pin[i] != Pin::free) {
                continue;
            }
            if (pin_low && share[i] < lo - kFloorSnap) {
                pin[i] = Pin::low;
            } else if (!pin_low && share[i] > hi + kFloorSnap) {
                pin[i] = Pin::high;
            }
        }
    }

    const std::size_t cap = upper.value_or(std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> out(n);
    std::size_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pin[i] == Pin::low) {
            out[i] = lower;
        } else if (pin[i] == Pin::high) {
            out[i] = cap;
        } else {
            out[i] = std::clamp(snapped_floor(share[i]), lower, cap);
        }
        sum += out[i];
    }
    while (sum < target) {
        for (const std::size_t i : priority) {
            if (sum == target) {
                break;
            }
            if (out[i] < cap) {
                ++out[i];
                ++sum;
            }
        }
    }
    while (sum > target) {
        for (auto it = priority.rbegin(); it != priority.rend() && sum > target; ++it) {
            if (out[*it] > lower) {
                --out[*it];
                --sum;
            }
        }
    }
    return out;
}

BudgetPlan allocate(const HeadScoreMatrix& scores, std::size_t budget, std::size_t window,
                    std::size_t base, AllocationMode mode, const AllocationOptions& options) {
    const std::size_t n = scores.num_layers * scores.num_heads;
    if (n == 0 || scores.scores.size() != n) {
        throw DimensionMismatchError("score matrix is empty or inconsistent with its dimensions");
    }
    BudgetPlan plan;
    plan.num_layers = scores.num_layers;
    plan.num_heads = scores.num_heads;
    plan.window = window;
    plan.global_budget = budget;
    plan.mode = mode;

    const auto cap = options.head_cap;
    if (cap && *cap < window) {
        throw ConfigError("head capacity " + std::to_string(*cap) + " is below the window " +
                          std::to_string(window));
    }
    if (budget < n * window) {
        throw BudgetTooSmallError("budget " + std::to_string(budget) + " cannot cover a " +
                                  std::to_string(window) + "-token window for " +
                                  std::to_string(n) + " heads");
    }
    const std::vector<std::size_t> priority = score_priority(scores.scores);
    const std::vector<double> even(n, 1.0);

    switch (mode) {
        case AllocationMode::combined: {
            std::size_t r = base;
            if (cap) {
                r = std::min(r, *cap - window);
            }
            if (budget < n * (window + r)) {
                r = (budget - n * window) / n;
            }
            const std::size_t floor_total = n * (window + r);
            std::optional<std::size_t> extra_cap;
            if (cap) {
                extra_cap = *cap - window - r;
            }
            const auto extra = distribute(budget - floor_total, scores.scores, 0, extra_cap, priority);
            plan.base = r;
            plan.capacities.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                plan.capacities[i] = window + r + extra[i];
            }
            break;
        }
        case AllocationMode::proportional_floor:
            plan.capacities = distribute(budget, scores.scores, window, cap, priority);
            break;
        case AllocationMode::uniform:
            plan.capacities = distribute(budget, even, window, cap, index_order(n));
            break;
        case AllocationMode::pyramid: {
            const std::size_t layers = scores.num_layers;
            const std::size_t heads = scores.num_heads;
            const double decay = options.pyramid_decay;
            if (!(decay > 0.0 && decay <= 1.0)) {
                throw ConfigError("pyramid decay must be in (0, 1], got " + std::to_string(decay));
            }
            // Geometric layer shares, bounded so a capped layer spills into the others.
            std::vector<double> layer_weight(layers);
            for (std::size_t l = 0; l < layers; ++l) {
                layer_weight[l] = std::pow(decay, static_cast<double>(l));
            }
            std::vector<std::size_t> last_first = index_order(layers);
            std::reverse(last_first.begin(), last_first.end());
            std::optional<std::size_t> layer_cap;
            if (cap) {
                layer_cap = heads * *cap;
            }
            const auto layer_totals =
                distribute(budget, layer_weight, heads * window, layer_cap, last_first);
            const std::vector<double> head_even(heads, 1.0);
            const std::vector<std::size_t> head_order = index_order(heads);
            plan.capacities.reserve(n);
            for (std::size_t layer = 0; layer < layers; ++layer) {
                const auto split = distribute(layer_totals[layer], head_even, window, cap, head_order);
                plan.capacities.insert(plan.capacities.end(), split.begin(), split.end());
            }
            break;
        }
    }
    return plan;
}

std::vector<std::size_t> pyramid_schedule(std::size_t num_layers, std::size_t per_layer_budget,
                                          double decay) {
    if (!(decay > 0.0 && decay <= 1.0)) {
        throw ConfigError("pyramid decay must be in (0, 1], got " + std::to_string(decay));
    }
    if (per_layer_budget == 0) {
        throw ConfigError("per-layer budget must be at least 1");
    }
    if (num_layers == 0) {
        return {};
    }
    std::vector<double> weight(num_layers);
    double weight_sum = 0.0;
    for (std::size_t l = 0; l < num_layers; ++l) {
        weight[l] = std::pow(decay, static_cast<double>(l));
        weight_sum += weight[l];
    }
    const std::size_t total = num_layers * per_layer_budget;
    std::vector<std::size_t> out(num_layers);
    std::size_t assigned = 0;
    for (std::size_t l = 0; l < num_layers; ++l) {
        out[l] = snapped_floor(static_cast<double>(total) * weight[l] / weight_sum);
        assigned += out[l];
    }
    // Snapping can only overshoot by a unit per layer in pathological cases.
    for (std::size_t l = 0; assigned > total; l = (l + 1) % num_layers) {
        if (out[l] > 0) {
            --out[l];
            --assigned;
        }
    }
    top_up_from_last(out, total - assigned);
    return out;
}

double effective_retention_ratio(const BudgetPlan& plan, std::size_t context_length) {
    if (context_length == 0) {
        throw ConfigError("context length must be at least 1");
    }
    if (plan.capacities.empty()) {
        return 0.0;
    }
    std::size_t kept = 0;
    for (const std::size_t c : plan.capacities) {
        kept += std::min(c, context_length);
    }
    return static_cast<double>(kept) /
           (static_cast<double>(plan.capacities.size()) * static_cast<double>(context_length));
}

}  // namespace audiokv
