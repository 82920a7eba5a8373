// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "audiokv/error.hpp"
#include "audiokv/parallel.hpp"

namespace audiokv {

std::size_t eviction_step_of(const EvictionResult& result, const AttentionTrace& trace) {
    for (std::size_t t = 0; t < trace.num_steps(); ++t) {
        if (trace.context_length(t) == result.context_length) {
            return t + 1;
        }
    }
    throw DimensionMismatchError("no step of the trace has context length " +
                                 std::to_string(result.context_length));
}

double oracle_overlap(const EvictionResult& result, const AttentionTrace& trace,
                      std::size_t horizon) {
    if (result.num_layers != trace.num_layers() || result.num_heads != trace.num_heads()) {
        throw DimensionMismatchError("eviction result and trace have different head grids");
    }
    const std::size_t start = eviction_step_of(result, trace);
    if (horizon == 0 || start >= trace.num_steps()) {
        throw HorizonError("no decoding steps follow the eviction point");
    }
    if (start + horizon > trace.num_steps()) {
        throw HorizonError("horizon of " + std::to_string(horizon) + " steps exceeds the " +
                           std::to_string(trace.num_steps() - start) + " remaining");
    }
    const std::size_t length = result.context_length;
    const std::size_t heads = result.num_heads;
    std::vector<double> per_head(result.retained.size(), 0.0);
    parallel_for(result.retained.size(), [&](std::size_t slot) {
        std::vector<double> future(length, 0.0);
        for (std::size_t t = start; t < start + horizon; ++t) {
            const auto row = trace.row(t, slot / heads, slot % heads);
            for (std::size_t i = 0; i < length; ++i) {
                future[i] += row[i];
            }
        }
        const auto& kept = result.retained[slot];
        if (kept.empty()) {
            per_head[slot] = 1.0;
            return;
        }
        const auto oracle = topk_indices(std::span<const double>(future), kept.size());
        std::vector<std::size_t> common;
        std::set_intersection(kept.begin(), kept.end(), oracle.begin(), oracle.end(),
                              std::back_inserter(common));
        per_head[slot] = static_cast<double>(common.size()) / static_cast<double>(oracle.size());
    });
    double total = 0.0;
    for (const double v : per_head) {
        total += v;
    }
    return per_head.empty() ? 1.0 : total / static_cast<double>(per_head.size());
}

double retained_mass(const EvictionResult& result, const ObservationWindow& window) {
    if (result.num_layers != window.num_layers || result.num_heads != window.num_heads ||
        result.context_length != window.context_length) {
        throw DimensionMismatchError("eviction result and window do not match");
    }
    if (result.retained.empty()) {
        return 1.0;
    }
    double total = 0.0;
    for (std::size_t slot = 0; slot < result.retained.size(); ++slot) {
        const auto row = window.row(slot);
        double all = 0.0;
        for (const double v : row) {
            all += v;
        }
        double kept = 0.0;
        for (const std::size_t i : result.retained[slot]) {
            kept += row[i];
        }
        total += all > 0.0 ? kept / all : 1.0;
    }
    return total / static_cast<double>(result.retained.size());
}

double index_entropy(std::span<const std::size_t> indices, std::size_t context_length,
                     std::size_t bins) {
    if (bins < 2) {
        throw ConfigError("entropy needs at least 2 bins");
    }
    if (indices.empty() || context_length == 0) {
        return 0.0;
    }
    std::vector<std::size_t> counts(bins, 0);
    for (const std::size_t i : indices) {
        counts[std::min(bins - 1, i * bins / context_length)] += 1;
    }
    const double n = static_cast<double>(indices.size());
    double entropy = 0.0;
    for (const std::size_t c : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            entropy -= p * std::log(p);
        }
    }
    return entropy;
}

double coverage_entropy(const EvictionResult& result, std::size_t bins) {
    if (bins < 2) {
        throw ConfigError("entropy needs at least 2 bins");
    }
    if (result.retained.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& kept : result.retained) {
        total += index_entropy(kept, result.context_length, bins);
    }
    return total / static_cast<double>(result.retained.size());
}

std::size_t memory_footprint(const EvictionResult& result, const KvGeometry& geom) {
    if (geom.head_dim == 0 || geom.bytes_per_element == 0) {
        throw ConfigError("KV geometry must be positive");
    }
    return result.total_retained() * KvGeometry::kv_pair_factor * geom.head_dim *
           geom.bytes_per_element;
}

ObservationWindow truncate_window(const ObservationWindow& window, std::size_t context_length) {
    if (context_length > window.context_length) {
        throw DimensionMismatchError("cannot extend a window by truncation");
    }
    ObservationWindow out = window;
    out.context_length = context_length;
    out.aggregated.clear();
    out.aggregated.reserve(window.num_layers * window.num_heads * context_length);
    for (std::size_t slot = 0; slot < window.num_layers * window.num_heads; ++slot) {
        const auto row = window.row(slot).first(context_length);
        out.aggregated.insert(out.aggregated.end(), row.begin(), row.end());
    }
    if (out.audio && out.audio->start_index >= context_length) {
        out.audio.reset();
    } else if (out.audio) {
        out.audio->end_index = std::min(out.audio->end_index, context_length - 1);
    }
    return out;
}

std::string policy_name(Policy policy) {
    switch (policy) {
        case Policy::snapkv:
            return "snapkv";
        case Policy::snapkv_sss:
            return "snapkv+sss";
        case Policy::audiokv_no_sss:
            return "audiokv-sss";
        case Policy::audiokv:
            return "audiokv";
        case Policy::h2o:
            return "h2o";
        case Policy::adakv:
            return "adakv";
        case Policy::pyramidkv:
            return "pyramidkv";
    }
    return "unknown";
}

Policy parse_policy(std::string_view name) {
    for (const auto p : {Policy::snapkv, Policy::snapkv_sss, Policy::audiokv_no_sss,
                         Policy::audiokv, Policy::h2o, Policy::adakv, Policy::pyramidkv}) {
        if (name == policy_name(p)) {
            return p;
        }
    }
    throw ConfigError("unknown policy '" + std::string(name) + "'");
}

std::vector<Policy> ablation_policies() {
    return {Policy::snapkv, Policy::snapkv_sss, Policy::audiokv_no_sss, Policy::audiokv};
}

EvictionPoint resolve_eviction_point(const AttentionTrace& trace, const SimulationConfig& cfg) {
    EvictionPoint point;
    point.step = cfg.eviction_step.value_or(cfg.observation_width);
    if (cfg.observation_width == 0 || point.step < cfg.observation_width) {
        throw ConfigError("eviction step " + std::to_string(point.step) +
                          " leaves no room for an observation window of " +
                          std::to_string(cfg.observation_width));
    }
    if (point.step >= trace.num_steps()) {
        throw HorizonError("trace has " + std::to_string(trace.num_steps()) +
                           " steps; nothing follows the eviction point at step " +
                           std::to_string(point.step));
    }
    point.context_length = trace.context_length(point.step - 1);
    const std::size_t remaining = trace.num_steps() - point.step;
    point.horizon = cfg.horizon.value_or(remaining);
    if (point.horizon == 0 || point.horizon > remaining) {
        throw HorizonError("horizon of " + std::to_string(point.horizon) + " steps does not fit the " +
                           std::to_string(remaining) + " remaining");
    }
    return point;
}

std::size_t capacity_for_ratio(double ratio, std::size_t context_length) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ConfigError("retention ratio must be in (0, 1], got " + std::to_string(ratio));
    }
    const double c = std::floor(ratio * static_cast<double>(context_length) + 1e-9);
    return std::min(context_length, static_cast<std::size_t>(c));
}

BudgetPlan audiokv_plan(const HeadScoreMatrix& scores, double ratio, std::size_t context_length,
                        const SimulationConfig& cfg) {
    const std::size_t n = scores.num_layers * scores.num_heads;
    const std::size_t budget = capacity_for_ratio(ratio, context_length) * n;
    const std::size_t window = std::min(cfg.recent, context_length);
    AllocationOptions options;
    options.head_cap = context_length;
    options.pyramid_decay = cfg.pyramid_decay;
    return allocate(scores, budget, window, base_from_fraction(cfg.base_fraction, budget, n),
                    cfg.allocation, options);
}

EvictionResult run_policy(const AttentionTrace& trace, Policy policy, double ratio,
                          const HeadScoreMatrix& scores, const SimulationConfig& cfg) {
    const EvictionPoint point = resolve_eviction_point(trace, cfg);
    const std::size_t capacity = capacity_for_ratio(ratio, point.context_length);
    const auto window = [&] {
        return build_observation_window(trace, cfg.observation_width, point.step);
    };
    const auto check_scores = [&] {
        if (scores.num_layers != trace.num_layers() || scores.num_heads != trace.num_heads()) {
            throw DimensionMismatchError(
                "head scores are " + std::to_string(scores.num_layers) + "x" +
                std::to_string(scores.num_heads) + " but the trace is " +
                std::to_string(trace.num_layers()) + "x" + std::to_string(trace.num_heads()));
        }
    };
    switch (policy) {
        case Policy::snapkv:
            return select_snapkv(window(), capacity, cfg.pool_width, cfg.recent);
        case Policy::snapkv_sss:
            return select_snapkv_sss(window(), capacity, cfg.sss, cfg.recent);
        case Policy::audiokv_no_sss:
        case Policy::audiokv: {
            check_scores();
            const BudgetPlan plan = audiokv_plan(scores, ratio, point.context_length, cfg);
            std::optional<SssConfig> sss;
            if (policy == Policy::audiokv) {
                sss = cfg.sss;
            }
            return select_audiokv(window(), plan, sss, cfg.recent);
        }
        case Policy::h2o:
            return select_h2o(trace, capacity, cfg.recent, point.step);
        case Policy::adakv:
            return select_adakv(window(), capacity * trace.num_heads(), cfg.recent, cfg.pool_width);
        case Policy::pyramidkv: {
            const std::size_t n = trace.num_head_slots();
            AllocationOptions options;
            options.head_cap = point.context_length;
            options.pyramid_decay = cfg.pyramid_decay;
            const BudgetPlan plan =
                allocate(HeadScoreMatrix::zeros(trace.num_layers(), trace.num_heads()), capacity * n,
                         std::min(cfg.recent, point.context_length), 0, AllocationMode::pyramid,
                         options);
            return select_pyramidkv(window(), plan, cfg.pool_width, cfg.recent);
        }
    }
    throw ConfigError("unknown policy");
}

RetentionReport evaluate(const AttentionTrace& trace, const EvictionResult& result, double ratio,
                         const SimulationConfig& cfg, const KvGeometry& geom) {
    const EvictionPoint point = resolve_eviction_point(trace, cfg);
    const ObservationWindow future =
        truncate_window(build_observation_window(trace, point.horizon, point.step + point.horizon),
                        result.context_length);
    RetentionReport report;
    report.policy_name = result.policy_name;
    report.retention_ratio = ratio;
    report.oracle_overlap = oracle_overlap(result, trace, point.horizon);
    report.mass_retained = retained_mass(result, future);
    report.coverage_entropy = coverage_entropy(result, cfg.bins);
    report.memory_bytes = memory_footprint(result, geom);
    return report;
}

std::vector<RetentionReport> run_comparison(const AttentionTrace& trace,
                                            std::span<const Policy> policies,
                                            std::span<const double> ratios,
                                            const HeadScoreMatrix& scores,
                                            const SimulationConfig& cfg, const KvGeometry& geom) {
    std::vector<RetentionReport> reports;
    reports.reserve(policies.size() * ratios.size());
    for (const Policy policy : policies) {
        for (const double ratio : ratios) {
            const EvictionResult result = run_policy(trace, policy, ratio, scores, cfg);
            reports.push_back(evaluate(trace, result, ratio, cfg, geom));
        }
    }
    return reports;
}

std::string reports_to_csv(std::span<const RetentionReport> reports) {
    std::string out = "policy,ratio,overlap,mass,entropy,bytes\n";
    char line[256];
    for (const RetentionReport& r : reports) {
        std::snprintf(line, sizeof line, "%s,%.4g,%.6f,%.6f,%.6f,%zu\n", r.policy_name.c_str(),
                      r.retention_ratio, r.oracle_overlap, r.mass_retained, r.coverage_entropy,
                      r.memory_bytes);
        out += line;
    }
    return out;
}

}  // namespace audiokv
