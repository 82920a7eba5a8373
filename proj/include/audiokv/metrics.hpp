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

#include "audiokv/budget.hpp"
#include "audiokv/eviction.hpp"
#include "audiokv/head_scoring.hpp"
#include "audiokv/spectral.hpp"
#include "audiokv/trace.hpp"

namespace audiokv {

struct KvGeometry {
    static constexpr std::size_t kv_pair_factor = 2;
    std::size_t head_dim = 128;
    std::size_t bytes_per_element = 2;
};

struct RetentionReport {
    std::string policy_name;
    double retention_ratio = 0.0;
    double oracle_overlap = 0.0;
    double coverage_entropy = 0.0;
    double mass_retained = 0.0;
    std::size_t memory_bytes = 0;
};

/// Step at which a result's context was current, plus one: the first step
/// the evicted cache would serve. Throws DimensionMismatchError when no step
/// of the trace has the result's context length.
std::size_t eviction_step_of(const EvictionResult& result, const AttentionTrace& trace);

/// Mean over heads of |retained & oracle| / |oracle|, where the oracle holds
/// the |retained| indices with the most attention over the next `horizon`
/// steps. Throws HorizonError when those steps do not exist.
double oracle_overlap(const EvictionResult& result, const AttentionTrace& trace,
                      std::size_t horizon);

/// Mean over heads of the share of window score that the retained indices
/// hold. Heads whose window row is all zero count as 1.
double retained_mass(const EvictionResult& result, const ObservationWindow& window);

/// Mean over heads of the natural-log entropy of retained indices bucketed
/// into `bins` equal-width bins over [0, context).
double coverage_entropy(const EvictionResult& result, std::size_t bins);
/// Same for a single index set.
double index_entropy(std::span<const std::size_t> indices, std::size_t context_length,
                     std::size_t bins);

std::size_t memory_footprint(const EvictionResult& result, const KvGeometry& geom);

/// Keeps the first `context_length` positions of every row.
ObservationWindow truncate_window(const ObservationWindow& window, std::size_t context_length);

enum class Policy { snapkv, snapkv_sss, audiokv_no_sss, audiokv, h2o, adakv, pyramidkv };

std::string policy_name(Policy policy);
/// Throws ConfigError for unknown names.
Policy parse_policy(std::string_view name);

/// SnapKV, SnapKV+SSS, AudioKV without SSS, AudioKV.
std::vector<Policy> ablation_policies();

struct SimulationConfig {
    std::size_t observation_width = 32;
    /// Defaults to observation_width: evict right after the first window.
    std::optional<std::size_t> eviction_step;
    /// Defaults to every step after the eviction point.
    std::optional<std::size_t> horizon;
    std::size_t recent = 32;
    std::size_t pool_width = kDefaultPoolWidth;
    std::size_t bins = 10;
    double base_fraction = 0.5;
    AllocationMode allocation = AllocationMode::combined;
    double pyramid_decay = 0.8;
    SssConfig sss;
};

struct EvictionPoint {
    std::size_t step = 0;            // first future step
    std::size_t context_length = 0;  // cache size at eviction
    std::size_t horizon = 0;
};

EvictionPoint resolve_eviction_point(const AttentionTrace& trace, const SimulationConfig& cfg);

/// Per-head capacity for a retention ratio: floor(ratio * context).
std::size_t capacity_for_ratio(double ratio, std::size_t context_length);

/// Plan AudioKV runs under at a retention ratio.
BudgetPlan audiokv_plan(const HeadScoreMatrix& scores, double ratio, std::size_t context_length,
                        const SimulationConfig& cfg);

EvictionResult run_policy(const AttentionTrace& trace, Policy policy, double ratio,
                          const HeadScoreMatrix& scores, const SimulationConfig& cfg);

RetentionReport evaluate(const AttentionTrace& trace, const EvictionResult& result, double ratio,
                         const SimulationConfig& cfg, const KvGeometry& geom);

/// One report per (policy, ratio), policy-major in the given orders.
std::vector<RetentionReport> run_comparison(const AttentionTrace& trace,
                                            std::span<const Policy> policies,
                                            std::span<const double> ratios,
                                            const HeadScoreMatrix& scores,
                                            const SimulationConfig& cfg, const KvGeometry& geom);

/// CSV with header policy,ratio,overlap,mass,entropy,bytes; fixed precision.
std::string reports_to_csv(std::span<const RetentionReport> reports);

}  // namespace audiokv
