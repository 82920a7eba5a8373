// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "audiokv/budget.hpp"
#include "audiokv/eviction.hpp"
#include "audiokv/head_scoring.hpp"
#include "audiokv/metrics.hpp"

namespace audiokv {

/// {"num_layers", "num_heads", "num_samples", "scores": [[...], ...]}
std::string scores_to_json(const HeadScoreMatrix& scores);
HeadScoreMatrix scores_from_json(const std::string& text);
HeadScoreMatrix load_scores(const std::filesystem::path& path);

/// {"window", "base", "budget", "mode", "capacities": [[...], ...]}
std::string plan_to_json(const BudgetPlan& plan);
BudgetPlan plan_from_json(const std::string& text);

/// Policy name, plan summary and per-head retained index arrays.
std::string result_to_json(const EvictionResult& result);

std::string reports_to_json(std::span<const RetentionReport> reports);

/// Writes text to a file, throwing IoError on failure.
void write_file(const std::filesystem::path& path, const std::string& text);
/// Reads a whole file, throwing IoError naming the path when it cannot.
std::string read_file(const std::filesystem::path& path);

}  // namespace audiokv
