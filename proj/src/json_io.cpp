// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/json_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "audiokv/error.hpp"

namespace audiokv {

namespace {

using nlohmann::json;

json parse_or_throw(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

template <typename T>
T field(const json& doc, const char* key, const char* what) {
    const auto it = doc.find(key);
    if (it == doc.end()) {
        throw FormatError(std::string(what) + " has no '" + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw FormatError(std::string(what) + " field '" + key + "' has the wrong type");
    }
}

template <typename T>
json grid(const std::vector<T>& values, std::size_t rows, std::size_t cols) {
    json out = json::array();
    for (std::size_t r = 0; r < rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < cols; ++c) {
            row.push_back(values[r * cols + c]);
        }
        out.push_back(std::move(row));
    }
    return out;
}

template <typename T>
std::vector<T> flatten(const json& doc, const char* key, std::size_t rows, std::size_t cols,
                       const char* what) {
    const auto nested = field<std::vector<std::vector<T>>>(doc, key, what);
    if (nested.size() != rows) {
        throw DimensionMismatchError(std::string(what) + ": expected " + std::to_string(rows) +
                                     " rows in '" + key + "'");
    }
    std::vector<T> flat;
    flat.reserve(rows * cols);
    for (const auto& row : nested) {
        if (row.size() != cols) {
            throw DimensionMismatchError(std::string(what) + ": expected " +
                                         std::to_string(cols) + " columns in '" + key + "'");
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
}

}  // namespace

std::string scores_to_json(const HeadScoreMatrix& scores) {
    json doc = {{"num_layers", scores.num_layers},
                {"num_heads", scores.num_heads},
                {"num_samples", scores.num_samples},
                {"scores", grid(scores.scores, scores.num_layers, scores.num_heads)}};
    return doc.dump(2) + "\n";
}

HeadScoreMatrix scores_from_json(const std::string& text) {
    const json doc = parse_or_throw(text, "head-score file");
    HeadScoreMatrix m;
    m.num_layers = field<std::size_t>(doc, "num_layers", "head-score file");
    m.num_heads = field<std::size_t>(doc, "num_heads", "head-score file");
    m.num_samples = field<std::size_t>(doc, "num_samples", "head-score file");
    m.scores = flatten<double>(doc, "scores", m.num_layers, m.num_heads, "head-score file");
    for (const double s : m.scores) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw FormatError("head scores must lie in [0, 1]");
        }
    }
    return m;
}

HeadScoreMatrix load_scores(const std::filesystem::path& path) {
    try {
        return scores_from_json(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string plan_to_json(const BudgetPlan& plan) {
    json doc = {{"window", plan.window},
                {"base", plan.base},
                {"budget", plan.global_budget},
                {"mode", to_string(plan.mode)},
                {"capacities", grid(plan.capacities, plan.num_layers, plan.num_heads)}};
    return doc.dump(2) + "\n";
}

BudgetPlan plan_from_json(const std::string& text) {
    const json doc = parse_or_throw(text, "plan file");
    BudgetPlan plan;
    plan.window = field<std::size_t>(doc, "window", "plan file");
    plan.base = field<std::size_t>(doc, "base", "plan file");
    plan.global_budget = field<std::size_t>(doc, "budget", "plan file");
    plan.mode = parse_allocation_mode(field<std::string>(doc, "mode", "plan file"));
    const auto nested = field<std::vector<std::vector<std::size_t>>>(doc, "capacities", "plan file");
    plan.num_layers = nested.size();
    plan.num_heads = nested.empty() ? 0 : nested.front().size();
    plan.capacities = flatten<std::size_t>(doc, "capacities", plan.num_layers, plan.num_heads,
                                           "plan file");
    return plan;
}

std::string result_to_json(const EvictionResult& result) {
    json retained = json::array();
    for (std::size_t layer = 0; layer < result.num_layers; ++layer) {
        json heads = json::array();
        for (std::size_t head = 0; head < result.num_heads; ++head) {
            heads.push_back(result.retained_at(layer, head));
        }
        retained.push_back(std::move(heads));
    }
    json doc = {{"policy", result.policy_name},
                {"num_layers", result.num_layers},
                {"num_heads", result.num_heads},
                {"context_length", result.context_length},
                {"recent", result.recent},
                {"plan",
                 {{"window", result.plan.window},
                  {"base", result.plan.base},
                  {"budget", result.plan.global_budget},
                  {"mode", to_string(result.plan.mode)},
                  {"capacities",
                   grid(result.plan.capacities, result.plan.num_layers, result.plan.num_heads)}}},
                {"retained", std::move(retained)}};
    return doc.dump() + "\n";
}

std::string reports_to_json(std::span<const RetentionReport> reports) {
    json doc = json::array();
    for (const RetentionReport& r : reports) {
        doc.push_back({{"policy", r.policy_name},
                       {"ratio", r.retention_ratio},
                       {"overlap", r.oracle_overlap},
                       {"mass", r.mass_retained},
                       {"entropy", r.coverage_entropy},
                       {"bytes", r.memory_bytes}});
    }
    return doc.dump(2) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace audiokv
