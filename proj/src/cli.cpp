// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "audiokv/budget.hpp"
#include "audiokv/error.hpp"
#include "audiokv/eviction.hpp"
#include "audiokv/fixtures.hpp"
#include "audiokv/head_scoring.hpp"
#include "audiokv/json_io.hpp"
#include "audiokv/metrics.hpp"
#include "audiokv/spectral.hpp"
#include "audiokv/trace_io.hpp"

namespace audiokv {

namespace {

using nlohmann::json;

struct Options {
    RunConfig cfg;
    std::string config_path;
    std::string ratios_text;
    std::string profile{kProfileSpikePlateau};
    std::string scores_path;
    std::string tokens_path;
    std::string input_path;
    std::string json_path;
    std::string mode = "combined";
    std::string policy = "audiokv";
    std::size_t budget = 0;
    std::size_t head_cap = 0;
    std::size_t transition_bins = 0;
    std::size_t sparse_top_m = 0;
    std::size_t head_dim = 128;
    std::size_t bytes_per_element = 2;
    double ratio = 0.4;

    // RunConfig field name -> flag, so a config file only fills unset fields.
    std::map<std::string, CLI::Option*> run_flags;
    CLI::Option* transition_flag = nullptr;
    CLI::Option* head_cap_flag = nullptr;
};

enum Field : unsigned {
    kTrace = 1u << 0,
    kAlignment = 1u << 1,
    kOutput = 1u << 2,
    kTau = 1u << 3,
    kTopK = 1u << 4,
    kWindow = 1u << 5,
    kBaseFraction = 1u << 6,
    kCutoff = 1u << 7,
    kAlpha = 1u << 8,
    kRatios = 1u << 9,
    kSeed = 1u << 10,
};

void add_run_flags(CLI::App* cmd, Options& o, unsigned fields) {
    auto add = [&](unsigned bit, const char* field, CLI::Option* opt) {
        if (fields & bit) {
            o.run_flags[field] = opt;
        }
    };
    if (fields & kTrace) {
        add(kTrace, "trace_path", cmd->add_option("--trace-path", o.cfg.trace_path, "Attention trace file"));
    }
    if (fields & kAlignment) {
        add(kAlignment, "alignment_path",
            cmd->add_option("--alignment-path", o.cfg.alignment_path, "WhisperX word alignment JSON"));
    }
    if (fields & kOutput) {
        add(kOutput, "output_path", cmd->add_option("--output-path", o.cfg.output_path, "Output file"));
    }
    if (fields & kTau) {
        add(kTau, "tau", cmd->add_option("--tau", o.cfg.tau, "Word confidence threshold"));
    }
    if (fields & kTopK) {
        add(kTopK, "top_k", cmd->add_option("--top-k", o.cfg.top_k, "Attended tokens per step for scoring"));
    }
    if (fields & kWindow) {
        add(kWindow, "window",
            cmd->add_option("--window", o.cfg.window, "Recent window and observation window width"));
    }
    if (fields & kBaseFraction) {
        add(kBaseFraction, "base_fraction",
            cmd->add_option("--base-fraction", o.cfg.base_fraction, "Base share r of the even per-head budget"));
    }
    if (fields & kCutoff) {
        add(kCutoff, "cutoff_ratio",
            cmd->add_option("--cutoff-ratio", o.cfg.cutoff_ratio, "Spectral energy kept by the low-pass"));
    }
    if (fields & kAlpha) {
        add(kAlpha, "mix_alpha", cmd->add_option("--mix-alpha", o.cfg.mix_alpha, "Weight of the smoothed signal"));
    }
    if (fields & kRatios) {
        add(kRatios, "retention_ratios",
            cmd->add_option("--retention-ratios", o.ratios_text, "Comma-separated retention ratios"));
    }
    if (fields & kSeed) {
        add(kSeed, "seed", cmd->add_option("--seed", o.cfg.seed, "Random seed"));
    }
    cmd->add_option("--config", o.config_path, "JSON file with RunConfig fields");
}

template <typename T>
void take(const json& doc, const Options& o, const char* key, T& target) {
    const auto flag = o.run_flags.find(key);
    if (flag == o.run_flags.end() || flag->second->count() > 0 || !doc.contains(key)) {
        return;
    }
    try {
        target = doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

// Flags beat the config file, which beats the defaults.
void resolve_config(Options& o) {
    if (!o.config_path.empty()) {
        json doc;
        try {
            doc = json::parse(read_file(o.config_path));
        } catch (const json::parse_error& e) {
            throw ConfigError(o.config_path + ": " + e.what());
        }
        if (!doc.is_object()) {
            throw ConfigError(o.config_path + ": config must be a JSON object");
        }
        take(doc, o, "trace_path", o.cfg.trace_path);
        take(doc, o, "alignment_path", o.cfg.alignment_path);
        take(doc, o, "output_path", o.cfg.output_path);
        take(doc, o, "tau", o.cfg.tau);
        take(doc, o, "top_k", o.cfg.top_k);
        take(doc, o, "window", o.cfg.window);
        take(doc, o, "base_fraction", o.cfg.base_fraction);
        take(doc, o, "cutoff_ratio", o.cfg.cutoff_ratio);
        take(doc, o, "mix_alpha", o.cfg.mix_alpha);
        take(doc, o, "seed", o.cfg.seed);
        const auto flag = o.run_flags.find("retention_ratios");
        if (flag != o.run_flags.end() && flag->second->count() == 0 &&
            doc.contains("retention_ratios")) {
            std::vector<double> ratios;
            take(doc, o, "retention_ratios", ratios);
            if (ratios.empty()) {
                throw ConfigError("retention ratio list is empty");
            }
            o.cfg.retention_ratios = ratios;
        }
    }
    const auto flag = o.run_flags.find("retention_ratios");
    if (flag != o.run_flags.end() && flag->second->count() > 0) {
        o.cfg.retention_ratios = parse_ratio_list(o.ratios_text);
    }
    for (const double r : o.cfg.retention_ratios) {
        capacity_for_ratio(r, 1);  // validates the range
    }
    if (!(o.cfg.tau >= 0.0 && o.cfg.tau <= 1.0)) {
        throw ConfigError("tau must be in [0, 1]");
    }
    if (o.cfg.top_k == 0) {
        throw ConfigError("top-k must be at least 1");
    }
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw ConfigError(std::string(flag) + " is required");
    }
}

SssConfig sss_config(const Options& o) {
    SssConfig sss;
    sss.cutoff_ratio = o.cfg.cutoff_ratio;
    sss.mix_alpha = o.cfg.mix_alpha;
    if (o.transition_flag && o.transition_flag->count() > 0) {
        sss.transition_bins = o.transition_bins;
    }
    sss.validate();
    return sss;
}

SimulationConfig simulation_config(const Options& o) {
    SimulationConfig sim;
    sim.observation_width = o.cfg.window;
    sim.recent = o.cfg.window;
    sim.base_fraction = o.cfg.base_fraction;
    sim.allocation = parse_allocation_mode(o.mode);
    sim.sss = sss_config(o);
    return sim;
}

AttentionTrace load_trace_with_tokens(const Options& o) {
    require(o.cfg.trace_path, "--trace-path");
    AttentionTrace trace = load_trace(o.cfg.trace_path);
    if (!o.tokens_path.empty()) {
        trace = trace.with_token_texts(load_token_texts(o.tokens_path));
    }
    return trace;
}

HeadScoreMatrix scores_for(const Options& o, const AttentionTrace& trace) {
    if (!o.scores_path.empty()) {
        return load_scores(o.scores_path);
    }
    if (o.cfg.alignment_path.empty()) {
        throw ConfigError("either --scores-path or --alignment-path is required");
    }
    return score_trace(trace, load_alignment(o.cfg.alignment_path), o.cfg.tau, {o.cfg.top_k});
}

void emit(const Options& o, const std::string& text, std::ostream& out) {
    if (o.cfg.output_path.empty()) {
        out << text;
    } else {
        write_file(o.cfg.output_path, text);
    }
}

int cmd_gen_fixture(const Options& o, std::ostream& out) {
    require(o.cfg.output_path, "--output-path");
    const Fixture fixture = generate_fixture(o.profile, o.cfg.seed);
    TraceEncoding encoding;
    encoding.sparse = o.sparse_top_m > 0;
    encoding.top_m = o.sparse_top_m;
    const std::filesystem::path trace_path = o.cfg.output_path;
    save_trace(trace_path, fixture.trace, encoding);
    save_token_texts(default_tokens_path(trace_path), fixture.trace);
    const std::filesystem::path alignment_path =
        o.cfg.alignment_path.empty() ? std::filesystem::path(trace_path.string() + ".alignment.json")
                                     : std::filesystem::path(o.cfg.alignment_path);
    save_alignment(alignment_path, fixture.words);

    out << "wrote " << trace_path.string() << " (" << fixture.trace.num_layers() << " layers, "
        << fixture.trace.num_heads() << " heads, " << fixture.trace.num_steps() << " steps)\n";
    out << "wrote " << alignment_path.string() << " (" << fixture.words.size() << " words)\n";
    out << "planted heads:";
    for (const std::size_t slot : fixture.planted_heads) {
        out << " L" << slot / fixture.trace.num_heads() << "H" << slot % fixture.trace.num_heads();
    }
    out << "\n";
    return kExitOk;
}

int cmd_score_heads(const Options& o, std::ostream& out) {
    require(o.cfg.alignment_path, "--alignment-path");
    require(o.cfg.output_path, "--output-path");
    const AttentionTrace trace = load_trace_with_tokens(o);
    const auto words = load_alignment(o.cfg.alignment_path);
    const HeadScoreMatrix scores = score_trace(trace, words, o.cfg.tau, {o.cfg.top_k});
    write_file(o.cfg.output_path, scores_to_json(scores));

    out << "scored " << scores.num_samples << " word-aligned steps\n";
    char line[128];
    for (std::size_t layer = 0; layer < scores.num_layers; ++layer) {
        double sum = 0.0;
        std::size_t best = 0;
        for (std::size_t head = 0; head < scores.num_heads; ++head) {
            sum += scores.at(layer, head);
            if (scores.at(layer, head) > scores.at(layer, best)) {
                best = head;
            }
        }
        std::snprintf(line, sizeof line, "layer %zu: mean %.4f max %.4f (head %zu)\n", layer,
                      sum / static_cast<double>(scores.num_heads), scores.at(layer, best), best);
        out << line;
    }
    return kExitOk;
}

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r");
    return std::string(s.substr(begin, end - begin + 1));
}

double parse_real(const std::string& text, std::size_t line_no) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw FormatError("line " + std::to_string(line_no) + ": '" + text +
                          "' is not a finite number");
    }
    return value;
}

int cmd_smooth(const Options& o, std::ostream& out) {
    require(o.input_path, "--input-path");
    const SssConfig sss_cfg = sss_config(o);
    std::istringstream in(read_file(o.input_path));
    std::vector<std::vector<double>> columns;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        std::vector<double> cells;
        std::stringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ',')) {
            cells.push_back(parse_real(trim(cell), line_no));
        }
        if (columns.empty()) {
            columns.resize(cells.size());
        } else if (cells.size() != columns.size()) {
            throw FormatError("line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(columns.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            columns[c].push_back(cells[c]);
        }
    }
    if (columns.empty()) {
        throw FormatError(o.input_path + " holds no values");
    }
    for (auto& column : columns) {
        column = sss(column, sss_cfg);
    }
    std::string text;
    char buf[64];
    for (std::size_t r = 0; r < columns.front().size(); ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::snprintf(buf, sizeof buf, c == 0 ? "%.17g" : ",%.17g", columns[c][r]);
            text += buf;
        }
        text += "\n";
    }
    emit(o, text, out);
    return kExitOk;
}

int cmd_allocate(const Options& o, std::ostream& out) {
    require(o.scores_path, "--scores-path");
    const HeadScoreMatrix scores = load_scores(o.scores_path);
    const std::size_t n = scores.num_layers * scores.num_heads;
    AllocationOptions options;
    if (o.head_cap_flag->count() > 0) {
        options.head_cap = o.head_cap;
    }
    const BudgetPlan plan =
        allocate(scores, o.budget, o.cfg.window, base_from_fraction(o.cfg.base_fraction, o.budget, n),
                 parse_allocation_mode(o.mode), options);
    emit(o, plan_to_json(plan), out);
    return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    require(o.cfg.output_path, "--output-path");
    const AttentionTrace trace = load_trace_with_tokens(o);
    const Policy policy = parse_policy(o.policy);
    const bool needs_scores = policy == Policy::audiokv || policy == Policy::audiokv_no_sss;
    const HeadScoreMatrix scores = needs_scores
                                       ? scores_for(o, trace)
                                       : HeadScoreMatrix::zeros(trace.num_layers(), trace.num_heads());
    const SimulationConfig sim = simulation_config(o);
    const KvGeometry geom{o.head_dim, o.bytes_per_element};
    const EvictionResult result = run_policy(trace, policy, o.ratio, scores, sim);
    write_file(o.cfg.output_path, result_to_json(result));
    const RetentionReport report = evaluate(trace, result, o.ratio, sim, geom);
    out << reports_to_csv(std::span<const RetentionReport>(&report, 1));
    return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
    const AttentionTrace trace = load_trace_with_tokens(o);
    const HeadScoreMatrix scores = scores_for(o, trace);
    const SimulationConfig sim = simulation_config(o);
    const KvGeometry geom{o.head_dim, o.bytes_per_element};
    const auto policies = ablation_policies();
    const auto reports =
        run_comparison(trace, policies, o.cfg.retention_ratios, scores, sim, geom);
    emit(o, reports_to_csv(reports), out);
    if (!o.json_path.empty()) {
        write_file(o.json_path, reports_to_json(reports));
    }
    return kExitOk;
}

}  // namespace

std::vector<double> parse_ratio_list(std::string_view text) {
    std::vector<double> ratios;
    std::string token;
    const auto flush = [&] {
        const std::string t = trim(token);
        token.clear();
        if (t.empty()) {
            return;
        }
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            throw ConfigError("'" + t + "' is not a retention ratio");
        }
        capacity_for_ratio(value, 1);  // validates (0, 1]
        ratios.push_back(value);
    };
    for (const char c : text) {
        if (c == ',' || c == ' ') {
            flush();
        } else {
            token.push_back(c);
        }
    }
    flush();
    if (ratios.empty()) {
        throw ConfigError("retention ratio list is empty");
    }
    return ratios;
}

int report_current_exception(std::ostream& err) {
    try {
        throw;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (...) {
        err << "internal error: unknown exception\n";
        return kExitInternal;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"AudioKV: trace-driven KV-cache eviction with audio-aware head budgets"};
    app.name("audiokv");
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("gen-fixture", "Write a synthetic trace, token texts and alignment");
    add_run_flags(gen, o, kOutput | kAlignment | kSeed);
    gen->add_option("--profile", o.profile, "specialized-heads, spike-plateau or uniform");
    gen->add_option("--sparse-top-m", o.sparse_top_m, "Store only the top M entries per row");

    auto* score = app.add_subcommand("score-heads", "Score heads by audio-span top-k hits");
    add_run_flags(score, o, kTrace | kAlignment | kOutput | kTau | kTopK);
    score->add_option("--tokens-path", o.tokens_path, "Token text JSON (default: trace sidecar)");

    auto* smooth = app.add_subcommand("smooth", "Spectral score smoothing of CSV columns");
    add_run_flags(smooth, o, kOutput | kCutoff | kAlpha);
    smooth->add_option("--input-path", o.input_path, "CSV, one signal per column");
    o.transition_flag =
        smooth->add_option("--transition-bins", o.transition_bins, "Cosine roll-off width in bins");

    auto* alloc = app.add_subcommand("allocate", "Turn head scores into per-head capacities");
    add_run_flags(alloc, o, kOutput | kWindow | kBaseFraction);
    alloc->add_option("--scores-path", o.scores_path, "Head-score JSON");
    alloc->add_option("--budget", o.budget, "Global token budget")->required();
    alloc->add_option("--mode", o.mode, "combined, proportional_floor, uniform or pyramid");
    o.head_cap_flag = alloc->add_option("--head-cap", o.head_cap, "Largest capacity of any head");

    auto* simulate = app.add_subcommand("simulate", "Run one policy at one retention ratio");
    add_run_flags(simulate, o,
                  kTrace | kAlignment | kOutput | kTau | kTopK | kWindow | kBaseFraction | kCutoff |
                      kAlpha);
    simulate->add_option("--scores-path", o.scores_path, "Head-score JSON");
    simulate->add_option("--tokens-path", o.tokens_path, "Token text JSON");
    simulate->add_option("--policy", o.policy,
                         "snapkv, snapkv+sss, audiokv-sss, audiokv, h2o, adakv or pyramidkv");
    simulate->add_option("--ratio", o.ratio, "Retention ratio");
    simulate->add_option("--mode", o.mode, "AudioKV allocation mode");
    simulate->add_option("--head-dim", o.head_dim, "Head dimension for memory accounting");
    simulate->add_option("--bytes-per-element", o.bytes_per_element, "KV element size");

    auto* compare = app.add_subcommand("compare", "SnapKV / SnapKV+SSS / AudioKV-SSS / AudioKV grid");
    add_run_flags(compare, o,
                  kTrace | kAlignment | kOutput | kTau | kTopK | kWindow | kBaseFraction | kCutoff |
                      kAlpha | kRatios);
    compare->add_option("--scores-path", o.scores_path, "Head-score JSON");
    compare->add_option("--tokens-path", o.tokens_path, "Token text JSON");
    compare->add_option("--json-path", o.json_path, "Also write the reports as JSON");
    compare->add_option("--mode", o.mode, "AudioKV allocation mode");
    compare->add_option("--head-dim", o.head_dim, "Head dimension for memory accounting");
    compare->add_option("--bytes-per-element", o.bytes_per_element, "KV element size");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        resolve_config(o);
        if (gen->parsed()) {
            return cmd_gen_fixture(o, out);
        }
        if (score->parsed()) {
            return cmd_score_heads(o, out);
        }
        if (smooth->parsed()) {
            return cmd_smooth(o, out);
        }
        if (alloc->parsed()) {
            return cmd_allocate(o, out);
        }
        if (simulate->parsed()) {
            return cmd_simulate(o, out);
        }
        return cmd_compare(o, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (...) {
        return report_current_exception(err);
    }
}

}  // namespace audiokv
