// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/head_scoring.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "audiokv/error.hpp"
#include "audiokv/parallel.hpp"

namespace audiokv {

namespace {

template <typename T>
std::vector<std::size_t> topk_impl(std::span<const T> row, std::size_t k) {
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t m = std::min(k, row.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return row[a] != row[b] ? row[a] > row[b] : a < b;
                      });
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

HeadScoreMatrix HeadScoreMatrix::zeros(std::size_t num_layers, std::size_t num_heads) {
    HeadScoreMatrix m;
    m.num_layers = num_layers;
    m.num_heads = num_heads;
    m.scores.assign(num_layers * num_heads, 0.0);
    return m;
}

std::vector<std::size_t> topk_indices(std::span<const float> row, std::size_t k) {
    return topk_impl(row, k);
}

std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k) {
    return topk_impl(row, k);
}

double step_hit_ratio(std::span<const std::size_t> topk, const AudioSpan& span, std::size_t k) {
    if (k == 0) {
        throw ConfigError("top-k must be at least 1");
    }
    const auto hits = std::count_if(topk.begin(), topk.end(),
                                    [&](std::size_t i) { return span.contains(i); });
    return static_cast<double>(hits) / static_cast<double>(k);
}

HeadScoreMatrix score_heads(const AttentionTrace& trace, std::span<const WordAlignment> words,
                            const WordStepMap& map, TopKConfig cfg) {
    if (cfg.k == 0) {
        throw ConfigError("top-k must be at least 1");
    }
    HeadScoreMatrix result = HeadScoreMatrix::zeros(trace.num_layers(), trace.num_heads());
    if (map.empty()) {
        return result;
    }

    struct Sample {
        std::size_t step;
        AudioSpan span;
    };
    std::vector<Sample> samples;
    for (const WordStepMap::Entry& entry : map.entries) {
        if (entry.word_index >= words.size()) {
            throw LengthMismatchError("word map refers to word " +
                                      std::to_string(entry.word_index) + " of " +
                                      std::to_string(words.size()));
        }
        const AudioSpan span = word_to_audio_span(words[entry.word_index], trace);
        for (const std::size_t t : entry.step_indices) {
            if (t >= trace.num_steps()) {
                throw LengthMismatchError("word map refers to step " + std::to_string(t) +
                                          " of a " + std::to_string(trace.num_steps()) +
                                          "-step trace");
            }
            samples.push_back({t, span});
        }
    }

    const std::size_t heads = trace.num_heads();
    parallel_for(trace.num_head_slots(), [&](std::size_t slot) {
        const std::size_t layer = slot / heads;
        const std::size_t head = slot % heads;
        double total = 0.0;
        for (const Sample& s : samples) {
            const auto top = topk_indices(trace.row(s.step, layer, head), cfg.k);
            total += step_hit_ratio(top, s.span, cfg.k);
        }
        result.scores[slot] = total / static_cast<double>(samples.size());
    });
    result.num_samples = samples.size();
    return result;
}

HeadScoreMatrix score_trace(const AttentionTrace& trace, std::span<const WordAlignment> words,
                            double tau, TopKConfig cfg) {
    const std::vector<WordAlignment> kept = filter_words(words, tau);
    const WordStepMap map = align_generated_to_words(trace.steps(), kept);
    return score_heads(trace, kept, map, cfg);
}

HeadScoreMatrix merge_scores(const HeadScoreMatrix& a, const HeadScoreMatrix& b) {
    if (a.num_layers != b.num_layers || a.num_heads != b.num_heads ||
        a.scores.size() != b.scores.size()) {
        throw DimensionMismatchError("cannot merge a " + std::to_string(a.num_layers) + "x" +
                                     std::to_string(a.num_heads) + " score matrix with a " +
                                     std::to_string(b.num_layers) + "x" +
                                     std::to_string(b.num_heads) + " one");
    }
    if (b.num_samples == 0) {
        return a;
    }
    if (a.num_samples == 0) {
        return b;
    }
    HeadScoreMatrix merged = HeadScoreMatrix::zeros(a.num_layers, a.num_heads);
    merged.num_samples = a.num_samples + b.num_samples;
    const double na = static_cast<double>(a.num_samples);
    const double nb = static_cast<double>(b.num_samples);
    const double n = static_cast<double>(merged.num_samples);
    for (std::size_t i = 0; i < merged.scores.size(); ++i) {
        merged.scores[i] = (a.scores[i] * na + b.scores[i] * nb) / n;
    }
    return merged;
}

}  // namespace audiokv
