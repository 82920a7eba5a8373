// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "audiokv/error.hpp"

namespace audiokv {

namespace {

void validate_header(const AttentionTrace::Header& header) {
    if (header.num_layers == 0 || header.num_heads == 0) {
        throw FormatError("trace must have at least one layer and one head");
    }
    if (!std::isfinite(header.total_duration_s) || header.total_duration_s < 0.0) {
        throw FormatError("trace duration must be finite and non-negative");
    }
}

void validate_rows(const DecodingStep& step, std::size_t slots, bool rows_are_complete) {
    const std::size_t length = step.context_length;
    for (std::size_t slot = 0; slot < slots; ++slot) {
        const float* row = step.attention.data() + slot * length;
        double sum = 0.0;
        for (std::size_t i = 0; i < length; ++i) {
            const double v = row[i];
            if (!std::isfinite(v) || v < 0.0) {
                throw IntegrityError("step " + std::to_string(step.step_index) +
                                     ": attention value is negative or not finite");
            }
            sum += v;
        }
        const bool ok = rows_are_complete ? std::abs(sum - 1.0) <= kRowSumTolerance
                                          : sum <= 1.0 + kRowSumTolerance;
        if (!ok) {
            throw IntegrityError("step " + std::to_string(step.step_index) + ", row " +
                                 std::to_string(slot) + ": attention sums to " +
                                 std::to_string(sum));
        }
    }
}

}  // namespace

AttentionTrace AttentionTrace::create(Header header, std::vector<DecodingStep> steps,
                                      bool rows_are_complete) {
    validate_header(header);
    if (steps.empty()) {
        throw FormatError("trace has no decoding steps");
    }
    const std::size_t slots = header.num_layers * header.num_heads;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const DecodingStep& step = steps[t];
        if (step.context_length == 0) {
            throw FormatError("step " + std::to_string(t) + " has an empty context");
        }
        if (step.attention.size() != slots * step.context_length) {
            throw FormatError("step " + std::to_string(t) + " holds " +
                              std::to_string(step.attention.size()) + " values, expected " +
                              std::to_string(slots * step.context_length));
        }
        if (t > 0) {
            if (step.context_length <= steps[t - 1].context_length) {
                throw IntegrityError("context length is not strictly increasing at step " +
                                     std::to_string(t));
            }
            if (step.step_index <= steps[t - 1].step_index) {
                throw IntegrityError("step indices are not strictly increasing at step " +
                                     std::to_string(t));
            }
        }
        validate_rows(step, slots, rows_are_complete);
    }
    if (header.audio_start + header.audio_count > steps.front().context_length) {
        throw IntegrityError("audio span [" + std::to_string(header.audio_start) + ", +" +
                             std::to_string(header.audio_count) +
                             ") exceeds the shortest context length " +
                             std::to_string(steps.front().context_length));
    }

    AttentionTrace trace;
    trace.m_header = header;
    trace.m_steps = std::move(steps);
    return trace;
}

std::span<const float> AttentionTrace::row(std::size_t t, std::size_t layer,
                                           std::size_t head) const {
    const DecodingStep& s = m_steps.at(t);
    const std::size_t offset = (layer * m_header.num_heads + head) * s.context_length;
    return {s.attention.data() + offset, s.context_length};
}

AttentionTrace AttentionTrace::with_token_texts(const std::vector<std::string>& texts) const {
    if (texts.size() != m_steps.size()) {
        throw LengthMismatchError("got " + std::to_string(texts.size()) + " token texts for " +
                                  std::to_string(m_steps.size()) + " steps");
    }
    AttentionTrace copy = *this;
    for (std::size_t t = 0; t < texts.size(); ++t) {
        copy.m_steps[t].generated_token_text = texts[t];
    }
    return copy;
}

std::size_t WordStepMap::total_steps() const {
    std::size_t total = 0;
    for (const Entry& e : entries) {
        total += e.step_indices.size();
    }
    return total;
}

std::vector<WordAlignment> filter_words(std::span<const WordAlignment> words, double tau) {
    std::vector<WordAlignment> kept;
    for (const WordAlignment& w : words) {
        if (w.confidence >= tau) {
            kept.push_back(w);
        }
    }
    return kept;
}

AudioSpan word_to_audio_span(const WordAlignment& word, const AttentionTrace::Header& header) {
    const double duration = header.total_duration_s;
    const std::size_t n_audio = header.audio_count;
    if (!(duration > 0.0) || n_audio == 0) {
        throw DegenerateSpanError("cannot map words onto an empty audio prefix");
    }
    const auto offset = [&](double t) -> std::size_t {
        const double position = t / duration * static_cast<double>(n_audio);
        // Absorb representation error of decimal timestamps (0.29 * 100 < 29).
        const double floored = std::floor(position + 1e-9 * std::max(1.0, std::abs(position)));
        if (floored <= 0.0) {
            return 0;
        }
        return std::min(static_cast<std::size_t>(floored), n_audio - 1);
    };
    const std::size_t a = offset(std::min(word.t_start, word.t_end));
    const std::size_t b = offset(std::max(word.t_start, word.t_end));
    return {header.audio_start + a, header.audio_start + b};
}

AudioSpan word_to_audio_span(const WordAlignment& word, const AttentionTrace& trace) {
    return word_to_audio_span(word, trace.header());
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
        const auto byte = static_cast<unsigned char>(c);
        if (byte >= 0x80) {
            out.push_back(c);
        } else if (std::isalnum(byte)) {
            out.push_back(static_cast<char>(std::tolower(byte)));
        } else if (std::isspace(byte)) {
            out.push_back(' ');
        }
    }
    return out;
}

namespace {

struct GeneratedWord {
    std::string text;
    std::vector<std::size_t> owned_steps;
};

std::vector<GeneratedWord> split_generated(std::span<const std::string> step_texts) {
    std::vector<GeneratedWord> words;
    GeneratedWord current;
    const auto flush = [&] {
        if (!current.text.empty()) {
            words.push_back(std::move(current));
        }
        current = GeneratedWord{};
    };
    for (std::size_t t = 0; t < step_texts.size(); ++t) {
        bool owned = false;
        for (const char c : normalize_text(step_texts[t])) {
            if (c == ' ') {
                flush();
                continue;
            }
            current.text.push_back(c);
            if (!owned) {
                current.owned_steps.push_back(t);
                owned = true;
            }
        }
    }
    flush();
    return words;
}

}  // namespace

WordStepMap align_generated_to_words(std::span<const std::string> step_texts,
                                     std::span<const WordAlignment> words) {
    const std::vector<GeneratedWord> generated = split_generated(step_texts);
    WordStepMap map;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string target = normalize_text(words[i].text);
        if (target.empty() || target.find(' ') != std::string::npos) {
            continue;
        }
        for (std::size_t p = cursor; p < generated.size(); ++p) {
            if (generated[p].text == target) {
                if (!generated[p].owned_steps.empty()) {
                    map.entries.push_back({i, generated[p].owned_steps});
                }
                cursor = p + 1;
                break;
            }
        }
    }
    return map;
}

WordStepMap align_generated_to_words(std::span<const DecodingStep> steps,
                                     std::span<const WordAlignment> words) {
    std::vector<std::string> texts;
    texts.reserve(steps.size());
    for (const DecodingStep& s : steps) {
        texts.push_back(s.generated_token_text);
    }
    return align_generated_to_words(texts, words);
}

}  // namespace audiokv
