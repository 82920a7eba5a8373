// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace audiokv {

/// Attention rows of one decoding step, stored layer-major, head-major,
/// index-minor: the row of (layer, head) starts at (layer * H + head) * L_t.
struct DecodingStep {
    std::size_t step_index = 0;
    std::string generated_token_text;
    std::size_t context_length = 0;
    std::vector<float> attention;
};

/// Tolerance on attention row sums.
inline constexpr double kRowSumTolerance = 1e-4;

/// Recorded attention of a decoding run. Immutable once built; create() checks
/// every invariant and throws IntegrityError / FormatError on violation.
class AttentionTrace {
public:
    struct Header {
        std::size_t num_layers = 0;
        std::size_t num_heads = 0;
        std::size_t audio_start = 0;  // a0
        std::size_t audio_count = 0;  // n_audio
        double total_duration_s = 0.0;
    };

    /// Validates and takes ownership. When `rows_are_complete` is false the
    /// rows came from a truncated (top-M) encoding and only need sum <= 1.
    static AttentionTrace create(Header header, std::vector<DecodingStep> steps,
                                 bool rows_are_complete = true);

    AttentionTrace() = default;

    std::size_t num_layers() const { return m_header.num_layers; }
    std::size_t num_heads() const { return m_header.num_heads; }
    std::size_t num_head_slots() const { return m_header.num_layers * m_header.num_heads; }
    std::size_t num_steps() const { return m_steps.size(); }
    std::size_t audio_start() const { return m_header.audio_start; }
    std::size_t audio_count() const { return m_header.audio_count; }
    double total_duration_s() const { return m_header.total_duration_s; }
    const Header& header() const { return m_header; }

    const std::vector<DecodingStep>& steps() const { return m_steps; }
    const DecodingStep& step(std::size_t t) const { return m_steps.at(t); }
    std::size_t context_length(std::size_t t) const { return m_steps.at(t).context_length; }

    std::span<const float> row(std::size_t t, std::size_t layer, std::size_t head) const;

    /// Copy with generated token texts replaced (one per step).
    AttentionTrace with_token_texts(const std::vector<std::string>& texts) const;

private:
    Header m_header;
    std::vector<DecodingStep> m_steps;
};

/// One WhisperX-style word anchor.
struct WordAlignment {
    std::string text;
    double t_start = 0.0;
    double t_end = 0.0;
    double confidence = 0.0;
};

/// Inclusive range of audio token indices.
struct AudioSpan {
    std::size_t start_index = 0;
    std::size_t end_index = 0;

    bool contains(std::size_t index) const { return index >= start_index && index <= end_index; }
    friend bool operator==(const AudioSpan&, const AudioSpan&) = default;
};

/// Word -> decoding steps that generated it. Entries are ordered by word index
/// and step sets are disjoint across words.
struct WordStepMap {
    struct Entry {
        std::size_t word_index = 0;
        std::vector<std::size_t> step_indices;  // sorted, unique
    };
    std::vector<Entry> entries;

    bool empty() const { return entries.empty(); }
    std::size_t total_steps() const;
};

/// Words with confidence >= tau, in their original order.
std::vector<WordAlignment> filter_words(std::span<const WordAlignment> words, double tau);

/// Uniform time-to-index mapping of a word onto the audio prefix, clamped to
/// the prefix. Throws DegenerateSpanError when the trace has no audio extent.
AudioSpan word_to_audio_span(const WordAlignment& word, const AttentionTrace::Header& header);
AudioSpan word_to_audio_span(const WordAlignment& word, const AttentionTrace& trace);

/// Case-folds and drops every byte that is not alphanumeric or whitespace.
/// Non-ASCII bytes are kept so UTF-8 words still compare.
std::string normalize_text(std::string_view text);

/// Greedy left-to-right alignment of generated step texts to word texts.
/// Never backtracks: a word that cannot be found after the last match is
/// skipped. A step belongs to the word its first alphanumeric character
/// falls in.
WordStepMap align_generated_to_words(std::span<const DecodingStep> steps,
                                     std::span<const WordAlignment> words);
WordStepMap align_generated_to_words(std::span<const std::string> step_texts,
                                     std::span<const WordAlignment> words);

}  // namespace audiokv
