// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/trace_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "audiokv/error.hpp"
#include "audiokv/json_io.hpp"

namespace audiokv {

namespace {

using nlohmann::json;

// All multi-byte fields are little-endian regardless of the host.
template <typename T>
void put(std::ostream& out, T value) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    }
    out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw FormatError(std::string("trace truncated while reading ") + what);
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(bytes[i]) << (8 * i);
    }
    return std::bit_cast<T>(bits);
}

// Guards allocations against garbage headers.
constexpr std::uint64_t kMaxValuesPerStep = std::uint64_t{1} << 31;

void read_dense_rows(std::istream& in, DecodingStep& step, std::size_t slots) {
    const std::uint64_t total = std::uint64_t{slots} * step.context_length;
    if (total > kMaxValuesPerStep) {
        throw FormatError("step " + std::to_string(step.step_index) + " is implausibly large");
    }
    step.attention.resize(total);
    for (float& v : step.attention) {
        v = get<float>(in, "attention values");
    }
}

void read_sparse_rows(std::istream& in, DecodingStep& step, std::size_t slots) {
    const std::uint32_t m = get<std::uint32_t>(in, "sparse row width");
    const std::size_t length = step.context_length;
    if (m > length) {
        throw FormatError("sparse row width " + std::to_string(m) + " exceeds context length " +
                          std::to_string(length));
    }
    if (std::uint64_t{slots} * length > kMaxValuesPerStep) {
        throw FormatError("step " + std::to_string(step.step_index) + " is implausibly large");
    }
    step.attention.assign(slots * length, 0.0f);
    std::vector<bool> seen(length);
    for (std::size_t slot = 0; slot < slots; ++slot) {
        std::fill(seen.begin(), seen.end(), false);
        float* row = step.attention.data() + slot * length;
        for (std::uint32_t j = 0; j < m; ++j) {
            const std::uint32_t index = get<std::uint32_t>(in, "sparse index");
            const float value = get<float>(in, "sparse value");
            if (index >= length || seen[index]) {
                throw FormatError("sparse index " + std::to_string(index) +
                                  " is out of range or repeated at step " +
                                  std::to_string(step.step_index));
            }
            seen[index] = true;
            row[index] = value;
        }
    }
}

void write_sparse_rows(std::ostream& out, const AttentionTrace& trace, std::size_t t,
                       std::size_t top_m) {
    const std::size_t length = trace.context_length(t);
    const std::size_t m = std::min(top_m, length);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m));
    std::vector<std::uint32_t> order(length);
    for (std::size_t layer = 0; layer < trace.num_layers(); ++layer) {
        for (std::size_t head = 0; head < trace.num_heads(); ++head) {
            const auto row = trace.row(t, layer, head);
            std::iota(order.begin(), order.end(), 0u);
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m),
                              order.end(), [&](std::uint32_t a, std::uint32_t b) {
                                  return row[a] != row[b] ? row[a] > row[b] : a < b;
                              });
            std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
            for (std::size_t j = 0; j < m; ++j) {
                put<std::uint32_t>(out, order[j]);
                put<float>(out, row[order[j]]);
            }
        }
    }
}

double number_or(const json& object, const char* key, double fallback) {
    const auto it = object.find(key);
    if (it == object.end() || it->is_null()) {
        return fallback;
    }
    if (!it->is_number()) {
        throw FormatError(std::string("alignment field '") + key + "' is not a number");
    }
    return it->get<double>();
}

void append_words(const json& list, std::vector<WordAlignment>& words) {
    if (!list.is_array()) {
        throw FormatError("alignment words must be a JSON array");
    }
    for (const json& item : list) {
        if (!item.is_object()) {
            throw FormatError("alignment entry is not an object");
        }
        const auto text = item.find("word");
        if (text == item.end() || !text->is_string()) {
            throw FormatError("alignment entry has no string 'word'");
        }
        // WhisperX leaves start/end out for words it could not align (digits, symbols).
        if (!item.contains("start") || !item.contains("end") || item["start"].is_null() ||
            item["end"].is_null()) {
            continue;
        }
        WordAlignment w;
        w.text = text->get<std::string>();
        w.t_start = number_or(item, "start", 0.0);
        w.t_end = number_or(item, "end", 0.0);
        w.confidence = number_or(item, "score", 0.0);
        if (!(w.t_start >= 0.0) || !(w.t_end >= w.t_start)) {
            throw FormatError("word '" + w.text + "' has invalid timestamps");
        }
        if (!(w.confidence >= 0.0 && w.confidence <= 1.0)) {
            throw FormatError("word '" + w.text + "' has confidence outside [0, 1]");
        }
        words.push_back(std::move(w));
    }
}

}  // namespace

AttentionTrace read_trace(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kTraceMagic, 4) != 0) {
        throw FormatError("not a trace file (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kTraceVersionDense && version != kTraceVersionSparse) {
        throw FormatError("unsupported trace version " + std::to_string(version));
    }
    AttentionTrace::Header header;
    header.num_layers = get<std::uint32_t>(in, "num_layers");
    header.num_heads = get<std::uint32_t>(in, "num_heads");
    const auto num_steps = get<std::uint32_t>(in, "num_steps");
    header.audio_start = get<std::uint32_t>(in, "a0");
    header.audio_count = get<std::uint32_t>(in, "n_audio");
    header.total_duration_s = get<double>(in, "total_duration_s");
    if (header.num_layers == 0 || header.num_heads == 0 || num_steps == 0) {
        throw FormatError("trace dimensions must be positive");
    }
    const std::size_t slots = header.num_layers * header.num_heads;

    // Grown step by step so a corrupt count fails on truncation, not allocation.
    std::vector<DecodingStep> steps;
    for (std::uint32_t t = 0; t < num_steps; ++t) {
        DecodingStep& step = steps.emplace_back();
        step.step_index = t;
        step.context_length = get<std::uint32_t>(in, "context length");
        if (version == kTraceVersionDense) {
            read_dense_rows(in, step, slots);
        } else {
            read_sparse_rows(in, step, slots);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError("trailing bytes after the last step");
    }
    return AttentionTrace::create(header, std::move(steps), version == kTraceVersionDense);
}

void write_trace(std::ostream& out, const AttentionTrace& trace, TraceEncoding encoding) {
    out.write(kTraceMagic, 4);
    put<std::uint32_t>(out, encoding.sparse ? kTraceVersionSparse : kTraceVersionDense);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.num_layers()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.num_heads()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.num_steps()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.audio_start()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.audio_count()));
    put<double>(out, trace.total_duration_s());
    for (std::size_t t = 0; t < trace.num_steps(); ++t) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.context_length(t)));
        if (encoding.sparse) {
            write_sparse_rows(out, trace, t, encoding.top_m);
        } else {
            for (const float v : trace.step(t).attention) {
                put<float>(out, v);
            }
        }
    }
}

AttentionTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open trace " + path.string());
    }
    AttentionTrace trace = read_trace(in);
    const auto tokens = default_tokens_path(path);
    if (std::filesystem::exists(tokens)) {
        trace = trace.with_token_texts(load_token_texts(tokens));
    }
    return trace;
}

void save_trace(const std::filesystem::path& path, const AttentionTrace& trace,
                TraceEncoding encoding) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write trace " + path.string());
    }
    write_trace(out, trace, encoding);
    if (!out) {
        throw IoError("failed writing trace " + path.string());
    }
}

std::filesystem::path default_tokens_path(const std::filesystem::path& trace_path) {
    return std::filesystem::path(trace_path.string() + ".tokens.json");
}

std::vector<std::string> load_token_texts(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw FormatError(path.string() + ": token texts must be a JSON array of strings");
    }
    std::vector<std::string> texts;
    for (const json& item : doc) {
        if (!item.is_string()) {
            throw FormatError(path.string() + ": token texts must be strings");
        }
        texts.push_back(item.get<std::string>());
    }
    return texts;
}

void save_token_texts(const std::filesystem::path& path, const AttentionTrace& trace) {
    json doc = json::array();
    for (const DecodingStep& s : trace.steps()) {
        doc.push_back(s.generated_token_text);
    }
    write_file(path, doc.dump() + "\n");
}

std::vector<WordAlignment> parse_alignment(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("alignment is not valid JSON: ") + e.what());
    }
    std::vector<WordAlignment> words;
    if (doc.is_array()) {
        append_words(doc, words);
    } else if (doc.is_object() && doc.contains("word_segments")) {
        append_words(doc["word_segments"], words);
    } else if (doc.is_object() && doc.contains("segments")) {
        for (const json& segment : doc["segments"]) {
            if (segment.contains("words")) {
                append_words(segment["words"], words);
            }
        }
    } else {
        throw FormatError("alignment must be a word array or a WhisperX result object");
    }
    return words;
}

std::vector<WordAlignment> load_alignment(const std::filesystem::path& path) {
    try {
        return parse_alignment(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_alignment(const std::filesystem::path& path, const std::vector<WordAlignment>& words) {
    json doc = json::array();
    for (const WordAlignment& w : words) {
        doc.push_back({{"word", w.text}, {"start", w.t_start}, {"end", w.t_end},
                       {"score", w.confidence}});
    }
    write_file(path, doc.dump(1) + "\n");
}

}  // namespace audiokv
