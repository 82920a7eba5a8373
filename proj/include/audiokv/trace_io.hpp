// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "audiokv/trace.hpp"

namespace audiokv {

inline constexpr char kTraceMagic[4] = {'A', 'K', 'V', 'T'};
inline constexpr std::uint32_t kTraceVersionDense = 1;
inline constexpr std::uint32_t kTraceVersionSparse = 2;

/// On-disk row encoding. Dense stores every probability; sparse keeps the
/// `top_m` largest entries per row as (u32 index, f32 value) pairs.
struct TraceEncoding {
    bool sparse = false;
    std::size_t top_m = 0;
};

AttentionTrace read_trace(std::istream& in);
void write_trace(std::ostream& out, const AttentionTrace& trace, TraceEncoding encoding = {});

/// Reads a trace file. Token texts come from the sidecar
/// `<path>.tokens.json` when it exists.
AttentionTrace load_trace(const std::filesystem::path& path);
void save_trace(const std::filesystem::path& path, const AttentionTrace& trace,
                TraceEncoding encoding = {});

std::filesystem::path default_tokens_path(const std::filesystem::path& trace_path);
std::vector<std::string> load_token_texts(const std::filesystem::path& path);
void save_token_texts(const std::filesystem::path& path, const AttentionTrace& trace);

/// WhisperX word list: a JSON array of {"word", "start", "end", "score"}, or
/// a WhisperX result object with "word_segments" or "segments[].words".
std::vector<WordAlignment> parse_alignment(const std::string& json_text);
std::vector<WordAlignment> load_alignment(const std::filesystem::path& path);
void save_alignment(const std::filesystem::path& path, const std::vector<WordAlignment>& words);

}  // namespace audiokv
