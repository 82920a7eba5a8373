// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace audiokv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Shared experiment settings. Every field has a kebab-case flag and may
/// also come from a JSON config file keyed by the field names.
struct RunConfig {
    std::string trace_path;
    std::string alignment_path;
    std::string output_path;
    double tau = 0.95;
    std::size_t top_k = 24;
    std::size_t window = 32;
    double base_fraction = 0.5;
    double cutoff_ratio = 0.7;
    double mix_alpha = 0.5;
    std::vector<double> retention_ratios{0.4, 0.6, 0.8};
    std::uint64_t seed = 0;
};

/// Parses "0.4,0.6 0.8". Throws ConfigError on junk, an empty list or a
/// ratio outside (0, 1].
std::vector<double> parse_ratio_list(std::string_view text);

/// Entry point of the audiokv tool. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Maps the exception in flight to an exit status and reports it on `err`.
/// Call only from a catch block.
int report_current_exception(std::ostream& err);

}  // namespace audiokv
