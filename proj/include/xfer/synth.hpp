// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xfer/config.hpp"
#include "xfer/data.hpp"

namespace xfer::cli {

/// Items per domain, in the order of cfg.domains.
std::map<std::string, std::vector<data::NewsItem>> generate_synth(const SynthConfig& cfg, std::uint64_t seed);

/// One JSON object per line.
std::string to_jsonl(const std::vector<data::NewsItem>& items);

/// Generates and writes every synth domain to its dataset path.
void write_synth(const RunConfig& cfg, std::uint64_t seed);

}  // namespace xfer::cli
