// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <set>

#include "json.hpp"
#include "xfer/data.hpp"
#include "xfer/error.hpp"

namespace xfer::data {
namespace {

std::string at_line(std::string_view what, std::size_t line) {
  return std::string(what) + " at line " + std::to_string(line);
}

// Returns the rejection reason, or nothing when the record is valid.
std::optional<std::string> parse_record(const std::string& line, std::size_t line_no, std::string_view stem,
                                        const IngestOptions& options, NewsItem& out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return at_line("malformed record", line_no);
  }
  if (!j.is_object()) return at_line("malformed record", line_no);
  for (const char* field : {"text", "label", "domain"}) {
    if (!j.contains(field)) return at_line(std::string("missing field '") + field + "'", line_no);
  }
  const auto& label = j["label"];
  if (!label.is_number_integer() || (label.get<long long>() != 0 && label.get<long long>() != 1)) {
    return at_line("invalid label", line_no);
  }
  if (!j["text"].is_string() || !j["domain"].is_string()) return at_line("malformed record", line_no);
  out.text = j["text"].get<std::string>();
  out.domain = j["domain"].get<std::string>();
  out.label = static_cast<int>(label.get<long long>());
  if (j.contains("id") && !j["id"].is_null()) {
    if (j["id"].is_string()) {
      out.id = j["id"].get<std::string>();
    } else if (j["id"].is_number_integer()) {
      out.id = std::to_string(j["id"].get<long long>());
    } else {
      return at_line("malformed id", line_no);
    }
  } else {
    out.id = std::string(stem) + "-" + std::to_string(line_no);
  }
  if (out.domain.empty()) return at_line("empty domain", line_no);
  if (!options.domains.empty() && !options.domains.contains(out.domain)) {
    return at_line("undeclared domain '" + out.domain + "'", line_no);
  }
  if (split_words(out.text).empty()) return at_line("empty after tokenization", line_no);
  return std::nullopt;
}

}  // namespace

IngestResult ingest_stream(std::istream& in, std::string_view source_name, const IngestOptions& options) {
  IngestResult result;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return c == ' ' || c == '\t'; })) continue;
    ++result.lines;
    NewsItem item;
    auto problem = parse_record(line, line_no, source_name, options, item);
    if (!problem && !seen.insert(item.id).second) problem = at_line("duplicate id '" + item.id + "'", line_no);
    if (problem) {
      if (options.strict) throw ValidationError(std::string(source_name) + ": " + *problem);
      result.rejected.push_back({line_no, *problem});
      continue;
    }
    auto& c = result.counts[item.domain];
    (item.label == 1 ? c.fake : c.real) += 1;
    result.items.push_back(std::move(item));
  }
  if (result.lines == 0) throw ValidationError(std::string(source_name) + ": empty file");
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return ingest_stream(in, path.stem().string(), options);
}

DomainSplit split_domain(std::span<const NewsItem> items, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val < 0 || ratios.train + ratios.val > 1.0) {
    throw ValidationError("split ratios must satisfy train > 0, val >= 0, train + val <= 1");
  }
  DomainSplit split;
  Rng rng(seed);
  for (int label : {0, 1}) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].label == label) group.push_back(i);
    }
    rng.shuffle(std::span(group));
    const auto n = static_cast<double>(group.size());
    const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
    const auto n_val = std::min(group.size() - n_train, static_cast<std::size_t>(std::llround(ratios.val * n)));
    for (std::size_t k = 0; k < group.size(); ++k) {
      auto& dst = k < n_train ? split.train : (k < n_train + n_val ? split.val : split.test);
      dst.push_back(items[group[k]]);
    }
  }
  return split;
}

std::map<std::string, DomainSplit> split_corpus(std::span<const NewsItem> items, const SplitRatios& ratios,
                                                std::uint64_t seed) {
  std::map<std::string, std::vector<NewsItem>> by_domain;
  for (const auto& item : items) by_domain[item.domain].push_back(item);
  std::map<std::string, DomainSplit> out;
  std::uint64_t salt = 0;
  for (auto& [domain, list] : by_domain) {
    out.emplace(domain, split_domain(list, ratios, seed * 1000003ULL + salt++));
  }
  return out;
}

}  // namespace xfer::data
