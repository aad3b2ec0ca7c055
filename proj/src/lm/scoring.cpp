// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xfer/error.hpp"
#include "xfer/lm.hpp"

namespace xfer::lm {
namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_csv_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw ValidationError("identifier '" + s + "' cannot be written to CSV (contains a comma, quote or newline)");
  }
}

}  // namespace

ScoreReport score_sources(const MaskedLm& lm, std::span<const data::LabeledSequence> sources) {
  ScoreReport report;
  report.records.reserve(sources.size());
  for (const auto& src : sources) {
    try {
      const double pp = pseudo_perplexity(lm, src.tokens);
      if (!(pp > 0.0) || !std::isfinite(pp)) throw NumericError("perplexity out of range");
      report.records.push_back({src.id, src.domain, pp, 1.0 / pp});
    } catch (const std::exception& e) {
      report.failures.push_back({src.id, e.what()});
    }
  }
  return report;
}

std::string records_csv(std::span<const TransferabilityRecord> records) {
  std::string out = "id,domain,pp,w\n";
  for (const auto& r : records) {
    check_csv_field(r.id);
    check_csv_field(r.domain);
    out += r.id + "," + r.domain + "," + fmt(r.pp) + "," + fmt(r.w) + "\n";
  }
  return out;
}

std::vector<TransferabilityRecord> parse_records_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "id,domain,pp,w") {
    throw ValidationError("transferability CSV must start with header id,domain,pp,w");
  }
  std::vector<TransferabilityRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw ValidationError("transferability CSV: bad row at line " + std::to_string(line_no));
    try {
      out.push_back({cells[0], cells[1], std::stod(cells[2]), std::stod(cells[3])});
    } catch (const std::exception&) {
      throw ValidationError("transferability CSV: bad number at line " + std::to_string(line_no));
    }
    if (!(out.back().w >= 0.0) || !std::isfinite(out.back().w)) {
      throw ValidationError("transferability CSV: weight must be finite and >= 0 at line " + std::to_string(line_no));
    }
  }
  return out;
}

std::vector<DValueRow> dvalue_report(const MaskedLm& lm_t1, const MaskedLm& lm_t2,
                                     std::span<const data::LabeledSequence> sources) {
  if (lm_t1.spec.vocab_size != lm_t2.spec.vocab_size ||
      lm_t1.spec.vocab_fingerprint != lm_t2.spec.vocab_fingerprint) {
    throw ValidationError("D-value report needs two language models over the same vocabulary");
  }
  std::vector<DValueRow> rows;
  rows.reserve(sources.size());
  for (const auto& src : sources) {
    const double a = pseudo_perplexity(lm_t1, src.tokens);
    const double b = pseudo_perplexity(lm_t2, src.tokens);
    rows.push_back({src.id, a, b, a - b});
  }
  return rows;
}

std::string dvalue_csv(std::span<const DValueRow> rows) {
  std::string out = "id,pp_t1,pp_t2,dvalue\n";
  for (const auto& r : rows) {
    check_csv_field(r.id);
    out += r.id + "," + fmt(r.pp_t1) + "," + fmt(r.pp_t2) + "," + fmt(r.dvalue) + "\n";
  }
  return out;
}

std::string dvalue_histogram_csv(std::span<const DValueRow> rows, std::size_t bins) {
  if (bins == 0) throw ValidationError("histogram needs at least one bin");
  std::string out = "bin_lo,bin_hi,count\n";
  if (rows.empty()) return out;
  const auto [lo_it, hi_it] =
      std::minmax_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.dvalue < b.dvalue; });
  const double lo = lo_it->dvalue;
  const double hi = hi_it->dvalue;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  std::vector<std::size_t> counts(bins, 0);
  for (const auto& r : rows) {
    auto b = static_cast<std::size_t>((r.dvalue - lo) / width);
    counts[std::min(b, bins - 1)] += 1;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    out += fmt(lo + width * static_cast<double>(b)) + "," + fmt(lo + width * static_cast<double>(b + 1)) + "," +
           std::to_string(counts[b]) + "\n";
  }
  return out;
}

}  // namespace xfer::lm
