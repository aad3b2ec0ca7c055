// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/synth.hpp"

#include <cmath>

#include "json.hpp"
#include "xfer/error.hpp"
#include "xfer/hash.hpp"
#include "xfer/rng.hpp"

namespace xfer::cli {
namespace {

std::string base_word(std::size_t domain, std::size_t k) {
  return "t" + std::to_string(domain) + "x" + std::to_string(k);
}

struct Pool {
  std::vector<std::string> signal[2];  // [0] fake, [1] real
  std::vector<std::string> topic;
};

// Domain i's pool: for each j != i, the first round(overlap[i][j] * P) base
// words of j, then i's own words until the pool holds P words. Copied signal
// words keep their polarity.
Pool build_pool(const SynthConfig& cfg, std::size_t i) {
  Pool pool;
  std::size_t filled = 0;
  auto take = [&](std::size_t owner, std::size_t k) {
    const std::string w = base_word(owner, k);
    if (k < 2 * cfg.signal_words) {
      pool.signal[k % 2].push_back(w);
    } else {
      pool.topic.push_back(w);
    }
    ++filled;
  };
  for (std::size_t j = 0; j < cfg.domains.size(); ++j) {
    if (j == i) continue;
    const auto n = static_cast<std::size_t>(std::llround(cfg.overlap[i][j] * static_cast<double>(cfg.pool_size)));
    for (std::size_t k = 0; k < n && filled < cfg.pool_size; ++k) take(j, k);
  }
  for (std::size_t k = 0; filled < cfg.pool_size; ++k) take(i, k);
  // A pool built entirely from foreign topic words still needs both polarities.
  for (int p = 0; p < 2; ++p) {
    if (pool.signal[p].empty()) pool.signal[p].push_back(base_word(i, static_cast<std::size_t>(p)));
  }
  if (pool.topic.empty()) pool.topic.push_back(base_word(i, 2 * cfg.signal_words));
  return pool;
}

}  // namespace

std::map<std::string, std::vector<data::NewsItem>> generate_synth(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::map<std::string, std::vector<data::NewsItem>> out;
  Rng root(seed);
  for (std::size_t i = 0; i < cfg.domains.size(); ++i) {
    const auto& dom = cfg.domains[i];
    const Pool pool = build_pool(cfg, i);
    Rng rng = root.fork(i + 1);
    auto& items = out[dom.name];
    items.reserve(dom.size);
    for (std::size_t n = 0; n < dom.size; ++n) {
      const int intended = rng.bernoulli(dom.fake_rate) ? 0 : 1;
      const auto len = cfg.doc_min + rng.below(cfg.doc_max - cfg.doc_min + 1);
      std::vector<std::string> words;
      words.reserve(len);
      int fake_votes = 0;
      for (std::size_t s = 0; s < cfg.signal_per_doc; ++s) {
        const int pol = rng.bernoulli(cfg.signal_flip) ? 1 - intended : intended;
        if (pol == 0) ++fake_votes;
        const auto& src = pool.signal[pol];
        words.push_back(src[rng.below(src.size())]);
      }
      for (std::size_t s = cfg.signal_per_doc; s < len; ++s) {
        if (rng.bernoulli(cfg.topic_share)) {
          words.push_back(pool.topic[rng.below(pool.topic.size())]);
        } else {
          words.push_back("c" + std::to_string(rng.below(cfg.common_words)));
        }
      }
      rng.shuffle(std::span<std::string>(words));
      int label = 2 * fake_votes > static_cast<int>(cfg.signal_per_doc) ? 1 : 0;
      if (rng.bernoulli(cfg.label_noise)) label = 1 - label;

      data::NewsItem item;
      item.id = dom.name + "-" + std::to_string(n);
      item.domain = dom.name;
      item.label = label;
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (w > 0) item.text += ' ';
        item.text += words[w];
      }
      items.push_back(std::move(item));
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<data::NewsItem>& items) {
  std::string out;
  for (const auto& it : items) {
    nlohmann::json j = {{"id", it.id}, {"text", it.text}, {"label", it.label}, {"domain", it.domain}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_synth(const RunConfig& cfg, std::uint64_t seed) {
  if (!cfg.synth.present) throw ValidationError("config has no 'synth' section");
  const auto all = generate_synth(cfg.synth, seed);
  for (const auto& [name, items] : all) write_file(cfg.dataset_path(name), to_jsonl(items));
}

}  // namespace xfer::cli
