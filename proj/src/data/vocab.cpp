// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <sstream>

#include "xfer/data.hpp"
#include "xfer/error.hpp"
#include "xfer/hash.hpp"

namespace xfer::data {
namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

constexpr std::string_view kUnkSurface = "[unk]";

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      current.push_back(lower(static_cast<char>(c)));
      continue;
    }
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
    if (c == '[' && i + kUnkSurface.size() <= text.size()) {
      std::string probe(text.substr(i, kUnkSurface.size()));
      std::transform(probe.begin(), probe.end(), probe.begin(), lower);
      if (probe == kUnkSurface) {
        words.emplace_back(Vocabulary::kReservedTokens[Vocabulary::kUnk]);
        i += kUnkSurface.size() - 1;
      }
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() <= kReserved) {
    throw ValidationError("vocabulary needs at least one regular token besides the reserved ones");
  }
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (tokens_[i] != kReservedTokens[i]) {
      throw ValidationError("vocabulary id " + std::to_string(i) + " must be " + std::string(kReservedTokens[i]));
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw ValidationError("empty token at vocabulary id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::string Vocabulary::fingerprint() const { return sha256_hex(serialize()); }

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Vocabulary Vocabulary::parse(std::string_view contents) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Vocabulary build_vocab(std::span<const NewsItem> items, std::size_t min_count) {
  if (items.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  if (min_count < 1) throw ValidationError("min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& item : items) {
    for (auto& w : split_words(item.text)) ++freq[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, n] : freq) {
    if (n >= min_count && w != Vocabulary::kReservedTokens[Vocabulary::kUnk]) kept.emplace_back(w, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens(std::begin(Vocabulary::kReservedTokens), std::end(Vocabulary::kReservedTokens));
  for (auto& [w, n] : kept) tokens.push_back(std::move(w));
  return Vocabulary(std::move(tokens));
}

TokenSequence tokenize(const NewsItem& item, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 3) throw ValidationError("max_len must be >= 3");
  const auto words = split_words(item.text);
  if (words.empty()) throw ValidationError("item '" + item.id + "': empty after tokenization");
  TokenSequence seq;
  seq.item_id = item.id;
  const std::size_t keep = std::min(words.size(), max_len - 2);
  seq.ids.reserve(keep + 2);
  seq.ids.push_back(Vocabulary::kCls);
  for (std::size_t i = 0; i < keep; ++i) seq.ids.push_back(vocab.id(words[i]));
  seq.ids.push_back(Vocabulary::kSep);
  return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : seq.content()) {
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

std::vector<LabeledSequence> tokenize_all(std::span<const NewsItem> items, const Vocabulary& vocab,
                                          std::size_t max_len) {
  std::vector<LabeledSequence> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    out.push_back({item.id, item.domain, item.label, tokenize(item, vocab, max_len)});
  }
  return out;
}

}  // namespace xfer::data
