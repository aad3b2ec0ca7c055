// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/config.hpp"

#include <set>

#include "xfer/error.hpp"
#include "xfer/hash.hpp"

namespace xfer::cli {
namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects whatever was not read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + path_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ValidationError("config: unknown key '" + where(it.key()) + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + where(key) + "' has the wrong type");
    }
  }

  template <class T, class Parse>
  void get_enum(const std::string& key, T& out, Parse parse) {
    std::string name;
    get(key, name);
    if (!name.empty()) out = parse(name);
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_model(Section s, nn::ClassifierSpec& m) {
  s.get("d_emb", m.embed_dim);
  s.get("hidden", m.hidden);
  s.get_enum("encoder", m.encoder, nn::parse_encoder);
  s.get("conv_maps", m.conv_maps);
  s.get("conv_windows", m.conv_windows);
}

void parse_meta(Section s, meta::MetaConfig& m, bool& exclude_target) {
  s.get("alpha", m.alpha);
  s.get("beta", m.beta);
  s.get("tasks", m.tasks);
  s.get("support_size", m.support_size);
  s.get("query_size", m.query_size);
  s.get("inner_steps", m.inner_steps);
  s.get_enum("order", m.order, meta::parse_order);
  s.get("max_iterations", m.max_iterations);
  s.get("patience", m.patience);
  s.get_enum("outer_optimizer", m.outer_optimizer, nn::parse_optimizer);
  s.get("exclude_target", exclude_target);
}

void parse_mlm(Section s, lm::MlmConfig& m) {
  s.get("mask_ratio", m.masking.ratio);
  s.get("mask_prob", m.masking.mask_prob);
  s.get("random_prob", m.masking.random_prob);
  s.get("d_emb", m.embed_dim);
  s.get("radius", m.radius);
  s.get("epochs", m.epochs);
  s.get("batch_size", m.batch_size);
  s.get("lr", m.lr);
  s.get_enum("optimizer", m.optimizer, nn::parse_optimizer);
}

void parse_adapt(Section s, adapt::AdaptConfig& a, adapt::WeightNorm& norm) {
  s.get("epochs", a.epochs);
  s.get("patience", a.patience);
  s.get("batch_size", a.batch_size);
  s.get("source_ratio", a.source_ratio);
  s.get("lr", a.lr);
  s.get_enum("optimizer", a.optimizer, nn::parse_optimizer);
  s.get("source_coeff", a.source_coeff);
  s.get_enum("normalize_weights", norm, adapt::parse_weight_norm);
}

void parse_synth(Section s, SynthConfig& c) {
  c.present = true;
  s.get("pool_size", c.pool_size);
  s.get("signal_words", c.signal_words);
  s.get("common_words", c.common_words);
  std::vector<std::size_t> len;
  s.get("doc_length", len);
  if (!len.empty()) {
    if (len.size() != 2) throw ValidationError("config: synth.doc_length must be [min, max]");
    c.doc_min = len[0];
    c.doc_max = len[1];
  }
  s.get("signal_per_doc", c.signal_per_doc);
  s.get("signal_flip", c.signal_flip);
  s.get("label_noise", c.label_noise);
  s.get("topic_share", c.topic_share);
  s.get("overlap", c.overlap);
  if (s.has("domains")) {
    const auto& arr = s.child("domains");
    if (!arr.is_array()) throw ValidationError("config: synth.domains must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section d(arr[i], "synth.domains[" + std::to_string(i) + "]");
      SynthDomain sd;
      d.get("name", sd.name);
      d.get("size", sd.size);
      d.get("fake_rate", sd.fake_rate);
      c.domains.push_back(sd);
    }
  } else {
    s.child("domains");  // marks the key; throws below
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (domains.empty()) throw ValidationError("synth: no domains");
  for (const auto& d : domains) {
    if (d.name.empty()) throw ValidationError("synth: domain without a name");
    if (d.size == 0) throw ValidationError("synth: domain '" + d.name + "' has size 0");
    if (!(d.fake_rate >= 0.0 && d.fake_rate <= 1.0)) throw ValidationError("synth: fake_rate must be in [0,1]");
  }
  if (overlap.size() != domains.size()) throw ValidationError("synth: overlap matrix must be N x N for N domains");
  for (std::size_t i = 0; i < overlap.size(); ++i) {
    if (overlap[i].size() != domains.size()) throw ValidationError("synth: overlap matrix must be N x N");
    double row = 0.0;
    for (std::size_t j = 0; j < overlap[i].size(); ++j) {
      const double v = overlap[i][j];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("synth: overlap[" + std::to_string(i) + "][" + std::to_string(j) + "] is not in [0,1]");
      }
      if (i != j) row += v;
    }
    if (row > 1.0 + 1e-12) throw ValidationError("synth: overlap row " + std::to_string(i) + " sums above 1");
  }
  if (pool_size < 2 * signal_words || signal_words == 0) {
    throw ValidationError("synth: pool_size must hold 2 * signal_words words, signal_words >= 1");
  }
  if (signal_per_doc % 2 == 0) throw ValidationError("synth: signal_per_doc must be odd");
  if (doc_min < signal_per_doc || doc_max < doc_min) {
    throw ValidationError("synth: doc_length must satisfy signal_per_doc <= min <= max");
  }
  if (common_words == 0) throw ValidationError("synth: common_words must be >= 1");
  for (double p : {signal_flip, label_noise, topic_share}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("synth: probabilities must be in [0,1]");
  }
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return (p.is_absolute() ? p : base_dir / p).lexically_normal();
}

std::filesystem::path RunConfig::dataset_path(const std::string& domain) const {
  const auto it = datasets.find(domain);
  if (it == datasets.end()) throw ValidationError("unknown domain '" + domain + "'");
  return resolve(it->second);
}

void RunConfig::validate() const {
  if (datasets.empty()) throw ValidationError("config: no datasets");
  if (target.empty()) throw ValidationError("config: no target domain");
  if (!datasets.contains(target)) throw ValidationError("unknown domain '" + target + "' (not in datasets)");
  if (run_name.empty() || run_name.find('/') != std::string::npos) throw ValidationError("config: bad run_name");
  if (max_len < 3) throw ValidationError("config: max_len must be >= 3");
  if (min_count < 1) throw ValidationError("config: min_count must be >= 1");
  if (seeds.empty()) throw ValidationError("config: seeds must not be empty");
  meta.validate();
  mlm.masking.validate();
  adapt.validate();
  if (!(mlm.lr > 0.0)) throw ValidationError("config: mlm.lr must be > 0");
  if (model.embed_dim == 0 || model.hidden == 0) throw ValidationError("config: model dimensions must be > 0");
  if (synth.present) {
    synth.validate();
    for (const auto& d : synth.domains) {
      if (!datasets.contains(d.name)) throw ValidationError("synth: domain '" + d.name + "' has no dataset path");
    }
  }
}

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  {
    Section root(doc, "");
    root.get("run_name", c.run_name);
    std::string out_dir = c.output_dir.string();
    root.get("output_dir", out_dir);
    c.output_dir = out_dir;
    std::map<std::string, std::string> ds;
    root.get("datasets", ds);
    for (auto& [k, v] : ds) c.datasets[k] = v;
    root.get("target", c.target);
    root.get("max_len", c.max_len);
    root.get("min_count", c.min_count);
    root.get("seeds", c.seeds);
    if (root.has("split")) {
      Section s(root.child("split"), "split");
      s.get("train", c.split.train);
      s.get("val", c.split.val);
    }
    if (root.has("model")) parse_model(Section(root.child("model"), "model"), c.model);
    if (root.has("meta")) parse_meta(Section(root.child("meta"), "meta"), c.meta, c.exclude_target);
    if (root.has("mlm")) parse_mlm(Section(root.child("mlm"), "mlm"), c.mlm);
    if (root.has("adapt")) parse_adapt(Section(root.child("adapt"), "adapt"), c.adapt, c.normalize_weights);
    if (root.has("synth")) parse_synth(Section(root.child("synth"), "synth"), c.synth);
  }
  c.hash = sha256_hex(doc.dump());
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(doc, base);
}

}  // namespace xfer::cli
