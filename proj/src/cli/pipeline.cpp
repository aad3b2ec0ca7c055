// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "xfer/checkpoint.hpp"
#include "xfer/error.hpp"
#include "xfer/hash.hpp"

namespace xfer::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum Salt : std::uint64_t { kInit = 1, kLm = 2, kAdapt = 3, kBaselineInit = 4 };

json classifier_json(const nn::ClassifierSpec& s) {
  return {{"vocab_size", s.vocab_size},     {"d_emb", s.embed_dim},         {"hidden", s.hidden},
          {"encoder", nn::encoder_name(s.encoder)}, {"conv_maps", s.conv_maps}, {"conv_windows", s.conv_windows}};
}

nn::ClassifierSpec classifier_from_json(const json& j) {
  try {
    nn::ClassifierSpec s;
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    s.embed_dim = j.at("d_emb").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::size_t>();
    s.encoder = nn::parse_encoder(j.at("encoder").get<std::string>());
    s.conv_maps = j.at("conv_maps").get<std::size_t>();
    s.conv_windows = j.at("conv_windows").get<std::vector<std::size_t>>();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("classifier checkpoint: bad model description: ") + e.what());
  }
}

json lm_json(const lm::MaskedLmSpec& s) {
  return {{"vocab_size", s.vocab_size}, {"d_emb", s.embed_dim}, {"radius", s.radius},
          {"vocab_fingerprint", s.vocab_fingerprint}};
}

lm::MaskedLmSpec lm_from_json(const json& j) {
  try {
    lm::MaskedLmSpec s;
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    s.embed_dim = j.at("d_emb").get<std::size_t>();
    s.radius = j.at("radius").get<std::size_t>();
    s.vocab_fingerprint = j.at("vocab_fingerprint").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("LM checkpoint: bad model description: ") + e.what());
  }
}

std::vector<data::TokenSequence> token_seqs(std::span<const data::LabeledSequence> items) {
  std::vector<data::TokenSequence> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.tokens);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("bad number in ") + what + ": '" + s + "'");
  }
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::nan(""), std::nan("")};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig apply_overrides(RunConfig cfg, const Overrides& o) {
  if (o.target) cfg.target = *o.target;
  if (o.exclude_target) cfg.exclude_target = true;
  if (o.order) cfg.meta.order = *o.order;
  if (o.normalize) cfg.normalize_weights = *o.normalize;
  return cfg;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::wo_meta: return "wo-meta";
    case Variant::wo_sources: return "wo-sources";
    case Variant::target_only: return "target-only";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::full, Variant::wo_meta, Variant::wo_sources, Variant::target_only}) {
    if (variant_name(v) == name) return v;
  }
  throw ValidationError("unknown variant '" + std::string(name) + "'");
}

Variant variant_of(adapt::Ablation a) {
  switch (a) {
    case adapt::Ablation::full: return Variant::full;
    case adapt::Ablation::wo_meta: return Variant::wo_meta;
    case adapt::Ablation::wo_sources: return Variant::wo_sources;
  }
  return Variant::full;
}

IngestStats ingest_stats(const RunConfig& cfg, bool strict) {
  IngestStats out;
  for (const auto& [domain, rel] : cfg.datasets) {
    const auto path = cfg.resolve(rel);
    const auto res = data::ingest(path, {.strict = strict, .domains = {domain}});
    DomainStats ds;
    ds.domain = domain;
    std::size_t words = 0;
    for (const auto& it : res.items) {
      ++ds.items;
      (it.label == 1 ? ds.fake : ds.real)++;
      words += data::split_words(it.text).size();
    }
    ds.mean_words = ds.items ? static_cast<double>(words) / static_cast<double>(ds.items) : 0.0;
    out.domains.push_back(ds);
    for (const auto& r : res.rejected) {
      out.rejected.push_back(path.string() + ":" + std::to_string(r.line) + ": " + r.reason);
    }
  }
  return out;
}

std::string format_ingest_stats(const IngestStats& stats) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %8s %8s %8s %10s\n", "domain", "items", "fake", "real", "mean_words");
  os << buf;
  std::size_t items = 0, fake = 0, real = 0;
  for (const auto& d : stats.domains) {
    std::snprintf(buf, sizeof buf, "%-20s %8zu %8zu %8zu %10.2f\n", d.domain.c_str(), d.items, d.fake, d.real,
                  d.mean_words);
    os << buf;
    items += d.items;
    fake += d.fake;
    real += d.real;
  }
  std::snprintf(buf, sizeof buf, "%-20s %8zu %8zu %8zu\n", "total", items, fake, real);
  os << buf;
  if (!stats.rejected.empty()) {
    os << stats.rejected.size() << " rejected line(s):\n";
    for (const auto& r : stats.rejected) os << "  " << r << '\n';
  }
  return os.str();
}

std::string metrics_csv(std::vector<MetricsRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.target, a.model) < std::tie(b.target, b.model);
  });
  std::string out = "model,target,f1,acc,auc,spauc\n";
  for (const auto& r : rows) {
    out += r.model + "," + r.target + "," + fmt(r.f1) + "," + fmt(r.acc) + "," + fmt(r.auc) + "," + fmt(r.spauc) +
           "\n";
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::vector<MetricsRow> rows;
  if (!std::getline(in, line) || split_csv_line(line) !=
                                     std::vector<std::string>{"model", "target", "f1", "acc", "auc", "spauc"}) {
    throw ValidationError("metrics.csv: unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw ValidationError("metrics.csv: expected 6 fields in '" + line + "'");
    rows.push_back({f[0], f[1], parse_double(f[2], "metrics.csv"), parse_double(f[3], "metrics.csv"),
                    parse_double(f[4], "metrics.csv"), parse_double(f[5], "metrics.csv")});
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<std::vector<MetricsRow>>& per_seed) {
  std::map<std::pair<std::string, std::string>, std::vector<const MetricsRow*>> groups;
  for (const auto& rows : per_seed) {
    for (const auto& r : rows) groups[{r.target, r.model}].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, rows] : groups) {
    SummaryRow s;
    s.target = key.first;
    s.model = key.second;
    s.n = rows.size();
    auto col = [&](double MetricsRow::*field) {
      std::vector<double> xs;
      for (const auto* r : rows) xs.push_back(r->*field);
      return mean_std(xs);
    };
    std::tie(s.f1_mean, s.f1_std) = col(&MetricsRow::f1);
    std::tie(s.acc_mean, s.acc_std) = col(&MetricsRow::acc);
    std::tie(s.auc_mean, s.auc_std) = col(&MetricsRow::auc);
    std::tie(s.spauc_mean, s.spauc_std) = col(&MetricsRow::spauc);
    out.push_back(s);
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "target,model,n,f1_mean,f1_std,acc_mean,acc_std,auc_mean,auc_std,spauc_mean,spauc_std\n";
  for (const auto& r : rows) {
    out += r.target + "," + r.model + "," + std::to_string(r.n) + "," + fmt(r.f1_mean) + "," + fmt(r.f1_std) + "," +
           fmt(r.acc_mean) + "," + fmt(r.acc_std) + "," + fmt(r.auc_mean) + "," + fmt(r.auc_std) + "," +
           fmt(r.spauc_mean) + "," + fmt(r.spauc_std) + "\n";
  }
  return out;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %-16s %3s  %-15s %-15s %-15s %-15s\n", "target", "model", "n", "f1", "acc",
                "auc", "spauc");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %-16s %3zu  %.4f +- %.4f  %.4f +- %.4f  %.4f +- %.4f  %.4f +- %.4f\n",
                  r.target.c_str(), r.model.c_str(), r.n, r.f1_mean, r.f1_std, r.acc_mean, r.acc_std, r.auc_mean,
                  r.auc_std, r.spauc_mean, r.spauc_std);
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

struct Run::Corpus {
  std::map<std::string, data::DomainSplit> splits;
  std::optional<data::Vocabulary> vocab;
  std::map<std::string, std::vector<data::LabeledSequence>> train, val, test;

  void set_vocab(data::Vocabulary v, std::size_t max_len) {
    vocab = std::move(v);
    train.clear();
    val.clear();
    test.clear();
    for (const auto& [domain, split] : splits) {
      train[domain] = data::tokenize_all(split.train, *vocab, max_len);
      val[domain] = data::tokenize_all(split.val, *vocab, max_len);
      test[domain] = data::tokenize_all(split.test, *vocab, max_len);
    }
  }
};

Run::Run(RunConfig cfg, std::uint64_t seed, fs::path dir, json flags)
    : cfg_(std::move(cfg)), seed_(seed), dir_(std::move(dir)), flags_(std::move(flags)) {
  cfg_.validate();
  if (cfg_.exclude_target) cfg_.meta.exclude = {cfg_.target};
}

Run::Corpus& Run::corpus() {
  if (corpus_) return *corpus_;
  auto c = std::make_shared<Corpus>();
  std::vector<data::NewsItem> all;
  std::set<std::string> ids;
  for (const auto& [domain, rel] : cfg_.datasets) {
    auto res = data::ingest(cfg_.resolve(rel), {.strict = true, .domains = {domain}});
    for (auto& it : res.items) {
      if (!ids.insert(it.id).second) throw ValidationError("duplicate id '" + it.id + "' across datasets");
      all.push_back(std::move(it));
    }
  }
  c->splits = data::split_corpus(all, cfg_.split, seed_);
  corpus_ = std::move(c);
  return *corpus_;
}

json Run::read_manifest() const {
  const auto path = dir_ / "manifest.json";
  if (!fs::exists(path)) return json{{"artifacts", json::object()}};
  try {
    auto m = json::parse(read_file(path));
    if (!m.contains("artifacts")) m["artifacts"] = json::object();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError("corrupted " + path.string() + ": " + e.what());
  }
}

void Run::require(const std::string& file, const std::string& producer) {
  const auto path = dir_ / file;
  const std::string hint = "; run `xfer " + producer + "` first";
  if (!fs::exists(path)) throw ValidationError(file + " not found in " + dir_.string() + hint);
  const auto m = read_manifest();
  const auto& arts = m["artifacts"];
  if (!arts.contains(file)) throw ValidationError(file + " is not recorded in manifest.json" + hint);
  const auto& rec = arts[file];
  const auto hash = rec.value("config_hash", std::string());
  if (hash != cfg_.hash) {
    throw ValidationError(file + " was produced with config hash " + hash.substr(0, 12) + " but the current config is " +
                          cfg_.hash.substr(0, 12) + "; refusing to mix artifacts" + hint);
  }
  if (rec.value("seed", std::uint64_t{0}) != seed_) {
    throw ValidationError(file + " was produced with seed " + std::to_string(rec.value("seed", std::uint64_t{0})) +
                          ", current seed is " + std::to_string(seed_) + hint);
  }
  if (rec.value("sha256", std::string()) != sha256_file(path)) {
    throw ValidationError(file + " changed since it was recorded (sha256 mismatch)" + hint);
  }
}

void Run::record(const std::string& file, const std::string& step) {
  auto m = read_manifest();
  m["config_hash"] = cfg_.hash;
  m["seed"] = seed_;
  m["artifacts"][file] = {{"sha256", sha256_file(dir_ / file)},
                          {"config_hash", cfg_.hash},
                          {"seed", seed_},
                          {"step", step},
                          {"flags", flags_}};
  write_file(dir_ / "manifest.json", m.dump(2) + "\n");
}

data::Vocabulary Run::load_vocab() {
  auto& c = corpus();
  if (c.vocab) return *c.vocab;
  const auto path = dir_ / "vocab.txt";
  if (!fs::exists(path)) {
    throw ValidationError("vocab.txt not found in " + dir_.string() + "; run `xfer train-general` first");
  }
  require("vocab.txt", "train-general");
  c.set_vocab(data::Vocabulary::load(path), cfg_.max_len);
  return *c.vocab;
}

nn::Classifier Run::load_classifier(const std::string& file) {
  const auto vocab = load_vocab();
  require(file, "train-general");
  const auto path = dir_ / file;
  const auto info = nn::read_checkpoint_info(path);
  if (info.kind != "classifier") throw ValidationError(file + " is not a classifier checkpoint");
  const auto spec = classifier_from_json(info.model);
  if (spec.vocab_size != vocab.size()) {
    throw ValidationError(file + " expects a vocabulary of " + std::to_string(spec.vocab_size) + " tokens, vocab.txt has " +
                          std::to_string(vocab.size()));
  }
  auto loaded = nn::load_checkpoint(path, nn::classifier_layout(spec));
  return {spec, std::move(loaded.params)};
}

lm::MaskedLm Run::load_lm(const std::string& domain) {
  const auto vocab = load_vocab();
  const std::string file = "lm-" + domain + ".ckpt";
  require(file, "train-lm --target " + domain);
  const auto path = dir_ / file;
  const auto info = nn::read_checkpoint_info(path);
  if (info.kind != "masked-lm") throw ValidationError(file + " is not a masked LM checkpoint");
  const auto spec = lm_from_json(info.model);
  if (spec.vocab_fingerprint != vocab.fingerprint()) {
    throw ValidationError(file + " was trained with a different vocabulary (fingerprint " +
                          spec.vocab_fingerprint.substr(0, 12) + ", vocab.txt has " + vocab.fingerprint().substr(0, 12) +
                          ")");
  }
  auto loaded = nn::load_checkpoint(path, lm::lm_layout(spec));
  return {spec, std::move(loaded.params)};
}

std::vector<data::LabeledSequence> Run::sources_except(const std::set<std::string>& skip) {
  load_vocab();
  std::vector<data::LabeledSequence> out;
  for (const auto& [domain, items] : corpus().train) {
    if (skip.contains(domain)) continue;
    out.insert(out.end(), items.begin(), items.end());
  }
  return out;
}

data::Vocabulary Run::build_vocab() {
  auto& c = corpus();
  std::vector<data::NewsItem> train_items;
  for (const auto& [domain, split] : c.splits) train_items.insert(train_items.end(), split.train.begin(), split.train.end());
  auto vocab = data::build_vocab(train_items, cfg_.min_count);
  fs::create_directories(dir_);
  vocab.save(dir_ / "vocab.txt");
  record("vocab.txt", "train-general");
  c.set_vocab(vocab, cfg_.max_len);
  return vocab;
}

meta::TrainResult Run::train_general(bool pooled) {
  auto& c = corpus();
  const auto vocab = build_vocab();

  meta::Corpora corpora;
  for (const auto& [domain, items] : c.train) corpora[domain] = {items, c.val.at(domain)};

  auto spec = cfg_.model;
  spec.vocab_size = vocab.size();
  const nn::Classifier init{spec, nn::init_classifier(spec, derive(seed_, kInit))};
  auto result = pooled ? meta::train_pooled(corpora, init, cfg_.meta, seed_)
                       : meta::train_general(corpora, init, cfg_.meta, seed_);

  const std::string name = pooled ? "general-pooled" : "general";
  const std::string step = pooled ? "train-general --ablation wo-meta" : "train-general";
  nn::save_checkpoint(dir_ / (name + ".ckpt"), result.model.params,
                      {"classifier", classifier_json(spec), seed_, cfg_.hash, name});
  record(name + ".ckpt", step);
  write_file(dir_ / (name + "-trace.csv"), meta::trace_csv(result.trace));
  record(name + "-trace.csv", step);
  write_file(dir_ / (name + "-tasks.csv"), meta::task_log_csv(result.trace));
  record(name + "-tasks.csv", step);
  std::clog << "[xfer] " << name << ": " << result.trace.size() << " iterations, best " << result.best_iteration
            << '\n';
  return result;
}

void Run::train_lm(const std::string& domain) {
  const auto vocab = load_vocab();
  const auto& c = corpus();
  if (!c.train.contains(domain)) throw ValidationError("unknown domain '" + domain + "'");
  const auto seqs = token_seqs(c.train.at(domain));
  auto result = lm::train_mlm(seqs, vocab, cfg_.mlm, derive(seed_, kLm));
  const std::string file = "lm-" + domain + ".ckpt";
  nn::save_checkpoint(dir_ / file, result.lm.params, {"masked-lm", lm_json(result.lm.spec), seed_, cfg_.hash, domain});
  record(file, "train-lm");
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) loss += std::to_string(e + 1) + "," + fmt(result.epoch_loss[e]) + "\n";
  write_file(dir_ / ("lm-" + domain + "-loss.csv"), loss);
  record("lm-" + domain + "-loss.csv", "train-lm");
}

std::vector<lm::TransferabilityRecord> Run::score() {
  const auto model = load_lm(cfg_.target);
  const auto sources = sources_except({cfg_.target});
  auto report = lm::score_sources(model, sources);
  for (const auto& f : report.failures) std::clog << "[xfer] score: skipped " << f.id << ": " << f.reason << '\n';
  const std::string file = "weights-" + cfg_.target + ".csv";
  write_file(dir_ / file, lm::records_csv(report.records));
  record(file, "score");
  return report.records;
}

eval::MetricsReport Run::evaluate_model(const nn::Classifier& model, const std::string& name) {
  load_vocab();
  const auto& test = corpus().test.at(cfg_.target);
  const auto seqs = token_seqs(test);
  const auto scores = nn::forward_classify(model, seqs);
  std::vector<int> labels;
  std::string pred = "id,domain,label,score\n";
  for (std::size_t i = 0; i < test.size(); ++i) {
    labels.push_back(test[i].label);
    pred += test[i].id + "," + test[i].domain + "," + std::to_string(test[i].label) + "," + fmt(scores[i]) + "\n";
  }
  const std::string pfile = "predictions-" + cfg_.target + "-" + name + ".csv";
  write_file(dir_ / pfile, pred);
  record(pfile, "evaluate");
  const auto m = eval::evaluate(scores, labels);
  upsert_metrics({name, cfg_.target, m.f1_macro, m.accuracy, m.auc, m.spauc});
  return m;
}

eval::MetricsReport Run::adapt(Variant variant) {
  const auto vocab = load_vocab();
  const bool with_sources = variant == Variant::full || variant == Variant::wo_meta;

  nn::Classifier start;
  if (variant == Variant::target_only) {
    auto spec = cfg_.model;
    spec.vocab_size = vocab.size();
    start = {spec, nn::init_classifier(spec, derive(seed_, kBaselineInit))};
  } else {
    start = load_classifier(variant == Variant::wo_meta ? "general-pooled.ckpt" : "general.ckpt");
  }

  std::vector<data::LabeledSequence> sources;
  adapt::WeightTable weights;
  if (with_sources) {
    const std::string wfile = "weights-" + cfg_.target + ".csv";
    require(wfile, "score");
    const auto records = lm::parse_records_csv(read_file(dir_ / wfile));
    weights = adapt::weight_table(records, cfg_.normalize_weights);
    std::unordered_map<std::string, const data::LabeledSequence*> by_id;
    const auto pool = sources_except({cfg_.target});
    for (const auto& s : pool) by_id[s.id] = &s;
    for (const auto& r : records) {
      const auto it = by_id.find(r.id);
      if (it == by_id.end()) throw ValidationError(wfile + " lists unknown source item '" + r.id + "'");
      sources.push_back(*it->second);
    }
  }

  auto acfg = cfg_.adapt;
  acfg.use_sources = with_sources;
  const auto& c = corpus();
  auto result = adapt::adapt_to_target(start, c.train.at(cfg_.target), c.val.at(cfg_.target), sources, weights, acfg,
                                       derive(seed_, kAdapt));

  const std::string vname(variant_name(variant));
  const std::string stem = cfg_.target + "-" + vname;
  nn::save_checkpoint(dir_ / ("adapted-" + stem + ".ckpt"), result.model.params,
                      {"classifier", classifier_json(result.model.spec), seed_, cfg_.hash, stem});
  record("adapted-" + stem + ".ckpt", "adapt");
  write_file(dir_ / ("adapt-" + stem + ".csv"), adapt::adapt_trace_csv(result.trace));
  record("adapt-" + stem + ".csv", "adapt");
  std::clog << "[xfer] adapt " << stem << ": best epoch " << result.best_epoch << '\n';
  return evaluate_model(result.model, vname);
}

eval::MetricsReport Run::evaluate(const std::string& model) {
  const auto m = load_classifier(model + ".ckpt");
  return evaluate_model(m, model);
}

void Run::dvalue(const std::string& other) {
  if (other == cfg_.target) throw ValidationError("dvalue needs two different targets");
  const auto lm_t = load_lm(cfg_.target);
  const auto lm_o = load_lm(other);
  const auto sources = sources_except({cfg_.target, other});
  const auto rows = lm::dvalue_report(lm_t, lm_o, sources);
  const std::string stem = "dvalue-" + cfg_.target + "-" + other;
  write_file(dir_ / (stem + ".csv"), lm::dvalue_csv(rows));
  record(stem + ".csv", "dvalue");
  write_file(dir_ / (stem + "-hist.csv"), lm::dvalue_histogram_csv(rows, 20));
  record(stem + "-hist.csv", "dvalue");
}

std::vector<MetricsRow> Run::metrics() const {
  const auto path = dir_ / "metrics.csv";
  if (!fs::exists(path)) return {};
  return parse_metrics_csv(read_file(path));
}

void Run::upsert_metrics(const MetricsRow& row) {
  auto rows = metrics();
  std::erase_if(rows, [&](const MetricsRow& r) { return r.model == row.model && r.target == row.target; });
  rows.push_back(row);
  write_file(dir_ / "metrics.csv", metrics_csv(rows));
  record("metrics.csv", "evaluate");
}

// ---------------------------------------------------------------------------

fs::path run_dir(const RunConfig& cfg, std::uint64_t seed, bool sweep) {
  auto dir = cfg.resolve(cfg.output_dir) / cfg.run_name;
  if (sweep) dir /= "seed-" + std::to_string(seed);
  return dir;
}

void run_all(Run& run) {
  run.train_general(false);
  run.train_general(true);
  run.train_lm(run.config().target);
  run.score();
  for (auto v : {Variant::full, Variant::wo_meta, Variant::wo_sources, Variant::target_only}) run.adapt(v);
  run.evaluate("general");
  run.evaluate("general-pooled");
}

std::vector<SummaryRow> write_summary(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  std::vector<std::vector<MetricsRow>> per_seed;
  for (auto s : seeds) {
    const auto path = run_dir(cfg, s, true) / "metrics.csv";
    if (!fs::exists(path)) throw ValidationError(path.string() + " not found; run the seed first");
    per_seed.push_back(parse_metrics_csv(read_file(path)));
  }
  auto rows = summarize(per_seed);
  write_file(cfg.resolve(cfg.output_dir) / cfg.run_name / "summary.csv", summary_csv(rows));
  return rows;
}

}  // namespace xfer::cli
