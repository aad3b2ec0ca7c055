// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "xfer/config.hpp"
#include "xfer/data.hpp"
#include "xfer/eval.hpp"
#include "xfer/lm.hpp"
#include "xfer/meta.hpp"
#include "xfer/pipeline.hpp"
#include "xfer/synth.hpp"

using namespace xfer;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradients.

Outcome gradients() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst_first = 0.0, worst_meta = 0.0;
  std::size_t max_params = 0;
  for (int m = 0; m < 100; ++m) {
    auto p = testing::tiny_problem(rng, m % 2 ? nn::Encoder::conv_window : nn::Encoder::mean_pool);
    const nn::ClassifierObjective obj(p.model.spec);
    auto& theta = p.model.params;
    max_params = std::max(max_params, theta.size());
    nn::GradientMap g;
    obj.loss_grad(theta, p.batch, g);

    // Tasks for the composed objective: support = first half, query = rest.
    const std::size_t half = p.batch.size() / 2;
    const std::vector<meta::TaskData> tasks{
        {"d", {p.batch.begin(), p.batch.begin() + half}, {p.batch.begin() + half, p.batch.end()}}};
    const double alpha = 0.3;
    auto composed = [&](const nn::ParamSet& th) {
      return obj.loss(meta::inner_adapt(obj, th, tasks[0].support, alpha, 1), tasks[0].query);
    };
    nn::GradientMap gm;
    meta::meta_gradient(obj, theta, tasks, alpha, 1, meta::Order::second, gm);

    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double orig = theta.values()[i];
      theta.values()[i] = orig + 1e-5;
      const double up = obj.loss(theta, p.batch);
      theta.values()[i] = orig - 1e-5;
      const double down = obj.loss(theta, p.batch);
      theta.values()[i] = orig + 1e-5;
      const double cup = composed(theta);
      theta.values()[i] = orig - 1e-5;
      const double cdown = composed(theta);
      theta.values()[i] = orig;
      worst_first = std::max(worst_first, testing::rel_err(g.values()[i], (up - down) / 2e-5));
      worst_meta = std::max(worst_meta, testing::rel_err(gm.values()[i], (cup - cdown) / 2e-5));
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = max_params <= 200 && worst_first < 1e-4 && worst_meta < 1e-3 && secs < 30.0;
  o.detail = "max rel err grad " + fmt("%.2e", worst_first) + ", meta-grad " + fmt("%.2e", worst_meta) +
             ", params <= " + std::to_string(max_params) + ", " + fmt("%.2f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Perplexity.

Outcome perplexity() {
  Rng rng(7);
  double worst = 0.0, worst_uniform = 0.0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t v = 8 + rng.below(16);
    lm::MaskedLm model{{v, 4, 2, "fp"}, {}};
    model.params = lm::init_lm(model.spec, rng.next());
    data::TokenSequence seq{"s", {data::Vocabulary::kCls}};
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      seq.ids.push_back(static_cast<data::TokenId>(data::Vocabulary::kReserved + rng.below(v - data::Vocabulary::kReserved)));
    }
    seq.ids.push_back(data::Vocabulary::kSep);

    // Direct product of 1/prob(w_i), each with only position i masked.
    std::vector<double> logp(v);
    double prod = 1.0;
    for (std::size_t i = 1; i <= n; ++i) {
      auto input = seq.ids;
      input[i] = data::Vocabulary::kMask;
      lm::log_distribution(model, input, i, logp);
      prod /= std::exp(logp[static_cast<std::size_t>(seq.ids[i])]);
    }
    const double direct = std::pow(prod, 1.0 / double(n));
    worst = std::max(worst, testing::rel_err(lm::pseudo_perplexity(model, seq), direct));

    for (auto& x : model.params.values()) x = 0.0;
    worst_uniform = std::max(worst_uniform, std::abs(lm::pseudo_perplexity(model, seq) - double(v)));
  }
  return {worst <= 1e-9 && worst_uniform <= 1e-9,
          "max rel err " + fmt("%.2e", worst) + ", uniform |pp - V| " + fmt("%.2e", worst_uniform)};
}

// ---------------------------------------------------------------------------
// 3. Meta-learning with alpha = 0 against plain training on the query sets.

Outcome meta_degeneracy() {
  const auto s = testing::synth_corpora(testing::small_synth(), 3);
  nn::ClassifierSpec spec{.vocab_size = s.vocab.size(), .embed_dim = 8, .hidden = 16};
  const nn::Classifier init{spec, nn::init_classifier(spec, 3)};
  meta::MetaConfig cfg;
  cfg.alpha = 0.0;
  cfg.beta = 0.01;
  cfg.max_iterations = 50;
  cfg.patience = 0;
  const auto r = meta::train_general(s.corpora, init, cfg, 11);

  data::TaskSamplerConfig sc{s.corpora.size(), cfg.support_size, cfg.query_size, {}};
  std::map<std::string, std::size_t> sizes;
  for (const auto& [d, c] : s.corpora) sizes[d] = c.train.size();
  data::TaskSampler sampler(sizes, sc, 11);
  const nn::ClassifierObjective obj(spec);
  auto theta = init.params.clone();
  auto opt = nn::make_optimizer(cfg.outer_optimizer, cfg.beta);
  double worst = 0.0;
  std::size_t rows = 0;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    auto total = nn::GradientMap::zeros_like(theta);
    nn::GradientMap g;
    double loss = 0.0;
    const auto batches = sampler.sample();
    for (const auto& b : batches) {
      std::vector<nn::Example> q;
      for (auto i : b.query) {
        const auto& item = s.corpora.at(b.domain).train[i];
        q.push_back({item.tokens.ids, double(item.label), 1.0 / double(b.query.size())});
      }
      loss += obj.loss_grad(theta, q, g);
      total.add(g);
    }
    opt->step(theta, total);
    if (it < r.trace.size()) {
      worst = std::max(worst, std::abs(loss / double(batches.size()) - r.trace[it].mean_query_loss));
      ++rows;
    }
  }
  return {rows == 50 && worst <= 1e-12,
          std::to_string(rows) + " iterations, max |diff| " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 4. Metrics.

Outcome metrics() {
  Rng rng(404);
  std::size_t mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.below(29);
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(double(rng.below(6)) / 5.0);
      y.push_back(int(rng.below(2)));
    }
    y[0] = 1;
    y[1] = 0;
    std::size_t wins2 = 0, pairs = 0;  // twice the Mann-Whitney count
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] == 1 && y[j] == 0) {
          ++pairs;
          wins2 += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
        }
      }
    }
    if (eval::roc_auc(s, y) != double(wins2) / double(2 * pairs)) ++mismatches;
  }
  const std::vector<double> perfect{0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
  const std::vector<int> py{1, 1, 1, 0, 0, 0};
  const std::vector<double> flat(6, 0.4);
  const double sp_perfect = eval::spauc(perfect, py), sp_diag = eval::spauc(flat, py);
  const std::vector<double> cs{0.9, 0.6, 0.4, 0.1};
  const std::vector<int> cy{1, 0, 1, 0};
  const double f1 = eval::f1_acc(cs, cy).f1_macro;
  return {mismatches == 0 && std::abs(sp_perfect - 1.0) <= 1e-12 && std::abs(sp_diag - 0.5) <= 1e-12 && f1 == 0.5,
          std::to_string(mismatches) + "/1000 AUC mismatches, SPAUC perfect " + fmt("%.17g", sp_perfect) +
              ", diagonal " + fmt("%.17g", sp_diag) + ", macro F1 " + fmt("%.3g", f1)};
}

// ---------------------------------------------------------------------------
// Synthetic benchmark helpers (criteria 5-7).

struct Bench {
  fs::path root;
  cli::RunConfig cfg;

  explicit Bench(const fs::path& r) : root(r) {
    fs::remove_all(root);
    fs::create_directories(root / "data");
    std::ifstream in(fs::path(XFER_SOURCE_DIR) / "configs/synthetic.json");
    auto doc = nlohmann::json::parse(in);
    doc["output_dir"] = "runs";
    for (auto& [domain, path] : doc["datasets"].items()) path = "data/" + domain + ".jsonl";
    std::ofstream(root / "config.json") << doc.dump(2);
    cfg = cli::load_config(root / "config.json");
  }

  cli::Run run(std::uint64_t seed, const std::string& tag) {
    cli::write_synth(cfg, seed);
    return cli::Run(cfg, seed, root / tag / ("seed-" + std::to_string(seed)));
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The source domain copying most of the target's words, and the one copying none.
std::pair<std::string, std::string> related_domains(const cli::SynthConfig& s, const std::string& target) {
  std::size_t t = 0;
  while (s.domains[t].name != target) ++t;
  std::string a, b;
  double hi = -1.0, lo = 2.0;
  for (std::size_t j = 0; j < s.domains.size(); ++j) {
    if (j == t) continue;
    if (s.overlap[j][t] > hi) hi = s.overlap[j][t], a = s.domains[j].name;
    if (s.overlap[j][t] < lo) lo = s.overlap[j][t], b = s.domains[j].name;
  }
  return {a, b};
}

// ---------------------------------------------------------------------------
// 5. Transferability separates related from unrelated sources.

Outcome relevance(Bench& bench) {
  const auto t0 = Clock::now();
  const auto [dom_a, dom_b] = related_domains(bench.cfg.synth, bench.cfg.target);
  int wins = 0;
  double ratio_sum = 0.0;
  std::string ratios;
  double dvar = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto run = bench.run(seed, "relevance");
    run.build_vocab();
    run.train_lm(bench.cfg.target);
    double wa = 0.0, wb = 0.0;
    std::size_t na = 0, nb = 0;
    for (const auto& r : run.score()) {
      if (r.domain == dom_a) wa += r.w, ++na;
      if (r.domain == dom_b) wb += r.w, ++nb;
    }
    const double ratio = (wa / double(na)) / (wb / double(nb));
    wins += ratio > 1.0;
    ratio_sum += ratio;
    ratios += (seed > 1 ? " " : "") + fmt("%.2f", ratio);
    if (seed == 1) {
      // A second target LM over the same source batch.
      run.train_lm(dom_a);
      run.dvalue(dom_a);
      std::istringstream in(slurp(run.dir() / ("dvalue-" + bench.cfg.target + "-" + dom_a + ".csv")));
      std::string line;
      std::getline(in, line);
      std::vector<double> d;
      while (std::getline(in, line)) d.push_back(std::stod(line.substr(line.rfind(',') + 1)));
      double mean = 0.0;
      for (double x : d) mean += x / double(d.size());
      for (double x : d) dvar += (x - mean) * (x - mean) / double(d.size() - 1);
    }
  }
  const double secs = seconds_since(t0);
  const double mean_ratio = ratio_sum / 5.0;
  return {wins >= 4 && mean_ratio >= 1.2 && dvar > 0.0 && secs < 120.0,
          "w(" + dom_a + ")/w(" + dom_b + ") per seed [" + ratios + "], " + std::to_string(wins) +
              "/5 seeds, mean ratio " + fmt("%.2f", mean_ratio) + ", D-value variance " + fmt("%.3g", dvar) + ", " +
              fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 6. End-to-end gain over the baseline and the ablations.

Outcome end_to_end(Bench& bench) {
  const auto t0 = Clock::now();
  int over_baseline = 0, over_wo_meta = 0, over_wo_sources = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto run = bench.run(seed, "pipeline");
    cli::run_all(run);
    std::map<std::string, double> f1;
    for (const auto& row : run.metrics()) f1[row.model] = row.f1;
    over_baseline += f1.at("full") >= f1.at("target-only");
    over_wo_meta += f1.at("full") >= f1.at("wo-meta");
    over_wo_sources += f1.at("full") >= f1.at("wo-sources");
    per_seed += " [seed " + std::to_string(seed) + ": full " + fmt("%.3f", f1.at("full")) + ", target-only " +
                fmt("%.3f", f1.at("target-only")) + ", wo-meta " + fmt("%.3f", f1.at("wo-meta")) + ", wo-sources " +
                fmt("%.3f", f1.at("wo-sources")) + "]";
  }
  const double secs = seconds_since(t0);
  return {over_baseline >= 4 && over_wo_meta >= 3 && over_wo_sources >= 3 && secs < 300.0,
          "full >= target-only " + std::to_string(over_baseline) + "/5, >= wo-meta " + std::to_string(over_wo_meta) +
              "/5, >= wo-sources " + std::to_string(over_wo_sources) + "/5, " + fmt("%.1f", secs) + " s;" + per_seed};
}

// ---------------------------------------------------------------------------
// 7. Reruns are byte-identical.

std::map<std::string, std::string> files_in(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

Outcome determinism(Bench& bench) {
  std::size_t compared = 0, differing = 0;
  std::string first_diff;
  auto compare = [&](const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b) {
    for (const auto& [name, bytes] : a) {
      ++compared;
      if (!b.contains(name) || b.at(name) != bytes) {
        ++differing;
        if (first_diff.empty()) first_diff = name;
      }
    }
    if (a.size() != b.size()) ++differing;
  };

  // Generator output.
  const auto data_before = files_in(bench.root / "data");
  cli::write_synth(bench.cfg, 5);  // last seed written by the benchmark
  compare(data_before, files_in(bench.root / "data"));

  // Every step for one seed, in a fresh directory and again in place.
  auto first = bench.run(2, "rerun-a");
  cli::run_all(first);
  first.train_lm("health");
  first.dvalue("health");
  const auto a = files_in(first.dir());
  auto second = bench.run(2, "rerun-b");
  cli::run_all(second);
  second.train_lm("health");
  second.dvalue("health");
  compare(a, files_in(second.dir()));
  cli::run_all(first);
  first.train_lm("health");
  first.dvalue("health");
  compare(a, files_in(first.dir()));

  // The same through the command line tool.
  const std::string cli = std::string(XFER_CLI) + " pipeline --config " + (bench.root / "config.json").string() +
                          " --seed 3 >/dev/null 2>&1";
  const auto cli_dir = bench.root / "runs" / bench.cfg.run_name;
  const bool ok1 = std::system(cli.c_str()) == 0;
  const auto c1 = files_in(cli_dir);
  const bool ok2 = std::system(cli.c_str()) == 0;
  compare(c1, files_in(cli_dir));
  if (!ok1 || !ok2) ++differing;

  return {differing == 0 && compared > 40,
          std::to_string(compared) + " artifacts compared, " + std::to_string(differing) + " differ" +
              (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

// ---------------------------------------------------------------------------
// 8. Ingestion of the PolitiFact-sized fixture.

Outcome ingestion() {
  const auto r = data::ingest(fs::path(XFER_FIXTURES) / "politifact.jsonl");
  const auto& c = r.counts.at("politifact");
  return {r.items.size() == 948 && c.fake == 420 && c.real == 528,
          std::to_string(r.items.size()) + " items, " + std::to_string(c.fake) + " fake / " + std::to_string(c.real) +
              " real"};
}

}  // namespace

int main() {
  const fs::path scratch = fs::current_path() / "scratch" / "acceptance";
  bool all = true;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient oracle", gradients);
  report(2, "perplexity oracle", perplexity);
  report(3, "meta degeneracy at alpha = 0", meta_degeneracy);
  report(4, "metric oracles", metrics);
  std::clog.setstate(std::ios::failbit);  // step logs from the benchmark runs
  Bench bench(scratch);
  report(5, "instance-level relevance", [&] { return relevance(bench); });
  report(6, "end-to-end gain", [&] { return end_to_end(bench); });
  report(7, "determinism", [&] { return determinism(bench); });
  report(8, "ingestion contract", ingestion);
  return all ? 0 : 1;
}
