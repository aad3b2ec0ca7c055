// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

// xfer: multi-domain fake news detection with episodic general training,
// transferability-weighted sources and target adaptation.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xfer/error.hpp"
#include "xfer/hash.hpp"
#include "xfer/pipeline.hpp"
#include "xfer/synth.hpp"

namespace {

using namespace xfer;
using namespace xfer::cli;

struct Flags {
  std::string config;
  std::optional<std::string> target;
  std::optional<std::uint64_t> seed;
  std::size_t seeds = 0;
  bool exclude_target = false;
  std::optional<std::string> ablation;
  std::optional<std::string> normalize;
  std::optional<std::string> order;
  bool target_only = false;
  std::string model = "general";
  std::string other_target;
  bool lenient = false;
};

struct Plan {
  RunConfig cfg;
  std::vector<std::uint64_t> seeds;
  bool sweep = false;
  nlohmann::json flags;
};

Plan make_plan(const Flags& f) {
  Overrides o;
  o.target = f.target;
  o.exclude_target = f.exclude_target;
  if (f.order) o.order = meta::parse_order(*f.order);
  if (f.normalize) o.normalize = adapt::parse_weight_norm(*f.normalize);

  Plan p;
  p.cfg = apply_overrides(load_config(f.config), o);
  p.cfg.validate();
  if (f.seeds > 0) {
    const std::uint64_t s0 = f.seed.value_or(p.cfg.seeds.front());
    for (std::size_t k = 0; k < f.seeds; ++k) p.seeds.push_back(s0 + k);
    p.sweep = f.seeds > 1;
  } else if (f.seed) {
    p.seeds = {*f.seed};
  } else {
    p.seeds = p.cfg.seeds;
    p.sweep = p.seeds.size() > 1;
  }
  p.flags = {{"target", p.cfg.target},
             {"exclude_target", p.cfg.exclude_target},
             {"order", meta::order_name(p.cfg.meta.order)},
             {"normalize_weights", adapt::weight_norm_name(p.cfg.normalize_weights)}};
  return p;
}

template <class Fn>
void for_each_seed(const Plan& p, Fn&& fn) {
  for (auto s : p.seeds) {
    Run run(p.cfg, s, run_dir(p.cfg, s, p.sweep), p.flags);
    if (p.sweep) std::clog << "[xfer] seed " << s << " -> " << run.dir().string() << '\n';
    fn(run);
  }
}

void print_metrics(const std::vector<MetricsRow>& rows) {
  std::vector<SummaryRow> single;
  for (const auto& r : rows) single.push_back({r.target, r.model, 1, r.f1, 0, r.acc, 0, r.auc, 0, r.spauc, 0});
  std::cout << format_summary(single);
}

void print_report(const Plan& p) {
  if (p.sweep) {
    std::cout << format_summary(write_summary(p.cfg, p.seeds));
  } else {
    for_each_seed(p, [](Run& run) {
      const auto rows = run.metrics();
      if (rows.empty()) {
        throw ValidationError("no metrics.csv in " + run.dir().string() + "; run `xfer adapt` or `xfer evaluate` first");
      }
      print_metrics(rows);
    });
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"xfer: cross-domain transfer for fake news detection"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--target", f.target, "target domain (overrides the config)");
    sub->add_option("--seed", f.seed, "run seed");
    sub->add_option("--seeds", f.seeds, "sweep K seeds starting at --seed");
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic multi-domain corpus");
  synth->add_option("--config", f.config)->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", f.seed, "generator seed");

  auto* stats = app.add_subcommand("ingest-stats", "per-domain item and label counts");
  stats->add_option("--config", f.config)->required()->check(CLI::ExistingFile);
  stats->add_flag("--lenient", f.lenient, "report bad lines instead of failing");

  auto* general = app.add_subcommand("train-general", "train the general classifier");
  common(general);
  general->add_flag("--exclude-target", f.exclude_target, "keep the target domain out of general training");
  general->add_option("--order", f.order, "meta-gradient order")->check(CLI::IsMember({"first", "second"}));
  general->add_option("--ablation", f.ablation, "wo-meta trains the pooled model")
      ->check(CLI::IsMember({"full", "wo-meta", "wo-sources"}));

  auto* lm = app.add_subcommand("train-lm", "train the target masked LM");
  common(lm);

  auto* score = app.add_subcommand("score", "transferability of every source item");
  common(score);

  auto* adapt_cmd = app.add_subcommand("adapt", "adapt to the target and evaluate on its test split");
  common(adapt_cmd);
  adapt_cmd->add_option("--ablation", f.ablation)->check(CLI::IsMember({"full", "wo-meta", "wo-sources"}));
  adapt_cmd->add_flag("--target-only", f.target_only, "baseline trained from scratch on target data only");
  adapt_cmd->add_option("--normalize-weights", f.normalize)->check(CLI::IsMember({"none", "mean1"}));
  adapt_cmd->add_flag("--exclude-target", f.exclude_target, "with --seeds: general training excludes the target");
  adapt_cmd->add_option("--order", f.order)->check(CLI::IsMember({"first", "second"}));

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a classifier checkpoint on the target test split");
  common(evaluate);
  evaluate->add_option("--model", f.model, "checkpoint stem in the run directory (default: general)");

  auto* report = app.add_subcommand("report", "print metrics; aggregates mean/std over --seeds");
  common(report);

  auto* dvalue = app.add_subcommand("dvalue", "compare two target LMs over the source items");
  common(dvalue);
  dvalue->add_option("--other-target", f.other_target)->required();

  auto* pipeline = app.add_subcommand("pipeline", "every step and variant, then the report");
  common(pipeline);
  pipeline->add_flag("--exclude-target", f.exclude_target);
  pipeline->add_option("--order", f.order)->check(CLI::IsMember({"first", "second"}));
  pipeline->add_option("--normalize-weights", f.normalize)->check(CLI::IsMember({"none", "mean1"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    const auto cfg = load_config(f.config);
    cfg.validate();
    write_synth(cfg, f.seed.value_or(cfg.seeds.front()));
    for (const auto& d : cfg.synth.domains) std::cout << cfg.dataset_path(d.name).string() << '\n';
    return 0;
  }
  if (stats->parsed()) {
    const auto cfg = load_config(f.config);
    std::cout << format_ingest_stats(ingest_stats(cfg, !f.lenient));
    return 0;
  }

  const Plan plan = make_plan(f);
  if (general->parsed()) {
    const bool pooled = f.ablation && *f.ablation == "wo-meta";
    for_each_seed(plan, [&](Run& run) { run.train_general(pooled); });
  } else if (lm->parsed()) {
    for_each_seed(plan, [&](Run& run) { run.train_lm(plan.cfg.target); });
  } else if (score->parsed()) {
    for_each_seed(plan, [&](Run& run) { run.score(); });
  } else if (adapt_cmd->parsed()) {
    if (f.target_only && f.ablation) throw ValidationError("--target-only and --ablation are exclusive");
    const Variant v =
        f.target_only ? Variant::target_only : variant_of(adapt::parse_ablation(f.ablation.value_or("full")));
    for_each_seed(plan, [&](Run& run) {
      if (plan.sweep) {
        // A sweep builds each seed's prerequisites in its own directory.
        if (v == Variant::target_only) {
          run.build_vocab();
        } else {
          run.train_general(v == Variant::wo_meta);
        }
        if (v == Variant::full || v == Variant::wo_meta) {
          run.train_lm(plan.cfg.target);
          run.score();
        }
      }
      run.adapt(v);
    });
    print_report(plan);
  } else if (evaluate->parsed()) {
    for_each_seed(plan, [&](Run& run) { run.evaluate(f.model); });
    print_report(plan);
  } else if (report->parsed()) {
    print_report(plan);
  } else if (dvalue->parsed()) {
    for_each_seed(plan, [&](Run& run) { run.dvalue(f.other_target); });
  } else if (pipeline->parsed()) {
    for_each_seed(plan, [](Run& run) { run_all(run); });
    print_report(plan);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const xfer::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
}
