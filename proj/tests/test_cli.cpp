// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "xfer/config.hpp"
#include "xfer/error.hpp"
#include "xfer/hash.hpp"
#include "xfer/pipeline.hpp"
#include "xfer/synth.hpp"

using namespace xfer;
using namespace xfer::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_config() {
  return json::parse(R"({
    "run_name": "t", "output_dir": "runs",
    "datasets": {"politics": "data/politics.jsonl", "health": "data/health.jsonl", "science": "data/science.jsonl"},
    "target": "politics", "max_len": 40, "min_count": 1, "seeds": [1],
    "split": {"train": 0.5, "val": 0.2},
    "model": {"d_emb": 8, "hidden": 16},
    "meta": {"max_iterations": 8, "patience": 0, "support_size": 4, "query_size": 4},
    "mlm": {"d_emb": 8, "epochs": 2},
    "adapt": {"epochs": 3, "patience": 0, "lr": 0.01, "normalize_weights": "mean1"},
    "synth": {
      "pool_size": 30, "signal_words": 6, "common_words": 20, "doc_length": [8, 14],
      "domains": [{"name": "politics", "size": 60}, {"name": "health", "size": 60}, {"name": "science", "size": 60}],
      "overlap": [[1, 0, 0], [0.8, 1, 0], [0, 0, 1]]
    }
  })");
}

fs::path write_config(const testing::TempDir& dir, const json& doc, std::uint64_t synth_seed = 1) {
  const auto path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  write_synth(load_config(path), synth_seed);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(XFER_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli.config") {
  TEST_CASE("unknown keys and domains are rejected") {
    auto doc = tiny_config();
    doc["meta"]["alpah"] = 0.1;
    CHECK_THROWS_WITH_AS(parse_config(doc, "."), doctest::Contains("unknown key 'meta.alpah'"), ValidationError);
    doc = tiny_config();
    doc["target"] = "sports";
    CHECK_THROWS_WITH_AS(parse_config(doc, ".").validate(), doctest::Contains("unknown domain 'sports'"),
                         ValidationError);
    doc = tiny_config();
    doc["meta"]["order"] = "third";
    CHECK_THROWS_AS(parse_config(doc, "."), ValidationError);
  }

  TEST_CASE("relative paths resolve against the config directory; the hash covers the file") {
    testing::TempDir dir("cli-config");
    const auto path = dir / "config.json";
    std::ofstream(path) << tiny_config().dump();
    const auto cfg = load_config(path);
    CHECK(cfg.dataset_path("health") == dir.path() / "data/health.jsonl");
    CHECK(cfg.hash.size() == 64);
    auto doc = tiny_config();
    doc["adapt"]["lr"] = 0.02;
    std::ofstream(path) << doc.dump();
    CHECK(load_config(path).hash != cfg.hash);
  }

  TEST_CASE("synthetic generator: validation and reproducibility") {
    auto doc = tiny_config();
    doc["synth"]["overlap"][1][0] = 1.5;
    CHECK_THROWS_WITH_AS(parse_config(doc, ".").validate(), doctest::Contains("not in [0,1]"), ValidationError);
    doc = tiny_config();
    doc["synth"]["domains"][2]["size"] = 0;
    CHECK_THROWS_WITH_AS(parse_config(doc, ".").validate(), doctest::Contains("size 0"), ValidationError);

    const auto cfg = parse_config(tiny_config(), ".");
    const auto a = generate_synth(cfg.synth, 5);
    const auto b = generate_synth(cfg.synth, 5);
    const auto c = generate_synth(cfg.synth, 6);
    CHECK(to_jsonl(a.at("health")) == to_jsonl(b.at("health")));
    CHECK(to_jsonl(a.at("health")) != to_jsonl(c.at("health")));
    CHECK(a.at("politics").size() == 60);
  }

  TEST_CASE("report tables and summaries") {
    const std::vector<MetricsRow> rows{{"full", "p", 0.8, 0.8, 0.9, 0.7},
                                       {"wo-meta", "p", 0.7, 0.7, 0.8, 0.6},
                                       {"wo-sources", "p", 0.6, 0.6, 0.7, 0.5}};
    const auto csv = metrics_csv(rows);
    CHECK(csv.rfind("model,target,f1,acc,auc,spauc\n", 0) == 0);
    CHECK(metrics_csv(parse_metrics_csv(csv)) == csv);
    const auto sum = summarize({rows, rows});
    REQUIRE(sum.size() == 3);
    CHECK(sum[0].n == 2);
    CHECK(sum[0].f1_std == 0.0);
    const auto table = format_summary(sum);
    CHECK(std::count(table.begin(), table.end(), '\n') >= 4);
    CHECK(table.find("spauc") != std::string::npos);
    CHECK_THROWS_AS(parse_metrics_csv("model,f1\n"), ValidationError);
  }
}

TEST_SUITE("cli.run") {
  TEST_CASE("whole pipeline is byte-identical across reruns") {
    testing::TempDir dir("cli-determinism");
    const auto cfg = load_config(write_config(dir, tiny_config()));
    for (const char* sub : {"a", "b"}) {
      Run run(cfg, 1, dir / sub);
      run_all(run);
    }
    const auto a = dir_contents(dir / "a");
    const auto b = dir_contents(dir / "b");
    CHECK(a.size() >= 20);
    CHECK(a.contains("general.ckpt"));
    CHECK(a.contains("weights-politics.csv"));
    CHECK(a.contains("predictions-politics-full.csv"));
    CHECK(a == b);
    for (const auto& [name, bytes] : a) {
      CAPTURE(name);
      CHECK(bytes == b.at(name));
    }
    const auto rows = Run(cfg, 1, dir / "a").metrics();
    CHECK(rows.size() == 6);
  }

  TEST_CASE("step prerequisites, corruption and mixed artifacts are refused") {
    testing::TempDir dir("cli-guards");
    const auto cfg = load_config(write_config(dir, tiny_config()));
    Run run(cfg, 1, dir / "r");
    CHECK_THROWS_WITH_AS(run.train_lm("politics"), doctest::Contains("train-general"), ValidationError);

    run.train_general(false);
    run.train_lm("politics");
    const auto general_sha = sha256_file(dir / "r/general.ckpt");

    auto other = cfg;
    other.hash = std::string(64, '0');
    Run mixed(other, 1, dir / "r");
    CHECK_THROWS_WITH_AS(mixed.score(), doctest::Contains("refusing to mix"), ValidationError);
    Run reseeded(cfg, 2, dir / "r");
    CHECK_THROWS_WITH_AS(reseeded.score(), doctest::Contains("seed"), ValidationError);

    const auto records = run.score();
    std::size_t sources = 0;
    for (const auto& r : records) {
      CHECK(r.domain != "politics");
      ++sources;
    }
    CHECK(sources == 60);  // health and science train splits: 30 + 30
    const auto weights = slurp(dir / "r/weights-politics.csv");
    CHECK(std::count(weights.begin(), weights.end(), '\n') == 61);

    run.adapt(Variant::full);
    run.adapt(Variant::wo_sources);
    CHECK(sha256_file(dir / "r/general.ckpt") == general_sha);

    {
      std::fstream f(dir / "r/lm-politics.ckpt", std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(40);
      f.put('\x7f');
    }
    CHECK_THROWS_AS(run.score(), ValidationError);
    CHECK_THROWS_WITH_AS(run.evaluate("nope"), doctest::Contains("nope.ckpt not found"), ValidationError);
  }

  TEST_CASE("exclude-target keeps the target out of episodic training") {
    testing::TempDir dir("cli-exclude");
    auto doc = tiny_config();
    doc["meta"]["exclude_target"] = true;
    const auto cfg = load_config(write_config(dir, doc));
    Run run(cfg, 1, dir / "r");
    run.train_general(false);
    const auto log = slurp(dir / "r/general-tasks.csv");
    CHECK(log.find("health") != std::string::npos);
    CHECK(log.find("politics") == std::string::npos);
  }

  TEST_CASE("two target LMs give D-values with nonzero variance") {
    testing::TempDir dir("cli-dvalue");
    const auto cfg = load_config(write_config(dir, tiny_config()));
    Run run(cfg, 1, dir / "r");
    run.train_general(false);
    run.train_lm("politics");
    run.train_lm("health");
    run.dvalue("health");
    CHECK_THROWS_AS(run.dvalue("politics"), ValidationError);
    std::istringstream in(slurp(dir / "r/dvalue-politics-health.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "id,pp_t1,pp_t2,dvalue");
    std::vector<double> d;
    while (std::getline(in, line)) {
      CHECK(line.rfind("science-", 0) == 0);
      d.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    }
    REQUIRE(d.size() == 30);
    double mean = 0.0, var = 0.0;
    for (double x : d) mean += x / double(d.size());
    for (double x : d) var += (x - mean) * (x - mean);
    CHECK(var > 0.0);
  }
}

TEST_SUITE("cli.exe") {
  TEST_CASE("exit codes and seed sweeps") {
    testing::TempDir dir("cli-exe");
    const auto cfg_path = write_config(dir, tiny_config());
    const std::string c = " --config " + cfg_path.string();
    CHECK(run_cli("") == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("report --config " + (dir / "missing.json").string()) == 1);
    CHECK(run_cli("report" + c) == 1);  // nothing to report yet
    CHECK(run_cli("train-lm" + c) == 1);
    CHECK(run_cli("train-general" + c + " --order third") == 1);
    CHECK(run_cli("train-general" + c + " --target sports") == 1);
    CHECK(run_cli("ingest-stats" + c) == 0);
    CHECK(run_cli("synth" + c + " --seed 1") == 0);

    CHECK(run_cli("adapt" + c + " --target-only --seeds 2") == 0);
    const auto summary = slurp(dir / "runs/t/summary.csv");
    CHECK(summary.find("politics,target-only,2,") != std::string::npos);
    CHECK(fs::exists(dir / "runs/t/seed-2/adapted-politics-target-only.ckpt"));
    CHECK(run_cli("report" + c + " --seeds 2") == 0);
    CHECK(run_cli("report" + c + " --seeds 3") == 1);

    // Same single-seed command twice: byte-identical artifacts.
    CHECK(run_cli("train-general" + c + " --seed 4") == 0);
    const auto first = dir_contents(dir / "runs/t");
    CHECK(run_cli("train-general" + c + " --seed 4") == 0);
    CHECK(dir_contents(dir / "runs/t") == first);

    std::ofstream(dir / "data/health.jsonl", std::ios::app) << "{not json\n";
    CHECK(run_cli("ingest-stats" + c) == 1);
    CHECK(run_cli("ingest-stats" + c + " --lenient") == 0);
  }
}
