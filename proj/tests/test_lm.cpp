// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "xfer/error.hpp"
#include "xfer/lm.hpp"

using namespace xfer;
using namespace xfer::lm;
using data::TokenId;
using data::TokenSequence;
using data::Vocabulary;
using xfer::testing::rel_err;

namespace {

TokenSequence random_seq(Rng& rng, std::size_t vocab, std::size_t lo, std::size_t hi, const std::string& id = "s") {
  TokenSequence s{id, {Vocabulary::kCls}};
  const std::size_t n = lo + rng.below(hi - lo + 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.ids.push_back(static_cast<TokenId>(Vocabulary::kReserved + rng.below(vocab - Vocabulary::kReserved)));
  }
  s.ids.push_back(Vocabulary::kSep);
  return s;
}

MaskedLm random_lm(std::size_t vocab, std::uint64_t seed, double scale = 1.0) {
  MaskedLm lm{{vocab, 4, 2, "fp"}, {}};
  lm.params = init_lm(lm.spec, seed);
  for (auto& v : lm.params.values()) v *= scale;
  return lm;
}

// Direct product form: mask each position by hand, read prob(w_i) off the
// softmax, multiply 1/prob and take the N-th root.
double direct_pp(const MaskedLm& lm, const TokenSequence& seq) {
  std::vector<double> logp(lm.spec.vocab_size);
  double prod = 1.0;
  const std::size_t n = seq.content_length();
  for (std::size_t i = 1; i + 1 < seq.ids.size(); ++i) {
    auto input = seq.ids;
    input[i] = Vocabulary::kMask;
    log_distribution(lm, input, i, logp);
    prod *= 1.0 / std::exp(logp[static_cast<std::size_t>(seq.ids[i])]);
  }
  return std::pow(prod, 1.0 / double(n));
}

std::vector<data::LabeledSequence> labeled(const std::vector<TokenSequence>& seqs, const std::string& domain) {
  std::vector<data::LabeledSequence> out;
  for (const auto& s : seqs) out.push_back({s.item_id, domain, 0, s});
  return out;
}

}  // namespace

TEST_SUITE("lm") {
  TEST_CASE("uniform output gives pp = V") {
    for (std::size_t v : {6u, 10u, 37u}) {
      MaskedLm lm = random_lm(v, 3, 0.0);
      Rng rng(v);
      for (int k = 0; k < 20; ++k) {
        const auto s = random_seq(rng, v, 1, 12);
        CHECK(std::abs(pseudo_perplexity(lm, s) - double(v)) <= 1e-9);
      }
    }
  }

  TEST_CASE("perplexity arithmetic") {
    const std::vector<double> lp{std::log(0.5), std::log(0.25)};
    CHECK(perplexity_from_log_probs(lp) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
    const std::vector<double> ones{0.0, 0.0, 0.0};
    CHECK(perplexity_from_log_probs(ones) == 1.0);
    CHECK_THROWS_AS(perplexity_from_log_probs({}), ValidationError);
    const std::vector<double> bad{std::nan("")};
    CHECK_THROWS_AS(perplexity_from_log_probs(bad), NumericError);
    // Underflow of the direct product is harmless in log space.
    const std::vector<double> tiny(400, -50.0);
    CHECK(perplexity_from_log_probs(tiny) == doctest::Approx(std::exp(50.0)).epsilon(1e-12));
  }

  TEST_CASE("log-space pp equals the direct product and is order-free") {
    Rng rng(21);
    for (int k = 0; k < 200; ++k) {
      const std::size_t v = 8 + rng.below(8);
      const auto lm = random_lm(v, rng.next(), 0.5);
      const auto s = random_seq(rng, v, 1, 8);
      const auto lp = masked_token_log_probs(lm, s);
      REQUIRE(lp.size() == s.content_length());
      for (double x : lp) REQUIRE(x >= std::log(1e-3));
      CHECK(rel_err(pseudo_perplexity(lm, s), direct_pp(lm, s)) <= 1e-9);
      auto shuffled = lp;
      rng.shuffle(std::span(shuffled));
      CHECK(rel_err(perplexity_from_log_probs(shuffled), perplexity_from_log_probs(lp)) <= 1e-12);
    }
  }

  TEST_CASE("softmax rows sum to one") {
    Rng rng(5);
    const auto lm = random_lm(20, 8, 3.0);
    std::vector<double> lp(20);
    for (int k = 0; k < 50; ++k) {
      const auto s = random_seq(rng, 20, 1, 10);
      const std::size_t pos = 1 + rng.below(s.content_length());
      log_distribution(lm, s.ids, pos, lp);
      double total = 0.0;
      for (double x : lp) total += std::exp(x);
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
    CHECK_THROWS_AS(log_distribution(lm, random_seq(rng, 20, 2, 2).ids, 9, lp), ValidationError);
  }

  TEST_CASE("masking plan statistics over 10,000 sequences") {
    Rng rng(99);
    const MaskingConfig cfg;
    std::size_t content = 0, masked = 0, n_mask = 0, n_random = 0, n_keep = 0;
    for (int k = 0; k < 10000; ++k) {
      const auto s = random_seq(rng, 50, 1, 40);
      const auto plan = plan_masking(s, cfg, 50, rng);
      const double expect = cfg.ratio * double(s.content_length());
      CHECK(double(plan.size()) >= std::floor(expect));
      CHECK(double(plan.size()) <= std::ceil(expect));
      const auto input = apply_plan(s, plan);
      for (const auto& m : plan) {
        REQUIRE(m.position >= 1);
        REQUIRE(m.position + 1 < s.ids.size());
        REQUIRE(m.original == s.ids[m.position]);
        REQUIRE(input[m.position] == m.input);
        switch (m.kind) {
          case Replacement::mask:
            REQUIRE(m.input == Vocabulary::kMask);
            ++n_mask;
            break;
          case Replacement::random:
            REQUIRE_FALSE(Vocabulary::is_reserved(m.input));
            ++n_random;
            break;
          case Replacement::keep:
            REQUIRE(m.input == m.original);
            ++n_keep;
            break;
        }
      }
      content += s.content_length();
      masked += plan.size();
    }
    const double frac = double(masked) / double(content);
    CHECK(frac >= 0.14);
    CHECK(frac <= 0.16);
    CHECK(std::abs(double(n_mask) / double(masked) - 0.8) <= 0.02);
    CHECK(std::abs(double(n_random) / double(masked) - 0.1) <= 0.02);
    CHECK(std::abs(double(n_keep) / double(masked) - 0.1) <= 0.02);

    MaskingConfig bad;
    bad.ratio = 1.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = {};
    bad.mask_prob = 0.95;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("masked loss gradient matches central differences") {
    Rng rng(31);
    auto lm = random_lm(9, 4, 1.0);
    std::vector<TokenSequence> seqs;
    std::vector<MaskingPlan> plans;
    for (int k = 0; k < 3; ++k) {
      seqs.push_back(random_seq(rng, 9, 4, 8));
      plans.push_back(plan_masking(seqs.back(), {0.5, 0.8, 0.1}, 9, rng));
    }
    nn::GradientMap g;
    masked_loss_grad(lm, seqs, plans, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < lm.params.size(); ++i) {
      const double orig = lm.params.values()[i];
      lm.params.values()[i] = orig + 1e-6;
      const double up = masked_loss(lm, seqs, plans);
      lm.params.values()[i] = orig - 1e-6;
      const double down = masked_loss(lm, seqs, plans);
      lm.params.values()[i] = orig;
      worst = std::max(worst, rel_err(g.values()[i], (up - down) / 2e-6));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_SUITE("lm.train") {
  TEST_CASE("training lowers held-out masked loss, 5 seeds") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = testing::synth_corpora(testing::small_synth({200}), seed);
      const auto& d = s.corpora.at("alpha");
      std::vector<TokenSequence> train, held;
      for (const auto& x : d.train) train.push_back(x.tokens);
      for (const auto& x : d.val) held.push_back(x.tokens);
      MlmConfig cfg;
      cfg.embed_dim = 16;
      cfg.epochs = 10;
      const auto r = train_mlm(train, s.vocab, cfg, seed);
      Rng rng(seed + 100);
      std::vector<MaskingPlan> plans;
      for (const auto& h : held) plans.push_back(plan_masking(h, cfg.masking, s.vocab.size(), rng));
      const MaskedLm init{r.lm.spec, init_lm(r.lm.spec, seed)};
      CAPTURE(seed);
      CHECK(masked_loss(r.lm, held, plans) < masked_loss(init, held, plans));
      CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    }
  }

  TEST_CASE("one-token vocabulary drives the loss to zero") {
    const Vocabulary vocab(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "x"});
    std::vector<TokenSequence> corpus;
    for (int k = 0; k < 40; ++k) {
      TokenSequence s{"s", {Vocabulary::kCls}};
      for (int i = 0; i < 3 + k % 7; ++i) s.ids.push_back(5);
      s.ids.push_back(Vocabulary::kSep);
      corpus.push_back(s);
    }
    MlmConfig cfg;
    cfg.embed_dim = 4;
    cfg.epochs = 150;
    cfg.lr = 0.05;
    const auto r = train_mlm(corpus, vocab, cfg, 1);
    CHECK(r.epoch_loss.back() < 1e-3);
    CHECK(pseudo_perplexity(r.lm, corpus[0]) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("fixed seed: identical plans and parameters") {
    const auto s = testing::synth_corpora(testing::small_synth({80}), 3);
    std::vector<TokenSequence> train;
    for (const auto& x : s.corpora.at("alpha").train) train.push_back(x.tokens);
    MlmConfig cfg;
    cfg.embed_dim = 8;
    cfg.epochs = 3;
    const auto a = train_mlm(train, s.vocab, cfg, 7);
    const auto b = train_mlm(train, s.vocab, cfg, 7);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(std::equal(a.lm.params.values().begin(), a.lm.params.values().end(), b.lm.params.values().begin()));
    const auto c = train_mlm(train, s.vocab, cfg, 8);
    CHECK(a.epoch_loss != c.epoch_loss);

    Rng r1(4), r2(4);
    for (const auto& t : train) {
      const auto p1 = plan_masking(t, cfg.masking, s.vocab.size(), r1);
      const auto p2 = plan_masking(t, cfg.masking, s.vocab.size(), r2);
      REQUIRE(p1.size() == p2.size());
      for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].position == p2[i].position);
        CHECK(p1[i].input == p2[i].input);
      }
    }
  }

  TEST_CASE("training rejects corpora without content") {
    const Vocabulary vocab(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "x"});
    const std::vector<TokenSequence> empty_docs{{"a", {Vocabulary::kCls, Vocabulary::kSep}}};
    CHECK_THROWS_AS(train_mlm(empty_docs, vocab, {}, 1), ValidationError);
    CHECK_THROWS_AS(train_mlm({}, vocab, {}, 1), ValidationError);
  }
}

TEST_SUITE("lm.score") {
  TEST_CASE("records: w = 1/pp, input order, ranking by w is ranking by -pp") {
    Rng rng(2);
    const auto lm = random_lm(15, 6, 1.5);
    std::vector<TokenSequence> seqs;
    for (int k = 0; k < 30; ++k) seqs.push_back(random_seq(rng, 15, 1, 10, "i" + std::to_string(k)));
    seqs.push_back({"blank", {Vocabulary::kCls, Vocabulary::kSep}});
    const auto sources = labeled(seqs, "b");
    const auto rep = score_sources(lm, sources);
    REQUIRE(rep.records.size() == 30);
    REQUIRE(rep.failures.size() == 1);
    CHECK(rep.failures[0].id == "blank");
    for (std::size_t k = 0; k < rep.records.size(); ++k) {
      CHECK(rep.records[k].id == "i" + std::to_string(k));
      CHECK(rep.records[k].domain == "b");
      CHECK(rep.records[k].pp > 0.0);
      CHECK(std::abs(rep.records[k].w * rep.records[k].pp - 1.0) <= 1e-12);
    }
    auto by_w = rep.records, by_pp = rep.records;
    std::stable_sort(by_w.begin(), by_w.end(), [](auto& a, auto& b) { return a.w > b.w; });
    std::stable_sort(by_pp.begin(), by_pp.end(), [](auto& a, auto& b) { return a.pp < b.pp; });
    for (std::size_t k = 0; k < by_w.size(); ++k) CHECK(by_w[k].id == by_pp[k].id);

    const auto none = score_sources(lm, {});
    CHECK(none.records.empty());
    CHECK(none.failures.empty());
  }

  TEST_CASE("pp 2 and 4 give weights 0.5 and 0.25") {
    const std::vector<TransferabilityRecord> recs{{"a", "d", 4.0, 0.25}, {"b", "d", 2.0, 0.5}};
    const auto csv = records_csv(recs);
    CHECK(csv == "id,domain,pp,w\na,d,4,0.25\nb,d,2,0.5\n");
    const auto back = parse_records_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[1].w == 0.5);
    CHECK(back[0].w == 0.25);
    CHECK_THROWS_AS(parse_records_csv("id,pp\n"), ValidationError);
  }

  TEST_CASE("D-values: identity, single row, vocabulary mismatch") {
    Rng rng(12);
    const auto lm1 = random_lm(12, 1);
    const auto lm2 = random_lm(12, 2);
    std::vector<TokenSequence> seqs;
    for (int k = 0; k < 10; ++k) seqs.push_back(random_seq(rng, 12, 2, 8, "x" + std::to_string(k)));
    const auto sources = labeled(seqs, "b");
    for (const auto& row : dvalue_report(lm1, lm1, sources)) CHECK(row.dvalue == 0.0);

    const auto rows = dvalue_report(lm1, lm2, sources);
    double mean = 0.0, var = 0.0;
    for (const auto& r : rows) {
      CHECK(r.dvalue == r.pp_t1 - r.pp_t2);
      mean += r.dvalue / double(rows.size());
    }
    for (const auto& r : rows) var += (r.dvalue - mean) * (r.dvalue - mean);
    CHECK(var > 0.0);

    const auto one = dvalue_report(lm1, lm2, std::span(sources).first(1));
    const auto csv = dvalue_csv(one);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.rfind("id,pp_t1,pp_t2,dvalue\nx0,", 0) == 0);

    const auto hist = dvalue_histogram_csv(rows, 4);
    CHECK(std::count(hist.begin(), hist.end(), '\n') == 5);
    CHECK_THROWS_AS(dvalue_histogram_csv(rows, 0), ValidationError);

    auto other = random_lm(12, 3);
    other.spec.vocab_fingerprint = "different";
    CHECK_THROWS_AS(dvalue_report(lm1, other, sources), ValidationError);
  }
}
