#include <cstdlib>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "decatt/eval.hpp"

using namespace decatt;

namespace {

ModelConfig eval_config() {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.ngram = 3;
  cfg.widths = {10, 6};
  return cfg;
}

// A checkpoint whose every weight is zero: both logits are always zero, so
// every pair scores exactly 0.5.
Checkpoint constant_checkpoint(const std::vector<LabeledPair>& pairs) {
  Vocab vocab = build_vocab(question_pool(pairs), 3, 1);
  Checkpoint ckpt;
  ckpt.model = ModelParams<float>::init(eval_config(), vocab.size(), 1);
  for (auto* p : ckpt.model.store.all()) p->value.setZero();
  ckpt.vocab_hash = vocab.hash();
  ckpt.vocab = std::move(vocab);
  return ckpt;
}

std::vector<LabeledPair> whole_synth(std::size_t n, std::uint64_t seed) {
  CorpusSplit split = synth_corpus(n, 120, seed);
  std::vector<LabeledPair> all = split.train;
  all.insert(all.end(), split.dev.begin(), split.dev.end());
  return all;
}

struct EnvGuard {
  explicit EnvGuard(const char* value) {
    if (value) {
      ::setenv("DECATT_THREADS", value, 1);
    } else {
      ::unsetenv("DECATT_THREADS");
    }
  }
  ~EnvGuard() { ::unsetenv("DECATT_THREADS"); }
};

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("scores at the threshold count as positive") {
  EvalReport rep = report_from_scores({0.3, 0.29}, {1, 0}, 0.3);
  CHECK(rep.tp == 1);
  CHECK(rep.tn == 1);
  CHECK(rep.fp == 0);
  CHECK(rep.fn == 0);
  CHECK(rep.accuracy == 1.0);
  REQUIRE(rep.records.size() == 2);
  CHECK(rep.records[0].predicted == 1);
  CHECK(rep.records[1].predicted == 0);

  // the boundary is inclusive from above only
  EvalReport edge =
      report_from_scores({0.3, 0.3 - 1e-9}, {1, 1}, 0.3);
  CHECK(edge.tp == 1);
  CHECK(edge.fn == 1);
}

TEST_CASE("report_from_scores keeps input order and validates shape") {
  EvalReport rep = report_from_scores({0.9, 0.1, 0.6}, {1, 0, 0}, 0.5);
  CHECK(rep.records[0].score == 0.9);
  CHECK(rep.records[1].gold == 0);
  CHECK(rep.records[2].predicted == 1);
  CHECK(rep.fp == 1);
  CHECK(rep.accuracy == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(report_from_scores({0.5}, {1, 0}, 0.3), ShapeError);
  CHECK_THROWS_AS(report_from_scores({}, {}, 0.3), EmptyCorpusError);
}

TEST_CASE("a constant 0.5 scorer recovers the label proportions") {
  auto pairs = whole_synth(100, 3);
  Checkpoint ckpt = constant_checkpoint(pairs);

  EvalReport low = evaluate(ckpt, pairs, 0.3);
  CHECK(low.tp == 36);  // everything predicted positive
  CHECK(low.fp == 64);
  CHECK(low.accuracy == doctest::Approx(0.36));

  EvalReport high = evaluate(ckpt, pairs, 0.6);
  CHECK(high.tn == 64);
  CHECK(high.fn == 36);
  CHECK(high.accuracy == doctest::Approx(0.64));
}

TEST_CASE("evaluate matches the trainer's dev accuracy") {
  CorpusSplit split = synth_corpus(90, 60, 11);
  Vocab vocab = build_vocab(question_pool(split.train), 3, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.dropout = 0.0;
  Checkpoint ckpt =
      train(ModelParams<float>::init(eval_config(), vocab.size(), 5), vocab,
            split.train, split.dev, cfg);
  EvalReport rep = evaluate(ckpt, split.dev, cfg.threshold);
  CHECK(rep.accuracy ==
        dev_accuracy(ckpt.model, ckpt.vocab, split.dev, cfg.threshold));
}

TEST_CASE("evaluation is order- and thread-invariant") {
  auto pairs = whole_synth(60, 9);
  Checkpoint ckpt = constant_checkpoint(pairs);

  EvalReport one = evaluate(ckpt, pairs, 0.3, 1);
  EvalReport four = evaluate(ckpt, pairs, 0.3, 4);
  REQUIRE(one.records.size() == four.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(one.records[i].score == four.records[i].score);
  }

  std::vector<LabeledPair> reversed(pairs.rbegin(), pairs.rend());
  EvalReport back = evaluate(ckpt, reversed, 0.3, 1);
  CHECK(back.tp == one.tp);
  CHECK(back.fp == one.fp);
  CHECK(back.accuracy == one.accuracy);

  CHECK_THROWS_AS(evaluate(ckpt, {}, 0.3), EmptyCorpusError);
}

TEST_CASE("threshold_sweep scans the grid and breaks ties downward") {
  auto pairs = whole_synth(100, 3);  // 36 positive / 64 negative
  Checkpoint ckpt = constant_checkpoint(pairs);

  SweepResult sweep = threshold_sweep(ckpt, pairs, {0.8, 0.6, 0.4, 0.2});
  REQUIRE(sweep.rows.size() == 4);
  CHECK(sweep.rows[0].threshold == 0.8);  // grid order is preserved
  CHECK(sweep.rows[0].accuracy == doctest::Approx(0.64));
  CHECK(sweep.rows[3].accuracy == doctest::Approx(0.36));
  // 0.6 and 0.8 tie at 0.64; the smaller threshold wins
  CHECK(sweep.best_threshold == 0.6);
  CHECK(sweep.best_accuracy == doctest::Approx(0.64));

  SweepResult single = threshold_sweep(ckpt, pairs, {0.5});
  CHECK(single.rows.size() == 1);
  CHECK(single.best_accuracy == evaluate(ckpt, pairs, 0.5).accuracy);

  CHECK_THROWS_AS(threshold_sweep(ckpt, pairs, {}), ConfigError);
  CHECK_THROWS_AS(threshold_sweep(ckpt, pairs, {1.5}), ConfigError);
  CHECK_THROWS_AS(threshold_sweep(ckpt, {}, {0.5}), EmptyCorpusError);
}

TEST_CASE("worker_count respects determinism, the env cap, and job count") {
  { EnvGuard guard(nullptr);
    CHECK(worker_count(100, true) == 1);
    CHECK(worker_count(1, false) == 1);
    CHECK(worker_count(0, false) == 1);
    CHECK(worker_count(100, false) >= 1);
    CHECK(worker_count(100, false) <= 16);
    CHECK(worker_count(2, false) <= 2);
  }
  { EnvGuard guard("3");
    const int n = worker_count(100, false);
    CHECK(n >= 1);
    CHECK(n <= 3);
  }
  { EnvGuard guard("64");
    CHECK(worker_count(1000, false) <= 16);
  }
  { EnvGuard guard("0");
    CHECK_THROWS_AS(worker_count(100, false), ConfigError);
  }
  { EnvGuard guard("many");
    CHECK_THROWS_AS(worker_count(100, false), ConfigError);
  }
}

TEST_CASE("error_report lists disagreements with one line per model") {
  auto pairs = whole_synth(30, 5);
  std::size_t negatives = 0;
  for (const auto& p : pairs) negatives += p.label == 0;
  REQUIRE(negatives > 3);

  Checkpoint ckpt = constant_checkpoint(pairs);  // predicts all positive
  const std::string capped = error_report({&ckpt}, pairs, 3);
  CHECK(capped.find("# 3 of " + std::to_string(negatives) +
                    " disagreements") == 0);

  const std::string full = error_report({&ckpt}, pairs, 1000);
  std::size_t blocks = 0, model_lines = 0;
  for (std::size_t at = full.find("gold="); at != std::string::npos;
       at = full.find("gold=", at + 1)) {
    ++blocks;
  }
  for (std::size_t at = full.find("model-1:"); at != std::string::npos;
       at = full.find("model-1:", at + 1)) {
    ++model_lines;
  }
  CHECK(blocks == negatives);
  CHECK(model_lines == negatives);

  // two copies of the same model never split the vote
  const std::string twins = error_report({&ckpt, &ckpt}, pairs, 1000);
  CHECK(twins.find("models disagree") == std::string::npos);
  CHECK(twins.find("model-2:") != std::string::npos);

  CHECK_THROWS_AS(error_report({&ckpt}, pairs, 0), ConfigError);
  CHECK_THROWS_AS(error_report({}, pairs, 5), ConfigError);
}

TEST_CASE("report_tsv is a fixed three-column layout") {
  EvalReport rep = report_from_scores({0.3, 0.29}, {1, 0}, 0.3);
  CHECK(report_tsv(rep) ==
        "score\tgold\tpredicted\n"
        "0.300000\t1\t1\n"
        "0.290000\t0\t0\n");
}

TEST_CASE("report_summary prints the confusion counts") {
  EvalReport rep = report_from_scores({0.9, 0.1, 0.2}, {1, 0, 1}, 0.5);
  const std::string line = report_summary(rep);
  CHECK(line.find("accuracy 0.6667") != std::string::npos);
  CHECK(line.find("tp 1") != std::string::npos);
  CHECK(line.find("tn 1") != std::string::npos);
  CHECK(line.find("fn 1") != std::string::npos);
  CHECK(line.find("pairs 3") != std::string::npos);
  CHECK(line.back() == '\n');
}

}  // TEST_SUITE
