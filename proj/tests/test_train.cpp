#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "decatt/eval.hpp"
#include "decatt/train.hpp"

using namespace decatt;

namespace {

ModelConfig small_config(int dim = 8, bool self_attention = false) {
  ModelConfig cfg;
  cfg.dim = dim;
  cfg.context = 1;
  cfg.ngram = 3;
  cfg.self_attention = self_attention;
  cfg.widths = {12, 8};
  return cfg;
}

TrainConfig quick_train(int epochs, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.batch_size = 8;
  cfg.dropout = 0.0;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

struct Fixture {
  CorpusSplit corpus;
  Vocab vocab;
  ModelConfig mcfg;

  explicit Fixture(std::size_t pairs = 120, int dim = 8)
      : corpus(synth_corpus(pairs, 60, 13)),
        vocab(build_vocab(question_pool(corpus.train), 3, 1)),
        mcfg(small_config(dim)) {}

  ModelParams<float> fresh(std::uint64_t seed = 7) const {
    return ModelParams<float>::init(mcfg, vocab.size(), seed);
  }
};

bool same_tensors(const ModelParams<float>& a, const ModelParams<float>& b) {
  auto pa = a.store.all();
  auto pb = b.store.all();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name || pa[i]->value != pb[i]->value) {
      return false;
    }
  }
  return true;
}

double score_once(const Checkpoint& ckpt, const LabeledPair& pair) {
  auto& model = const_cast<ModelParams<float>&>(ckpt.model);
  return score_pair(model, ckpt.vocab, pair.q1, pair.q2, 0.3).p_paraphrase;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("a zero learning rate changes nothing") {
  Fixture f;
  auto model = f.fresh();
  auto reference = f.fresh();  // same seed, same tensors

  TrainConfig cfg = quick_train(2);
  cfg.lr = 0.0;
  Checkpoint ckpt = train(std::move(model), f.vocab, f.corpus.train,
                          f.corpus.dev, cfg);
  CHECK(same_tensors(ckpt.model, reference));
  CHECK(ckpt.step == 0);  // ties keep the earliest candidate: the start
}

TEST_CASE("training rejects an empty corpus") {
  Fixture f;
  CHECK_THROWS_AS(train(f.fresh(), f.vocab, {}, {}, quick_train(1)),
                  EmptyCorpusError);
}

TEST_CASE("training twice with one seed is bitwise identical") {
  Fixture f;
  TrainConfig cfg = quick_train(2, 21);
  Checkpoint a = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev, cfg);
  Checkpoint b = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev, cfg);
  CHECK(same_tensors(a.model, b.model));
  CHECK(a.step == b.step);
  REQUIRE(a.dev_history.size() == b.dev_history.size());
  for (std::size_t i = 0; i < a.dev_history.size(); ++i) {
    CHECK(a.dev_history[i] == b.dev_history[i]);
  }

  TrainConfig other = quick_train(2, 22);
  Checkpoint c = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev,
                       other);
  CHECK(!same_tensors(a.model, c.model));
}

TEST_CASE("training moves parameters and logs the dev history") {
  Fixture f;
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev,
                          quick_train(3));
  CHECK(!same_tensors(ckpt.model, f.fresh()));
  // one eval at the start plus one per epoch
  CHECK(ckpt.dev_history.size() == 4);
  CHECK(ckpt.dev_history.front().first == 0);
  CHECK(ckpt.vocab_hash == f.vocab.hash());
}

TEST_CASE("eval_every controls the dev cadence") {
  Fixture f;
  TrainConfig cfg = quick_train(1);
  cfg.eval_every = 5;
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev,
                          cfg);
  // 100 train pairs in batches of 8 -> 13 steps; evals at 0, 5, 10, 13.
  REQUIRE(ckpt.dev_history.size() == 4);
  CHECK(ckpt.dev_history[1].first == 5);
  CHECK(ckpt.dev_history[2].first == 10);
  CHECK(ckpt.dev_history[3].first == 13);
}

TEST_CASE("freezing all but embeddings keeps the stacks at initialization") {
  Fixture f;
  TrainConfig cfg = quick_train(2);
  cfg.freeze_except_embeddings = true;
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, {}, cfg);
  auto reference = f.fresh();

  auto trained = ckpt.model.store.all();
  auto init = reference.store.all();
  REQUIRE(trained.size() == init.size());
  bool embeddings_moved = false;
  for (std::size_t i = 0; i < trained.size(); ++i) {
    if (trained[i]->name == "embeddings") {
      embeddings_moved = trained[i]->value != init[i]->value;
    } else {
      CHECK(trained[i]->value == init[i]->value);  // bitwise frozen
    }
  }
  CHECK(embeddings_moved);
}

TEST_CASE("divergence surfaces as a numeric error naming the step") {
  Fixture f;
  TrainConfig cfg = quick_train(3);
  cfg.sgd = true;
  cfg.lr = 1e30;
  cfg.clip_norm = 1e30;  // let it blow up
  try {
    train(f.fresh(), f.vocab, f.corpus.train, {}, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("a 32-pair toy corpus is memorized within 200 epochs") {
  CorpusSplit tiny = synth_corpus(32, 40, 3);
  std::vector<LabeledPair> all = tiny.train;
  all.insert(all.end(), tiny.dev.begin(), tiny.dev.end());
  REQUIRE(all.size() == 32);

  Vocab vocab = build_vocab(question_pool(all), 3, 1);
  auto model = ModelParams<float>::init(small_config(12), vocab.size(), 5);

  TrainConfig cfg = quick_train(200, 5);
  cfg.lr = 0.1;
  // dev = train: the loop stops improving once everything is memorized
  Checkpoint ckpt = train(std::move(model), vocab, all, all, cfg);
  double best = 0.0;
  for (const auto& [step, acc] : ckpt.dev_history) best = std::max(best, acc);
  CHECK(best == 1.0);
}

TEST_CASE("finetuning for zero epochs returns the pretrained model") {
  CorpusSplit noisy = synth_corpus(60, 60, 19);
  CorpusSplit labeled = synth_corpus(60, 60, 23);
  TrainConfig pre = quick_train(1, 3);
  TrainConfig fine = quick_train(0, 4);
  Checkpoint two_stage = pretrain_then_finetune(small_config(), 1, noisy,
                                                labeled, pre, fine, 11);

  // Stage one alone over the same union vocabulary.
  std::vector<TokenSeq> questions = question_pool(noisy.train);
  auto labeled_q = question_pool(labeled.train);
  questions.insert(questions.end(), labeled_q.begin(), labeled_q.end());
  Vocab vocab = build_vocab(questions, small_config().ngram, 1);
  Checkpoint stage_one =
      train(ModelParams<float>::init(small_config(), vocab.size(), 11), vocab,
            noisy.train, noisy.dev, pre);
  CHECK(same_tensors(two_stage.model, stage_one.model));
}

TEST_CASE("embeddings-only pretraining hands untouched stacks to stage two") {
  CorpusSplit noisy = synth_corpus(60, 60, 19);
  CorpusSplit labeled = synth_corpus(60, 60, 23);
  TrainConfig pre = quick_train(2, 3);
  pre.freeze_except_embeddings = true;
  TrainConfig fine = quick_train(0, 4);  // stop right at the handoff
  Checkpoint handoff = pretrain_then_finetune(small_config(), 1, noisy,
                                              labeled, pre, fine, 11);

  auto vocab_size = handoff.model.embeddings->value.rows();
  auto reference = ModelParams<float>::init(
      small_config(), static_cast<std::size_t>(vocab_size), 11);
  auto got = handoff.model.store.all();
  auto want = reference.store.all();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i]->name != "embeddings") {
      CHECK(got[i]->value == want[i]->value);
    }
  }
}

TEST_CASE("subsample is seeded and validates the size") {
  Fixture f;
  auto s1 = subsample(f.corpus.train, 10, 42);
  auto s2 = subsample(f.corpus.train, 10, 42);
  REQUIRE(s1.size() == 10);
  bool same = true;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    same = same && s1[i].q1 == s2[i].q1 && s1[i].q2 == s2[i].q2;
  }
  CHECK(same);
  CHECK_THROWS_AS(subsample(f.corpus.train, f.corpus.train.size() + 1, 1),
                  ConfigError);
}

TEST_CASE("learning_curve emits one row per size in order") {
  Fixture f;
  TrainConfig cfg = quick_train(1);
  auto rows = learning_curve(f.mcfg, f.vocab, f.corpus, {20, 50}, nullptr,
                             cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size == 20);
  CHECK(rows[1].size == 50);
  CHECK(rows[0].variant == "scratch");
  CHECK_THROWS_AS(
      learning_curve(f.mcfg, f.vocab, f.corpus, {50, 20}, nullptr, cfg),
      ConfigError);
}

TEST_CASE("learning_curve at full size equals a plain run") {
  Fixture f;
  TrainConfig cfg = quick_train(1, 31);
  auto rows = learning_curve(f.mcfg, f.vocab, f.corpus,
                             {f.corpus.train.size()}, nullptr, cfg);
  REQUIRE(rows.size() == 1);

  auto sample = subsample(f.corpus.train, f.corpus.train.size(),
                          cfg.seed ^ (f.corpus.train.size() * 0x9E3779B9ull));
  Checkpoint plain =
      train(ModelParams<float>::init(f.mcfg, f.vocab.size(), cfg.seed),
            f.vocab, sample, f.corpus.dev, cfg);
  const double plain_acc =
      dev_accuracy(plain.model, plain.vocab, f.corpus.dev, cfg.threshold);
  CHECK(rows[0].accuracy == doctest::Approx(plain_acc));
}

TEST_CASE("learning_curve refuses a checkpoint from another vocabulary") {
  Fixture f;
  TrainConfig cfg = quick_train(1);
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev,
                          cfg);
  Vocab other = build_vocab({{"completely", "different", "words"}}, 3, 1);
  CHECK_THROWS_AS(
      learning_curve(f.mcfg, other, f.corpus, {10}, &ckpt, cfg),
      VocabError);
}

TEST_CASE("checkpoints round-trip bitwise") {
  testutil::TempDir dir("ckpt");
  Fixture f;
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev,
                          quick_train(1));
  save_checkpoint(dir.file("m.ckpt"), ckpt);
  Checkpoint back = load_checkpoint(dir.file("m.ckpt"));

  CHECK(same_tensors(ckpt.model, back.model));
  CHECK(back.vocab_hash == ckpt.vocab_hash);
  CHECK(back.vocab.size() == ckpt.vocab.size());
  CHECK(back.step == ckpt.step);
  CHECK(back.train_config.lr == ckpt.train_config.lr);
  REQUIRE(back.dev_history.size() == ckpt.dev_history.size());

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    LabeledPair pair{testutil::random_seq(rng, 9, 1, 5),
                     testutil::random_seq(rng, 9, 1, 5), 0};
    CHECK(score_once(ckpt, pair) == score_once(back, pair));
  }
}

TEST_CASE("checkpoint writes are byte-stable") {
  testutil::TempDir dir("ckpt-bytes");
  Fixture f;
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, f.corpus.dev,
                          quick_train(1));
  save_checkpoint(dir.file("a.ckpt"), ckpt);
  save_checkpoint(dir.file("b.ckpt"), ckpt);
  CHECK(testutil::read_file(dir.file("a.ckpt")) ==
        testutil::read_file(dir.file("b.ckpt")));
}

TEST_CASE("corrupt checkpoints are rejected") {
  testutil::TempDir dir("ckpt-bad");
  Fixture f;
  Checkpoint ckpt = train(f.fresh(), f.vocab, f.corpus.train, {},
                          quick_train(1));
  save_checkpoint(dir.file("good.ckpt"), ckpt);
  const std::string bytes = testutil::read_file(dir.file("good.ckpt"));

  SUBCASE("bad magic") {
    std::string garbled = bytes;
    garbled[0] = 'X';
    testutil::write_file(dir.file("magic.ckpt"), garbled);
    CHECK_THROWS_AS(load_checkpoint(dir.file("magic.ckpt")), FormatError);
  }
  SUBCASE("future version names both versions") {
    std::string bumped = bytes;
    bumped[8] = 9;  // little-endian version field right after the magic
    testutil::write_file(dir.file("v9.ckpt"), bumped);
    try {
      load_checkpoint(dir.file("v9.ckpt"));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find('9') != std::string::npos);
      CHECK(msg.find('1') != std::string::npos);
    }
  }
  SUBCASE("truncation at any depth") {
    for (std::size_t cut : {std::size_t{4}, std::size_t{11}, std::size_t{40},
                            bytes.size() / 2, bytes.size() - 3}) {
      testutil::write_file(dir.file("cut.ckpt"), bytes.substr(0, cut));
      CHECK_THROWS_AS(load_checkpoint(dir.file("cut.ckpt")), FormatError);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir.file("nope.ckpt")), IoError);
  }
}

}  // TEST_SUITE
