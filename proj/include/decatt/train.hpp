#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "decatt/corpus.hpp"
#include "decatt/model.hpp"

namespace decatt {

struct TrainConfig {
  std::string stage = "train";  // pretrain | finetune | train
  double lr = 0.1;
  int batch_size = 64;
  double dropout = 0.1;
  int epochs = 10;
  std::uint64_t seed = 1;
  int eval_every = 0;  // steps between dev evals; 0 = once per epoch
  double threshold = 0.3;
  bool freeze_except_embeddings = false;
  bool sgd = false;  // plain SGD instead of the adaptive update
  double clip_norm = 5.0;
  bool quiet = true;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelParams<float> model;
  Vocab vocab;
  std::uint64_t vocab_hash = 0;
  TrainConfig train_config;
  std::int64_t step = 0;
  std::vector<std::pair<std::int64_t, double>> dev_history;

  Checkpoint() : vocab(0, 0) {}
  Checkpoint(Checkpoint&&) = default;
  Checkpoint& operator=(Checkpoint&&) = default;
};

// Dev accuracy of the model at a threshold; scoring only, no mutation.
double dev_accuracy(ModelParams<float>& model, const Vocab& vocab,
                    const std::vector<LabeledPair>& pairs, double threshold);

// Epoch loop with seeded shuffling, mini-batch mean cross-entropy, and the
// adaptive update; returns the checkpoint with the best dev accuracy (ties
// keep the earlier step). With no dev set, returns the final parameters.
Checkpoint train(ModelParams<float> model, Vocab vocab,
                 const std::vector<LabeledPair>& data,
                 const std::vector<LabeledPair>& dev, const TrainConfig& cfg);

// Two-stage regime: train on the noisy corpus, then continue every parameter
// on the labeled one. The vocabulary is built over both train splits.
// cfg_pre.freeze_except_embeddings limits stage one to the embedding table.
Checkpoint pretrain_then_finetune(const ModelConfig& mcfg, int min_count,
                                  const CorpusSplit& noisy,
                                  const CorpusSplit& labeled,
                                  const TrainConfig& cfg_pre,
                                  const TrainConfig& cfg_fine,
                                  std::uint64_t init_seed);

struct CurveRow {
  std::size_t size = 0;
  double accuracy = 0.0;
  std::string variant;  // "scratch" | "pretrained"
};

// Per size: train on a seeded subsample (from the pretrained model when one
// is given, otherwise a fresh init) and record dev accuracy.
std::vector<CurveRow> learning_curve(const ModelConfig& mcfg,
                                     const Vocab& vocab,
                                     const CorpusSplit& corpus,
                                     const std::vector<std::size_t>& sizes,
                                     const Checkpoint* pretrained,
                                     const TrainConfig& cfg);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Seeded subsample of `size` pairs (used by learning_curve and the CLI).
std::vector<LabeledPair> subsample(const std::vector<LabeledPair>& pairs,
                                   std::size_t size, std::uint64_t seed);

}  // namespace decatt
