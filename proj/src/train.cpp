#include "decatt/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace decatt {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, arch, dim, context, ngram,
                                   self_attention, widths, bias_clip)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, stage, lr, batch_size, dropout,
                                   epochs, seed, eval_every, threshold,
                                   freeze_except_embeddings, sgd, clip_norm,
                                   quiet)

double dev_accuracy(ModelParams<float>& model, const Vocab& vocab,
                    const std::vector<LabeledPair>& pairs, double threshold) {
  if (pairs.empty()) throw EmptyCorpusError("dev set is empty");
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const PairScore s = score_pair(model, vocab, p.q1, p.q2, threshold);
    correct += static_cast<int>(s.label) == p.label;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

Checkpoint train(ModelParams<float> model, Vocab vocab,
                 const std::vector<LabeledPair>& data,
                 const std::vector<LabeledPair>& dev, const TrainConfig& cfg) {
  if (data.empty()) throw EmptyCorpusError("training data is empty");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.lr < 0) throw ConfigError("learning rate must be >= 0");
  if (cfg.dropout < 0 || cfg.dropout >= 1) {
    throw ConfigError("dropout must be in [0, 1)");
  }

  auto params = model.params();
  std::vector<bool> frozen(params.size(), false);
  if (cfg.freeze_except_embeddings) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      frozen[i] = params[i]->name != "embeddings";
    }
  }
  std::vector<Mat<float>> acc;
  acc.reserve(params.size());
  for (auto* p : params) {
    acc.push_back(Mat<float>::Zero(p->value.rows(), p->value.cols()));
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::pair<std::int64_t, double>> history;
  std::vector<Mat<float>> best_values;
  double best_acc = -1.0;
  std::int64_t best_step = -1;
  std::int64_t step = 0;

  auto run_eval = [&]() {
    if (dev.empty()) return;
    const double a = dev_accuracy(model, vocab, dev, cfg.threshold);
    history.emplace_back(step, a);
    if (a > best_acc) {
      best_acc = a;
      best_step = step;
      best_values.clear();
      for (auto* p : params) best_values.push_back(p->value);
    }
    if (!cfg.quiet) {
      std::fprintf(stderr, "step %lld dev accuracy %.4f\n",
                   static_cast<long long>(step), a);
    }
  };

  run_eval();  // the starting weights count as a candidate

  const float lr = static_cast<float>(cfg.lr);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t batch = batch_end - at;

      for (auto* p : params) p->zero_grad();
      double batch_loss = 0.0;
      try {
        for (std::size_t k = at; k < batch_end; ++k) {
          const LabeledPair& pair = data[order[k]];
          Graph<float> g;
          auto out = forward<float>(g, model, pair.q1, pair.q2, vocab,
                                    cfg.threshold,
                                    static_cast<float>(cfg.dropout), true,
                                    &rng, pair.label);
          batch_loss += static_cast<double>(g.value(out.loss)(0, 0));
          g.backward(out.loss, 1.0f / static_cast<float>(batch));
        }
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (training step " +
                           std::to_string(step) + ")");
      }
      batch_loss /= static_cast<double>(batch);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged at step " +
                           std::to_string(step));
      }
      epoch_loss += batch_loss;
      ++epoch_batches;

      if (cfg.clip_norm > 0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (frozen[i]) continue;
          sq += static_cast<double>(params[i]->grad.squaredNorm());
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          const float s = static_cast<float>(cfg.clip_norm / norm);
          for (std::size_t i = 0; i < params.size(); ++i) {
            if (!frozen[i]) params[i]->grad *= s;
          }
        }
      }

      for (std::size_t i = 0; i < params.size(); ++i) {
        if (frozen[i]) continue;
        Param<float>* p = params[i];
        if (cfg.sgd) {
          p->value.array() -= lr * p->grad.array();
        } else {
          acc[i].array() += p->grad.array().square();
          p->value.array() -=
              lr * p->grad.array() / (acc[i].array() + 1e-8f).sqrt();
        }
      }
      ++step;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) run_eval();
    }
    if (cfg.eval_every == 0) run_eval();
    if (!cfg.quiet) {
      std::fprintf(stderr, "epoch %d mean loss %.5f\n", epoch + 1,
                   epoch_loss / std::max<std::size_t>(1, epoch_batches));
    }
  }
  if (!dev.empty() &&
      (history.empty() || history.back().first != step)) {
    run_eval();
  }

  if (best_step >= 0) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->value = best_values[i];
    }
  }

  Checkpoint ckpt;
  ckpt.vocab_hash = vocab.hash();
  ckpt.model = std::move(model);
  ckpt.vocab = std::move(vocab);
  ckpt.train_config = cfg;
  ckpt.step = best_step >= 0 ? best_step : step;
  ckpt.dev_history = std::move(history);
  return ckpt;
}

Checkpoint pretrain_then_finetune(const ModelConfig& mcfg, int min_count,
                                  const CorpusSplit& noisy,
                                  const CorpusSplit& labeled,
                                  const TrainConfig& cfg_pre,
                                  const TrainConfig& cfg_fine,
                                  std::uint64_t init_seed) {
  if (noisy.train.empty() || labeled.train.empty()) {
    throw EmptyCorpusError("both corpora must be nonempty");
  }
  std::vector<TokenSeq> vocab_corpus = question_pool(noisy.train);
  {
    auto more = question_pool(labeled.train);
    vocab_corpus.insert(vocab_corpus.end(), more.begin(), more.end());
  }
  Vocab vocab = build_vocab(vocab_corpus, mcfg.ngram, min_count);

  ModelParams<float> model =
      ModelParams<float>::init(mcfg, vocab.size(), init_seed);
  Checkpoint pre = train(std::move(model), vocab, noisy.train, noisy.dev,
                         cfg_pre);
  if (cfg_fine.epochs == 0) return pre;
  return train(std::move(pre.model), std::move(pre.vocab), labeled.train,
               labeled.dev, cfg_fine);
}

std::vector<LabeledPair> subsample(const std::vector<LabeledPair>& pairs,
                                   std::size_t size, std::uint64_t seed) {
  if (size > pairs.size()) {
    throw ConfigError("subsample of " + std::to_string(size) + " from " +
                      std::to_string(pairs.size()) + " pairs");
  }
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<LabeledPair> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(pairs[order[i]]);
  return out;
}

std::vector<CurveRow> learning_curve(const ModelConfig& mcfg,
                                     const Vocab& vocab,
                                     const CorpusSplit& corpus,
                                     const std::vector<std::size_t>& sizes,
                                     const Checkpoint* pretrained,
                                     const TrainConfig& cfg) {
  if (sizes.empty()) throw ConfigError("no sizes given");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0 && sizes[i] <= sizes[i - 1]) {
      throw ConfigError("sizes must be strictly ascending");
    }
    if (sizes[i] > corpus.train.size()) {
      throw ConfigError("size " + std::to_string(sizes[i]) +
                        " exceeds train split of " +
                        std::to_string(corpus.train.size()));
    }
  }
  if (pretrained && pretrained->vocab_hash != vocab.hash()) {
    throw VocabError("pretrained checkpoint was built over a different vocab");
  }

  std::vector<CurveRow> rows;
  for (std::size_t size : sizes) {
    auto sub = subsample(corpus.train, size, cfg.seed ^ (size * 0x9E3779B9ULL));
    ModelParams<float> model;
    if (pretrained) {
      model = ModelParams<float>::init(pretrained->model.config, vocab.size(),
                                       0);
      model.copy_values_from(pretrained->model);
    } else {
      model = ModelParams<float>::init(mcfg, vocab.size(), cfg.seed);
    }
    Checkpoint ck = train(std::move(model), vocab, sub, corpus.dev, cfg);
    CurveRow row;
    row.size = size;
    row.variant = pretrained ? "pretrained" : "scratch";
    row.accuracy = dev_accuracy(ck.model, ck.vocab, corpus.dev, cfg.threshold);
    rows.push_back(row);
  }
  return rows;
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void read_exact(std::ifstream& in, char* buf, std::size_t n,
                const char* what) {
  in.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("truncated checkpoint while reading ") +
                      what);
  }
}

std::uint32_t read_u32(std::ifstream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::ifstream& in, const char* what) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

constexpr char kMagic[8] = {'D', 'E', 'C', 'A', 'T', 'T', 'C', 'K'};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);

  json vocab_entries = json::array();
  for (std::size_t id = 0; id < ckpt.vocab.size(); ++id) {
    vocab_entries.push_back(
        {ckpt.vocab.key_of(static_cast<int>(id)),
         ckpt.vocab.count_of(static_cast<int>(id))});
  }
  const auto tensors = ckpt.model.store.all();
  json meta = {
      {"config", ckpt.model.config},
      {"vocab",
       {{"n", ckpt.vocab.n()},
        {"min_count", ckpt.vocab.min_count()},
        {"entries", std::move(vocab_entries)}}},
      {"vocab_hash", to_hex(ckpt.vocab_hash)},
      {"train_config", ckpt.train_config},
      {"step", ckpt.step},
      {"dev_history", ckpt.dev_history},
      {"tensor_count", tensors.size()},
  };
  const std::string mbytes = meta.dump();

  out.write(kMagic, 8);
  write_u32(out, Checkpoint::kVersion);
  write_u64(out, mbytes.size());
  out.write(mbytes.data(), static_cast<std::streamsize>(mbytes.size()));

  for (const Param<float>* p : tensors) {
    write_u64(out, p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u64(out, 2);  // rank
    write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
    write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(float) * p->value.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);

  char magic[8];
  read_exact(in, magic, 8, "magic");
  if (std::string_view(magic, 8) != std::string_view(kMagic, 8)) {
    throw FormatError(path + " is not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != Checkpoint::kVersion) {
    throw FormatError("checkpoint has format version " +
                      std::to_string(version) + ", this build reads version " +
                      std::to_string(Checkpoint::kVersion));
  }
  const std::uint64_t mlen = read_u64(in, "metadata length");
  std::string mbytes(mlen, '\0');
  read_exact(in, mbytes.data(), mlen, "metadata");
  json meta;
  try {
    meta = json::parse(mbytes);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    const ModelConfig config = meta.at("config").get<ModelConfig>();
    Vocab vocab(meta.at("vocab").at("n").get<int>(),
                meta.at("vocab").at("min_count").get<int>());
    for (const auto& entry : meta.at("vocab").at("entries")) {
      vocab.add(entry.at(0).get<std::string>(),
                entry.at(1).get<std::int64_t>());
    }
    ckpt.model = ModelParams<float>::init(config, vocab.size(), 0);
    ckpt.vocab = std::move(vocab);
    ckpt.vocab_hash = ckpt.vocab.hash();
    if (to_hex(ckpt.vocab_hash) != meta.at("vocab_hash").get<std::string>()) {
      throw FormatError("vocab hash mismatch: checkpoint is corrupt");
    }
    ckpt.train_config = meta.at("train_config").get<TrainConfig>();
    ckpt.step = meta.at("step").get<std::int64_t>();
    ckpt.dev_history =
        meta.at("dev_history")
            .get<std::vector<std::pair<std::int64_t, double>>>();

    const auto tensor_count = meta.at("tensor_count").get<std::size_t>();
    std::size_t filled = 0;
    for (std::size_t t = 0; t < tensor_count; ++t) {
      const std::uint64_t nlen = read_u64(in, "tensor name length");
      std::string name(nlen, '\0');
      read_exact(in, name.data(), nlen, "tensor name");
      const std::uint64_t rank = read_u64(in, "tensor rank");
      if (rank != 2) {
        throw FormatError("tensor " + name + " has rank " +
                          std::to_string(rank) + ", expected 2");
      }
      const auto rows = static_cast<Index>(read_u64(in, "tensor rows"));
      const auto cols = static_cast<Index>(read_u64(in, "tensor cols"));
      Param<float>* p = ckpt.model.store.find(name);
      if (p == nullptr) {
        throw FormatError("unknown tensor in checkpoint: " + name);
      }
      if (p->value.rows() != rows || p->value.cols() != cols) {
        throw FormatError("tensor " + name + " has shape " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", expected " + std::to_string(p->value.rows()) +
                          "x" + std::to_string(p->value.cols()));
      }
      read_exact(in, reinterpret_cast<char*>(p->value.data()),
                 sizeof(float) * static_cast<std::size_t>(p->value.size()),
                 "tensor data");
      ++filled;
    }
    if (filled != ckpt.model.store.all().size()) {
      throw FormatError("checkpoint is missing tensors");
    }
    if (!ckpt.model.embeddings->value.allFinite()) {
      throw FormatError("checkpoint contains non-finite values");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what());
  }
  return ckpt;
}

}  // namespace decatt
