#pragma once

#include <string>
#include <utility>
#include <vector>

#include "decatt/tensor.hpp"
#include "decatt/text.hpp"

namespace decatt {

struct ModelConfig {
  std::string arch = "decatt";  // "decatt" | "ffnn"
  int dim = 300;                // token vector width
  int context = 1;              // window radius
  int ngram = 5;                // 0 = word level
  bool self_attention = false;
  std::vector<Index> widths = {400, 200};  // hidden widths of every stack
  int bias_clip = 10;                      // relative-distance clip K

  Index rep_width() const {
    return self_attention ? Index(2) * dim : Index(2 * context + 1) * dim;
  }
};

struct PairScore {
  double p_paraphrase = 0.0;
  bool label = false;
};

inline bool classify(double p, double threshold) { return p >= threshold; }

// All trainable tensors for one model. Movable, not copyable; sub-structs
// point into the store.
template <typename T>
struct ModelParams {
  ModelConfig config;
  ParamStore<T> store;

  Param<T>* embeddings = nullptr;  // V x d
  FeedForwardParams<T> attend_ff;  // scores both sides of the alignment
  FeedForwardParams<T> self_lhs_ff;
  FeedForwardParams<T> self_rhs_ff;
  Param<T>* dist_bias = nullptr;  // 1 x (2K+1)
  FeedForwardParams<T> compare_ff;
  FeedForwardParams<T> agg_ff;
  Param<T>* out_w = nullptr;  // last width x 2
  Param<T>* out_b = nullptr;  // 1 x 2

  ModelParams() = default;
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;

  static ModelParams init(const ModelConfig& cfg, std::size_t vocab_size,
                          std::uint64_t seed);

  std::vector<Param<T>*> params() { return store.all(); }

  // Copies tensor values from a same-architecture model, casting precision.
  template <typename U>
  void copy_values_from(const ModelParams<U>& other) {
    auto src = other.store.all();
    auto dst = store.all();
    if (src.size() != dst.size()) {
      throw ShapeError("parameter count mismatch in copy");
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i]->name != dst[i]->name ||
          src[i]->value.rows() != dst[i]->value.rows() ||
          src[i]->value.cols() != dst[i]->value.cols()) {
        throw ShapeError("parameter mismatch at " + dst[i]->name);
      }
      dst[i]->value = src[i]->value.template cast<T>();
    }
  }
};

ModelParams<double> to_double(const ModelParams<float>& m);

// Position i holds the concatenation of rows i-c .. i+c, zero-padded.
template <typename T>
typename Graph<T>::Ref window(Graph<T>& g, typename Graph<T>::Ref seq, int c);

// Alignment of a sequence against itself with a distance-sensitive bias;
// returns one summary vector per position (weighted sum of RAW rows).
// `attn` (optional) receives the normalized weight matrix node.
template <typename T>
typename Graph<T>::Ref self_attend(Graph<T>& g, ModelParams<T>& m,
                                   typename Graph<T>::Ref windowed,
                                   typename Graph<T>::Ref raw, T dropout,
                                   bool training, Rng* rng,
                                   typename Graph<T>::Ref* attn = nullptr);

// Soft alignment of the two sides; returns (beta, alpha): what each position
// of a sees of b, and vice versa. `attn_ab`/`attn_ba` (optional) receive the
// normalized weight matrix nodes.
template <typename T>
std::pair<typename Graph<T>::Ref, typename Graph<T>::Ref> attend(
    Graph<T>& g, ModelParams<T>& m, typename Graph<T>::Ref rep_a,
    typename Graph<T>::Ref rep_b, T dropout, bool training, Rng* rng,
    typename Graph<T>::Ref* attn_ab = nullptr,
    typename Graph<T>::Ref* attn_ba = nullptr);

// Per-position comparison of a representation with what was aligned to it.
template <typename T>
typename Graph<T>::Ref compare(Graph<T>& g, ModelParams<T>& m,
                               typename Graph<T>::Ref rep,
                               typename Graph<T>::Ref aligned, T dropout,
                               bool training, Rng* rng);

// Sums both comparison sets, applies the final stack and linear head.
template <typename T>
typename Graph<T>::Ref aggregate_logits(Graph<T>& g, ModelParams<T>& m,
                                        typename Graph<T>::Ref v1,
                                        typename Graph<T>::Ref v2, T dropout,
                                        bool training, Rng* rng);

template <typename T>
PairScore score_from_logits(const Mat<T>& logits, double threshold);

template <typename T>
std::pair<PairScore, typename Graph<T>::Ref> aggregate_predict(
    Graph<T>& g, ModelParams<T>& m, typename Graph<T>::Ref v1,
    typename Graph<T>::Ref v2, double threshold, T dropout, bool training,
    Rng* rng);

template <typename T>
struct ForwardOutput {
  PairScore score;
  typename Graph<T>::Ref logits = -1;
  typename Graph<T>::Ref loss = -1;  // set when gold >= 0
  std::vector<typename Graph<T>::Ref> attention;  // normalized weight nodes
};

// Full pipeline; gold in {0,1} attaches a cross-entropy loss node, gold = -1
// scores only.
template <typename T>
ForwardOutput<T> forward(Graph<T>& g, ModelParams<T>& m, const TokenSeq& a,
                         const TokenSeq& b, const Vocab& vocab,
                         double threshold, T dropout, bool training, Rng* rng,
                         int gold = -1);

// Inference-only convenience; safe to call concurrently on a shared model.
PairScore score_pair(ModelParams<float>& m, const Vocab& vocab,
                     const TokenSeq& a, const TokenSeq& b, double threshold);

}  // namespace decatt
