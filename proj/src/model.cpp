#include "decatt/model.hpp"

#include <cmath>

namespace decatt {

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& cfg,
                                    std::size_t vocab_size,
                                    std::uint64_t seed) {
  if (cfg.dim < 1) throw ConfigError("dim must be >= 1");
  if (cfg.context < 0) throw ConfigError("context must be >= 0");
  if (cfg.widths.empty()) throw ConfigError("at least one hidden width");
  if (cfg.arch != "decatt" && cfg.arch != "ffnn") {
    throw ConfigError("unknown arch: " + cfg.arch);
  }
  if (vocab_size == 0) throw ConfigError("empty vocabulary");

  ModelParams<T> m;
  m.config = cfg;
  Rng rng(seed);

  const Index d = cfg.dim;
  m.embeddings = m.store.create("embeddings", static_cast<Index>(vocab_size), d);
  m.embeddings->value = init_embedding<T>(m.embeddings->value.rows(), d, rng);

  if (cfg.arch == "decatt") {
    const Index win_width = Index(2 * cfg.context + 1) * d;
    m.attend_ff = make_ffn(m.store, "attend", cfg.rep_width(), cfg.widths, rng);
    if (cfg.self_attention) {
      m.self_lhs_ff = make_ffn(m.store, "self_lhs", win_width, cfg.widths, rng);
      m.self_rhs_ff = make_ffn(m.store, "self_rhs", win_width, cfg.widths, rng);
      m.dist_bias =
          m.store.create("dist_bias", 1, Index(2 * cfg.bias_clip + 1));
    }
    m.compare_ff =
        make_ffn(m.store, "compare", Index(2) * cfg.rep_width(), cfg.widths, rng);
    m.agg_ff = make_ffn(m.store, "aggregate", Index(2) * cfg.widths.back(),
                        cfg.widths, rng);
  } else {
    // Single trunk over [sum, trigram-sum] of both questions: 8d wide.
    m.agg_ff = make_ffn(m.store, "stack", Index(8) * d, cfg.widths, rng);
  }

  m.out_w = m.store.create("out.w", cfg.widths.back(), 2);
  m.out_w->value = init_weight<T>(cfg.widths.back(), 2, rng);
  m.out_b = m.store.create("out.b", 1, 2);
  return m;
}

template struct ModelParams<float>;
template struct ModelParams<double>;

ModelParams<double> to_double(const ModelParams<float>& m) {
  ModelParams<double> d = ModelParams<double>::init(
      m.config, static_cast<std::size_t>(m.embeddings->value.rows()), 0);
  d.copy_values_from(m);
  return d;
}

template <typename T>
typename Graph<T>::Ref window(Graph<T>& g, typename Graph<T>::Ref seq, int c) {
  if (c < 0) throw ConfigError("window radius must be >= 0");
  std::vector<typename Graph<T>::Ref> parts;
  parts.reserve(2 * c + 1);
  for (int delta = -c; delta <= c; ++delta) {
    parts.push_back(delta == 0 ? seq : g.shift_rows(seq, delta));
  }
  return g.concat_cols(parts);
}

template <typename T>
typename Graph<T>::Ref self_attend(Graph<T>& g, ModelParams<T>& m,
                                   typename Graph<T>::Ref windowed,
                                   typename Graph<T>::Ref raw, T dropout,
                                   bool training, Rng* rng,
                                   typename Graph<T>::Ref* attn) {
  if (!m.config.self_attention) {
    throw ConfigError("self_attend called with self-attention disabled");
  }
  auto lhs = apply_ffn(g, m.self_lhs_ff, windowed, dropout, training, rng);
  auto rhs = apply_ffn(g, m.self_rhs_ff, windowed, dropout, training, rng);
  auto scores = g.matmul(lhs, g.transpose(rhs));
  auto biased = g.add(scores, g.distance_bias(m.dist_bias,
                                              g.value(raw).rows()));
  auto weights = g.row_softmax(biased);
  if (attn) *attn = weights;
  return g.matmul(weights, raw);
}

template <typename T>
std::pair<typename Graph<T>::Ref, typename Graph<T>::Ref> attend(
    Graph<T>& g, ModelParams<T>& m, typename Graph<T>::Ref rep_a,
    typename Graph<T>::Ref rep_b, T dropout, bool training, Rng* rng,
    typename Graph<T>::Ref* attn_ab, typename Graph<T>::Ref* attn_ba) {
  auto fa = apply_ffn(g, m.attend_ff, rep_a, dropout, training, rng);
  auto fb = apply_ffn(g, m.attend_ff, rep_b, dropout, training, rng);
  auto scores = g.matmul(fa, g.transpose(fb));
  auto weights_ab = g.row_softmax(scores);
  auto weights_ba = g.row_softmax(g.transpose(scores));
  if (attn_ab) *attn_ab = weights_ab;
  if (attn_ba) *attn_ba = weights_ba;
  auto beta = g.matmul(weights_ab, rep_b);
  auto alpha = g.matmul(weights_ba, rep_a);
  return {beta, alpha};
}

template <typename T>
typename Graph<T>::Ref compare(Graph<T>& g, ModelParams<T>& m,
                               typename Graph<T>::Ref rep,
                               typename Graph<T>::Ref aligned, T dropout,
                               bool training, Rng* rng) {
  return apply_ffn(g, m.compare_ff, g.concat_cols(rep, aligned), dropout,
                   training, rng);
}

template <typename T>
typename Graph<T>::Ref aggregate_logits(Graph<T>& g, ModelParams<T>& m,
                                        typename Graph<T>::Ref v1,
                                        typename Graph<T>::Ref v2, T dropout,
                                        bool training, Rng* rng) {
  auto pooled = g.concat_cols(g.reduce_sum_rows(v1), g.reduce_sum_rows(v2));
  auto h = apply_ffn(g, m.agg_ff, pooled, dropout, training, rng);
  return g.add_row_broadcast(g.matmul(h, g.param(m.out_w)), g.param(m.out_b));
}

template <typename T>
PairScore score_from_logits(const Mat<T>& logits, double threshold) {
  if (logits.rows() != 1 || logits.cols() != 2) {
    throw ShapeError("expected 1x2 logits");
  }
  const double margin =
      static_cast<double>(logits(0, 1)) - static_cast<double>(logits(0, 0));
  PairScore s;
  s.p_paraphrase = 1.0 / (1.0 + std::exp(-margin));
  s.label = classify(s.p_paraphrase, threshold);
  return s;
}

template PairScore score_from_logits(const Mat<float>&, double);
template PairScore score_from_logits(const Mat<double>&, double);

template <typename T>
std::pair<PairScore, typename Graph<T>::Ref> aggregate_predict(
    Graph<T>& g, ModelParams<T>& m, typename Graph<T>::Ref v1,
    typename Graph<T>::Ref v2, double threshold, T dropout, bool training,
    Rng* rng) {
  auto logits = aggregate_logits(g, m, v1, v2, dropout, training, rng);
  return {score_from_logits(g.value(logits), threshold), logits};
}

namespace {

// Question representation for the feedforward baseline: token-vector sum
// next to the sum of concatenated trigram windows (zero when < 3 tokens).
template <typename T>
typename Graph<T>::Ref ffnn_question_rep(Graph<T>& g,
                                         typename Graph<T>::Ref raw) {
  const Index len = g.value(raw).rows();
  const Index d = g.value(raw).cols();
  auto unigram = g.reduce_sum_rows(raw);
  typename Graph<T>::Ref trigram;
  if (len >= 3) {
    auto windows = g.concat_cols(
        {raw, g.shift_rows(raw, 1), g.shift_rows(raw, 2)});
    trigram = g.reduce_sum_rows(g.slice_rows(windows, 0, len - 2));
  } else {
    trigram = g.input(Mat<T>::Zero(1, 3 * d));
  }
  return g.concat_cols(unigram, trigram);
}

}  // namespace

template <typename T>
ForwardOutput<T> forward(Graph<T>& g, ModelParams<T>& m, const TokenSeq& a,
                         const TokenSeq& b, const Vocab& vocab,
                         double threshold, T dropout, bool training, Rng* rng,
                         int gold) {
  if (a.empty() || b.empty()) {
    throw EmptySequenceError("forward on empty sequence");
  }
  auto raw_a = g.gather_sum(m.embeddings, lookup_ids(a, vocab));
  auto raw_b = g.gather_sum(m.embeddings, lookup_ids(b, vocab));

  ForwardOutput<T> out;
  if (m.config.arch == "ffnn") {
    auto pair_rep = g.concat_cols(ffnn_question_rep(g, raw_a),
                                  ffnn_question_rep(g, raw_b));
    auto h = apply_ffn(g, m.agg_ff, pair_rep, dropout, training, rng);
    out.logits =
        g.add_row_broadcast(g.matmul(h, g.param(m.out_w)), g.param(m.out_b));
    out.score = score_from_logits(g.value(out.logits), threshold);
  } else {
    const int c = m.config.context;
    auto win_a = window(g, raw_a, c);
    auto win_b = window(g, raw_b, c);
    auto rep_a = win_a;
    auto rep_b = win_b;
    if (m.config.self_attention) {
      typename Graph<T>::Ref self_a = -1;
      typename Graph<T>::Ref self_b = -1;
      rep_a = g.concat_cols(raw_a, self_attend(g, m, win_a, raw_a, dropout,
                                               training, rng, &self_a));
      rep_b = g.concat_cols(raw_b, self_attend(g, m, win_b, raw_b, dropout,
                                               training, rng, &self_b));
      out.attention.push_back(self_a);
      out.attention.push_back(self_b);
    }
    typename Graph<T>::Ref attn_ab = -1;
    typename Graph<T>::Ref attn_ba = -1;
    auto [beta, alpha] = attend(g, m, rep_a, rep_b, dropout, training, rng,
                                &attn_ab, &attn_ba);
    out.attention.push_back(attn_ab);
    out.attention.push_back(attn_ba);
    auto v1 = compare(g, m, rep_a, beta, dropout, training, rng);
    auto v2 = compare(g, m, rep_b, alpha, dropout, training, rng);
    auto [score, logits] =
        aggregate_predict(g, m, v1, v2, threshold, dropout, training, rng);
    out.score = score;
    out.logits = logits;
  }
  if (gold >= 0) {
    out.loss = g.softmax_xent(out.logits, gold);
  }
  return out;
}

PairScore score_pair(ModelParams<float>& m, const Vocab& vocab,
                     const TokenSeq& a, const TokenSeq& b, double threshold) {
  Graph<float> g;
  return forward<float>(g, m, a, b, vocab, threshold, 0.0f, false, nullptr)
      .score;
}

#define DECATT_INSTANTIATE(T)                                                  \
  template typename Graph<T>::Ref window(Graph<T>&, typename Graph<T>::Ref,   \
                                         int);                                \
  template typename Graph<T>::Ref self_attend(                                \
      Graph<T>&, ModelParams<T>&, typename Graph<T>::Ref,                     \
      typename Graph<T>::Ref, T, bool, Rng*, typename Graph<T>::Ref*);        \
  template std::pair<typename Graph<T>::Ref, typename Graph<T>::Ref> attend(  \
      Graph<T>&, ModelParams<T>&, typename Graph<T>::Ref,                     \
      typename Graph<T>::Ref, T, bool, Rng*, typename Graph<T>::Ref*,         \
      typename Graph<T>::Ref*);                                               \
  template typename Graph<T>::Ref compare(Graph<T>&, ModelParams<T>&,         \
                                          typename Graph<T>::Ref,             \
                                          typename Graph<T>::Ref, T, bool,    \
                                          Rng*);                              \
  template typename Graph<T>::Ref aggregate_logits(                           \
      Graph<T>&, ModelParams<T>&, typename Graph<T>::Ref,                     \
      typename Graph<T>::Ref, T, bool, Rng*);                                 \
  template std::pair<PairScore, typename Graph<T>::Ref> aggregate_predict(    \
      Graph<T>&, ModelParams<T>&, typename Graph<T>::Ref,                     \
      typename Graph<T>::Ref, double, T, bool, Rng*);                         \
  template ForwardOutput<T> forward(Graph<T>&, ModelParams<T>&,               \
                                    const TokenSeq&, const TokenSeq&,         \
                                    const Vocab&, double, T, bool, Rng*, int)

DECATT_INSTANTIATE(float);
DECATT_INSTANTIATE(double);

#undef DECATT_INSTANTIATE

}  // namespace decatt
