#pragma once

// Straight-from-the-definitions re-computation of the model math with plain
// nested loops over std::vector. Deliberately shares no code with the graph
// implementation so the two can cross-check each other.

#include <cassert>
#include <cmath>
#include <utility>
#include <vector>

#include "decatt/model.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mtx = std::vector<Vec>;

inline Mtx from_eigen(const decatt::Mat<double>& m) {
  Mtx out(static_cast<std::size_t>(m.rows()),
          Vec(static_cast<std::size_t>(m.cols())));
  for (decatt::Index i = 0; i < m.rows(); ++i) {
    for (decatt::Index j = 0; j < m.cols(); ++j) {
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    }
  }
  return out;
}

inline Mtx matmul(const Mtx& a, const Mtx& b) {
  assert(!a.empty() && !b.empty() && a[0].size() == b.size());
  Mtx out(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      for (std::size_t j = 0; j < b[0].size(); ++j) {
        out[i][j] += a[i][k] * b[k][j];
      }
    }
  }
  return out;
}

inline Vec softmax(const Vec& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  Vec out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

// Affine + rectifier per layer, no dropout (oracle checks inference mode).
inline Mtx ffn(const decatt::FeedForwardParams<double>& f, const Mtx& in) {
  Mtx cur = in;
  for (std::size_t layer = 0; layer < f.weights.size(); ++layer) {
    const Mtx w = from_eigen(f.weights[layer]->value);
    const Mtx b = from_eigen(f.biases[layer]->value);
    Mtx next(cur.size(), Vec(w[0].size(), 0.0));
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (std::size_t j = 0; j < w[0].size(); ++j) {
        double acc = b[0][j];
        for (std::size_t k = 0; k < cur[i].size(); ++k) {
          acc += cur[i][k] * w[k][j];
        }
        next[i][j] = acc > 0.0 ? acc : 0.0;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// Per-position concatenation of rows i-c .. i+c, zero outside the sequence.
inline Mtx window(const Mtx& x, int c) {
  const std::size_t len = x.size();
  const std::size_t d = x[0].size();
  Mtx out(len, Vec((2 * static_cast<std::size_t>(c) + 1) * d, 0.0));
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t at = 0;
    for (int delta = -c; delta <= c; ++delta, at += d) {
      const long long src = static_cast<long long>(i) + delta;
      if (src < 0 || src >= static_cast<long long>(len)) continue;
      for (std::size_t j = 0; j < d; ++j) {
        out[i][at + j] = x[static_cast<std::size_t>(src)][j];
      }
    }
  }
  return out;
}

// Self-alignment: scores over windowed rows plus a clipped distance bias,
// softmax per row, weighted sum of the RAW rows.
inline Mtx self_align(const decatt::ModelParams<double>& m, const Mtx& windowed,
                      const Mtx& raw) {
  const Mtx lhs = ffn(m.self_lhs_ff, windowed);
  const Mtx rhs = ffn(m.self_rhs_ff, windowed);
  const Mtx bias = from_eigen(m.dist_bias->value);
  const int clip = m.config.bias_clip;
  const std::size_t len = raw.size();

  Mtx out(len, Vec(raw[0].size(), 0.0));
  for (std::size_t i = 0; i < len; ++i) {
    Vec scores(len, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < lhs[i].size(); ++k) {
        dot += lhs[i][k] * rhs[j][k];
      }
      int dist = static_cast<int>(i) - static_cast<int>(j);
      if (dist > clip) dist = clip;
      if (dist < -clip) dist = -clip;
      scores[j] = dot + bias[0][static_cast<std::size_t>(dist + clip)];
    }
    const Vec w = softmax(scores);
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t k = 0; k < raw[j].size(); ++k) {
        out[i][k] += w[j] * raw[j][k];
      }
    }
  }
  return out;
}

// Soft alignment of the two sides over the shared scoring network.
inline std::pair<Mtx, Mtx> attend(const decatt::ModelParams<double>& m,
                                  const Mtx& rep_a, const Mtx& rep_b) {
  const Mtx fa = ffn(m.attend_ff, rep_a);
  const Mtx fb = ffn(m.attend_ff, rep_b);
  const std::size_t la = rep_a.size();
  const std::size_t lb = rep_b.size();

  Mtx scores(la, Vec(lb, 0.0));
  for (std::size_t i = 0; i < la; ++i) {
    for (std::size_t j = 0; j < lb; ++j) {
      for (std::size_t k = 0; k < fa[i].size(); ++k) {
        scores[i][j] += fa[i][k] * fb[j][k];
      }
    }
  }

  Mtx beta(la, Vec(rep_b[0].size(), 0.0));
  for (std::size_t i = 0; i < la; ++i) {
    const Vec w = softmax(scores[i]);
    for (std::size_t j = 0; j < lb; ++j) {
      for (std::size_t k = 0; k < rep_b[j].size(); ++k) {
        beta[i][k] += w[j] * rep_b[j][k];
      }
    }
  }
  Mtx alpha(lb, Vec(rep_a[0].size(), 0.0));
  for (std::size_t j = 0; j < lb; ++j) {
    Vec col(la);
    for (std::size_t i = 0; i < la; ++i) col[i] = scores[i][j];
    const Vec w = softmax(col);
    for (std::size_t i = 0; i < la; ++i) {
      for (std::size_t k = 0; k < rep_a[i].size(); ++k) {
        alpha[j][k] += w[i] * rep_a[i][k];
      }
    }
  }
  return {beta, alpha};
}

inline Mtx compare(const decatt::ModelParams<double>& m, const Mtx& rep,
                   const Mtx& aligned) {
  Mtx joined(rep.size());
  for (std::size_t i = 0; i < rep.size(); ++i) {
    joined[i] = rep[i];
    joined[i].insert(joined[i].end(), aligned[i].begin(), aligned[i].end());
  }
  return ffn(m.compare_ff, joined);
}

inline Vec aggregate_logits(const decatt::ModelParams<double>& m, const Mtx& v1,
                            const Mtx& v2) {
  Vec pooled(v1[0].size() + v2[0].size(), 0.0);
  for (const Vec& row : v1) {
    for (std::size_t k = 0; k < row.size(); ++k) pooled[k] += row[k];
  }
  for (const Vec& row : v2) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      pooled[v1[0].size() + k] += row[k];
    }
  }
  const Mtx h = ffn(m.agg_ff, Mtx{pooled});
  const Mtx w = from_eigen(m.out_w->value);
  const Mtx b = from_eigen(m.out_b->value);
  Vec logits(2, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    logits[j] = b[0][j];
    for (std::size_t k = 0; k < h[0].size(); ++k) {
      logits[j] += h[0][k] * w[k][j];
    }
  }
  return logits;
}

inline double positive_prob(const Vec& logits) {
  return softmax(logits)[1];
}

inline double xent(const Vec& logits, int gold) {
  return -std::log(softmax(logits)[static_cast<std::size_t>(gold)]);
}

// Full attention pipeline from already-encoded token rows to the positive
// probability (and optionally the loss).
inline double forward_p(const decatt::ModelParams<double>& m, const Mtx& raw_a,
                        const Mtx& raw_b, double* loss = nullptr,
                        int gold = -1) {
  const Mtx win_a = window(raw_a, m.config.context);
  const Mtx win_b = window(raw_b, m.config.context);
  Mtx rep_a = win_a;
  Mtx rep_b = win_b;
  if (m.config.self_attention) {
    const Mtx prime_a = self_align(m, win_a, raw_a);
    const Mtx prime_b = self_align(m, win_b, raw_b);
    rep_a = raw_a;
    rep_b = raw_b;
    for (std::size_t i = 0; i < rep_a.size(); ++i) {
      rep_a[i].insert(rep_a[i].end(), prime_a[i].begin(), prime_a[i].end());
    }
    for (std::size_t i = 0; i < rep_b.size(); ++i) {
      rep_b[i].insert(rep_b[i].end(), prime_b[i].begin(), prime_b[i].end());
    }
  }
  const auto [beta, alpha] = attend(m, rep_a, rep_b);
  const Mtx v1 = compare(m, rep_a, beta);
  const Mtx v2 = compare(m, rep_b, alpha);
  const Vec logits = aggregate_logits(m, v1, v2);
  if (loss && gold >= 0) *loss = xent(logits, gold);
  return positive_prob(logits);
}

// Baseline rep: [sum of rows, sum of trigram concatenations], zeros when the
// sequence is shorter than 3 rows.
inline Vec ffnn_question_rep(const Mtx& raw) {
  const std::size_t d = raw[0].size();
  Vec rep(4 * d, 0.0);
  for (const Vec& row : raw) {
    for (std::size_t k = 0; k < d; ++k) rep[k] += row[k];
  }
  if (raw.size() >= 3) {
    for (std::size_t i = 0; i + 2 < raw.size(); ++i) {
      for (std::size_t w = 0; w < 3; ++w) {
        for (std::size_t k = 0; k < d; ++k) {
          rep[d + w * d + k] += raw[i + w][k];
        }
      }
    }
  }
  return rep;
}

inline double ffnn_forward_p(const decatt::ModelParams<double>& m,
                             const Mtx& raw_a, const Mtx& raw_b) {
  Vec joined = ffnn_question_rep(raw_a);
  const Vec rb = ffnn_question_rep(raw_b);
  joined.insert(joined.end(), rb.begin(), rb.end());
  const Mtx h = ffn(m.agg_ff, Mtx{joined});
  const Mtx w = from_eigen(m.out_w->value);
  const Mtx b = from_eigen(m.out_b->value);
  Vec logits(2, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    logits[j] = b[0][j];
    for (std::size_t k = 0; k < h[0].size(); ++k) {
      logits[j] += h[0][k] * w[k][j];
    }
  }
  return positive_prob(logits);
}

}  // namespace oracle
