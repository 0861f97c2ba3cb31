#include "decatt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace decatt {

namespace {

std::string shape_of(const Mat<float>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
std::string shape_of(const Mat<double>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

template <typename T>
typename Graph<T>::Ref Graph<T>::push(Mat<T> value, bool needs_grad,
                                      std::function<void(Graph&)> back,
                                      const char* op) {
  if (!value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node node;
  node.needs_grad = needs_grad;
  if (needs_grad) {
    node.grad = Mat<T>::Zero(value.rows(), value.cols());
    node.back = std::move(back);
  }
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return static_cast<Ref>(nodes_.size() - 1);
}

template <typename T>
typename Graph<T>::Ref Graph<T>::input(Mat<T> value) {
  return push(std::move(value), false, nullptr, "input");
}

template <typename T>
typename Graph<T>::Ref Graph<T>::param(Param<T>* p) {
  Ref r = push(p->value, true, nullptr, "param");
  nodes_[r].back = [p, r](Graph& g) { p->grad += g.grad(r); };
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::matmul(Ref a, Ref b) {
  const Mat<T>& A = nodes_[a].value;
  const Mat<T>& B = nodes_[b].value;
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul " + shape_of(A) + " * " + shape_of(B));
  }
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Ref r = push(A * B, ng, nullptr, "matmul");
  if (ng) {
    nodes_[r].back = [a, b, r](Graph& g) {
      const Mat<T>& G = g.grad(r);
      if (g.nodes_[a].needs_grad) {
        g.grad(a).noalias() += G * g.nodes_[b].value.transpose();
      }
      if (g.nodes_[b].needs_grad) {
        g.grad(b).noalias() += g.nodes_[a].value.transpose() * G;
      }
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::transpose(Ref a) {
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(nodes_[a].value.transpose(), ng, nullptr, "transpose");
  if (ng) {
    nodes_[r].back = [a, r](Graph& g) {
      g.grad(a) += g.grad(r).transpose();
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::add(Ref a, Ref b) {
  const Mat<T>& A = nodes_[a].value;
  const Mat<T>& B = nodes_[b].value;
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("add " + shape_of(A) + " + " + shape_of(B));
  }
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Ref r = push(A + B, ng, nullptr, "add");
  if (ng) {
    nodes_[r].back = [a, b, r](Graph& g) {
      if (g.nodes_[a].needs_grad) g.grad(a) += g.grad(r);
      if (g.nodes_[b].needs_grad) g.grad(b) += g.grad(r);
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::add_row_broadcast(Ref a, Ref bias) {
  const Mat<T>& A = nodes_[a].value;
  const Mat<T>& B = nodes_[bias].value;
  if (B.rows() != 1 || B.cols() != A.cols()) {
    throw ShapeError("add_row_broadcast " + shape_of(A) + " + " + shape_of(B));
  }
  const bool ng = nodes_[a].needs_grad || nodes_[bias].needs_grad;
  Mat<T> out = A;
  out.rowwise() += B.row(0);
  Ref r = push(std::move(out), ng, nullptr, "add_row_broadcast");
  if (ng) {
    nodes_[r].back = [a, bias, r](Graph& g) {
      if (g.nodes_[a].needs_grad) g.grad(a) += g.grad(r);
      if (g.nodes_[bias].needs_grad) {
        g.grad(bias).row(0) += g.grad(r).colwise().sum();
      }
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::mul(Ref a, Ref b) {
  const Mat<T>& A = nodes_[a].value;
  const Mat<T>& B = nodes_[b].value;
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("mul " + shape_of(A) + " * " + shape_of(B));
  }
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Ref r = push(A.cwiseProduct(B), ng, nullptr, "mul");
  if (ng) {
    nodes_[r].back = [a, b, r](Graph& g) {
      if (g.nodes_[a].needs_grad) {
        g.grad(a) += g.grad(r).cwiseProduct(g.nodes_[b].value);
      }
      if (g.nodes_[b].needs_grad) {
        g.grad(b) += g.grad(r).cwiseProduct(g.nodes_[a].value);
      }
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::scale(Ref a, T s) {
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(nodes_[a].value * s, ng, nullptr, "scale");
  if (ng) {
    nodes_[r].back = [a, s, r](Graph& g) { g.grad(a) += g.grad(r) * s; };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::relu(Ref a) {
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(nodes_[a].value.cwiseMax(T(0)), ng, nullptr, "relu");
  if (ng) {
    // Gradient at exactly zero is zero.
    nodes_[r].back = [a, r](Graph& g) {
      g.grad(a) +=
          g.grad(r).cwiseProduct((g.nodes_[r].value.array() > T(0))
                                     .template cast<T>()
                                     .matrix());
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::row_softmax(Ref a) {
  const Mat<T>& A = nodes_[a].value;
  Mat<T> out(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i) {
    const T m = A.row(i).maxCoeff();
    out.row(i) = (A.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(std::move(out), ng, nullptr, "row_softmax");
  if (ng) {
    nodes_[r].back = [a, r](Graph& g) {
      const Mat<T>& Y = g.nodes_[r].value;
      const Mat<T>& G = g.grad(r);
      for (Index i = 0; i < Y.rows(); ++i) {
        const T dot = G.row(i).dot(Y.row(i));
        g.grad(a).row(i) +=
            Y.row(i).cwiseProduct((G.row(i).array() - dot).matrix());
      }
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::concat_cols(const std::vector<Ref>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  if (parts.size() == 1) return parts[0];
  const Index rows = nodes_[parts[0]].value.rows();
  Index cols = 0;
  bool ng = false;
  for (Ref p : parts) {
    if (nodes_[p].value.rows() != rows) {
      throw ShapeError("concat_cols row mismatch");
    }
    cols += nodes_[p].value.cols();
    ng = ng || nodes_[p].needs_grad;
  }
  Mat<T> out(rows, cols);
  Index at = 0;
  for (Ref p : parts) {
    const Index w = nodes_[p].value.cols();
    out.middleCols(at, w) = nodes_[p].value;
    at += w;
  }
  Ref r = push(std::move(out), ng, nullptr, "concat_cols");
  if (ng) {
    nodes_[r].back = [parts, r](Graph& g) {
      Index at = 0;
      for (Ref p : parts) {
        const Index w = g.nodes_[p].value.cols();
        if (g.nodes_[p].needs_grad) {
          g.grad(p) += g.grad(r).middleCols(at, w);
        }
        at += w;
      }
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::reduce_sum_rows(Ref a) {
  const Mat<T>& A = nodes_[a].value;
  Mat<T> out(1, A.cols());
  out.row(0) = A.colwise().sum();
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(std::move(out), ng, nullptr, "reduce_sum_rows");
  if (ng) {
    nodes_[r].back = [a, r](Graph& g) {
      g.grad(a).rowwise() += g.grad(r).row(0);
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::slice_rows(Ref a, Index start, Index count) {
  const Mat<T>& A = nodes_[a].value;
  if (start < 0 || count < 0 || start + count > A.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") of " + shape_of(A));
  }
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(A.middleRows(start, count), ng, nullptr, "slice_rows");
  if (ng) {
    nodes_[r].back = [a, start, count, r](Graph& g) {
      g.grad(a).middleRows(start, count) += g.grad(r);
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::shift_rows(Ref a, Index offset) {
  const Mat<T>& A = nodes_[a].value;
  Mat<T> out = Mat<T>::Zero(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i) {
    const Index src = i + offset;
    if (src >= 0 && src < A.rows()) out.row(i) = A.row(src);
  }
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(std::move(out), ng, nullptr, "shift_rows");
  if (ng) {
    nodes_[r].back = [a, offset, r](Graph& g) {
      const Index rows = g.nodes_[a].value.rows();
      for (Index i = 0; i < rows; ++i) {
        const Index src = i + offset;
        if (src >= 0 && src < rows) g.grad(a).row(src) += g.grad(r).row(i);
      }
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::dropout(Ref a, T rate, Rng& rng) {
  if (rate < T(0) || rate >= T(1)) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  const Mat<T>& A = nodes_[a].value;
  const T keep_scale = T(1) / (T(1) - rate);
  Mat<T> mask(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      mask(i, j) = rng.uniform() < static_cast<double>(rate) ? T(0) : keep_scale;
    }
  }
  const bool ng = nodes_[a].needs_grad;
  Ref r = push(A.cwiseProduct(mask), ng, nullptr, "dropout");
  if (ng) {
    nodes_[r].back = [a, r, m = std::move(mask)](Graph& g) {
      g.grad(a) += g.grad(r).cwiseProduct(m);
    };
  }
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::gather_sum(Param<T>* table,
                                            std::vector<std::vector<int>> ids) {
  const Mat<T>& E = table->value;
  Mat<T> out = Mat<T>::Zero(static_cast<Index>(ids.size()), E.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int id : ids[i]) {
      if (id < 0 || id >= E.rows()) {
        throw ShapeError("gather_sum id " + std::to_string(id) +
                         " out of range for " + shape_of(E));
      }
      out.row(static_cast<Index>(i)) += E.row(id);
    }
  }
  Ref r = push(std::move(out), true, nullptr, "gather_sum");
  nodes_[r].back = [table, r, idv = std::move(ids)](Graph& g) {
    const Mat<T>& G = g.grad(r);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      for (int id : idv[i]) {
        table->grad.row(id) += G.row(static_cast<Index>(i));
      }
    }
  };
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::distance_bias(Param<T>* bias, Index len) {
  const Mat<T>& B = bias->value;
  if (B.rows() != 1 || B.cols() % 2 == 0) {
    throw ShapeError("distance bias must be 1 x (2K+1), got " + shape_of(B));
  }
  const Index K = (B.cols() - 1) / 2;
  auto bucket = [K](Index i, Index j) {
    return std::clamp(i - j, -K, K) + K;
  };
  Mat<T> out(len, len);
  for (Index i = 0; i < len; ++i) {
    for (Index j = 0; j < len; ++j) {
      out(i, j) = B(0, bucket(i, j));
    }
  }
  Ref r = push(std::move(out), true, nullptr, "distance_bias");
  nodes_[r].back = [bias, r, bucket, len](Graph& g) {
    const Mat<T>& G = g.grad(r);
    for (Index i = 0; i < len; ++i) {
      for (Index j = 0; j < len; ++j) {
        bias->grad(0, bucket(i, j)) += G(i, j);
      }
    }
  };
  return r;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::softmax_xent(Ref logits, int gold) {
  const Mat<T>& L = nodes_[logits].value;
  if (L.rows() != 1) {
    throw ShapeError("softmax_xent expects a 1 x k logit row, got " +
                     shape_of(L));
  }
  if (gold < 0 || gold >= L.cols()) {
    throw ShapeError("gold class " + std::to_string(gold) + " out of range");
  }
  const T m = L.row(0).maxCoeff();
  const T lse = m + std::log((L.row(0).array() - m).exp().sum());
  Mat<T> out(1, 1);
  out(0, 0) = lse - L(0, gold);
  const bool ng = nodes_[logits].needs_grad;
  Ref r = push(std::move(out), ng, nullptr, "softmax_xent");
  if (ng) {
    nodes_[r].back = [logits, gold, lse, r](Graph& g) {
      const Mat<T>& L = g.nodes_[logits].value;
      const T go = g.grad(r)(0, 0);
      Mat<T> soft = (L.row(0).array() - lse).exp().matrix();
      soft(0, gold) -= T(1);
      g.grad(logits).row(0) += go * soft;
    };
  }
  return r;
}

template <typename T>
void Graph<T>::backward(Ref loss, T seed) {
  Node& top = nodes_[loss];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ShapeError("backward on non-scalar node " + shape_of(top.value));
  }
  if (!top.needs_grad) return;  // no parameters reachable
  top.grad(0, 0) += seed;
  for (Ref i = loss; i >= 0; --i) {
    Node& node = nodes_[i];
    if (node.needs_grad && node.back) node.back(*this);
  }
}

template class Graph<float>;
template class Graph<double>;

template <typename T>
FeedForwardParams<T> make_ffn(ParamStore<T>& store, const std::string& prefix,
                              Index in_width, const std::vector<Index>& widths,
                              Rng& rng) {
  FeedForwardParams<T> ffn;
  Index in = in_width;
  for (std::size_t layer = 0; layer < widths.size(); ++layer) {
    const Index out = widths[layer];
    Param<T>* w = store.create(prefix + ".w" + std::to_string(layer), in, out);
    Param<T>* b = store.create(prefix + ".b" + std::to_string(layer), 1, out);
    w->value = init_weight<T>(in, out, rng);
    ffn.weights.push_back(w);
    ffn.biases.push_back(b);
    in = out;
  }
  return ffn;
}

template FeedForwardParams<float> make_ffn(ParamStore<float>&,
                                           const std::string&, Index,
                                           const std::vector<Index>&, Rng&);
template FeedForwardParams<double> make_ffn(ParamStore<double>&,
                                            const std::string&, Index,
                                            const std::vector<Index>&, Rng&);

template <typename T>
typename Graph<T>::Ref apply_ffn(Graph<T>& g, const FeedForwardParams<T>& ffn,
                                 typename Graph<T>::Ref input, T dropout_rate,
                                 bool training, Rng* rng) {
  if (ffn.weights.empty()) throw ConfigError("feedforward stack has no layers");
  auto h = input;
  for (std::size_t layer = 0; layer < ffn.weights.size(); ++layer) {
    auto wref = g.param(ffn.weights[layer]);
    auto bref = g.param(ffn.biases[layer]);
    h = g.relu(g.add_row_broadcast(g.matmul(h, wref), bref));
    if (training && dropout_rate > T(0)) {
      if (rng == nullptr) throw ConfigError("dropout requires an RNG");
      h = g.dropout(h, dropout_rate, *rng);
    }
  }
  return h;
}

template Graph<float>::Ref apply_ffn(Graph<float>&,
                                     const FeedForwardParams<float>&,
                                     Graph<float>::Ref, float, bool, Rng*);
template Graph<double>::Ref apply_ffn(Graph<double>&,
                                      const FeedForwardParams<double>&,
                                      Graph<double>::Ref, double, bool, Rng*);

double finite_diff_check(const std::vector<Param<double>*>& params,
                         const std::function<double()>& eval, double epsilon,
                         std::uint64_t seed) {
  if (epsilon <= 0) throw ConfigError("epsilon must be positive");

  struct Coord {
    std::size_t param;
    Index i, j;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Mat<double>& v = params[p]->value;
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        coords.push_back({p, i, j});
      }
    }
  }
  if (coords.empty()) return 0.0;

  Rng rng(seed);
  const std::size_t sample = std::min<std::size_t>(200, coords.size());
  rng.shuffle(coords);
  coords.resize(sample);

  double max_rel = 0.0;
  for (const Coord& c : coords) {
    double& cell = params[c.param]->value(c.i, c.j);
    const double saved = cell;
    cell = saved + epsilon;
    const double f_plus = eval();
    cell = saved - epsilon;
    const double f_minus = eval();
    cell = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw NumericError("non-finite objective during finite differences");
    }
    const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
    const double analytic = params[c.param]->grad(c.i, c.j);
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

}  // namespace decatt
