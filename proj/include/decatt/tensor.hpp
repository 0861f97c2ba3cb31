#pragma once

#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "decatt/common.hpp"
#include "decatt/mat.hpp"

namespace decatt {

// A named trainable tensor. Gradients accumulate across backward calls until
// the owner zeroes them.
template <typename T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  Param(std::string name_, Index rows, Index cols)
      : name(std::move(name_)),
        value(Mat<T>::Zero(rows, cols)),
        grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Owns parameters with stable addresses, in creation order.
template <typename T>
class ParamStore {
 public:
  Param<T>* create(std::string name, Index rows, Index cols) {
    params_.emplace_back(std::move(name), rows, cols);
    return &params_.back();
  }
  std::vector<Param<T>*> all() {
    std::vector<Param<T>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const Param<T>*> all() const {
    std::vector<const Param<T>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  Param<T>* find(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

 private:
  std::deque<Param<T>> params_;
};

template <typename T>
Mat<T> init_weight(Index in, Index out, Rng& rng) {
  Mat<T> w(in, out);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
  for (Index i = 0; i < in; ++i) {
    for (Index j = 0; j < out; ++j) {
      w(i, j) = static_cast<T>(rng.normal(0.0, stddev));
    }
  }
  return w;
}

template <typename T>
Mat<T> init_embedding(Index rows, Index cols, Rng& rng) {
  Mat<T> e(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      e(i, j) = static_cast<T>(rng.normal(0.0, 0.1));
    }
  }
  return e;
}

// Dynamically built computation record. Build nodes forward, call backward on
// a scalar node; gradients land in the referenced Params. One record is
// single-threaded and single-use.
template <typename T>
class Graph {
 public:
  using Ref = int;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Ref input(Mat<T> value);
  Ref param(Param<T>* p);

  // Primitives.
  Ref matmul(Ref a, Ref b);
  Ref transpose(Ref a);
  Ref add(Ref a, Ref b);
  Ref add_row_broadcast(Ref a, Ref bias);  // bias is 1 x cols
  Ref mul(Ref a, Ref b);
  Ref scale(Ref a, T s);
  Ref relu(Ref a);
  Ref row_softmax(Ref a);
  Ref concat_cols(const std::vector<Ref>& parts);
  Ref concat_cols(Ref a, Ref b) { return concat_cols(std::vector<Ref>{a, b}); }
  Ref reduce_sum_rows(Ref a);  // 1 x cols
  Ref slice_rows(Ref a, Index start, Index count);
  // Row i of the result is row i + offset of the input, zero when out of range.
  Ref shift_rows(Ref a, Index offset);
  // Inverted dropout; mask drawn from rng, so calls are ordered.
  Ref dropout(Ref a, T rate, Rng& rng);
  // Row i = sum of table rows listed in ids[i]; gradients scatter back.
  Ref gather_sum(Param<T>* table, std::vector<std::vector<int>> ids);
  // len x len matrix whose (i, j) entry is bias[clip(i - j, -K, K) + K],
  // where bias is 1 x (2K + 1).
  Ref distance_bias(Param<T>* bias, Index len);
  // Cross-entropy of a 1 x k logit row against gold class; 1 x 1 output.
  Ref softmax_xent(Ref logits, int gold);

  const Mat<T>& value(Ref r) const { return nodes_[r].value; }

  // Accumulates seed * d(node)/d(param) into every reachable Param's grad.
  void backward(Ref loss, T seed = T(1));

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    bool needs_grad = false;
    std::function<void(Graph&)> back;
  };

  Ref push(Mat<T> value, bool needs_grad, std::function<void(Graph&)> back,
           const char* op);
  Mat<T>& grad(Ref r) { return nodes_[r].grad; }

  std::vector<Node> nodes_;
};

// One affine+rectifier stack; dropout after each rectifier during training.
template <typename T>
struct FeedForwardParams {
  std::vector<Param<T>*> weights;  // layer i: in x out
  std::vector<Param<T>*> biases;   // 1 x out

  Index in_width() const { return weights.front()->value.rows(); }
  Index out_width() const { return weights.back()->value.cols(); }
};

// Creates a stack named "<prefix>.w0", "<prefix>.b0", ... in the store.
template <typename T>
FeedForwardParams<T> make_ffn(ParamStore<T>& store, const std::string& prefix,
                              Index in_width, const std::vector<Index>& widths,
                              Rng& rng);

template <typename T>
typename Graph<T>::Ref apply_ffn(Graph<T>& g, const FeedForwardParams<T>& ffn,
                                 typename Graph<T>::Ref input, T dropout_rate,
                                 bool training, Rng* rng);

// Central-difference check of the gradients currently stored in params
// against eval(), which must recompute the objective from current values.
// Samples min(200, total) coordinates; returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::vector<Param<double>*>& params,
                         const std::function<double()>& eval, double epsilon,
                         std::uint64_t seed = 1234);

}  // namespace decatt
