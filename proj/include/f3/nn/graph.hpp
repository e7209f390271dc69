#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "f3/errors.hpp"
#include "f3/nn/params.hpp"

namespace f3::nn {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Every op appends a node holding its value and a closure
// that pushes the node's gradient to its inputs. With recording off the
// closures are dropped and the graph is a plain forward evaluator.
template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  using BackFn = std::function<void(Graph&, Var)>;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var push(Mat value, BackFn back = {}) {
    nodes_.push_back(Node{std::move(value), Mat(), record_ ? std::move(back) : BackFn{}});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  Scalar scalar(Var v) const { return value(v)(0, 0); }
  Mat& grad(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  // Gradient of the 1x1 node `root` with respect to every node and every
  // parameter the graph touched. Parameter gradients accumulate.
  void backward(Var root) {
    if (!record_) throw TrainingError("backward on a non-recording graph");
    if (value(root).size() != 1) throw ShapeError("backward root must be 1x1");
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    grad(root)(0, 0) = Scalar(1);
    for (int i = root.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back) n.back(*this, Var{i});
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
  };
  std::vector<Node> nodes_;
  bool record_;
};

namespace detail {

inline void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

template <typename Mat>
std::string dims(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

}  // namespace detail

template <typename Scalar>
Var input(Graph<Scalar>& g, Matrix<Scalar> value) {
  return g.push(std::move(value));
}

// Leaf carrying a parameter's current value; its gradient flows to p.grad.
template <typename Scalar>
Var param(Graph<Scalar>& g, Param<Scalar>& p) {
  return g.push(p.value, [&p](Graph<Scalar>& gr, Var self) { p.grad += gr.grad(self); });
}

// W x + b, with b broadcast across the columns of x.
template <typename Scalar>
Var affine(Graph<Scalar>& g, Param<Scalar>& w, Param<Scalar>& b, Var x) {
  const auto& xv = g.value(x);
  detail::require(w.value.cols() == xv.rows(), "affine",
                  "weight " + detail::dims(w.value) + " vs input " + detail::dims(xv));
  Matrix<Scalar> out = w.value * xv;
  out.colwise() += b.value.col(0);
  return g.push(std::move(out), [&w, &b, x](Graph<Scalar>& gr, Var self) {
    const auto& go = gr.grad(self);
    w.grad.noalias() += go * gr.value(x).transpose();
    b.grad.col(0) += go.rowwise().sum();
    gr.grad(x).noalias() += w.value.transpose() * go;
  });
}

template <typename Scalar>
Var add(Graph<Scalar>& g, Var a, Var b) {
  detail::require(g.value(a).rows() == g.value(b).rows() &&
                      g.value(a).cols() == g.value(b).cols(),
                  "add", detail::dims(g.value(a)) + " vs " + detail::dims(g.value(b)));
  return g.push(g.value(a) + g.value(b), [a, b](Graph<Scalar>& gr, Var self) {
    gr.grad(a) += gr.grad(self);
    gr.grad(b) += gr.grad(self);
  });
}

template <typename Scalar>
Var sub(Graph<Scalar>& g, Var a, Var b) {
  detail::require(g.value(a).rows() == g.value(b).rows() &&
                      g.value(a).cols() == g.value(b).cols(),
                  "sub", detail::dims(g.value(a)) + " vs " + detail::dims(g.value(b)));
  return g.push(g.value(a) - g.value(b), [a, b](Graph<Scalar>& gr, Var self) {
    gr.grad(a) += gr.grad(self);
    gr.grad(b) -= gr.grad(self);
  });
}

template <typename Scalar>
Var scale(Graph<Scalar>& g, Var a, Scalar c) {
  return g.push(g.value(a) * c, [a, c](Graph<Scalar>& gr, Var self) {
    gr.grad(a) += c * gr.grad(self);
  });
}

template <typename Scalar>
Var tanh(Graph<Scalar>& g, Var a) {
  Matrix<Scalar> out = g.value(a).array().tanh().matrix();
  return g.push(std::move(out), [a](Graph<Scalar>& gr, Var self) {
    const auto& y = gr.value(self);
    gr.grad(a).array() += gr.grad(self).array() * (Scalar(1) - y.array().square());
  });
}

template <typename Scalar>
Var sigmoid(Graph<Scalar>& g, Var a) {
  Matrix<Scalar> out = g.value(a).unaryExpr([](Scalar x) { return detail::sigmoid(x); });
  return g.push(std::move(out), [a](Graph<Scalar>& gr, Var self) {
    const auto& y = gr.value(self);
    gr.grad(a).array() += gr.grad(self).array() * y.array() * (Scalar(1) - y.array());
  });
}

// Stacks column vectors (or equal-width blocks) vertically.
template <typename Scalar>
Var concat(Graph<Scalar>& g, std::span<const Var> parts) {
  detail::require(!parts.empty(), "concat", "no inputs");
  const auto cols = g.value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    detail::require(g.value(p).cols() == cols, "concat", "column mismatch");
    rows += g.value(p).rows();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    const auto& v = g.value(p);
    out.middleRows(r, v.rows()) = v;
    r += v.rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.push(std::move(out), [ins = std::move(ins)](Graph<Scalar>& gr, Var self) {
    const auto& go = gr.grad(self);
    Eigen::Index row = 0;
    for (Var p : ins) {
      const auto n = gr.value(p).rows();
      gr.grad(p) += go.middleRows(row, n);
      row += n;
    }
  });
}

template <typename Scalar>
Var concat(Graph<Scalar>& g, std::initializer_list<Var> parts) {
  return concat(g, std::span<const Var>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var slice_rows(Graph<Scalar>& g, Var a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && start + count <= g.value(a).rows(), "slice_rows",
                  "range outside " + detail::dims(g.value(a)));
  return g.push(g.value(a).middleRows(start, count),
                [a, start, count](Graph<Scalar>& gr, Var self) {
                  gr.grad(a).middleRows(start, count) += gr.grad(self);
                });
}

template <typename Scalar>
Var mean(Graph<Scalar>& g, std::span<const Var> parts) {
  detail::require(!parts.empty(), "mean", "no inputs");
  Matrix<Scalar> out = g.value(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    detail::require(g.value(parts[i]).rows() == out.rows() &&
                        g.value(parts[i]).cols() == out.cols(),
                    "mean", "shape mismatch");
    out += g.value(parts[i]);
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(parts.size());
  out *= inv;
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.push(std::move(out), [ins = std::move(ins), inv](Graph<Scalar>& gr, Var self) {
    for (Var p : ins) gr.grad(p) += inv * gr.grad(self);
  });
}

template <typename Scalar>
Var sum(Graph<Scalar>& g, std::span<const Var> parts) {
  detail::require(!parts.empty(), "sum", "no inputs");
  Matrix<Scalar> out = g.value(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) out += g.value(parts[i]);
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.push(std::move(out), [ins = std::move(ins)](Graph<Scalar>& gr, Var self) {
    for (Var p : ins) gr.grad(p) += gr.grad(self);
  });
}

// Softmax over query·key_i. Output is a K x 1 probability vector.
template <typename Scalar>
Var attention_weights(Graph<Scalar>& g, Var query, std::span<const Var> keys) {
  detail::require(!keys.empty(), "attention_weights", "no keys");
  const auto& q = g.value(query);
  detail::require(q.cols() == 1, "attention_weights", "query must be a column");
  const auto k = static_cast<Eigen::Index>(keys.size());
  Matrix<Scalar> scores(k, 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& key = g.value(keys[static_cast<std::size_t>(i)]);
    detail::require(key.rows() == q.rows() && key.cols() == 1, "attention_weights",
                    "key " + detail::dims(key) + " vs query " + detail::dims(q));
    scores(i, 0) = q.col(0).dot(key.col(0));
  }
  scores.array() -= scores.maxCoeff();
  scores = scores.array().exp().matrix();
  scores /= scores.sum();
  std::vector<Var> ks(keys.begin(), keys.end());
  return g.push(std::move(scores), [query, ks = std::move(ks)](Graph<Scalar>& gr, Var self) {
    const auto& p = gr.value(self);
    const auto& gp = gr.grad(self);
    const Scalar inner = p.col(0).dot(gp.col(0));
    const auto& q = gr.value(query);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const Scalar ds = p(row, 0) * (gp(row, 0) - inner);
      gr.grad(query) += ds * gr.value(ks[i]);
      gr.grad(ks[i]) += ds * q;
    }
  });
}

// Σ_i weights_i · values_i.
template <typename Scalar>
Var weighted_sum(Graph<Scalar>& g, Var weights, std::span<const Var> values) {
  const auto& w = g.value(weights);
  detail::require(w.rows() == static_cast<Eigen::Index>(values.size()) && w.cols() == 1,
                  "weighted_sum", "weights " + detail::dims(w) + " for " +
                                      std::to_string(values.size()) + " values");
  Matrix<Scalar> out = w(0, 0) * g.value(values[0]);
  for (std::size_t i = 1; i < values.size(); ++i) {
    detail::require(g.value(values[i]).rows() == out.rows(), "weighted_sum",
                    "value shape mismatch");
    out += w(static_cast<Eigen::Index>(i), 0) * g.value(values[i]);
  }
  std::vector<Var> vs(values.begin(), values.end());
  return g.push(std::move(out), [weights, vs = std::move(vs)](Graph<Scalar>& gr, Var self) {
    const auto& go = gr.grad(self);
    const auto w = gr.value(weights);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      gr.grad(weights)(row, 0) += gr.value(vs[i]).cwiseProduct(go).sum();
      gr.grad(vs[i]) += w(row, 0) * go;
    }
  });
}

// Σ |x - y|. The subgradient at x == y is 0.
template <typename Scalar>
Var l1_loss(Graph<Scalar>& g, Var x, Var y) {
  const auto& xv = g.value(x);
  const auto& yv = g.value(y);
  detail::require(xv.rows() == yv.rows() && xv.cols() == yv.cols(), "l1_loss",
                  detail::dims(xv) + " vs " + detail::dims(yv));
  Matrix<Scalar> out(1, 1);
  out(0, 0) = (xv - yv).cwiseAbs().sum();
  return g.push(std::move(out), [x, y](Graph<Scalar>& gr, Var self) {
    const Scalar go = gr.grad(self)(0, 0);
    const Matrix<Scalar> s = (gr.value(x) - gr.value(y)).unaryExpr([](Scalar d) {
      return d > Scalar(0) ? Scalar(1) : (d < Scalar(0) ? Scalar(-1) : Scalar(0));
    });
    gr.grad(x) += go * s;
    gr.grad(y) -= go * s;
  });
}

// Sum of squared entries.
template <typename Scalar>
Var sum_squares(Graph<Scalar>& g, Var a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = g.value(a).squaredNorm();
  return g.push(std::move(out), [a](Graph<Scalar>& gr, Var self) {
    gr.grad(a) += Scalar(2) * gr.grad(self)(0, 0) * gr.value(a);
  });
}

// Column-wise log-softmax.
template <typename Scalar>
Var log_softmax(Graph<Scalar>& g, Var logits) {
  Matrix<Scalar> out = g.value(logits);
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const Scalar mx = out.col(c).maxCoeff();
    const Scalar lse = mx + std::log((out.col(c).array() - mx).exp().sum());
    out.col(c).array() -= lse;
  }
  return g.push(std::move(out), [logits](Graph<Scalar>& gr, Var self) {
    const auto& y = gr.value(self);
    const auto& go = gr.grad(self);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const Scalar total = go.col(c).sum();
      gr.grad(logits).col(c) += go.col(c) - total * y.col(c).array().exp().matrix();
    }
  });
}

template <typename Scalar>
Var pick(Graph<Scalar>& g, Var a, Eigen::Index row, Eigen::Index col = 0) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = g.value(a)(row, col);
  return g.push(std::move(out), [a, row, col](Graph<Scalar>& gr, Var self) {
    gr.grad(a)(row, col) += gr.grad(self)(0, 0);
  });
}

template <typename Scalar>
Var left_cols(Graph<Scalar>& g, Var a, Eigen::Index count) {
  detail::require(count >= 0 && count <= g.value(a).cols(), "left_cols",
                  std::to_string(count) + " of " + detail::dims(g.value(a)));
  return g.push(g.value(a).leftCols(count), [a, count](Graph<Scalar>& gr, Var self) {
    gr.grad(a).leftCols(count) += gr.grad(self);
  });
}

// `full` with its leftmost columns replaced by `head`. With left_cols this
// lets a batch of sequences sorted by decreasing length share one recurrent
// pass: finished sequences keep their last state in the right-hand columns.
template <typename Scalar>
Var splice_left(Graph<Scalar>& g, Var head, Var full) {
  const auto& hv = g.value(head);
  const auto& fv = g.value(full);
  detail::require(hv.rows() == fv.rows() && hv.cols() <= fv.cols(), "splice_left",
                  detail::dims(hv) + " into " + detail::dims(fv));
  Matrix<Scalar> out = fv;
  out.leftCols(hv.cols()) = hv;
  return g.push(std::move(out), [head, full](Graph<Scalar>& gr, Var self) {
    const auto& go = gr.grad(self);
    const auto k = gr.value(head).cols();
    gr.grad(head) += go.leftCols(k);
    gr.grad(full).rightCols(go.cols() - k) += go.rightCols(go.cols() - k);
  });
}

// 1 x B row holding a(rows[j], j).
template <typename Scalar>
Var gather_rows(Graph<Scalar>& g, Var a, std::vector<Eigen::Index> rows) {
  const auto& av = g.value(a);
  detail::require(static_cast<Eigen::Index>(rows.size()) == av.cols(), "gather_rows",
                  std::to_string(rows.size()) + " rows for " + detail::dims(av));
  Matrix<Scalar> out(1, av.cols());
  for (Eigen::Index j = 0; j < av.cols(); ++j) {
    const auto r = rows[static_cast<std::size_t>(j)];
    detail::require(r >= 0 && r < av.rows(), "gather_rows", "row out of range");
    out(0, j) = av(r, j);
  }
  return g.push(std::move(out), [a, rows = std::move(rows)](Graph<Scalar>& gr, Var self) {
    const auto& go = gr.grad(self);
    for (Eigen::Index j = 0; j < go.cols(); ++j) gr.grad(a)(rows[static_cast<std::size_t>(j)], j) += go(0, j);
  });
}

}  // namespace f3::nn
