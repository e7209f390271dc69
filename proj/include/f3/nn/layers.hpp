#pragma once

#include <span>
#include <string>
#include <vector>

#include "f3/nn/graph.hpp"

namespace f3::nn {

// Single-layer gated recurrent cell (input, forget, candidate, output gates,
// stacked in that order in the 4d rows of the weights). The recurrent state
// travels through the graph as one 2d x B node [h; c].
template <typename Scalar>
struct LstmCell {
  Param<Scalar>* w_input = nullptr;   // 4d x in
  Param<Scalar>* w_hidden = nullptr;  // 4d x d
  Param<Scalar>* bias = nullptr;      // 4d x 1
  Eigen::Index input_dim = 0;
  Eigen::Index hidden_dim = 0;

  static LstmCell create(ParameterStore<Scalar>& store, const std::string& prefix,
                         Eigen::Index in, Eigen::Index d) {
    LstmCell cell;
    cell.w_input = &store.add(prefix + ".w_input", 4 * d, in);
    cell.w_hidden = &store.add(prefix + ".w_hidden", 4 * d, d);
    cell.bias = &store.add(prefix + ".bias", 4 * d, 1);
    cell.input_dim = in;
    cell.hidden_dim = d;
    return cell;
  }

  // Same shapes, parameters looked up by name in another store.
  LstmCell rebind(ParameterStore<Scalar>& store) const {
    LstmCell cell = *this;
    cell.w_input = &store.at(w_input->name);
    cell.w_hidden = &store.at(w_hidden->name);
    cell.bias = &store.at(bias->name);
    return cell;
  }
};

template <typename Scalar>
Var lstm_zero_state(Graph<Scalar>& g, const LstmCell<Scalar>& cell, Eigen::Index batch = 1) {
  return input(g, Matrix<Scalar>(Matrix<Scalar>::Zero(2 * cell.hidden_dim, batch)));
}

template <typename Scalar>
Var lstm_step(Graph<Scalar>& g, const LstmCell<Scalar>& cell, Var x, Var state) {
  using Mat = Matrix<Scalar>;
  const auto d = cell.hidden_dim;
  const auto& xv = g.value(x);
  const auto& sv = g.value(state);
  detail::require(xv.rows() == cell.input_dim, "lstm_step",
                  "input " + detail::dims(xv) + " for input dim " +
                      std::to_string(cell.input_dim));
  detail::require(sv.rows() == 2 * d && sv.cols() == xv.cols(), "lstm_step",
                  "state " + detail::dims(sv));
  Mat z = cell.w_input->value * xv + cell.w_hidden->value * sv.topRows(d);
  z.colwise() += cell.bias->value.col(0);
  Mat gates(4 * d, xv.cols());
  gates.topRows(2 * d) = z.topRows(2 * d).unaryExpr([](Scalar v) { return detail::sigmoid(v); });
  gates.middleRows(2 * d, d) = z.middleRows(2 * d, d).array().tanh().matrix();
  gates.bottomRows(d) = z.bottomRows(d).unaryExpr([](Scalar v) { return detail::sigmoid(v); });

  Mat out(2 * d, xv.cols());
  const auto i = gates.topRows(d).array();
  const auto f = gates.middleRows(d, d).array();
  const auto gg = gates.middleRows(2 * d, d).array();
  const auto o = gates.bottomRows(d).array();
  out.bottomRows(d) = (f * sv.bottomRows(d).array() + i * gg).matrix();
  Mat tanh_c = out.bottomRows(d).array().tanh().matrix();
  out.topRows(d) = (o * tanh_c.array()).matrix();

  if (!g.recording()) return g.push(std::move(out));
  const LstmCell<Scalar> c = cell;
  return g.push(std::move(out), [c, x, state, gates = std::move(gates),
                                 tanh_c = std::move(tanh_c)](Graph<Scalar>& gr, Var self) {
    const auto d = c.hidden_dim;
    const auto& go = gr.grad(self);
    const auto& sv = gr.value(state);
    const auto i = gates.topRows(d).array();
    const auto f = gates.middleRows(d, d).array();
    const auto gg = gates.middleRows(2 * d, d).array();
    const auto o = gates.bottomRows(d).array();
    const auto dh = go.topRows(d).array();
    const Mat dc = (go.bottomRows(d).array() +
                    dh * o * (Scalar(1) - tanh_c.array().square())).matrix();
    Mat dz(4 * d, go.cols());
    dz.topRows(d) = (dc.array() * gg * i * (Scalar(1) - i)).matrix();
    dz.middleRows(d, d) = (dc.array() * sv.bottomRows(d).array() * f * (Scalar(1) - f)).matrix();
    dz.middleRows(2 * d, d) = (dc.array() * i * (Scalar(1) - gg.square())).matrix();
    dz.bottomRows(d) = (dh * tanh_c.array() * o * (Scalar(1) - o)).matrix();

    c.w_input->grad.noalias() += dz * gr.value(x).transpose();
    c.w_hidden->grad.noalias() += dz * sv.topRows(d).transpose();
    c.bias->grad.col(0) += dz.rowwise().sum();
    gr.grad(x).noalias() += c.w_input->value.transpose() * dz;
    auto& gs = gr.grad(state);
    gs.topRows(d).noalias() += c.w_hidden->value.transpose() * dz;
    gs.bottomRows(d) += (dc.array() * f).matrix();
  });
}

template <typename Scalar>
Var lstm_hidden(Graph<Scalar>& g, const LstmCell<Scalar>& cell, Var state) {
  return slice_rows(g, state, 0, cell.hidden_dim);
}

// Hidden state after each step, starting from the zero state.
template <typename Scalar>
std::vector<Var> encode_prefixes(Graph<Scalar>& g, const LstmCell<Scalar>& cell,
                                 std::span<const Var> steps) {
  std::vector<Var> hidden;
  hidden.reserve(steps.size());
  Var state = lstm_zero_state(g, cell, steps.empty() ? 1 : g.value(steps[0]).cols());
  for (Var x : steps) {
    state = lstm_step(g, cell, x, state);
    hidden.push_back(lstm_hidden(g, cell, state));
  }
  return hidden;
}

// Final hidden state. Empty input is a caller error: the policy layers supply
// a start token for the empty history.
template <typename Scalar>
Var encode_sequence(Graph<Scalar>& g, const LstmCell<Scalar>& cell,
                    std::span<const Var> steps) {
  detail::require(!steps.empty(), "encode_sequence", "empty sequence");
  Var state = lstm_zero_state(g, cell, g.value(steps[0]).cols());
  for (Var x : steps) state = lstm_step(g, cell, x, state);
  return lstm_hidden(g, cell, state);
}

enum class Activation { kIdentity, kTanh };

// Affine layers; hidden layers use `hidden_activation`, the last layer is
// linear.
template <typename Scalar>
struct Feedforward {
  struct Layer {
    Param<Scalar>* weight = nullptr;
    Param<Scalar>* bias = nullptr;
  };
  std::vector<Layer> layers;
  std::vector<Eigen::Index> dims;
  Activation hidden_activation = Activation::kTanh;

  static Feedforward create(ParameterStore<Scalar>& store, const std::string& prefix,
                            std::vector<Eigen::Index> dims,
                            Activation hidden = Activation::kTanh) {
    if (dims.size() < 2) throw ShapeError("Feedforward needs at least two dims");
    Feedforward f;
    f.dims = dims;
    f.hidden_activation = hidden;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const std::string p = prefix + ".layer" + std::to_string(l);
      f.layers.push_back({&store.add(p + ".weight", dims[l + 1], dims[l]),
                          &store.add(p + ".bias", dims[l + 1], 1)});
    }
    return f;
  }

  Feedforward rebind(ParameterStore<Scalar>& store) const {
    Feedforward f = *this;
    for (auto& l : f.layers) {
      l.weight = &store.at(l.weight->name);
      l.bias = &store.at(l.bias->name);
    }
    return f;
  }

  Eigen::Index input_dim() const { return dims.front(); }
  Eigen::Index output_dim() const { return dims.back(); }
};

template <typename Scalar>
Var feedforward_apply(Graph<Scalar>& g, const Feedforward<Scalar>& f, Var x) {
  detail::require(g.value(x).rows() == f.input_dim(), "feedforward_apply",
                  "input " + detail::dims(g.value(x)) + " for input dim " +
                      std::to_string(f.input_dim()));
  Var h = x;
  for (std::size_t l = 0; l < f.layers.size(); ++l) {
    h = affine(g, *f.layers[l].weight, *f.layers[l].bias, h);
    if (l + 1 < f.layers.size() && f.hidden_activation == Activation::kTanh) h = tanh(g, h);
  }
  return h;
}

}  // namespace f3::nn
