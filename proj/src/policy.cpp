#include "f3/policy.hpp"

#include "f3/features.hpp"

#include <algorithm>

namespace f3 {
namespace {

int encoder_count(EncoderSet e) {
  switch (e) {
    case EncoderSet::kNone: return 0;
    case EncoderSet::kHistoryOnly: return 1;
    case EncoderSet::kHierarchical: return 3;
  }
  return 0;
}

}  // namespace

PolicyNetwork::PolicyNetwork(const PolicyConfig& cfg, Store& store) : cfg_(cfg) {
  const Eigen::Index s = cfg.num_actions;
  const Eigen::Index d = cfg.hidden;
  if (cfg.encoders == EncoderSet::kNone && !cfg.estimate_input) {
    throw ConfigError("policy with no encoders needs the estimate input");
  }
  he_.hidden = cfg.hidden;
  he_.estimate_input = cfg.estimate_input;
  if (cfg.encoders == EncoderSet::kHierarchical) {
    he_.self_encoder = nn::LstmCell<double>::create(store, "he.self", s + 1, d);
    he_.opponent_encoder = nn::LstmCell<double>::create(store, "he.opponent", s + 1, d);
  }
  if (cfg.encoders != EncoderSet::kNone) {
    he_.history_encoder = nn::LstmCell<double>::create(store, "he.history", 2 * s + 1, d);
  }
  const Eigen::Index combine_in = d * (encoder_count(cfg.encoders) + (cfg.estimate_input ? 1 : 0));
  he_.combine = nn::Feedforward<double>::create(store, "he.combine", {combine_in, d});
  ad_.net = nn::Feedforward<double>::create(store, "decoder", {d, s});
}

PolicyNetwork PolicyNetwork::rebind(Store& other) const {
  PolicyNetwork p = *this;
  if (p.he_.self_encoder) p.he_.self_encoder = p.he_.self_encoder->rebind(other);
  if (p.he_.opponent_encoder) p.he_.opponent_encoder = p.he_.opponent_encoder->rebind(other);
  if (p.he_.history_encoder) p.he_.history_encoder = p.he_.history_encoder->rebind(other);
  p.he_.combine = p.he_.combine.rebind(other);
  p.ad_.net = p.ad_.net.rebind(other);
  return p;
}

EncoderState PolicyNetwork::begin(Graph& g) const {
  EncoderState st;
  const auto start = [&g](const nn::LstmCell<double>& cell) {
    Var x = nn::input(g, start_token(cell.input_dim));
    return nn::lstm_step(g, cell, x, nn::lstm_zero_state(g, cell));
  };
  if (he_.self_encoder) st.self_state = start(*he_.self_encoder);
  if (he_.opponent_encoder) st.opponent_state = start(*he_.opponent_encoder);
  if (he_.history_encoder) st.history_state = start(*he_.history_encoder);
  return st;
}

void PolicyNetwork::observe(Graph& g, EncoderState& st, const JointAction& stage) const {
  const int s = cfg_.num_actions;
  if (he_.self_encoder) {
    st.self_state = nn::lstm_step(g, *he_.self_encoder,
                                  nn::input(g, single_step(stage.learner, s)), st.self_state);
  }
  if (he_.opponent_encoder) {
    st.opponent_state = nn::lstm_step(g, *he_.opponent_encoder,
                                      nn::input(g, single_step(stage.opponent, s)),
                                      st.opponent_state);
  }
  if (he_.history_encoder) {
    st.history_state = nn::lstm_step(g, *he_.history_encoder,
                                     nn::input(g, joint_step(stage.learner, stage.opponent, s)),
                                     st.history_state);
  }
  ++st.stages;
}

Var PolicyNetwork::combine(Graph& g, const EncoderState& st, std::optional<Var> estimate) const {
  if (estimate.has_value() != cfg_.estimate_input) {
    throw ShapeError(cfg_.estimate_input ? "encode_history: policy expects E_x"
                                         : "encode_history: E_x given to an encoder "
                                           "without the estimate input");
  }
  std::vector<Var> parts;
  if (he_.self_encoder) parts.push_back(nn::lstm_hidden(g, *he_.self_encoder, st.self_state));
  if (he_.opponent_encoder) {
    parts.push_back(nn::lstm_hidden(g, *he_.opponent_encoder, st.opponent_state));
  }
  if (he_.history_encoder) {
    parts.push_back(nn::lstm_hidden(g, *he_.history_encoder, st.history_state));
  }
  if (estimate) parts.push_back(*estimate);
  Var joined = parts.size() == 1 ? parts[0] : nn::concat(g, std::span<const Var>(parts));
  return nn::tanh(g, nn::feedforward_apply(g, he_.combine, joined));
}

Var PolicyNetwork::logits(Graph& g, Var h_c) const {
  return nn::feedforward_apply(g, ad_.net, h_c);
}

Var PolicyNetwork::encode_history(Graph& g, const CurrentHistory& c,
                                  std::optional<Var> estimate) const {
  EncoderState st = begin(g);
  for (const auto& p : c.pairs()) observe(g, st, p);
  return combine(g, st, estimate);
}

Var PolicyNetwork::encode_batch(Graph& g,
                                std::span<const std::span<const JointAction>> histories) const {
  if (histories.empty()) throw std::domain_error("encode_batch: no histories");
  const int s = cfg_.num_actions;
  const auto b = static_cast<Eigen::Index>(histories.size());
  for (std::size_t j = 1; j < histories.size(); ++j) {
    if (histories[j].size() > histories[j - 1].size()) {
      throw std::invalid_argument("encode_batch: histories must be sorted by decreasing length");
    }
  }
  const std::size_t longest = histories[0].size();

  using Feature = Eigen::MatrixXd (*)(const JointAction&, int);
  const auto run = [&](const nn::LstmCell<double>& cell, Feature feature) {
    Eigen::MatrixXd start(cell.input_dim, b);
    start.colwise() = start_token(cell.input_dim).col(0);
    Var state = nn::lstm_step(g, cell, nn::input(g, std::move(start)), nn::lstm_zero_state(g, cell, b));
    for (std::size_t t = 0; t < longest; ++t) {
      Eigen::Index active = 0;
      while (active < b && histories[static_cast<std::size_t>(active)].size() > t) ++active;
      Eigen::MatrixXd x(cell.input_dim, active);
      for (Eigen::Index j = 0; j < active; ++j) {
        x.col(j) = feature(histories[static_cast<std::size_t>(j)][t], s).col(0);
      }
      Var head = active == b ? state : nn::left_cols(g, state, active);
      Var next = nn::lstm_step(g, cell, nn::input(g, std::move(x)), head);
      state = active == b ? next : nn::splice_left(g, next, state);
    }
    return state;
  };
  EncoderState st;
  if (he_.self_encoder) {
    st.self_state = run(*he_.self_encoder, [](const JointAction& p, int n) { return single_step(p.learner, n); });
  }
  if (he_.opponent_encoder) {
    st.opponent_state =
        run(*he_.opponent_encoder, [](const JointAction& p, int n) { return single_step(p.opponent, n); });
  }
  if (he_.history_encoder) {
    st.history_state = run(*he_.history_encoder,
                           [](const JointAction& p, int n) { return joint_step(p.learner, p.opponent, n); });
  }
  return combine(g, st, std::nullopt);
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

Action greedy_action(const Eigen::MatrixXd& logits) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.rows(); ++i) {
    if (logits(i, 0) > logits(best, 0)) best = i;
  }
  return Action{static_cast<int>(best)};
}

Action sample_action(const Eigen::MatrixXd& logits, Rng& rng) {
  const Eigen::MatrixXd p = softmax(logits);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < p.rows(); ++i) {
    acc += p(i, 0);
    if (u < acc) return Action{static_cast<int>(i)};
  }
  return Action{static_cast<int>(p.rows() - 1)};
}

void record_action(Graph& g, Var logits, Action a, EpisodeTrace& trace) {
  trace.actions.push_back(a);
  trace.log_probs.push_back(nn::pick(g, nn::log_softmax(g, logits), a.index));
}

Action decode_action(Graph& g, Var logits, DecodeMode mode, Rng& rng, EpisodeTrace* trace) {
  if (mode == DecodeMode::kGreedy) return greedy_action(g.value(logits));
  const Action a = sample_action(g.value(logits), rng);
  if (trace) record_action(g, logits, a, *trace);
  return a;
}

Var reinforce_surrogate(EpisodeTrace& trace, double baseline) {
  if (!trace.complete()) {
    throw SequencingError("reinforce_update: trace is not complete");
  }
  if (trace.log_probs.size() != trace.actions.size()) {
    throw SequencingError("reinforce_update: trace has actions without log-probabilities");
  }
  Graph& g = trace.graph;
  Var total = nn::sum(g, std::span<const Var>(trace.log_probs));
  return nn::scale(g, total, -(*trace.delta_R - baseline));
}

void reinforce_update(EpisodeTrace& trace, Store& store, nn::Optimizer<double>& opt,
                      double baseline) {
  Var loss = reinforce_surrogate(trace, baseline);
  if (*trace.delta_R - baseline == 0.0) return;
  trace.graph.backward(loss);
  opt.step(store);
}

}  // namespace f3
