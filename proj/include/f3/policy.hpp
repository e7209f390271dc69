#pragma once

#include <optional>
#include <string>
#include <vector>

#include "f3/history.hpp"
#include "f3/oae.hpp"

namespace f3 {

enum class EncoderSet {
  kNone,          // decoder acts on E_x alone (OAE+AD)
  kHistoryOnly,   // history-level encoder only (PG / DQN baselines)
  kHierarchical,  // self + opponent action-level and history-level encoders
};

struct PolicyConfig {
  int num_actions = 2;
  int hidden = 64;
  EncoderSet encoders = EncoderSet::kHierarchical;
  bool estimate_input = false;  // feed E_x into CombineNet
  double init_range = 0.08;
};

// Hierarchical History Encoder: action-level encoders for each player, a
// history-level encoder over joint steps, and CombineNet fusing their final
// states (plus E_x when configured) into h_c = tanh(W [..] + b).
struct HierarchicalEncoder {
  std::optional<nn::LstmCell<double>> self_encoder;
  std::optional<nn::LstmCell<double>> opponent_encoder;
  std::optional<nn::LstmCell<double>> history_encoder;
  nn::Feedforward<double> combine;  // single affine layer, tanh applied after
  bool estimate_input = false;
  int hidden = 0;
};

struct ActionDecoder {
  nn::Feedforward<double> net;  // d -> s
};

class PolicyNetwork;

// Incremental encoder state for one game: each recurrent encoder has consumed
// the start token plus every completed stage.
struct EncoderState {
  Var self_state, opponent_state, history_state;
  int stages = 0;
};

// One game of sampled actions with their log-probabilities, kept on the
// graph the forward passes were recorded on.
struct EpisodeTrace {
  Graph graph{true};
  EncoderState state;
  std::vector<Action> actions;
  std::vector<Var> log_probs;
  std::optional<double> delta_R;  // set when the game is over

  bool complete() const { return delta_R.has_value() && !actions.empty(); }
};

class PolicyNetwork {
 public:
  PolicyNetwork(const PolicyConfig& cfg, Store& store);

  const PolicyConfig& config() const { return cfg_; }
  const HierarchicalEncoder& encoder() const { return he_; }
  const ActionDecoder& decoder() const { return ad_; }
  // Same structure bound to a second store with the same parameter names.
  PolicyNetwork rebind(Store& other) const;

  EncoderState begin(Graph& g) const;
  void observe(Graph& g, EncoderState& st, const JointAction& stage) const;
  // h_c from the encoder states (and E_x when configured).
  Var combine(Graph& g, const EncoderState& st, std::optional<Var> estimate) const;
  Var logits(Graph& g, Var h_c) const;

  // Whole-history encode: start token plus every stage of c.
  Var encode_history(Graph& g, const CurrentHistory& c, std::optional<Var> estimate) const;
  // h_c for several histories at once (d x B), one column per history.
  // Histories must come in non-increasing length order. Only for policies
  // without the estimate input.
  Var encode_batch(Graph& g, std::span<const std::span<const JointAction>> histories) const;

 private:
  PolicyConfig cfg_;
  HierarchicalEncoder he_;
  ActionDecoder ad_;
};

enum class DecodeMode { kSample, kGreedy };

// Greedy: argmax, lowest index on ties. Sample: draw from softmax(logits).
Action greedy_action(const Eigen::MatrixXd& logits);
Action sample_action(const Eigen::MatrixXd& logits, Rng& rng);
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

// Chooses an action from the logits node; in sample mode also appends the
// action and its log-probability to `trace`.
Action decode_action(Graph& g, Var logits, DecodeMode mode, Rng& rng,
                     EpisodeTrace* trace = nullptr);

// Appends action `a` and its log-probability under softmax(logits) to the
// trace (used by sampling, and to replay a fixed action sequence).
void record_action(Graph& g, Var logits, Action a, EpisodeTrace& trace);

// -(ΔR - baseline)·Σ_t log π(a_t) on the trace's graph.
Var reinforce_surrogate(EpisodeTrace& trace, double baseline = 0.0);

// Applies one optimizer step along the gradient of -(ΔR - baseline)·Σ log π.
// Throws SequencingError when the trace is incomplete. A zero scaled return
// leaves the parameters untouched.
void reinforce_update(EpisodeTrace& trace, Store& store, nn::Optimizer<double>& opt,
                      double baseline = 0.0);

}  // namespace f3
