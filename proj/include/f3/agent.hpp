#pragma once

#include <memory>
#include <optional>
#include <string>

#include "f3/baselines.hpp"
#include "f3/oae.hpp"
#include "f3/policy.hpp"

namespace f3 {

enum class Pathway {
  kHeAd,       // HE+AD trained by REINFORCE
  kPg,         // history-level encoder + MLP, REINFORCE
  kOaeAd,      // decoder directly on E_x
  kOaeHeAd,    // HE with E_x fused in CombineNet
  kQLearning,  // tabular, second-order state
  kDqn,        // LSTM Q-network
};

Pathway pathway_from_string(std::string_view s);
std::string_view to_string(Pathway p);
bool uses_oae(Pathway p);
// Row label in result tables, e.g. "O-OAE+HE+AD", "HE+AD(DQN)".
std::string pathway_label(Pathway p, SuffixMode mode);

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Pathway pathway() const = 0;
  // training: sample/explore and learn at end_game; otherwise act greedily
  // and leave every parameter and the memory untouched.
  virtual void begin_game(bool training) = 0;
  virtual Action act(const ObservedHistory& view, Rng& rng) = 0;
  virtual void end_game(const GameRecord& rec, Rng& rng) = 0;
  // Snapshot of the learnable state (bit-exact text).
  virtual std::string checkpoint() const = 0;
  // Inverse of checkpoint(); throws FormatError on a mismatched snapshot.
  virtual void restore(const std::string& text) = 0;
  virtual const OpponentActionEstimator* estimator() const { return nullptr; }
  virtual const PastMemory* memory() const { return nullptr; }
};

struct AgentConfig {
  Pathway pathway = Pathway::kHeAd;
  int num_actions = 2;
  int hidden = 64;
  double init_range = 0.08;
  nn::OptimizerConfig optimizer{};
  bool moving_baseline = false;  // subtract a running mean of ΔR in REINFORCE
  double baseline_decay = 0.99;
  QLearningConfig qlearning{};
  DqnConfig dqn{};
};

// Builds the agent for cfg.pathway. OAE pathways need a frozen estimator and
// a memory (which the agent keeps updating after training games); other
// pathways ignore both. Throws ConfigError when a component is missing.
std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, Rng& init_rng,
                                  std::shared_ptr<const OpponentActionEstimator> oae = nullptr,
                                  std::shared_ptr<PastMemory> memory = nullptr);

// Policy-gradient agent (HE+AD, PG, OAE+AD, OAE+HE+AD).
class PolicyGradientAgent final : public Agent {
 public:
  PolicyGradientAgent(const AgentConfig& cfg, Rng& init_rng,
                      std::shared_ptr<const OpponentActionEstimator> oae,
                      std::shared_ptr<PastMemory> memory);

  Pathway pathway() const override { return cfg_.pathway; }
  void begin_game(bool training) override;
  Action act(const ObservedHistory& view, Rng& rng) override;
  void end_game(const GameRecord& rec, Rng& rng) override;
  std::string checkpoint() const override;
  void restore(const std::string& text) override;
  const OpponentActionEstimator* estimator() const override { return oae_.get(); }
  const PastMemory* memory() const override { return memory_.get(); }

  Store& store() { return store_; }
  const Store& store() const { return store_; }
  const PolicyNetwork& network() const { return net_; }
  const EpisodeTrace* trace() const { return trace_.get(); }
  double baseline() const { return baseline_; }

 private:
  void sync(const ObservedHistory& view);

  AgentConfig cfg_;
  Store store_;
  PolicyNetwork net_;
  nn::Optimizer<double> opt_;
  std::shared_ptr<const OpponentActionEstimator> oae_;
  std::shared_ptr<PastMemory> memory_;
  std::optional<OaeRuntime> runtime_;

  bool training_ = false;
  CurrentHistory history_;
  std::unique_ptr<EpisodeTrace> trace_;  // training games
  std::unique_ptr<Graph> eval_graph_;    // evaluation games
  EncoderState eval_state_;
  double baseline_ = 0.0;
  long games_ = 0;
};

class QLearningAgent final : public Agent {
 public:
  QLearningAgent(const AgentConfig& cfg);

  Pathway pathway() const override { return Pathway::kQLearning; }
  void begin_game(bool training) override { training_ = training; }
  Action act(const ObservedHistory& view, Rng& rng) override;
  void end_game(const GameRecord& rec, Rng& rng) override;
  std::string checkpoint() const override { return table_.serialize(); }
  void restore(const std::string& text) override;

  const QTable& table() const { return table_; }

 private:
  QTable table_;
  bool training_ = false;
};

class DqnAgent final : public Agent {
 public:
  DqnAgent(const AgentConfig& cfg, Rng& init_rng);

  Pathway pathway() const override { return Pathway::kDqn; }
  void begin_game(bool training) override;
  Action act(const ObservedHistory& view, Rng& rng) override;
  void end_game(const GameRecord& rec, Rng& rng) override;
  std::string checkpoint() const override;
  void restore(const std::string& text) override;

  DqnLearner& learner() { return learner_; }
  const DqnLearner& learner() const { return learner_; }

 private:
  DqnLearner learner_;
  bool training_ = false;
  long acting_steps_ = 0;
  std::unique_ptr<Graph> graph_;
  EncoderState state_;
  int seen_ = 0;
};

}  // namespace f3
