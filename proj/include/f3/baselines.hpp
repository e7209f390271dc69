#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "f3/history.hpp"
#include "f3/policy.hpp"

namespace f3 {

struct QLearningConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon = 0.1;
};

// Tabular values over the second-order state: the last two joint actions,
// each slot either a joint action or the start padding symbol.
class QTable {
 public:
  QTable(int num_actions, QLearningConfig cfg = {});

  static int num_states(int num_actions) {
    const int slot = num_actions * num_actions + 1;
    return slot * slot;
  }
  int num_states() const { return static_cast<int>(values_.rows()); }
  int num_actions() const { return static_cast<int>(values_.cols()); }
  const QLearningConfig& config() const { return cfg_; }

  int state_index(std::span<const JointAction> history) const;
  double value(int state, Action a) const { return values_(state, a.index); }
  void set_value(int state, Action a, double v) { values_(state, a.index) = v; }
  const Eigen::MatrixXd& values() const { return values_; }

  // Q(s,a) += α (r + γ max_a' Q(s',a') − Q(s,a)); the bootstrap term is
  // dropped when `terminal`.
  void qlearning_step(int state, Action a, double reward, int next_state, bool terminal = false);

  Action greedy(int state) const;

  // "state action value" lines with round-trip precision.
  std::string serialize() const;
  static QTable parse(const std::string& text, QLearningConfig cfg = {});

 private:
  QLearningConfig cfg_;
  Eigen::MatrixXd values_;
};

struct Transition {
  std::vector<JointAction> prefix;
  Action action;
  double reward = 0.0;
  std::vector<JointAction> next_prefix;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct DqnConfig {
  std::size_t buffer = 10000;
  std::size_t batch = 32;
  double gamma = 0.99;
  int sync_every = 200;  // learning steps between target syncs
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_steps = 20000;  // acting steps over which ε is annealed
  int learn_every = 50;       // environment steps per learning step
  bool hierarchical = false;  // full HE instead of the history encoder
  nn::OptimizerConfig optimizer{};
};

// LSTM Q-network with a lagged target copy and a replay buffer.
class DqnLearner {
 public:
  DqnLearner(const DqnConfig& cfg, int num_actions, int hidden, Rng& init_rng,
             double init_range = 0.08);

  const DqnConfig& config() const { return cfg_; }
  Store& online_store() { return online_; }
  const Store& online_store() const { return online_; }
  const Store& target_store() const { return target_; }
  const PolicyNetwork& online_net() const { return online_net_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long learn_steps() const { return learn_steps_; }
  long env_steps() const { return env_steps_; }

  Eigen::MatrixXd q_values(std::span<const JointAction> prefix) const;
  Eigen::MatrixXd target_q_values(std::span<const JointAction> prefix) const;
  double epsilon(long acting_steps) const;

  // Mean of (Q(s,a) − y)² with y = r + γ max target-Q(s') (y = r when done).
  // Accumulates gradients into the online store when `accumulate`.
  double td_loss(std::span<const Transition* const> batch, bool accumulate);

  // Stores the transition; every learn_every steps trains on a minibatch and
  // syncs the target net every sync_every learning steps.
  void dqn_step(Transition t, Rng& rng);
  void learn(Rng& rng);
  void sync_target();

 private:
  DqnConfig cfg_;
  int num_actions_;
  Store online_;
  Store target_;
  PolicyNetwork online_net_;
  PolicyNetwork target_net_;
  ReplayBuffer buffer_;
  nn::Optimizer<double> opt_;
  long learn_steps_ = 0;
  long env_steps_ = 0;
};

}  // namespace f3
