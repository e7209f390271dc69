#include "f3/baselines.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace f3 {

QTable::QTable(int num_actions, QLearningConfig cfg)
    : cfg_(cfg), values_(Eigen::MatrixXd::Zero(num_states(num_actions), num_actions)) {}

int QTable::state_index(std::span<const JointAction> history) const {
  const int s = num_actions();
  const int slot = s * s + 1;
  const auto code = [s](const JointAction& j) { return 1 + j.learner.index * s + j.opponent.index; };
  const auto n = history.size();
  const int older = n >= 2 ? code(history[n - 2]) : 0;
  const int last = n >= 1 ? code(history[n - 1]) : 0;
  return older * slot + last;
}

void QTable::qlearning_step(int state, Action a, double reward, int next_state, bool terminal) {
  const double bootstrap = terminal ? 0.0 : values_.row(next_state).maxCoeff();
  double& q = values_(state, a.index);
  q += cfg_.alpha * (reward + cfg_.gamma * bootstrap - q);
}

Action QTable::greedy(int state) const {
  int best = 0;
  for (int a = 1; a < num_actions(); ++a) {
    if (values_(state, a) > values_(state, best)) best = a;
  }
  return Action{best};
}

std::string QTable::serialize() const {
  std::ostringstream out;
  char buf[40];
  for (int st = 0; st < num_states(); ++st) {
    for (int a = 0; a < num_actions(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", values_(st, a));
      out << st << ' ' << a << ' ' << buf << '\n';
    }
  }
  return out.str();
}

QTable QTable::parse(const std::string& text, QLearningConfig cfg) {
  std::istringstream in(text);
  std::vector<std::tuple<int, int, double>> rows;
  std::string line;
  int max_action = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int st = 0, a = 0;
    std::string v;
    if (!(ls >> st >> a >> v)) throw FormatError("bad Q-table line: " + line);
    rows.emplace_back(st, a, std::stod(v));
    max_action = std::max(max_action, a);
  }
  QTable q(max_action + 1, cfg);
  for (const auto& [st, a, v] : rows) {
    if (st < 0 || st >= q.num_states()) throw FormatError("Q-table state out of range");
    q.values_(st, a) = v;
  }
  return q;
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[uniform_index(rng, items_.size())]);
  return out;
}

namespace {

PolicyConfig dqn_network_config(const DqnConfig& cfg, int s, int hidden, double init_range) {
  PolicyConfig pc;
  pc.num_actions = s;
  pc.hidden = hidden;
  pc.encoders = cfg.hierarchical ? EncoderSet::kHierarchical : EncoderSet::kHistoryOnly;
  pc.estimate_input = false;
  pc.init_range = init_range;
  return pc;
}

}  // namespace

DqnLearner::DqnLearner(const DqnConfig& cfg, int num_actions, int hidden, Rng& init_rng,
                       double init_range)
    : cfg_(cfg),
      num_actions_(num_actions),
      online_net_(dqn_network_config(cfg, num_actions, hidden, init_range), online_),
      target_net_(dqn_network_config(cfg, num_actions, hidden, init_range), target_),
      buffer_(cfg.buffer),
      opt_(cfg.optimizer) {
  online_.init_uniform(init_rng, init_range);
  sync_target();
}

Eigen::MatrixXd DqnLearner::q_values(std::span<const JointAction> prefix) const {
  Graph g(false);
  const auto c = CurrentHistory::from_pairs({prefix.begin(), prefix.end()});
  return g.value(online_net_.logits(g, online_net_.encode_history(g, c, std::nullopt)));
}

Eigen::MatrixXd DqnLearner::target_q_values(std::span<const JointAction> prefix) const {
  Graph g(false);
  const auto c = CurrentHistory::from_pairs({prefix.begin(), prefix.end()});
  return g.value(target_net_.logits(g, target_net_.encode_history(g, c, std::nullopt)));
}

double DqnLearner::epsilon(long acting_steps) const {
  if (acting_steps >= cfg_.epsilon_steps) return cfg_.epsilon_end;
  const double frac = static_cast<double>(acting_steps) / cfg_.epsilon_steps;
  return cfg_.epsilon_start + frac * (cfg_.epsilon_end - cfg_.epsilon_start);
}

double DqnLearner::td_loss(std::span<const Transition* const> batch, bool accumulate) {
  if (batch.empty()) throw std::domain_error("td_loss: empty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  // Longest first, as the batched encoder requires; the loss is a mean, so
  // the order only fixes the summation order.
  std::vector<const Transition*> sorted(batch.begin(), batch.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Transition* a, const Transition* c) {
    return a->prefix.size() > c->prefix.size();
  });
  std::vector<std::span<const JointAction>> prefixes, next;
  std::vector<Eigen::Index> actions;
  for (const Transition* t : sorted) {
    prefixes.emplace_back(t->prefix);
    next.emplace_back(t->next_prefix);
    actions.push_back(t->action.index);
  }
  Graph tg(false);
  const Eigen::MatrixXd next_q = tg.value(target_net_.logits(tg, target_net_.encode_batch(tg, next)));
  Eigen::MatrixXd y(1, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const Transition* t = sorted[static_cast<std::size_t>(j)];
    y(0, j) = t->reward + (t->done ? 0.0 : cfg_.gamma * next_q.col(j).maxCoeff());
  }
  Graph g(accumulate);
  Var q = online_net_.logits(g, online_net_.encode_batch(g, prefixes));
  Var qa = nn::gather_rows(g, q, std::move(actions));
  Var loss = nn::scale(g, nn::sum_squares(g, nn::sub(g, qa, nn::input(g, std::move(y)))),
                       1.0 / static_cast<double>(b));
  if (accumulate) g.backward(loss);
  return g.scalar(loss);
}

void DqnLearner::learn(Rng& rng) {
  if (buffer_.size() == 0) return;
  const auto batch = buffer_.sample(cfg_.batch, rng);
  td_loss(batch, true);
  opt_.step(online_);
  ++learn_steps_;
  if (learn_steps_ % cfg_.sync_every == 0) sync_target();
}

void DqnLearner::sync_target() { target_.copy_values_from(online_); }

void DqnLearner::dqn_step(Transition t, Rng& rng) {
  buffer_.push(std::move(t));
  ++env_steps_;
  if (env_steps_ % cfg_.learn_every == 0 && buffer_.size() >= cfg_.batch) learn(rng);
}

}  // namespace f3
