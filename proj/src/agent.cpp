#include "f3/agent.hpp"

#include "f3/errors.hpp"

#include <sstream>

namespace f3 {

Pathway pathway_from_string(std::string_view s) {
  if (s == "he_ad") return Pathway::kHeAd;
  if (s == "pg") return Pathway::kPg;
  if (s == "oae_ad") return Pathway::kOaeAd;
  if (s == "oae_he_ad") return Pathway::kOaeHeAd;
  if (s == "qlearning") return Pathway::kQLearning;
  if (s == "dqn") return Pathway::kDqn;
  throw ConfigError("unknown pathway '" + std::string(s) +
                    "' (he_ad, pg, oae_ad, oae_he_ad, qlearning, dqn)");
}

std::string_view to_string(Pathway p) {
  switch (p) {
    case Pathway::kHeAd: return "he_ad";
    case Pathway::kPg: return "pg";
    case Pathway::kOaeAd: return "oae_ad";
    case Pathway::kOaeHeAd: return "oae_he_ad";
    case Pathway::kQLearning: return "qlearning";
    case Pathway::kDqn: return "dqn";
  }
  return "?";
}

bool uses_oae(Pathway p) { return p == Pathway::kOaeAd || p == Pathway::kOaeHeAd; }

std::string pathway_label(Pathway p, SuffixMode mode) {
  const std::string prefix = mode == SuffixMode::kOneStep ? "O-OAE" : "M-OAE";
  switch (p) {
    case Pathway::kHeAd: return "HE+AD(PG)";
    case Pathway::kPg: return "PG";
    case Pathway::kOaeAd: return prefix + "+AD";
    case Pathway::kOaeHeAd: return prefix + "+HE+AD";
    case Pathway::kQLearning: return "Q-learning";
    case Pathway::kDqn: return "HE+AD(DQN)";
  }
  return "?";
}

namespace {

PolicyConfig policy_config_for(const AgentConfig& cfg) {
  PolicyConfig pc;
  pc.num_actions = cfg.num_actions;
  pc.hidden = cfg.hidden;
  pc.init_range = cfg.init_range;
  switch (cfg.pathway) {
    case Pathway::kHeAd:
      pc.encoders = EncoderSet::kHierarchical;
      break;
    case Pathway::kPg:
      pc.encoders = EncoderSet::kHistoryOnly;
      break;
    case Pathway::kOaeAd:
      pc.encoders = EncoderSet::kNone;
      pc.estimate_input = true;
      break;
    case Pathway::kOaeHeAd:
      pc.encoders = EncoderSet::kHierarchical;
      pc.estimate_input = true;
      break;
    default:
      throw ConfigError("pathway " + std::string(to_string(cfg.pathway)) +
                        " is not a policy-gradient pathway");
  }
  return pc;
}

std::vector<JointAction> pairs_of(const ObservedHistory& view) {
  std::vector<JointAction> out;
  out.reserve(view.own.size());
  for (std::size_t i = 0; i < view.own.size(); ++i) out.push_back({view.own[i], view.other[i]});
  return out;
}

}  // namespace

PolicyGradientAgent::PolicyGradientAgent(const AgentConfig& cfg, Rng& init_rng,
                                         std::shared_ptr<const OpponentActionEstimator> oae,
                                         std::shared_ptr<PastMemory> memory)
    : cfg_(cfg),
      net_(policy_config_for(cfg), store_),
      opt_(cfg.optimizer),
      oae_(std::move(oae)),
      memory_(std::move(memory)) {
  store_.init_uniform(init_rng, cfg.init_range);
  if (uses_oae(cfg.pathway)) {
    if (!oae_) throw ConfigError("pathway " + std::string(to_string(cfg.pathway)) + " needs an OAE");
    if (!memory_) throw ConfigError("pathway " + std::string(to_string(cfg.pathway)) + " needs a memory");
    if (!oae_->frozen()) throw ConfigError("OAE must be trained and frozen before policy training");
    if (oae_->config().hidden != cfg.hidden) {
      throw ConfigError("OAE hidden size " + std::to_string(oae_->config().hidden) +
                        " differs from policy hidden size " + std::to_string(cfg.hidden));
    }
    if (oae_->config().num_actions != cfg.num_actions) {
      throw ConfigError("OAE action count differs from the game's");
    }
    runtime_.emplace(oae_, memory_);
  }
}

void PolicyGradientAgent::begin_game(bool training) {
  training_ = training;
  history_.clear();
  if (training) {
    trace_ = std::make_unique<EpisodeTrace>();
    trace_->state = net_.begin(trace_->graph);
    eval_graph_.reset();
  } else {
    trace_.reset();
    eval_graph_ = std::make_unique<Graph>(false);
    eval_state_ = net_.begin(*eval_graph_);
  }
  if (runtime_) runtime_->begin_game();
}

void PolicyGradientAgent::sync(const ObservedHistory& view) {
  Graph& g = training_ ? trace_->graph : *eval_graph_;
  EncoderState& st = training_ ? trace_->state : eval_state_;
  while (history_.size() < static_cast<int>(view.own.size())) {
    const auto i = static_cast<std::size_t>(history_.size());
    const JointAction j{view.own[i], view.other[i]};
    history_.push(j);
    net_.observe(g, st, j);
    if (runtime_) runtime_->observe(j);
  }
}

Action PolicyGradientAgent::act(const ObservedHistory& view, Rng& rng) {
  if (training_ ? !trace_ : !eval_graph_) throw SequencingError("act before begin_game");
  sync(view);
  Graph& g = training_ ? trace_->graph : *eval_graph_;
  const EncoderState& st = training_ ? trace_->state : eval_state_;
  std::optional<Var> ex;
  if (runtime_) ex = nn::input(g, runtime_->estimate(history_));
  Var logits = net_.logits(g, net_.combine(g, st, ex));
  return decode_action(g, logits, training_ ? DecodeMode::kSample : DecodeMode::kGreedy, rng,
                       training_ ? trace_.get() : nullptr);
}

void PolicyGradientAgent::end_game(const GameRecord& rec, Rng&) {
  if (!training_) {
    eval_graph_.reset();
    return;
  }
  if (!trace_) throw SequencingError("end_game before begin_game");
  trace_->delta_R = rec.delta_R;
  const double b = cfg_.moving_baseline && games_ > 0 ? baseline_ : 0.0;
  reinforce_update(*trace_, store_, opt_, b);
  if (cfg_.moving_baseline) {
    baseline_ = games_ == 0 ? rec.delta_R
                            : cfg_.baseline_decay * baseline_ + (1.0 - cfg_.baseline_decay) * rec.delta_R;
  }
  ++games_;
  trace_.reset();
  if (memory_) {
    if (auto evicted = memory_->insert(rec); evicted && runtime_) runtime_->forget(evicted->serial);
  }
}

std::string PolicyGradientAgent::checkpoint() const {
  std::map<std::string, std::string> meta = {
      {"kind", "agent"},
      {"pathway", std::string(to_string(cfg_.pathway))},
      {"hidden", std::to_string(cfg_.hidden)},
      {"actions", std::to_string(cfg_.num_actions)}};
  if (oae_) meta["oae_hash"] = std::to_string(nn::fnv1a(oae_->checkpoint()));
  return nn::checkpoint_string(store_, meta);
}

void PolicyGradientAgent::restore(const std::string& text) {
  std::istringstream in(text);
  const auto ck = nn::read_checkpoint(in);
  if (ck.meta_at("kind") != "agent" || ck.meta_at("pathway") != to_string(cfg_.pathway)) {
    throw FormatError("checkpoint is not a " + std::string(to_string(cfg_.pathway)) + " agent");
  }
  if (oae_ && ck.meta_at("oae_hash") != std::to_string(nn::fnv1a(oae_->checkpoint()))) {
    throw FormatError("agent checkpoint was trained with a different OAE");
  }
  nn::load_into(store_, ck);
}

QLearningAgent::QLearningAgent(const AgentConfig& cfg) : table_(cfg.num_actions, cfg.qlearning) {}

Action QLearningAgent::act(const ObservedHistory& view, Rng& rng) {
  const auto pairs = pairs_of(view);
  const int state = table_.state_index(pairs);
  if (training_ && uniform01(rng) < table_.config().epsilon) {
    return Action{static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(table_.num_actions())))};
  }
  return table_.greedy(state);
}

void QLearningAgent::end_game(const GameRecord& rec, Rng&) {
  if (!training_) return;
  const auto pairs = joint_actions(rec);
  const std::span<const JointAction> all(pairs);
  const auto n = pairs.size();
  for (std::size_t t = 0; t < n; ++t) {
    const int s = table_.state_index(all.first(t));
    const int next = table_.state_index(all.first(t + 1));
    table_.qlearning_step(s, rec.outcomes[t].learner, rec.outcomes[t].r_learner, next, t + 1 == n);
  }
}

void QLearningAgent::restore(const std::string& text) {
  QTable t = QTable::parse(text, table_.config());
  if (t.num_actions() != table_.num_actions()) throw FormatError("Q-table action count mismatch");
  table_ = std::move(t);
}

DqnAgent::DqnAgent(const AgentConfig& cfg, Rng& init_rng)
    : learner_(cfg.dqn, cfg.num_actions, cfg.hidden, init_rng, cfg.init_range) {}

void DqnAgent::begin_game(bool training) {
  training_ = training;
  graph_ = std::make_unique<Graph>(false);
  state_ = learner_.online_net().begin(*graph_);
  seen_ = 0;
}

Action DqnAgent::act(const ObservedHistory& view, Rng& rng) {
  if (!graph_) throw SequencingError("act before begin_game");
  const auto& net = learner_.online_net();
  while (seen_ < static_cast<int>(view.own.size())) {
    const auto i = static_cast<std::size_t>(seen_);
    net.observe(*graph_, state_, {view.own[i], view.other[i]});
    ++seen_;
  }
  if (training_) {
    const double eps = learner_.epsilon(acting_steps_++);
    if (uniform01(rng) < eps) {
      return Action{static_cast<int>(
          uniform_index(rng, static_cast<std::uint64_t>(net.config().num_actions)))};
    }
  }
  Var q = net.logits(*graph_, net.combine(*graph_, state_, std::nullopt));
  return greedy_action(graph_->value(q));
}

void DqnAgent::end_game(const GameRecord& rec, Rng& rng) {
  graph_.reset();
  if (!training_) return;
  const auto pairs = joint_actions(rec);
  const auto n = pairs.size();
  for (std::size_t t = 0; t < n; ++t) {
    Transition tr;
    tr.prefix.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(t));
    tr.action = rec.outcomes[t].learner;
    tr.reward = rec.outcomes[t].r_learner;
    tr.next_prefix.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(t + 1));
    tr.done = t + 1 == n;
    learner_.dqn_step(std::move(tr), rng);
  }
}

std::string DqnAgent::checkpoint() const {
  return nn::checkpoint_string(learner_.online_store(),
                               {{"kind", "agent"}, {"pathway", "dqn"}});
}

void DqnAgent::restore(const std::string& text) {
  std::istringstream in(text);
  const auto ck = nn::read_checkpoint(in);
  if (ck.meta_at("kind") != "agent" || ck.meta_at("pathway") != "dqn") {
    throw FormatError("checkpoint is not a dqn agent");
  }
  nn::load_into(learner_.online_store(), ck);
  learner_.sync_target();
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, Rng& init_rng,
                                  std::shared_ptr<const OpponentActionEstimator> oae,
                                  std::shared_ptr<PastMemory> memory) {
  switch (cfg.pathway) {
    case Pathway::kQLearning:
      return std::make_unique<QLearningAgent>(cfg);
    case Pathway::kDqn:
      return std::make_unique<DqnAgent>(cfg, init_rng);
    default:
      return std::make_unique<PolicyGradientAgent>(cfg, init_rng, std::move(oae), std::move(memory));
  }
}

}  // namespace f3
