#include "f3/oae.hpp"

#include <numeric>
#include <sstream>

#include "f3/features.hpp"

namespace f3 {
namespace {

std::string target_name(OaeTarget t) {
  return t == OaeTarget::kRetrieved ? "retrieved" : "true_future";
}

OaeTarget target_from_name(const std::string& s) {
  if (s == "retrieved") return OaeTarget::kRetrieved;
  if (s == "true_future") return OaeTarget::kTrueFuture;
  throw ConfigError("unknown OAE target '" + s + "'");
}

std::vector<JointAction> prefix_pairs(const GameRecord& rec, int m) {
  std::vector<JointAction> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& o = rec.outcomes[static_cast<std::size_t>(i)];
    out.push_back({o.learner, o.opponent});
  }
  return out;
}

}  // namespace

OpponentActionEstimator::OpponentActionEstimator(const OaeConfig& cfg) : cfg_(cfg) {
  if (cfg.hidden < 1 || cfg.hops < 0 || cfg.top_k < 1 || cfg.num_actions < 2) {
    throw ConfigError("invalid OAE configuration");
  }
  const Eigen::Index s = cfg.num_actions;
  const Eigen::Index d = cfg.hidden;
  const Eigen::Index joint_in = 2 * s + 1;
  estimate_.hops = cfg.hops;
  estimate_.query = nn::LstmCell<double>::create(store_, "estimate.query", joint_in, d);
  for (int j = 0; j <= cfg.hops; ++j) {
    estimate_.embeddings.push_back(nn::LstmCell<double>::create(
        store_, "estimate.embedding" + std::to_string(j), joint_in, d));
  }
  estimate_.projection =
      nn::Feedforward<double>::create(store_, "estimate.projection", {d, d});
  fusion_.encoder = nn::LstmCell<double>::create(store_, "fusion.encoder", s, d);
  fusion_.head = nn::Feedforward<double>::create(store_, "fusion.head", {d, d, d});
  tags_["mode"] = std::string(to_string(cfg.mode));
}

OpponentActionEstimator::OpponentActionEstimator(const OaeConfig& cfg, Rng& rng)
    : OpponentActionEstimator(cfg) {
  store_.init_uniform(rng, cfg.init_range);
}

std::map<std::string, std::string> OpponentActionEstimator::checkpoint_meta() const {
  auto meta = tags_;
  meta["kind"] = "oae";
  meta["mode"] = std::string(to_string(cfg_.mode));
  meta["target"] = target_name(cfg_.target);
  meta["hidden"] = std::to_string(cfg_.hidden);
  meta["hops"] = std::to_string(cfg_.hops);
  meta["top_k"] = std::to_string(cfg_.top_k);
  meta["actions"] = std::to_string(cfg_.num_actions);
  meta["frozen"] = frozen_ ? "1" : "0";
  return meta;
}

std::string OpponentActionEstimator::checkpoint() const {
  return nn::checkpoint_string(store_, checkpoint_meta());
}

std::unique_ptr<OpponentActionEstimator> OpponentActionEstimator::from_checkpoint(
    const nn::Checkpoint& ck) {
  if (ck.meta_at("kind") != "oae") throw FormatError("checkpoint is not an OAE");
  OaeConfig cfg;
  cfg.mode = suffix_mode_from_string(ck.meta_at("mode"));
  cfg.target = target_from_name(ck.meta_at("target"));
  cfg.hidden = std::stoi(ck.meta_at("hidden"));
  cfg.hops = std::stoi(ck.meta_at("hops"));
  cfg.top_k = std::stoi(ck.meta_at("top_k"));
  cfg.num_actions = std::stoi(ck.meta_at("actions"));
  std::unique_ptr<OpponentActionEstimator> oae(new OpponentActionEstimator(cfg));
  nn::load_into(oae->store_, ck);
  const auto frozen = ck.meta.find("frozen");
  oae->frozen_ = frozen != ck.meta.end() && frozen->second == "1";
  for (const auto& [k, v] : ck.meta) {
    if (k != "kind" && k != "frozen") oae->tags_[k] = v;
  }
  return oae;
}

void OpponentActionEstimator::check_recording(const Graph& g) const {
  if (frozen_ && g.recording()) {
    throw TrainingError("OAE is frozen; evaluate it on a non-recording graph");
  }
}

std::vector<Var> joint_step_inputs(Graph& g, std::span<const JointAction> pairs, int s) {
  std::vector<Var> steps;
  steps.reserve(pairs.size() + 1);
  steps.push_back(nn::input(g, start_token(2 * s + 1)));
  for (const auto& p : pairs) steps.push_back(nn::input(g, joint_step(p.learner, p.opponent, s)));
  return steps;
}

Var OpponentActionEstimator::estimate_from_encodings(
    Graph& g, Var query_encoding, const std::vector<std::vector<Var>>& keys_values) const {
  Var u = query_encoding;
  const bool have_records = !keys_values.empty() && !keys_values[0].empty();
  if (have_records) {
    for (int hop = 1; hop <= estimate_.hops; ++hop) {
      const auto& keys = keys_values[static_cast<std::size_t>(hop - 1)];
      const auto& values = keys_values[static_cast<std::size_t>(hop)];
      Var p = nn::attention_weights(g, u, std::span<const Var>(keys));
      Var o = nn::weighted_sum(g, p, std::span<const Var>(values));
      u = nn::add(g, u, o);
    }
  }
  return nn::feedforward_apply(g, estimate_.projection, u);
}

Var OpponentActionEstimator::estimate(Graph& g, const CurrentHistory& c,
                                      std::span<const GameRecord* const> sim) const {
  check_recording(g);
  const int s = cfg_.num_actions;
  const int m = c.size();
  auto query_steps = joint_step_inputs(g, c.pairs(), s);
  Var q = nn::encode_sequence(g, estimate_.query, std::span<const Var>(query_steps));

  std::vector<std::vector<Var>> encoded(estimate_.embeddings.size());
  for (const GameRecord* rec : sim) {
    if (rec->length() < m) {
      throw std::domain_error("estimate: retrieved record shorter than history");
    }
    const auto pairs = prefix_pairs(*rec, m);
    auto steps = joint_step_inputs(g, pairs, s);
    for (std::size_t j = 0; j < estimate_.embeddings.size(); ++j) {
      encoded[j].push_back(
          nn::encode_sequence(g, estimate_.embeddings[j], std::span<const Var>(steps)));
    }
  }
  return estimate_from_encodings(g, q, encoded);
}

Var OpponentActionEstimator::fuse_targets(
    Graph& g, const std::vector<std::vector<Action>>& suffix_sets) const {
  check_recording(g);
  if (suffix_sets.empty()) throw std::domain_error("fuse_targets: no suffix sets");
  std::vector<Var> encoded;
  encoded.reserve(suffix_sets.size());
  for (const auto& set : suffix_sets) {
    if (set.empty()) throw std::domain_error("fuse_targets: empty suffix set");
    std::vector<Var> steps;
    steps.reserve(set.size());
    for (Action a : set) steps.push_back(nn::input(g, action_one_hot(a, cfg_.num_actions)));
    encoded.push_back(nn::encode_sequence(g, fusion_.encoder, std::span<const Var>(steps)));
  }
  Var pooled = encoded.size() == 1 ? encoded[0] : nn::mean(g, std::span<const Var>(encoded));
  return nn::feedforward_apply(g, fusion_.head, pooled);
}

std::vector<std::vector<Action>> retrieved_suffixes(std::span<const GameRecord* const> sim,
                                                    int m, SuffixMode mode) {
  std::vector<std::vector<Action>> sets;
  sets.reserve(sim.size());
  for (const GameRecord* rec : sim) {
    sets.push_back(suffix_opponent_actions(split_at(*rec, m), mode));
  }
  return sets;
}

double OaeTrainReport::mean_first(std::size_t n) const {
  n = std::min(n, losses.size());
  if (n == 0) return 0.0;
  return std::accumulate(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n), 0.0) /
         static_cast<double>(n);
}

double OaeTrainReport::mean_last(std::size_t n) const {
  n = std::min(n, losses.size());
  if (n == 0) return 0.0;
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(n), losses.end(), 0.0) /
         static_cast<double>(n);
}

OaeTrainReport train_oae(OpponentActionEstimator& oae, const PastMemory& memory,
                         const OaeTrainConfig& cfg, Rng& rng) {
  if (oae.frozen()) throw TrainingError("train_oae: estimator already frozen");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < memory.size(); ++i) {
    if (memory[i].record.length() >= 2) eligible.push_back(i);
  }
  if (eligible.size() < 2) {
    throw TrainingError("train_oae: memory needs at least two splittable records, has " +
                        std::to_string(eligible.size()));
  }
  const auto& ocfg = oae.config();
  nn::Optimizer<double> opt(cfg.optimizer);
  OaeTrainReport report;
  report.losses.reserve(static_cast<std::size_t>(cfg.steps));
  oae.store().zero_grad();

  for (int step = 0; step < cfg.steps; ++step) {
    const auto& item = memory[eligible[uniform_index(rng, eligible.size())]];
    const int n = item.record.length();
    const int m = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 1)));
    const auto split = split_at(item.record, m);
    const auto c = CurrentHistory::from_pairs(split.prefix);
    const auto hits = top_k_similar(c, memory, ocfg.top_k, item.serial);
    std::vector<const GameRecord*> sim;
    sim.reserve(hits.size());
    for (const auto& h : hits) sim.push_back(&memory[h.record_ref].record);

    std::vector<std::vector<Action>> targets;
    if (ocfg.target == OaeTarget::kTrueFuture || sim.empty()) {
      targets.push_back(suffix_opponent_actions(split, ocfg.mode));
    } else {
      targets = retrieved_suffixes(sim, m, ocfg.mode);
    }

    Graph g;
    Var ex = oae.estimate(g, c, sim);
    Var ey = oae.fuse_targets(g, targets);
    Var loss = nn::l1_loss(g, ex, ey);
    report.losses.push_back(g.scalar(loss));
    g.backward(loss);
    opt.step(oae.store());
  }
  oae.freeze();
  return report;
}

OaeRuntime::OaeRuntime(std::shared_ptr<const OpponentActionEstimator> oae,
                       std::shared_ptr<const PastMemory> memory)
    : oae_(std::move(oae)), memory_(std::move(memory)) {
  begin_game();
}

void OaeRuntime::begin_game() {
  const auto& cell = oae_->estimate_net().query;
  Graph g(false);
  Var state = nn::lstm_zero_state(g, cell);
  Var x = nn::input(g, start_token(cell.input_dim));
  query_state_ = g.value(nn::lstm_step(g, cell, x, state));
  observed_ = 0;
  seen_.clear();
  matches_.assign(memory_ ? memory_->size() : 0, 0);
  memory_serial_ = memory_ ? memory_->next_serial() : 0;
}

void OaeRuntime::observe(const JointAction& stage) {
  const auto& cell = oae_->estimate_net().query;
  Graph g(false);
  Var state = nn::input(g, query_state_);
  Var x = nn::input(g, joint_step(stage.learner, stage.opponent, oae_->config().num_actions));
  query_state_ = g.value(nn::lstm_step(g, cell, x, state));
  if (memory_ && memory_->next_serial() != memory_serial_) {
    throw SequencingError("OaeRuntime: memory changed during a game");
  }
  const auto t = static_cast<std::size_t>(observed_);
  for (std::size_t i = 0; i < matches_.size(); ++i) {
    const auto& rec = (*memory_)[i].record;
    if (t < rec.outcomes.size()) {
      matches_[i] += rec.outcomes[t].learner == stage.learner && rec.outcomes[t].opponent == stage.opponent;
    }
  }
  seen_.push_back(stage);
  ++observed_;
}

const std::vector<Eigen::MatrixXd>& OaeRuntime::encodings(const StoredRecord& item) {
  auto it = cache_.find(item.serial);
  if (it != cache_.end()) return it->second;
  const auto& net = oae_->estimate_net();
  const int s = oae_->config().num_actions;
  const int n = item.record.length();
  const auto d = static_cast<Eigen::Index>(oae_->config().hidden);
  std::vector<Eigen::MatrixXd> per_embedding;
  per_embedding.reserve(net.embeddings.size());
  Graph g(false);
  auto steps = joint_step_inputs(g, joint_actions(item.record), s);
  for (const auto& cell : net.embeddings) {
    Eigen::MatrixXd h(d, n + 1);
    Var state = nn::lstm_zero_state(g, cell);
    for (int t = 0; t <= n; ++t) {
      state = nn::lstm_step(g, cell, steps[static_cast<std::size_t>(t)], state);
      h.col(t) = g.value(state).topRows(d);
    }
    per_embedding.push_back(std::move(h));
  }
  return cache_.emplace(item.serial, std::move(per_embedding)).first->second;
}

Eigen::MatrixXd OaeRuntime::estimate(const CurrentHistory& c) {
  if (c.size() != observed_) {
    throw SequencingError("OaeRuntime: history has " + std::to_string(c.size()) +
                          " stages, runtime observed " + std::to_string(observed_));
  }
  if (memory_ && memory_->next_serial() != memory_serial_) {
    throw SequencingError("OaeRuntime: memory changed during a game");
  }
  const auto d = static_cast<Eigen::Index>(oae_->config().hidden);
  Graph g(false);
  Var q = nn::input(g, Eigen::MatrixXd(query_state_.topRows(d)));
  std::vector<std::vector<Var>> encoded(oae_->estimate_net().embeddings.size());
  if (!c.empty() && memory_ && !memory_->empty()) {
    if (!std::equal(seen_.begin(), seen_.end(), c.pairs().begin(), c.pairs().end())) {
      throw SequencingError("OaeRuntime: history differs from the observed stages");
    }
    const auto hits = rank_by_matches(*memory_, matches_, c.size(), oae_->config().top_k);
    for (const auto& h : hits) {
      const auto& enc = encodings((*memory_)[h.record_ref]);
      for (std::size_t j = 0; j < enc.size(); ++j) {
        encoded[j].push_back(nn::input(g, Eigen::MatrixXd(enc[j].col(c.size()))));
      }
    }
  }
  return g.value(oae_->estimate_from_encodings(g, q, encoded));
}

}  // namespace f3
