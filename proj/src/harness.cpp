#include "f3/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "f3/errors.hpp"

namespace f3 {
namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

OaeTarget oae_target_from_string(const std::string& s) {
  if (s == "retrieved") return OaeTarget::kRetrieved;
  if (s == "true_future") return OaeTarget::kTrueFuture;
  throw ConfigError("unknown oae_target '" + s + "' (retrieved, true_future)");
}

std::string oae_target_name(OaeTarget t) {
  return t == OaeTarget::kRetrieved ? "retrieved" : "true_future";
}

PoolSide pool_side_from_string(std::string_view s) {
  if (s == "old") return PoolSide::kOld;
  if (s == "new") return PoolSide::kNew;
  throw FormatError("unknown pool '" + std::string(s) + "'");
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  j["game"] = cfg.game;
  j["pool_file"] = cfg.pool_file;
  j["pool"] = {{"old", cfg.pool.old_ids}, {"new", cfg.pool.new_ids}};
  j["pathway"] = std::string(to_string(cfg.pathway));
  j["oae_mode"] = std::string(to_string(cfg.oae_mode));
  j["oae_target"] = oae_target_name(cfg.oae_target);
  j["turns"] = cfg.turns;
  j["epochs"] = cfg.epochs;
  j["eval_every"] = cfg.eval_every;
  j["eval_games"] = cfg.eval_games;
  j["seeds"] = cfg.seeds;
  j["memory_capacity"] = cfg.memory_capacity;
  j["memory_games"] = cfg.memory_games;
  j["populate"] = cfg.populate;
  j["populate_agent"] = cfg.populate_agent;
  j["top_k"] = cfg.top_k;
  j["hidden"] = cfg.hidden;
  j["hops"] = cfg.hops;
  j["policy_lr"] = cfg.policy_lr;
  j["oae_lr"] = cfg.oae_lr;
  j["oae_steps"] = cfg.oae_steps;
  j["moving_baseline"] = cfg.moving_baseline;
  j["dqn_learn_every"] = cfg.dqn_learn_every;
  j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig config_from(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  bool explicit_pool = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "game") cfg.game = get_as<std::string>(v, key);
    else if (key == "pool_file") cfg.pool_file = get_as<std::string>(v, key);
    else if (key == "pool") {
      cfg.pool = parse_pool(v.dump());
      explicit_pool = true;
    } else if (key == "pathway") cfg.pathway = pathway_from_string(get_as<std::string>(v, key));
    else if (key == "oae_mode") cfg.oae_mode = suffix_mode_from_string(get_as<std::string>(v, key));
    else if (key == "oae_target") cfg.oae_target = oae_target_from_string(get_as<std::string>(v, key));
    else if (key == "turns") cfg.turns = get_as<int>(v, key);
    else if (key == "epochs") cfg.epochs = get_as<long>(v, key);
    else if (key == "eval_every") cfg.eval_every = get_as<long>(v, key);
    else if (key == "eval_games") cfg.eval_games = get_as<int>(v, key);
    else if (key == "seeds") {
      if (v.is_number_unsigned()) cfg.seeds = {v.get<std::uint64_t>()};
      else cfg.seeds = get_as<std::vector<std::uint64_t>>(v, key);
    } else if (key == "memory_capacity") cfg.memory_capacity = get_as<std::size_t>(v, key);
    else if (key == "memory_games") cfg.memory_games = get_as<std::size_t>(v, key);
    else if (key == "populate") cfg.populate = get_as<std::string>(v, key);
    else if (key == "populate_agent") cfg.populate_agent = get_as<std::string>(v, key);
    else if (key == "top_k") cfg.top_k = get_as<int>(v, key);
    else if (key == "hidden") cfg.hidden = get_as<int>(v, key);
    else if (key == "hops") cfg.hops = get_as<int>(v, key);
    else if (key == "policy_lr") cfg.policy_lr = get_as<double>(v, key);
    else if (key == "oae_lr") cfg.oae_lr = get_as<double>(v, key);
    else if (key == "oae_steps") cfg.oae_steps = get_as<int>(v, key);
    else if (key == "moving_baseline") cfg.moving_baseline = get_as<bool>(v, key);
    else if (key == "dqn_learn_every") cfg.dqn_learn_every = get_as<int>(v, key);
    else if (key == "output_dir") cfg.output_dir = get_as<std::string>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  if (!cfg.pool_file.empty()) {
    // A resolved config carries both; they must then agree.
    StrategyPool from_file = load_pool_file(cfg.pool_file);
    if (explicit_pool && (from_file.old_ids != cfg.pool.old_ids || from_file.new_ids != cfg.pool.new_ids)) {
      throw ConfigError("config pool differs from the contents of pool_file");
    }
    cfg.pool = std::move(from_file);
  }
  return cfg;
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

constexpr const char* kTsvHeader = "pathway\tpool\tmean_delta_r\tstderr\tgames\tseed\tepoch\tgame\tvariant";

PlayerFn random_player(int num_actions, Rng& rng) {
  return [num_actions, &rng](const ObservedHistory&) {
    return Action{static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(num_actions)))};
  };
}

PlayerFn agent_player(Agent& agent, Rng& rng) {
  return [&agent, &rng](const ObservedHistory& v) { return agent.act(v, rng); };
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from(j);
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json j = config_json(cfg);
  if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  j[key] = value;
  // An overridden pool file wins over the pools already loaded.
  if (key == "pool_file") j.erase("pool");
  if (key == "pool") j["pool_file"] = "";
  cfg = config_from(j);
}

void validate_config(const ExperimentConfig& cfg) {
  PayoffMatrix game = [&] {
    try {
      return resolve_game(cfg.game);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("game '" + cfg.game + "' is not resolvable: " + e.what());
    }
  }();
  if (game.num_actions() != 2) {
    throw ConfigError("the strategy library plays two-action games only");
  }
  try {
    validate_pool(cfg.pool);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (cfg.turns < 2) throw ConfigError("turns must be at least 2");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be positive");
  if (cfg.eval_games < 1) throw ConfigError("eval_games must be positive");
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  if (cfg.memory_capacity < 1) throw ConfigError("memory_capacity must be positive");
  if (cfg.memory_games > cfg.memory_capacity) {
    throw ConfigError("memory_games exceeds memory_capacity");
  }
  if (cfg.populate != "random" && cfg.populate != "from-checkpoint") {
    throw ConfigError("populate must be 'random' or 'from-checkpoint'");
  }
  if (cfg.populate == "from-checkpoint" && cfg.populate_agent.empty()) {
    throw ConfigError("populate from-checkpoint needs populate_agent");
  }
  if (cfg.top_k < 1) throw ConfigError("top_k must be positive");
  if (cfg.hidden < 1) throw ConfigError("hidden must be positive");
  if (cfg.hops < 1) throw ConfigError("hops must be positive");
  if (!(cfg.policy_lr > 0.0) || !(cfg.oae_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (cfg.oae_steps < 1) throw ConfigError("oae_steps must be positive");
  if (cfg.dqn_learn_every < 1) throw ConfigError("dqn_learn_every must be positive");
  if (uses_oae(cfg.pathway) && cfg.memory_games < 2) {
    throw ConfigError("OAE pathways need at least two memory games");
  }
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view purpose) {
  return derive_seed(seed, purpose);
}

std::shared_ptr<PastMemory> populate_memory(const ExperimentConfig& cfg, Rng& rng) {
  const PayoffMatrix game = resolve_game(cfg.game);
  auto memory = std::make_shared<PastMemory>(cfg.memory_capacity);
  const GameConfig gc{game.name(), cfg.turns, 0};
  const PlayerFn learner = random_player(game.num_actions(), rng);
  while (memory->size() < cfg.memory_games) {
    auto opp = sample_opponent(cfg.pool, PoolSide::kOld, rng);
    auto rec = play_repeated_game(gc, game, learner, as_player(*opp, rng), std::string(opp->id()));
    insert_with_eviction(*memory, std::move(rec));
  }
  return memory;
}

std::shared_ptr<PastMemory> populate_memory_with(const ExperimentConfig& cfg, Agent& agent,
                                                 Rng& rng) {
  const PayoffMatrix game = resolve_game(cfg.game);
  auto memory = std::make_shared<PastMemory>(cfg.memory_capacity);
  const GameConfig gc{game.name(), cfg.turns, 0};
  const PlayerFn learner = agent_player(agent, rng);
  // Greedy play against deterministic opponents repeats itself, and a
  // duplicate with a lower ΔR can be the eviction victim, so cap the attempts.
  const std::size_t limit = 100 * cfg.memory_games + 100;
  for (std::size_t tries = 0; memory->size() < cfg.memory_games && tries < limit; ++tries) {
    auto opp = sample_opponent(cfg.pool, PoolSide::kOld, rng);
    agent.begin_game(false);
    auto rec = play_repeated_game(gc, game, learner, as_player(*opp, rng), std::string(opp->id()));
    agent.end_game(rec, rng);
    insert_with_eviction(*memory, std::move(rec));
  }
  return memory;
}

std::shared_ptr<OpponentActionEstimator> pretrain_oae(const ExperimentConfig& cfg,
                                                      const PastMemory& memory, Rng& rng,
                                                      OaeTrainReport* report) {
  const PayoffMatrix game = resolve_game(cfg.game);
  OaeConfig oc;
  oc.num_actions = game.num_actions();
  oc.hidden = cfg.hidden;
  oc.hops = cfg.hops;
  oc.top_k = cfg.top_k;
  oc.mode = cfg.oae_mode;
  oc.target = cfg.oae_target;
  auto oae = std::make_shared<OpponentActionEstimator>(oc, rng);
  oae->tags()["source_game"] = game.name();
  OaeTrainConfig tc;
  tc.steps = cfg.oae_steps;
  tc.optimizer.lr = cfg.oae_lr;
  auto rep = train_oae(*oae, memory, tc, rng);
  if (report) *report = std::move(rep);
  return oae;
}

AgentConfig agent_config(const ExperimentConfig& cfg, int num_actions) {
  AgentConfig ac;
  ac.pathway = cfg.pathway;
  ac.num_actions = num_actions;
  ac.hidden = cfg.hidden;
  ac.optimizer.lr = cfg.policy_lr;
  ac.moving_baseline = cfg.moving_baseline;
  ac.dqn.optimizer.lr = cfg.policy_lr;
  ac.dqn.learn_every = cfg.dqn_learn_every;
  return ac;
}

ResultRow evaluate(Agent& agent, const ExperimentConfig& cfg, PoolSide side, Rng& rng,
                   long epoch) {
  const PayoffMatrix game = resolve_game(cfg.game);
  const GameConfig gc{game.name(), cfg.turns, 0};
  const auto& ids = cfg.pool.side(side);
  if (ids.empty()) throw std::domain_error("evaluate: empty pool side");
  const PlayerFn learner = agent_player(agent, rng);
  std::vector<double> deltas;
  deltas.reserve(static_cast<std::size_t>(cfg.eval_games));
  for (int i = 0; i < cfg.eval_games; ++i) {
    const auto& id = ids[static_cast<std::size_t>(i) % ids.size()];
    auto opp = make_strategy(id);
    agent.begin_game(false);
    const auto rec = play_repeated_game(gc, game, learner, as_player(*opp, rng), id);
    agent.end_game(rec, rng);
    deltas.push_back(score_difference(rec));
  }
  ResultRow row;
  row.pathway = pathway_label(cfg.pathway, cfg.oae_mode);
  row.pool = side;
  row.games = cfg.eval_games;
  row.epoch = epoch;
  row.game = game.name();
  double sum = 0.0;
  for (double d : deltas) sum += d;
  row.mean_delta_r = sum / static_cast<double>(deltas.size());
  if (deltas.size() > 1) {
    double ss = 0.0;
    for (double d : deltas) ss += (d - row.mean_delta_r) * (d - row.mean_delta_r);
    const double n = static_cast<double>(deltas.size());
    row.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return row;
}

TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                            std::shared_ptr<const OpponentActionEstimator> oae,
                            std::shared_ptr<PastMemory> memory, const RowSink& sink) {
  validate_config(cfg);
  const PayoffMatrix game = resolve_game(cfg.game);
  if (uses_oae(cfg.pathway)) {
    if (!oae) throw ConfigError("pathway " + std::string(to_string(cfg.pathway)) + " needs a pre-trained OAE");
    if (!memory) throw ConfigError("pathway " + std::string(to_string(cfg.pathway)) + " needs a memory");
    if (oae->config().num_actions != game.num_actions()) {
      throw ConfigError("OAE action count differs from the game's");
    }
  }
  Rng init_rng(stream_seed(seed, "init"));
  Rng train_rng(stream_seed(seed, "train"));
  const std::uint64_t eval_base = stream_seed(seed, "eval");

  TrainingResult out;
  out.oae = oae;
  out.memory = memory;
  out.agent = make_agent(agent_config(cfg, game.num_actions()), init_rng,
                         uses_oae(cfg.pathway) ? oae : nullptr,
                         uses_oae(cfg.pathway) ? memory : nullptr);
  Agent& agent = *out.agent;

  const auto eval_block = [&](long epoch) {
    for (PoolSide side : {PoolSide::kOld, PoolSide::kNew}) {
      Rng eval_rng(derive_seed(eval_base, std::to_string(epoch) + "/" + std::string(to_string(side))));
      ResultRow row = evaluate(agent, cfg, side, eval_rng, epoch);
      row.seed = seed;
      if (sink) sink(row);
      out.rows.push_back(std::move(row));
    }
  };

  const GameConfig gc{game.name(), cfg.turns, seed};
  const PlayerFn learner = agent_player(agent, train_rng);
  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto opp = sample_opponent(cfg.pool, PoolSide::kOld, train_rng);
    agent.begin_game(true);
    const auto rec =
        play_repeated_game(gc, game, learner, as_player(*opp, train_rng), std::string(opp->id()));
    agent.end_game(rec, train_rng);
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) eval_block(epoch);
  }
  if (cfg.epochs == 0) eval_block(0);
  return out;
}

TrainingResult run_cell(const ExperimentConfig& cfg, std::uint64_t seed, const RowSink& sink) {
  validate_config(cfg);
  std::shared_ptr<PastMemory> memory;
  std::shared_ptr<const OpponentActionEstimator> oae;
  if (uses_oae(cfg.pathway)) {
    Rng memory_rng(stream_seed(seed, "memory"));
    if (cfg.populate == "from-checkpoint") {
      std::istringstream in(read_text_file(cfg.populate_agent));
      const auto ck = nn::read_checkpoint(in);
      const Pathway p = pathway_from_string(ck.meta_at("pathway"));
      if (uses_oae(p)) throw ConfigError("from-checkpoint population needs an agent without an OAE");
      ExperimentConfig pc = cfg;
      pc.pathway = p;
      pc.hidden = std::stoi(ck.meta_at("hidden"));
      Rng init_rng(stream_seed(seed, "populate-init"));
      auto agent = make_agent(agent_config(pc, resolve_game(cfg.game).num_actions()), init_rng);
      agent->restore(read_text_file(cfg.populate_agent));
      memory = populate_memory_with(cfg, *agent, memory_rng);
    } else {
      memory = populate_memory(cfg, memory_rng);
    }
    Rng oae_rng(stream_seed(seed, "oae"));
    oae = pretrain_oae(cfg, *memory, oae_rng);
  }
  return run_training(cfg, seed, oae, memory, sink);
}

TransferResult run_transfer(const ExperimentConfig& source, const ExperimentConfig& target,
                            std::uint64_t seed,
                            std::shared_ptr<const OpponentActionEstimator> source_oae) {
  validate_config(source);
  validate_config(target);
  if (!uses_oae(target.pathway)) throw ConfigError("transfer needs an OAE pathway");
  const PayoffMatrix src_game = resolve_game(source.game);
  const PayoffMatrix dst_game = resolve_game(target.game);
  if (src_game.num_actions() != dst_game.num_actions()) {
    throw ConfigError("cannot reuse an OAE across games with " +
                      std::to_string(src_game.num_actions()) + " and " +
                      std::to_string(dst_game.num_actions()) + " actions");
  }
  if (!source_oae) {
    Rng memory_rng(stream_seed(seed, "source-memory"));
    const auto src_memory = populate_memory(source, memory_rng);
    Rng oae_rng(stream_seed(seed, "source-oae"));
    source_oae = pretrain_oae(source, *src_memory, oae_rng);
  }
  if (source_oae->config().num_actions != dst_game.num_actions()) {
    throw ConfigError("source OAE action count differs from the target game's");
  }
  if (source_oae->config().hidden != target.hidden || source_oae->config().mode != target.oae_mode) {
    throw ConfigError("source OAE shape or mode differs from the target configuration");
  }

  Rng memory_rng(stream_seed(seed, "memory"));
  const auto memory = populate_memory(target, memory_rng);
  Rng oae_rng(stream_seed(seed, "oae"));
  std::shared_ptr<const OpponentActionEstimator> target_oae = pretrain_oae(target, *memory, oae_rng);

  TransferResult out;
  out.source_oae_hash = nn::fnv1a(source_oae->checkpoint());
  out.target_oae_hash = nn::fnv1a(target_oae->checkpoint());
  auto fresh = run_training(target, seed, target_oae, std::make_shared<PastMemory>(*memory));
  auto reused = run_training(target, seed, source_oae, std::make_shared<PastMemory>(*memory));
  out.reused_oae_hash = nn::fnv1a(reused.oae->checkpoint());
  for (auto& r : fresh.rows) r.variant = "new_trained";
  for (auto& r : reused.rows) r.variant = "reused";
  out.new_trained = std::move(fresh.rows);
  out.reused = std::move(reused.rows);
  return out;
}

std::string results_tsv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kTsvHeader << '\n';
  for (const auto& r : rows) {
    if (r.pathway.find_first_of("\t\n") != std::string::npos ||
        r.game.find_first_of("\t\n") != std::string::npos ||
        r.variant.find_first_of("\t\n") != std::string::npos) {
      throw FormatError("result field contains a tab or newline");
    }
    out << r.pathway << '\t' << to_string(r.pool) << '\t' << format_real(r.mean_delta_r) << '\t'
        << format_real(r.stderr_) << '\t' << r.games << '\t' << r.seed << '\t' << r.epoch << '\t'
        << r.game << '\t' << (r.variant.empty() ? "-" : r.variant) << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parse_results_tsv(std::string_view text) {
  std::vector<ResultRow> rows;
  std::size_t pos = 0;
  bool header = true;
  int line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      if (line != kTsvHeader) throw FormatError("results table has an unexpected header");
      header = false;
      continue;
    }
    const auto f = split_tabs(line);
    if (f.size() != 9) {
      throw FormatError("results line " + std::to_string(line_no) + " has " +
                        std::to_string(f.size()) + " fields");
    }
    ResultRow r;
    try {
      r.pathway = f[0];
      r.pool = pool_side_from_string(f[1]);
      r.mean_delta_r = std::stod(f[2]);
      r.stderr_ = std::stod(f[3]);
      r.games = std::stoi(f[4]);
      r.seed = std::stoull(f[5]);
      r.epoch = std::stol(f[6]);
      r.game = f[7];
      r.variant = f[8] == "-" ? "" : f[8];
    } catch (const std::logic_error&) {
      throw FormatError("results line " + std::to_string(line_no) + " is malformed");
    }
    rows.push_back(std::move(r));
  }
  if (header) throw FormatError("results table is empty");
  return rows;
}

std::vector<ResultRow> final_rows(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string, int, std::uint64_t>;
  std::map<Key, const ResultRow*> last;
  for (const auto& r : rows) {
    const Key k{r.game, r.pathway, r.variant, static_cast<int>(r.pool), r.seed};
    auto [it, inserted] = last.emplace(k, &r);
    if (!inserted && r.epoch >= it->second->epoch) it->second = &r;
  }
  std::vector<ResultRow> out;
  for (const auto& r : rows) {
    const Key k{r.game, r.pathway, r.variant, static_cast<int>(r.pool), r.seed};
    if (last.at(k) == &r) out.push_back(r);
  }
  return out;
}

double final_mean(const std::vector<ResultRow>& rows, const std::string& pathway, PoolSide pool,
                  const std::string& variant, const std::string& game) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : final_rows(rows)) {
    if (r.pathway != pathway || r.pool != pool) continue;
    if (!variant.empty() && r.variant != variant) continue;
    if (!game.empty() && r.game != game) continue;
    sum += r.mean_delta_r;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

std::string results_summary(const std::vector<ResultRow>& rows) {
  json tables = json::object();
  for (const auto& r : final_rows(rows)) {
    const std::string label = r.variant.empty() ? r.pathway : r.pathway + "/" + r.variant;
    auto& cell = tables[r.game][label][std::string(to_string(r.pool))];
    cell["seeds"].push_back({{"seed", r.seed},
                             {"epoch", r.epoch},
                             {"mean_delta_r", r.mean_delta_r},
                             {"stderr", r.stderr_},
                             {"games", r.games}});
  }
  for (auto& [game, models] : tables.items()) {
    for (auto& [label, pools] : models.items()) {
      for (auto& [pool, cell] : pools.items()) {
        double sum = 0.0;
        for (const auto& s : cell["seeds"]) sum += s["mean_delta_r"].get<double>();
        cell["mean_delta_r"] = sum / static_cast<double>(cell["seeds"].size());
      }
    }
  }
  json summary;
  summary["columns"] = {"pathway", "pool", "mean_delta_r", "stderr", "games", "seed", "epoch",
                        "game", "variant"};
  summary["tables"] = tables;
  return summary.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit_results(const std::vector<ResultRow>& rows, const std::string& dir) {
  if (rows.empty()) throw std::invalid_argument("emit_results: no rows");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  write_text_file((std::filesystem::path(dir) / "results.tsv").string(), results_tsv(rows));
  write_text_file((std::filesystem::path(dir) / "summary.json").string(), results_summary(rows));
}

}  // namespace f3
