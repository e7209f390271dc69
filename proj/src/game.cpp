#include "f3/game.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "f3/errors.hpp"

namespace f3 {

PayoffMatrix::PayoffMatrix(std::string name, std::vector<std::string> labels,
                           Eigen::MatrixXd row_rewards,
                           Eigen::MatrixXd col_rewards)
    : name_(std::move(name)),
      labels_(std::move(labels)),
      row_(std::move(row_rewards)),
      col_(std::move(col_rewards)) {
  const auto s = static_cast<Eigen::Index>(labels_.size());
  if (s == 0) throw ConfigError("game '" + name_ + "' has no actions");
  if (row_.rows() != s || row_.cols() != s || col_.rows() != s ||
      col_.cols() != s) {
    throw ConfigError("game '" + name_ + "' payoff table is not " +
                      std::to_string(s) + "x" + std::to_string(s));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    for (std::size_t j = i + 1; j < labels_.size(); ++j) {
      if (labels_[i] == labels_[j]) {
        throw ConfigError("game '" + name_ + "' repeats label " + labels_[i]);
      }
    }
  }
  if (!row_.allFinite() || !col_.allFinite()) {
    throw ConfigError("game '" + name_ + "' has non-finite payoffs");
  }
}

const PayoffMatrix& PayoffMatrix::prisoners_dilemma() {
  static const PayoffMatrix pd = [] {
    Eigen::MatrixXd row(2, 2), col(2, 2);
    row << 3, 0,
           5, 1;
    col << 3, 5,
           0, 1;
    return PayoffMatrix("PD", {"C", "D"}, row, col);
  }();
  return pd;
}

const PayoffMatrix& PayoffMatrix::chicken() {
  static const PayoffMatrix chicken = [] {
    Eigen::MatrixXd row(2, 2), col(2, 2);
    row << 2, 1,
           5, 0;
    col << 2, 5,
           1, 0;
    return PayoffMatrix("Chicken", {"S", "G"}, row, col);
  }();
  return chicken;
}

const std::string& PayoffMatrix::label(Action a) const {
  if (!valid(a)) {
    throw std::domain_error("action index " + std::to_string(a.index) +
                            " outside game " + name_);
  }
  return labels_[static_cast<std::size_t>(a.index)];
}

Action PayoffMatrix::action_from_label(std::string_view label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw std::domain_error("unknown action label '" + std::string(label) +
                            "' for game " + name_);
  }
  return Action{static_cast<int>(it - labels_.begin())};
}

std::pair<double, double> PayoffMatrix::lookup(Action row, Action col) const {
  if (!valid(row) || !valid(col)) {
    throw std::domain_error("action pair (" + std::to_string(row.index) + "," +
                            std::to_string(col.index) + ") outside game " +
                            name_);
  }
  return {row_(row.index, col.index), col_(row.index, col.index)};
}

std::pair<double, double> payoff_lookup(const PayoffMatrix& m, Action row,
                                        Action col) {
  return m.lookup(row, col);
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

const PayoffMatrix& builtin_game(std::string_view name) {
  const std::string key = lower(name);
  if (key == "pd" || key == "prisoners_dilemma" || key == "prisoner's dilemma")
    return PayoffMatrix::prisoners_dilemma();
  if (key == "chicken") return PayoffMatrix::chicken();
  throw ConfigError("unknown built-in game '" + std::string(name) + "'");
}

PayoffMatrix parse_game(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("game config: ") + e.what());
  }
  try {
    auto labels = j.at("actions").get<std::vector<std::string>>();
    const auto s = static_cast<Eigen::Index>(labels.size());
    if (s != 2) {
      throw ConfigError("game config: only two-action games are supported");
    }
    const auto& table = j.at("payoffs");
    if (!table.is_array() || static_cast<Eigen::Index>(table.size()) != s) {
      throw ConfigError("game config: payoffs must have one row per action");
    }
    Eigen::MatrixXd row(s, s), col(s, s);
    for (Eigen::Index i = 0; i < s; ++i) {
      const auto& r = table[static_cast<std::size_t>(i)];
      if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != s) {
        throw ConfigError("game config: payoff row " + std::to_string(i) +
                          " has the wrong number of cells");
      }
      for (Eigen::Index k = 0; k < s; ++k) {
        const auto cell = r[static_cast<std::size_t>(k)].get<std::vector<double>>();
        if (cell.size() != 2) {
          throw ConfigError("game config: payoff cell must be [row, col]");
        }
        row(i, k) = cell[0];
        col(i, k) = cell[1];
      }
    }
    return PayoffMatrix(j.at("name").get<std::string>(), std::move(labels), row,
                        col);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("game config: ") + e.what());
  }
}

PayoffMatrix load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open game file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_game(ss.str());
}

PayoffMatrix resolve_game(const std::string& name_or_path) {
  try {
    return builtin_game(name_or_path);
  } catch (const ConfigError&) {
    return load_game_file(name_or_path);
  }
}

StageOutcome play_stage(const PayoffMatrix& m, Action learner, Action opponent,
                        int turn) {
  if (turn < 1) throw std::domain_error("stage turn must be >= 1");
  const auto [rl, ro] = m.lookup(learner, opponent);
  return StageOutcome{turn, learner, opponent, rl, ro};
}

double average_reward(std::span<const double> rewards) {
  if (rewards.empty()) throw std::domain_error("average of empty reward list");
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum / static_cast<double>(rewards.size());
}

double score_difference(const GameRecord& rec) {
  return rec.R_learner - rec.R_opponent;
}

void finalize_scores(GameRecord& rec) {
  std::vector<double> rl, ro;
  rl.reserve(rec.outcomes.size());
  ro.reserve(rec.outcomes.size());
  for (const auto& o : rec.outcomes) {
    rl.push_back(o.r_learner);
    ro.push_back(o.r_opponent);
  }
  rec.R_learner = average_reward(rl);
  rec.R_opponent = average_reward(ro);
  rec.delta_R = rec.R_learner - rec.R_opponent;
}

GameRecord play_repeated_game(const GameConfig& cfg, const PayoffMatrix& game,
                              const PlayerFn& learner,
                              const PlayerFn& opponent,
                              std::string opponent_id) {
  if (cfg.turns < 1) throw std::domain_error("game needs at least one turn");
  GameRecord rec;
  rec.game_name = game.name();
  rec.opponent_id = std::move(opponent_id);
  rec.outcomes.reserve(static_cast<std::size_t>(cfg.turns));

  std::vector<Action> learner_moves, opponent_moves;
  learner_moves.reserve(static_cast<std::size_t>(cfg.turns));
  opponent_moves.reserve(static_cast<std::size_t>(cfg.turns));

  for (int turn = 1; turn <= cfg.turns; ++turn) {
    const Action a_l = learner(ObservedHistory{learner_moves, opponent_moves});
    const Action a_o = opponent(ObservedHistory{opponent_moves, learner_moves});
    if (!game.valid(a_l)) {
      throw ProtocolError("learner returned invalid action " +
                          std::to_string(a_l.index) + " at turn " +
                          std::to_string(turn));
    }
    if (!game.valid(a_o)) {
      throw ProtocolError("opponent returned invalid action " +
                          std::to_string(a_o.index) + " at turn " +
                          std::to_string(turn));
    }
    rec.outcomes.push_back(play_stage(game, a_l, a_o, turn));
    learner_moves.push_back(a_l);
    opponent_moves.push_back(a_o);
  }
  finalize_scores(rec);
  return rec;
}

GameRecord play_repeated_game(const GameConfig& cfg, const PlayerFn& learner,
                              const PlayerFn& opponent,
                              std::string opponent_id) {
  return play_repeated_game(cfg, builtin_game(cfg.game_name), learner,
                            opponent, std::move(opponent_id));
}

}  // namespace f3
