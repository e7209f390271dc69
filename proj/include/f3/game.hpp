#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace f3 {

// Index into a game's action alphabet. For the built-in games index 0 is the
// cooperative move (C / S) and index 1 the aggressive one (D / G).
struct Action {
  int index = 0;
  friend constexpr auto operator<=>(Action, Action) = default;
};

inline constexpr Action kCooperate{0};
inline constexpr Action kDefect{1};

class PayoffMatrix {
 public:
  PayoffMatrix(std::string name, std::vector<std::string> labels,
               Eigen::MatrixXd row_rewards, Eigen::MatrixXd col_rewards);

  static const PayoffMatrix& prisoners_dilemma();
  static const PayoffMatrix& chicken();

  const std::string& name() const { return name_; }
  int num_actions() const { return static_cast<int>(labels_.size()); }
  const std::string& label(Action a) const;
  Action action_from_label(std::string_view label) const;
  bool valid(Action a) const { return a.index >= 0 && a.index < num_actions(); }

  // (row reward, column reward); throws std::domain_error on a bad index.
  std::pair<double, double> lookup(Action row, Action col) const;

  const Eigen::MatrixXd& row_rewards() const { return row_; }
  const Eigen::MatrixXd& col_rewards() const { return col_; }

 private:
  std::string name_;
  std::vector<std::string> labels_;
  Eigen::MatrixXd row_;
  Eigen::MatrixXd col_;
};

std::pair<double, double> payoff_lookup(const PayoffMatrix& m, Action row,
                                        Action col);

// "PD" / "Chicken" (case-insensitive aliases accepted).
const PayoffMatrix& builtin_game(std::string_view name);

// JSON: {"name": ..., "actions": ["C","D"], "payoffs": [[[r,c],[r,c]],[[r,c],[r,c]]]}
PayoffMatrix parse_game(std::string_view json_text);
PayoffMatrix load_game_file(const std::string& path);
// Known name → builtin, otherwise treated as a path to a game file.
PayoffMatrix resolve_game(const std::string& name_or_path);

struct StageOutcome {
  int turn = 1;
  Action learner;
  Action opponent;
  double r_learner = 0.0;
  double r_opponent = 0.0;
};

StageOutcome play_stage(const PayoffMatrix& m, Action learner, Action opponent,
                        int turn);

struct GameConfig {
  std::string game_name = "PD";
  int turns = 50;
  std::uint64_t seed = 0;
};

struct GameRecord {
  std::string game_name;
  std::string opponent_id;
  std::vector<StageOutcome> outcomes;
  double R_learner = 0.0;
  double R_opponent = 0.0;
  double delta_R = 0.0;

  int length() const { return static_cast<int>(outcomes.size()); }
};

// What a player sees before choosing: both players' past moves, from its own
// seat. The number of remaining turns is never part of it.
struct ObservedHistory {
  std::span<const Action> own;
  std::span<const Action> other;
};

using PlayerFn = std::function<Action(const ObservedHistory&)>;

// Plays cfg.turns stages with the learner in the row seat. Throws
// ProtocolError if either callback returns an out-of-range action.
GameRecord play_repeated_game(const GameConfig& cfg, const PayoffMatrix& game,
                              const PlayerFn& learner,
                              const PlayerFn& opponent,
                              std::string opponent_id = {});
// Resolves cfg.game_name through builtin_game.
GameRecord play_repeated_game(const GameConfig& cfg, const PlayerFn& learner,
                              const PlayerFn& opponent,
                              std::string opponent_id = {});

double average_reward(std::span<const double> rewards);
double score_difference(const GameRecord& rec);

// Fills R_learner, R_opponent and delta_R from the outcomes.
void finalize_scores(GameRecord& rec);

}  // namespace f3
