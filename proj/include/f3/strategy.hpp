#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "f3/game.hpp"
#include "f3/rng.hpp"

namespace f3 {

// An opponent from the strategy library. Strategies are written against
// action indices (0 = cooperate, 1 = defect), so the same logic plays the
// Chicken game with S/G in place of C/D.
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::string_view id() const = 0;
  virtual bool stochastic() const { return false; }
  // Restores the initial per-game state.
  virtual void reset() {}
  // own.size() == other.size() == number of completed stages.
  virtual Action step(std::span<const Action> own, std::span<const Action> other,
                      Rng& rng) = 0;
  virtual std::unique_ptr<Strategy> clone() const = 0;
};

Action strategy_step(Strategy& s, const ObservedHistory& history, Rng& rng);

// The twelve implemented ids in catalog order.
const std::vector<std::string>& strategy_ids();
std::unique_ptr<Strategy> make_strategy(std::string_view id);
// One-line description for list-strategies.
std::string_view strategy_description(std::string_view id);

// Adapts a strategy with its own RNG stream to the engine's callback.
PlayerFn as_player(Strategy& s, Rng& rng);

enum class PoolSide { kOld, kNew };

struct StrategyPool {
  std::vector<std::string> old_ids;
  std::vector<std::string> new_ids;

  const std::vector<std::string>& side(PoolSide which) const {
    return which == PoolSide::kOld ? old_ids : new_ids;
  }
};

// Checks every id exists, both sides are nonempty and old ∩ new = ∅.
void validate_pool(const StrategyPool& pool);
StrategyPool default_pool();
// JSON: {"old": [...], "new": [...]}
StrategyPool parse_pool(std::string_view json_text);
StrategyPool load_pool_file(const std::string& path);
std::string pool_to_json(const StrategyPool& pool);

std::string_view to_string(PoolSide side);

// Uniform draw from one side. Throws std::domain_error when it is empty.
std::unique_ptr<Strategy> sample_opponent(const StrategyPool& pool,
                                          PoolSide which, Rng& rng);

}  // namespace f3
