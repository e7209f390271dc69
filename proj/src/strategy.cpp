#include "f3/strategy.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "f3/errors.hpp"

namespace f3 {
namespace {

constexpr Action C = kCooperate;
constexpr Action D = kDefect;

template <typename Derived>
class StrategyBase : public Strategy {
 public:
  std::unique_ptr<Strategy> clone() const override {
    return std::make_unique<Derived>(static_cast<const Derived&>(*this));
  }
};

class Cooperator final : public StrategyBase<Cooperator> {
 public:
  std::string_view id() const override { return "Cooperator"; }
  Action step(std::span<const Action>, std::span<const Action>, Rng&) override {
    return C;
  }
};

class Defector final : public StrategyBase<Defector> {
 public:
  std::string_view id() const override { return "Defector"; }
  Action step(std::span<const Action>, std::span<const Action>, Rng&) override {
    return D;
  }
};

class RandomPlayer final : public StrategyBase<RandomPlayer> {
 public:
  std::string_view id() const override { return "Random"; }
  bool stochastic() const override { return true; }
  Action step(std::span<const Action>, std::span<const Action>,
              Rng& rng) override {
    return uniform01(rng) < 0.5 ? C : D;
  }
};

class TitForTat final : public StrategyBase<TitForTat> {
 public:
  std::string_view id() const override { return "TitForTat"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    return other.empty() ? C : other.back();
  }
};

class SuspiciousTitForTat final : public StrategyBase<SuspiciousTitForTat> {
 public:
  std::string_view id() const override { return "SuspiciousTitForTat"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    return other.empty() ? D : other.back();
  }
};

// Defects only after two consecutive opponent defections.
class TitForTwoTats final : public StrategyBase<TitForTwoTats> {
 public:
  std::string_view id() const override { return "TitForTwoTats"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    const auto n = other.size();
    if (n >= 2 && other[n - 1] == D && other[n - 2] == D) return D;
    return C;
  }
};

// Defects when the opponent's last three moves contain two consecutive
// defections.
class HardTitForTwoTats final : public StrategyBase<HardTitForTwoTats> {
 public:
  std::string_view id() const override { return "HardTitForTwoTats"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    const auto n = other.size();
    const auto start = n >= 3 ? n - 3 : 0;
    for (auto i = start; i + 1 < n; ++i) {
      if (other[i] == D && other[i + 1] == D) return D;
    }
    return C;
  }
};

// Defects if the opponent defected in any of the last three rounds.
class HardTitForTat final : public StrategyBase<HardTitForTat> {
 public:
  std::string_view id() const override { return "HardTitForTat"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    const auto n = other.size();
    const auto start = n >= 3 ? n - 3 : 0;
    for (auto i = start; i < n; ++i) {
      if (other[i] == D) return D;
    }
    return C;
  }
};

class Grudger final : public StrategyBase<Grudger> {
 public:
  std::string_view id() const override { return "Grudger"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    return std::find(other.begin(), other.end(), D) != other.end() ? D : C;
  }
};

// Tit For Tat until the opponent defects twice in a row, then defects forever.
class SpitefulTitForTat final : public StrategyBase<SpitefulTitForTat> {
 public:
  std::string_view id() const override { return "SpitefulTitForTat"; }
  Action step(std::span<const Action>, std::span<const Action> other,
              Rng&) override {
    if (other.empty()) return C;
    for (std::size_t i = 0; i + 1 < other.size(); ++i) {
      if (other[i] == D && other[i + 1] == D) return D;
    }
    return other.back();
  }
};

// Pavlov: cooperate iff both players made the same move last round.
class WinStayLoseShift final : public StrategyBase<WinStayLoseShift> {
 public:
  std::string_view id() const override { return "WinStayLoseShift"; }
  Action step(std::span<const Action> own, std::span<const Action> other,
              Rng&) override {
    if (own.empty()) return C;
    return own.back() == other.back() ? C : D;
  }
};

class Alternator final : public StrategyBase<Alternator> {
 public:
  std::string_view id() const override { return "Alternator"; }
  Action step(std::span<const Action> own, std::span<const Action>,
              Rng&) override {
    if (own.empty()) return C;
    return own.back() == C ? D : C;
  }
};

struct CatalogEntry {
  std::function<std::unique_ptr<Strategy>()> make;
  std::string_view description;
};

const std::map<std::string, CatalogEntry, std::less<>>& catalog() {
  static const std::map<std::string, CatalogEntry, std::less<>> entries = {
      {"Cooperator",
       {[] { return std::make_unique<Cooperator>(); }, "always cooperates"}},
      {"Defector",
       {[] { return std::make_unique<Defector>(); }, "always defects"}},
      {"Random",
       {[] { return std::make_unique<RandomPlayer>(); },
        "cooperates with probability 0.5"}},
      {"TitForTat",
       {[] { return std::make_unique<TitForTat>(); },
        "cooperates first, then copies the opponent's last move"}},
      {"TitForTwoTats",
       {[] { return std::make_unique<TitForTwoTats>(); },
        "defects only after two consecutive opponent defections"}},
      {"Grudger",
       {[] { return std::make_unique<Grudger>(); },
        "cooperates until the opponent defects once, then defects forever"}},
      {"WinStayLoseShift",
       {[] { return std::make_unique<WinStayLoseShift>(); },
        "cooperates first, then cooperates iff both moves matched last round"}},
      {"Alternator",
       {[] { return std::make_unique<Alternator>(); },
        "alternates C, D, C, D, ..."}},
      {"SuspiciousTitForTat",
       {[] { return std::make_unique<SuspiciousTitForTat>(); },
        "defects first, then copies the opponent's last move"}},
      {"SpitefulTitForTat",
       {[] { return std::make_unique<SpitefulTitForTat>(); },
        "tit for tat until two consecutive opponent defections, then defects "
        "forever"}},
      {"HardTitForTwoTats",
       {[] { return std::make_unique<HardTitForTwoTats>(); },
        "defects if the opponent's last three moves contain two consecutive "
        "defections"}},
      {"HardTitForTat",
       {[] { return std::make_unique<HardTitForTat>(); },
        "defects if the opponent defected in any of the last three rounds"}},
  };
  return entries;
}

}  // namespace

Action strategy_step(Strategy& s, const ObservedHistory& history, Rng& rng) {
  if (history.own.size() != history.other.size()) {
    throw std::invalid_argument("strategy_step: history lengths differ");
  }
  return s.step(history.own, history.other, rng);
}

const std::vector<std::string>& strategy_ids() {
  static const std::vector<std::string> ids = {
      "Cooperator",       "Defector",      "Random",
      "TitForTat",        "TitForTwoTats", "Grudger",
      "WinStayLoseShift", "Alternator",    "SuspiciousTitForTat",
      "SpitefulTitForTat", "HardTitForTwoTats", "HardTitForTat"};
  return ids;
}

std::unique_ptr<Strategy> make_strategy(std::string_view id) {
  const auto it = catalog().find(id);
  if (it == catalog().end()) {
    throw ConfigError("unknown strategy '" + std::string(id) + "'");
  }
  return it->second.make();
}

std::string_view strategy_description(std::string_view id) {
  const auto it = catalog().find(id);
  if (it == catalog().end()) {
    throw ConfigError("unknown strategy '" + std::string(id) + "'");
  }
  return it->second.description;
}

PlayerFn as_player(Strategy& s, Rng& rng) {
  return [&s, &rng](const ObservedHistory& h) { return strategy_step(s, h, rng); };
}

void validate_pool(const StrategyPool& pool) {
  if (pool.old_ids.empty()) throw ConfigError("strategy pool: old side empty");
  if (pool.new_ids.empty()) throw ConfigError("strategy pool: new side empty");
  for (const auto* side : {&pool.old_ids, &pool.new_ids}) {
    for (const auto& id : *side) {
      if (!catalog().contains(id)) {
        throw ConfigError("strategy pool: unknown strategy '" + id + "'");
      }
    }
  }
  for (const auto& id : pool.old_ids) {
    if (std::find(pool.new_ids.begin(), pool.new_ids.end(), id) !=
        pool.new_ids.end()) {
      throw ConfigError("strategy pool: '" + id + "' is in both old and new");
    }
  }
}

StrategyPool default_pool() {
  return StrategyPool{
      {"Cooperator", "Defector", "Random", "TitForTat", "Grudger",
       "WinStayLoseShift", "Alternator"},
      {"SuspiciousTitForTat", "SpitefulTitForTat", "HardTitForTwoTats",
       "TitForTwoTats", "HardTitForTat"}};
}

StrategyPool parse_pool(std::string_view json_text) {
  StrategyPool pool;
  try {
    const auto j = nlohmann::json::parse(json_text);
    pool.old_ids = j.at("old").get<std::vector<std::string>>();
    pool.new_ids = j.at("new").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("strategy pool: ") + e.what());
  }
  validate_pool(pool);
  return pool;
}

StrategyPool load_pool_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open strategy pool file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pool(ss.str());
}

std::string pool_to_json(const StrategyPool& pool) {
  nlohmann::json j;
  j["old"] = pool.old_ids;
  j["new"] = pool.new_ids;
  return j.dump(2);
}

std::string_view to_string(PoolSide side) {
  return side == PoolSide::kOld ? "old" : "new";
}

std::unique_ptr<Strategy> sample_opponent(const StrategyPool& pool,
                                          PoolSide which, Rng& rng) {
  const auto& ids = pool.side(which);
  if (ids.empty()) {
    throw std::domain_error("sample_opponent: " + std::string(to_string(which)) +
                            " pool is empty");
  }
  return make_strategy(ids[uniform_index(rng, ids.size())]);
}

}  // namespace f3
