#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "f3/game.hpp"

namespace f3 {

struct JointAction {
  Action learner;
  Action opponent;
  friend constexpr bool operator==(JointAction, JointAction) = default;
};

// Joint-action prefix of the game in progress.
class CurrentHistory {
 public:
  // Throws SequencingError unless o.turn == size() + 1.
  void append(const StageOutcome& o);
  void push(const JointAction& j) {
    pairs_.push_back(j);
    learner_.push_back(j.learner);
    opponent_.push_back(j.opponent);
  }
  void clear() { pairs_.clear(); learner_.clear(); opponent_.clear(); }

  int size() const { return static_cast<int>(pairs_.size()); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<JointAction>& pairs() const { return pairs_; }
  const std::vector<Action>& learner_actions() const { return learner_; }
  const std::vector<Action>& opponent_actions() const { return opponent_; }
  const JointAction& operator[](int i) const {
    return pairs_[static_cast<std::size_t>(i)];
  }

  static CurrentHistory from_pairs(std::vector<JointAction> pairs);

 private:
  std::vector<JointAction> pairs_;
  std::vector<Action> learner_;
  std::vector<Action> opponent_;
};

CurrentHistory append_stage(CurrentHistory c, const StageOutcome& o);

// A record together with the order in which it entered the memory.
struct StoredRecord {
  GameRecord record;
  std::uint64_t serial = 0;
};

// Capacity-bounded store of finished games. When full, the record with the
// smallest delta_R among the stored items and the incoming one is dropped;
// ties drop the oldest.
class PastMemory {
 public:
  explicit PastMemory(std::size_t capacity = 1000);

  // Returns the evicted record, if any (possibly `rec` itself).
  std::optional<StoredRecord> insert(GameRecord rec);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<StoredRecord>& items() const { return items_; }
  const StoredRecord& operator[](std::size_t i) const { return items_[i]; }
  std::uint64_t next_serial() const { return next_serial_; }

 private:
  std::size_t capacity_;
  std::vector<StoredRecord> items_;
  std::uint64_t next_serial_ = 0;
};

std::optional<StoredRecord> insert_with_eviction(PastMemory& p, GameRecord rec);

struct HistorySplit {
  std::vector<JointAction> prefix;
  std::vector<JointAction> suffix;
};

std::vector<JointAction> joint_actions(const GameRecord& rec);

// Requires 1 <= m < n; throws std::domain_error otherwise.
HistorySplit split_at(const GameRecord& rec, int m);

enum class SuffixMode { kOneStep, kMultiStep };

std::string_view to_string(SuffixMode mode);
SuffixMode suffix_mode_from_string(std::string_view s);

// Opponent moves after the split: just step m+1, or all of m+1..n.
std::vector<Action> suffix_opponent_actions(const HistorySplit& split,
                                            SuffixMode mode);

// One line per record, tab separated:
// game  opponent  learner-indices  opponent-indices  R_l  R_o  delta_R
// Reals use round-trip precision, so write → read → write is byte-identical.
void write_record(std::ostream& out, const GameRecord& rec);
GameRecord parse_record(const std::string& line, const PayoffMatrix& game);

void write_memory(std::ostream& out, const PastMemory& memory);
// Records are re-inserted in file order through the eviction rule.
PastMemory read_memory(std::istream& in, const PayoffMatrix& game,
                       std::size_t capacity);
void save_memory(const std::string& path, const PastMemory& memory);
PastMemory load_memory(const std::string& path, const PayoffMatrix& game,
                       std::size_t capacity);

}  // namespace f3
