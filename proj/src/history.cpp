#include "f3/history.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "f3/errors.hpp"

namespace f3 {

void CurrentHistory::append(const StageOutcome& o) {
  if (o.turn != size() + 1) {
    throw SequencingError("append_stage: expected turn " +
                          std::to_string(size() + 1) + ", got " +
                          std::to_string(o.turn));
  }
  pairs_.push_back({o.learner, o.opponent});
  learner_.push_back(o.learner);
  opponent_.push_back(o.opponent);
}

CurrentHistory CurrentHistory::from_pairs(std::vector<JointAction> pairs) {
  CurrentHistory c;
  for (const auto& p : pairs) {
    c.learner_.push_back(p.learner);
    c.opponent_.push_back(p.opponent);
  }
  c.pairs_ = std::move(pairs);
  return c;
}

CurrentHistory append_stage(CurrentHistory c, const StageOutcome& o) {
  c.append(o);
  return c;
}

PastMemory::PastMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::domain_error("memory capacity must be > 0");
  items_.reserve(capacity_ + 1);
}

std::optional<StoredRecord> PastMemory::insert(GameRecord rec) {
  items_.push_back(StoredRecord{std::move(rec), next_serial_++});
  if (items_.size() <= capacity_) return std::nullopt;
  // Items are kept in insertion order, so the first minimum is the oldest.
  auto victim = std::min_element(
      items_.begin(), items_.end(), [](const auto& a, const auto& b) {
        return a.record.delta_R < b.record.delta_R;
      });
  StoredRecord evicted = std::move(*victim);
  items_.erase(victim);
  return evicted;
}

std::optional<StoredRecord> insert_with_eviction(PastMemory& p, GameRecord rec) {
  return p.insert(std::move(rec));
}

std::vector<JointAction> joint_actions(const GameRecord& rec) {
  std::vector<JointAction> out;
  out.reserve(rec.outcomes.size());
  for (const auto& o : rec.outcomes) out.push_back({o.learner, o.opponent});
  return out;
}

HistorySplit split_at(const GameRecord& rec, int m) {
  const int n = rec.length();
  if (m < 1 || m >= n) {
    throw std::domain_error("split_at: m=" + std::to_string(m) +
                            " outside [1, " + std::to_string(n - 1) + "]");
  }
  auto all = joint_actions(rec);
  HistorySplit split;
  split.prefix.assign(all.begin(), all.begin() + m);
  split.suffix.assign(all.begin() + m, all.end());
  return split;
}

std::string_view to_string(SuffixMode mode) {
  return mode == SuffixMode::kOneStep ? "one_step" : "multi_step";
}

SuffixMode suffix_mode_from_string(std::string_view s) {
  if (s == "one_step" || s == "O" || s == "o") return SuffixMode::kOneStep;
  if (s == "multi_step" || s == "M" || s == "m") return SuffixMode::kMultiStep;
  throw ConfigError("unknown OAE mode '" + std::string(s) + "'");
}

std::vector<Action> suffix_opponent_actions(const HistorySplit& split,
                                            SuffixMode mode) {
  if (split.suffix.empty()) {
    throw std::domain_error("suffix_opponent_actions: empty suffix");
  }
  std::vector<Action> out;
  if (mode == SuffixMode::kOneStep) {
    out.push_back(split.suffix.front().opponent);
    return out;
  }
  out.reserve(split.suffix.size());
  for (const auto& p : split.suffix) out.push_back(p.opponent);
  return out;
}

namespace {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_real(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw FormatError("bad real '" + s + "'");
  }
  if (pos != s.size()) throw FormatError("bad real '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

void write_record(std::ostream& out, const GameRecord& rec) {
  std::string learner, opponent;
  for (const auto& o : rec.outcomes) {
    learner.push_back(static_cast<char>('0' + o.learner.index));
    opponent.push_back(static_cast<char>('0' + o.opponent.index));
  }
  out << rec.game_name << '\t' << rec.opponent_id << '\t' << learner << '\t'
      << opponent << '\t' << format_real(rec.R_learner) << '\t'
      << format_real(rec.R_opponent) << '\t' << format_real(rec.delta_R)
      << '\n';
}

GameRecord parse_record(const std::string& line, const PayoffMatrix& game) {
  const auto f = split_tabs(line);
  if (f.size() != 7) {
    throw FormatError("memory record needs 7 fields, got " +
                      std::to_string(f.size()));
  }
  if (f[0] != game.name()) {
    throw FormatError("memory record for game '" + f[0] + "' loaded as '" +
                      game.name() + "'");
  }
  if (f[2].size() != f[3].size() || f[2].empty()) {
    throw FormatError("memory record action strings differ in length");
  }
  GameRecord rec;
  rec.game_name = f[0];
  rec.opponent_id = f[1];
  for (std::size_t i = 0; i < f[2].size(); ++i) {
    const Action l{f[2][i] - '0'}, o{f[3][i] - '0'};
    if (!game.valid(l) || !game.valid(o)) {
      throw FormatError("memory record has invalid action digit");
    }
    rec.outcomes.push_back(play_stage(game, l, o, static_cast<int>(i) + 1));
  }
  rec.R_learner = parse_real(f[4]);
  rec.R_opponent = parse_real(f[5]);
  rec.delta_R = parse_real(f[6]);
  GameRecord check = rec;
  finalize_scores(check);
  const auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
  };
  if (!close(check.R_learner, rec.R_learner) ||
      !close(check.R_opponent, rec.R_opponent) ||
      !close(check.delta_R, rec.delta_R)) {
    throw FormatError("memory record scores disagree with its actions");
  }
  return rec;
}

void write_memory(std::ostream& out, const PastMemory& memory) {
  for (const auto& item : memory.items()) write_record(out, item.record);
}

PastMemory read_memory(std::istream& in, const PayoffMatrix& game,
                       std::size_t capacity) {
  PastMemory memory(capacity);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      memory.insert(parse_record(line, game));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return memory;
}

void save_memory(const std::string& path, const PastMemory& memory) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write memory file " + path);
  write_memory(out, memory);
  if (!out) throw std::runtime_error("error writing memory file " + path);
}

PastMemory load_memory(const std::string& path, const PayoffMatrix& game,
                       std::size_t capacity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open memory file " + path);
  return read_memory(in, game, capacity);
}

}  // namespace f3
