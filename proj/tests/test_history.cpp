#include <doctest.h>

#include <algorithm>
#include <limits>
#include <sstream>

#include "f3/errors.hpp"
#include "f3/history.hpp"
#include "f3/strategy.hpp"

using namespace f3;

namespace {

GameRecord with_delta(double d, int n = 4) {
  GameRecord r;
  r.game_name = "PD";
  r.opponent_id = "x";
  for (int t = 1; t <= n; ++t) r.outcomes.push_back({t, kCooperate, kCooperate, 3, 3});
  r.delta_R = d;
  return r;
}

GameRecord random_game(Rng& rng, int n = 50) {
  auto opp = sample_opponent(default_pool(), PoolSide::kOld, rng);
  Rng orng(rng());
  GameConfig cfg;
  cfg.turns = n;
  auto learner = [&rng](const ObservedHistory&) {
    return uniform01(rng) < 0.5 ? kCooperate : kDefect;
  };
  return play_repeated_game(cfg, learner, as_player(*opp, orng), std::string(opp->id()));
}

}  // namespace

TEST_CASE("append_stage") {
  CurrentHistory c;
  c = append_stage(c, {1, kCooperate, kDefect, 0, 5});
  CHECK(c.size() == 1);
  CHECK(c[0] == JointAction{kCooperate, kDefect});
  for (int t = 2; t <= 49; ++t) c = append_stage(c, {t, kDefect, kDefect, 1, 1});
  c = append_stage(c, {50, kDefect, kCooperate, 5, 0});
  CHECK(c.size() == 50);
  CHECK(c.learner_actions().size() == 50);
  CHECK(c.opponent_actions().back() == kCooperate);

  CurrentHistory three;
  for (int t = 1; t <= 3; ++t) three.append({t, kCooperate, kCooperate, 3, 3});
  CHECK_THROWS_AS(three.append({5, kCooperate, kCooperate, 3, 3}), SequencingError);
}

TEST_CASE("eviction below capacity") {
  PastMemory p(3);
  p.insert(with_delta(0.1));
  p.insert(with_delta(0.2));
  CHECK_FALSE(p.insert(with_delta(-1.0)).has_value());
  CHECK(p.size() == 3);
}

TEST_CASE("eviction drops the stored minimum") {
  PastMemory p(2);
  p.insert(with_delta(0.5));
  p.insert(with_delta(-0.2));
  const auto ev = insert_with_eviction(p, with_delta(0.1));
  REQUIRE(ev.has_value());
  CHECK(ev->record.delta_R == -0.2);
  CHECK(p[0].record.delta_R == 0.5);
  CHECK(p[1].record.delta_R == 0.1);
}

TEST_CASE("eviction can drop the incoming record") {
  PastMemory p(2);
  p.insert(with_delta(0.5));
  p.insert(with_delta(0.4));
  const auto ev = insert_with_eviction(p, with_delta(-1.0));
  REQUIRE(ev.has_value());
  CHECK(ev->record.delta_R == -1.0);
  CHECK(ev->serial == 2);
  CHECK(p.size() == 2);
  CHECK(p[0].record.delta_R == 0.5);
  CHECK(p[1].record.delta_R == 0.4);
}

TEST_CASE("eviction ties drop the oldest") {
  PastMemory p(2);
  p.insert(with_delta(0.0));
  p.insert(with_delta(1.0));
  const auto ev = p.insert(with_delta(0.0));
  REQUIRE(ev.has_value());
  CHECK(ev->serial == 0);
  CHECK(p[1].serial == 2);
}

TEST_CASE("random insert streams respect capacity and the global minimum") {
  Rng rng(11);
  PastMemory p(20);
  for (int i = 0; i < 3000; ++i) {
    // Coarse values so ties happen often.
    const double d = static_cast<double>(uniform_index(rng, 9)) - 4.0;
    double before = std::numeric_limits<double>::infinity();
    std::uint64_t oldest_min = UINT64_MAX;
    for (const auto& it : p.items()) before = std::min(before, it.record.delta_R);
    const bool full = p.size() == p.capacity();
    const double global = std::min(before, d);
    for (const auto& it : p.items())
      if (it.record.delta_R == global) oldest_min = std::min(oldest_min, it.serial);
    const std::uint64_t incoming = p.next_serial();
    if (oldest_min == UINT64_MAX) oldest_min = incoming;
    const auto ev = p.insert(with_delta(d));
    CHECK(p.size() <= p.capacity());
    CHECK(ev.has_value() == full);
    if (ev) {
      CHECK(ev->record.delta_R == global);
      CHECK(ev->serial == oldest_min);
    }
  }
}

TEST_CASE("split_at") {
  Rng rng(5);
  const auto rec = random_game(rng);
  auto s = split_at(rec, 1);
  CHECK(s.prefix.size() == 1);
  CHECK(s.suffix.size() == 49);
  s = split_at(rec, 49);
  CHECK(s.prefix.size() == 49);
  CHECK(s.suffix.size() == 1);
  CHECK_THROWS_AS(split_at(rec, 50), std::domain_error);
  CHECK_THROWS_AS(split_at(rec, 0), std::domain_error);
}

TEST_CASE("split then concatenate is the identity") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rec = random_game(rng);
    const auto all = joint_actions(rec);
    for (int m = 1; m < rec.length(); ++m) {
      auto s = split_at(rec, m);
      auto joined = s.prefix;
      joined.insert(joined.end(), s.suffix.begin(), s.suffix.end());
      CHECK(joined == all);
    }
  }
}

TEST_CASE("suffix opponent actions") {
  HistorySplit s;
  s.suffix = {{kCooperate, kDefect}, {kDefect, kDefect}};
  CHECK(suffix_opponent_actions(s, SuffixMode::kOneStep) == std::vector<Action>{kDefect});
  s.suffix = {{kCooperate, kDefect}, {kDefect, kCooperate}};
  CHECK(suffix_opponent_actions(s, SuffixMode::kMultiStep) ==
        std::vector<Action>{kDefect, kCooperate});
  s.suffix.clear();
  CHECK_THROWS_AS(suffix_opponent_actions(s, SuffixMode::kOneStep), std::domain_error);
  CHECK(suffix_mode_from_string(to_string(SuffixMode::kMultiStep)) == SuffixMode::kMultiStep);
}

TEST_CASE("memory text round trip is byte-identical") {
  Rng rng(7);
  PastMemory p(30);
  for (int i = 0; i < 40; ++i) p.insert(random_game(rng));
  std::ostringstream first;
  write_memory(first, p);
  std::istringstream in(first.str());
  const auto back = read_memory(in, PayoffMatrix::prisoners_dilemma(), 30);
  std::ostringstream second;
  write_memory(second, back);
  CHECK(first.str() == second.str());
  REQUIRE(back.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(back[i].record.delta_R == p[i].record.delta_R);
    CHECK(joint_actions(back[i].record) == joint_actions(p[i].record));
    CHECK(back[i].record.opponent_id == p[i].record.opponent_id);
  }
}

TEST_CASE("memory parsing rejects damaged lines") {
  const auto& pd = PayoffMatrix::prisoners_dilemma();
  CHECK_THROWS_AS(parse_record("PD\tx\t01\t10", pd), FormatError);
  CHECK_THROWS_AS(parse_record("PD\tx\t01\t1\t2.5\t2.5\t0", pd), FormatError);
  CHECK_THROWS_AS(parse_record("PD\tx\t01\t10\t9\t9\t0", pd), FormatError);
  CHECK_THROWS_AS(parse_record("Chicken\tx\t01\t10\t2.5\t2.5\t0", pd), FormatError);
  const auto ok = parse_record("PD\tx\t01\t10\t2.5\t2.5\t0", pd);
  CHECK(ok.length() == 2);
  CHECK(ok.delta_R == 0.0);
}
