#include <doctest.h>

#include <algorithm>
#include <memory>
#include <sstream>

#include "f3/oae.hpp"
#include "support/grad_suite.hpp"
#include "support/random_memory.hpp"

using namespace f3;
using f3::testing::played_memory;
using f3::testing::random_history;
using f3::testing::random_record;

namespace {

OaeConfig small_config(SuffixMode mode = SuffixMode::kOneStep) {
  OaeConfig c;
  c.hidden = 8;
  c.hops = 3;
  c.mode = mode;
  c.init_range = 0.3;
  return c;
}

Eigen::MatrixXd estimate_of(const OpponentActionEstimator& oae, const CurrentHistory& c,
                            const std::vector<const GameRecord*>& sim) {
  Graph g(false);
  return g.value(oae.estimate(g, c, sim));
}

Eigen::MatrixXd fuse_of(const OpponentActionEstimator& oae,
                        const std::vector<std::vector<Action>>& sets) {
  Graph g(false);
  return g.value(oae.fuse_targets(g, sets));
}

}  // namespace

TEST_CASE("adjacent tying is structural") {
  Rng rng(1);
  OpponentActionEstimator oae(small_config(), rng);
  const auto& net = oae.estimate_net();
  REQUIRE(net.embeddings.size() == 4);
  for (int hop = 1; hop < net.hops; ++hop) {
    CHECK(net.output_embedding(hop).w_input == net.input_embedding(hop + 1).w_input);
    CHECK(net.output_embedding(hop).w_hidden == net.input_embedding(hop + 1).w_hidden);
    CHECK(net.output_embedding(hop).bias == net.input_embedding(hop + 1).bias);
  }
  // Writing through one hop's output embedding is visible as the next hop's
  // input embedding.
  net.output_embedding(1).bias->value(0, 0) = 0.625;
  CHECK(net.input_embedding(2).bias->value(0, 0) == 0.625);
  // 1 query + (hops + 1) embeddings, 3 arrays each, plus projection and head.
  CHECK(oae.store().size() == 3 * 5 + 2 + 3 + 4);
}

TEST_CASE("estimate and target share one dimension") {
  Rng rng(2);
  for (auto mode : {SuffixMode::kOneStep, SuffixMode::kMultiStep}) {
    OpponentActionEstimator oae(small_config(mode), rng);
    const auto c = random_history(rng, 4);
    PastMemory p(10);
    for (int i = 0; i < 10; ++i) p.insert(random_record(rng, 10));
    std::vector<const GameRecord*> sim;
    for (const auto& h : top_k_similar(c, p, 5)) sim.push_back(&p[h.record_ref].record);
    const auto sets = retrieved_suffixes(sim, c.size(), mode);
    for (const auto& s : sets) CHECK(s.size() == (mode == SuffixMode::kOneStep ? 1u : 6u));
    CHECK(estimate_of(oae, c, sim).rows() == 8);
    CHECK(fuse_of(oae, sets).rows() == 8);
  }
}

TEST_CASE("without records only the query pathway contributes") {
  Rng rng(3);
  OpponentActionEstimator oae(small_config(), rng);
  const auto c = random_history(rng, 5);
  const auto& net = oae.estimate_net();
  Graph g(false);
  auto steps = joint_step_inputs(g, c.pairs(), 2);
  Var q = nn::encode_sequence(g, net.query, std::span<const Var>(steps));
  const Eigen::MatrixXd expected = g.value(nn::feedforward_apply(g, net.projection, q));
  CHECK(estimate_of(oae, c, {}) == expected);

  // Zero hops: projection of the query encoding even with records.
  auto cfg = small_config();
  cfg.hops = 0;
  Rng r2(3);
  OpponentActionEstimator flat(cfg, r2);
  const auto rec = random_record(rng, 10);
  Graph g2(false);
  auto steps2 = joint_step_inputs(g2, c.pairs(), 2);
  Var q2 = nn::encode_sequence(g2, flat.estimate_net().query, std::span<const Var>(steps2));
  const Eigen::MatrixXd flat_expected =
      g2.value(nn::feedforward_apply(g2, flat.estimate_net().projection, q2));
  CHECK(estimate_of(flat, c, {&rec}) == flat_expected);
}

TEST_CASE("identical retrieved records collapse to one") {
  Rng rng(4);
  OpponentActionEstimator oae(small_config(SuffixMode::kMultiStep), rng);
  const auto rec = random_record(rng, 20);
  const auto c = random_history(rng, 7);
  const auto one = estimate_of(oae, c, {&rec});
  const auto five = estimate_of(oae, c, {&rec, &rec, &rec, &rec, &rec});
  CHECK((one - five).cwiseAbs().maxCoeff() < 1e-9);

  const std::vector<Action> suffix{kDefect, kCooperate, kCooperate};
  const auto f1 = fuse_of(oae, {suffix});
  const auto f4 = fuse_of(oae, {suffix, suffix, suffix, suffix});
  CHECK((f1 - f4).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("order of retrieved records does not matter") {
  Rng rng(5);
  OpponentActionEstimator oae(small_config(SuffixMode::kMultiStep), rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GameRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(random_record(rng, 15));
    const auto c = random_history(rng, 1 + static_cast<int>(uniform_index(rng, 13)));
    std::vector<const GameRecord*> sim;
    for (const auto& r : recs) sim.push_back(&r);
    const auto base = estimate_of(oae, c, sim);
    const auto base_y = fuse_of(oae, retrieved_suffixes(sim, c.size(), SuffixMode::kMultiStep));
    std::shuffle(sim.begin(), sim.end(), rng);
    CHECK((estimate_of(oae, c, sim) - base).cwiseAbs().maxCoeff() < 1e-9);
    const auto y = fuse_of(oae, retrieved_suffixes(sim, c.size(), SuffixMode::kMultiStep));
    CHECK((y - base_y).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("fusion input errors") {
  Rng rng(6);
  OpponentActionEstimator oae(small_config(), rng);
  CHECK_THROWS_AS(fuse_of(oae, {}), std::domain_error);
  CHECK_THROWS_AS(fuse_of(oae, {{}}), std::domain_error);
  const auto rec = random_record(rng, 3);
  CHECK_THROWS_AS(estimate_of(oae, random_history(rng, 4), {&rec}), std::domain_error);
}

TEST_CASE("loss gradients through both networks") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    const auto r = f3::testing::grad_oae(seed);
    CAPTURE(r.worst);
    CAPTURE(r.max_rel);
    CHECK(r.ok());
  }
}

TEST_CASE("training lowers the loss and freezes the estimator") {
  Rng rng(7);
  const auto memory = played_memory(rng, 100);
  OaeConfig cfg;  // full size
  OpponentActionEstimator oae(cfg, rng);
  OaeTrainConfig tc;
  tc.steps = 2000;
  const auto report = train_oae(oae, memory, tc, rng);
  REQUIRE(report.losses.size() == 2000);
  for (double l : report.losses) CHECK(l >= 0.0);
  CHECK(report.mean_last(100) < report.mean_first(100));
  CHECK(oae.frozen());
  CHECK(oae.store().all_finite());
  CHECK_THROWS_AS(train_oae(oae, memory, tc, rng), TrainingError);
  Graph g(true);
  CHECK_THROWS_AS(oae.estimate(g, random_history(rng, 2), {}), TrainingError);
}

TEST_CASE("training needs two splittable records") {
  Rng rng(8);
  OpponentActionEstimator oae(small_config(), rng);
  PastMemory p(5);
  CHECK_THROWS_AS(train_oae(oae, p, {}, rng), TrainingError);
  p.insert(random_record(rng, 50));
  CHECK_THROWS_AS(train_oae(oae, p, {}, rng), TrainingError);
  p.insert(random_record(rng, 1));
  CHECK_THROWS_AS(train_oae(oae, p, {}, rng), TrainingError);
}

TEST_CASE("true-future target trains as well") {
  Rng rng(9);
  const auto memory = played_memory(rng, 30);
  auto cfg = small_config(SuffixMode::kMultiStep);
  cfg.target = OaeTarget::kTrueFuture;
  OpponentActionEstimator oae(cfg, rng);
  OaeTrainConfig tc;
  tc.steps = 50;
  CHECK(train_oae(oae, memory, tc, rng).losses.size() == 50);
}

TEST_CASE("training is reproducible") {
  auto run = [] {
    Rng rng(10);
    const auto memory = played_memory(rng, 20);
    OpponentActionEstimator oae(small_config(), rng);
    OaeTrainConfig tc;
    tc.steps = 100;
    train_oae(oae, memory, tc, rng);
    return oae.checkpoint();
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint round trip keeps tags, mode and outputs") {
  Rng rng(11);
  OpponentActionEstimator oae(small_config(SuffixMode::kMultiStep), rng);
  oae.tags()["source_game"] = "PD";
  oae.freeze();
  const std::string text = oae.checkpoint();
  std::istringstream in(text);
  const auto back = OpponentActionEstimator::from_checkpoint(nn::read_checkpoint(in));
  CHECK(back->checkpoint() == text);
  CHECK(back->frozen());
  CHECK(back->config().mode == SuffixMode::kMultiStep);
  CHECK(back->config().hidden == 8);
  CHECK(back->tags().at("source_game") == "PD");
  const auto rec = random_record(rng, 12);
  const auto c = random_history(rng, 6);
  CHECK(estimate_of(*back, c, {&rec}) == estimate_of(oae, c, {&rec}));
}

TEST_CASE("runtime matches the full evaluation exactly") {
  Rng rng(12);
  auto memory = std::make_shared<PastMemory>(played_memory(rng, 60));
  auto cfg = small_config();
  auto oae = std::make_shared<OpponentActionEstimator>(cfg, rng);
  oae->freeze();
  OaeRuntime rt(oae, memory);
  for (int game = 0; game < 3; ++game) {
    rt.begin_game();
    CurrentHistory c;
    for (int t = 0; t < 50; ++t) {
      const Eigen::MatrixXd fast = rt.estimate(c);
      std::vector<const GameRecord*> sim;
      if (!c.empty()) {
        for (const auto& h : top_k_similar(c, *memory, cfg.top_k))
          sim.push_back(&(*memory)[h.record_ref].record);
      }
      const Eigen::MatrixXd slow = estimate_of(*oae, c, sim);
      CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-12);
      const JointAction j{Action{static_cast<int>(uniform_index(rng, 2))},
                          Action{static_cast<int>(uniform_index(rng, 2))}};
      c.push(j);
      rt.observe(j);
    }
  }
  CHECK(rt.cached_records() > 0);
}

TEST_CASE("runtime refuses out-of-step use") {
  Rng rng(13);
  auto memory = std::make_shared<PastMemory>(played_memory(rng, 10));
  auto oae = std::make_shared<OpponentActionEstimator>(small_config(), rng);
  oae->freeze();
  OaeRuntime rt(oae, memory);
  rt.begin_game();
  CurrentHistory c;
  c.push({kCooperate, kCooperate});
  CHECK_THROWS_AS(rt.estimate(c), SequencingError);
  rt.observe({kDefect, kDefect});
  CHECK_THROWS_AS(rt.estimate(c), SequencingError);
  memory->insert(random_record(rng, 50));
  CHECK_THROWS_AS(rt.observe({kDefect, kDefect}), SequencingError);
}
