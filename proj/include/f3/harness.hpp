#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "f3/agent.hpp"
#include "f3/strategy.hpp"

namespace f3 {

struct ExperimentConfig {
  std::string game = "PD";  // builtin name or path to a game file
  std::string pool_file;    // empty: the built-in old/new pools
  StrategyPool pool = default_pool();
  Pathway pathway = Pathway::kHeAd;
  SuffixMode oae_mode = SuffixMode::kOneStep;
  OaeTarget oae_target = OaeTarget::kRetrieved;
  int turns = 50;
  long epochs = 20000;
  long eval_every = 500;
  int eval_games = 200;  // per pool per evaluation
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t memory_capacity = 1000;
  std::size_t memory_games = 1000;  // warm-up games played into the memory
  std::string populate = "random";  // or "from-checkpoint"
  std::string populate_agent;       // agent checkpoint for from-checkpoint
  int top_k = kDefaultTopK;
  int hidden = 64;
  int hops = 3;
  double policy_lr = 1e-3;
  double oae_lr = 1e-3;
  int oae_steps = 2000;
  bool moving_baseline = false;
  int dqn_learn_every = 50;
  std::string output_dir = "runs";
};

// Structured text (JSON). Unknown keys are rejected; missing keys keep their
// defaults. A pool_file, when given, replaces the pools.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);
// "key=value" flag override. The value is read as JSON when it parses,
// otherwise as a string.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);
// Throws ConfigError naming the first problem.
void validate_config(const ExperimentConfig& cfg);

struct ResultRow {
  std::string pathway;  // table label, e.g. "O-OAE+HE+AD"
  PoolSide pool = PoolSide::kOld;
  double mean_delta_r = 0.0;
  double stderr_ = 0.0;  // sample sd / sqrt(games)
  int games = 0;
  std::uint64_t seed = 0;
  long epoch = 0;
  std::string game;
  std::string variant;  // transfer runs: "new_trained" or "reused"

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

// Independent sub-seeds of one cell seed.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view purpose);

// Random-action warm-up: the learner plays uniformly at random against
// uniformly drawn old-pool opponents until the memory holds memory_games
// records.
std::shared_ptr<PastMemory> populate_memory(const ExperimentConfig& cfg, Rng& rng);
// Same loop with `agent` acting greedily.
std::shared_ptr<PastMemory> populate_memory_with(const ExperimentConfig& cfg, Agent& agent,
                                                 Rng& rng);

// A fresh estimator fitted on `memory` and frozen. The source game is
// recorded in its tags.
std::shared_ptr<OpponentActionEstimator> pretrain_oae(const ExperimentConfig& cfg,
                                                      const PastMemory& memory, Rng& rng,
                                                      OaeTrainReport* report = nullptr);

AgentConfig agent_config(const ExperimentConfig& cfg, int num_actions);

// Greedy play against every opponent of one pool side in turn (game i uses
// side[i % size]); the agent learns nothing.
ResultRow evaluate(Agent& agent, const ExperimentConfig& cfg, PoolSide side, Rng& rng,
                   long epoch);

struct TrainingResult {
  std::unique_ptr<Agent> agent;
  std::shared_ptr<const OpponentActionEstimator> oae;
  std::shared_ptr<PastMemory> memory;
  std::vector<ResultRow> rows;
};

using RowSink = std::function<void(const ResultRow&)>;

// Training against sampled old-pool opponents with an evaluation block on
// both pools every eval_every epochs (and after the last epoch). OAE
// pathways need `oae` (frozen) and `memory`. Evaluation draws from its own
// seed stream, so the trained agent does not depend on the eval schedule.
TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                            std::shared_ptr<const OpponentActionEstimator> oae = nullptr,
                            std::shared_ptr<PastMemory> memory = nullptr,
                            const RowSink& sink = {});

// Whole pipeline for one seed: memory population, OAE pre-training when the
// pathway needs it, then run_training.
TrainingResult run_cell(const ExperimentConfig& cfg, std::uint64_t seed, const RowSink& sink = {});

struct TransferResult {
  std::vector<ResultRow> new_trained;
  std::vector<ResultRow> reused;
  std::uint64_t source_oae_hash = 0;
  std::uint64_t reused_oae_hash = 0;   // hash of the estimator the reused agent ran with
  std::uint64_t target_oae_hash = 0;
};

// Trains two target-game agents that differ only in where their OAE came
// from: fitted on a target-game memory, or reused from the source game
// (actions mapped by index). `source_oae`, when given, skips the source
// pre-training. Throws ConfigError on mismatched action counts.
TransferResult run_transfer(const ExperimentConfig& source, const ExperimentConfig& target,
                            std::uint64_t seed,
                            std::shared_ptr<const OpponentActionEstimator> source_oae = nullptr);

// Tab-separated, one header line; reals with round-trip precision.
std::string results_tsv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_tsv(std::string_view text);
// JSON summary in the comparison-table layout: game -> pathway[/variant] ->
// pool -> mean over seeds of the last evaluation, plus the per-seed values.
std::string results_summary(const std::vector<ResultRow>& rows);
// Writes results.tsv and summary.json into `dir` (created if needed).
// Throws std::invalid_argument on no rows and IoError when unwritable.
void emit_results(const std::vector<ResultRow>& rows, const std::string& dir);

// Last-epoch rows only.
std::vector<ResultRow> final_rows(const std::vector<ResultRow>& rows);
// Mean of mean_delta_r over the final rows matching pathway/pool (and
// variant, game when nonempty). NaN when nothing matches.
double final_mean(const std::vector<ResultRow>& rows, const std::string& pathway, PoolSide pool,
                  const std::string& variant = {}, const std::string& game = {});

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace f3
