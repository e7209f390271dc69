#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "f3/history.hpp"
#include "f3/nn/checkpoint.hpp"
#include "f3/nn/graph.hpp"
#include "f3/nn/layers.hpp"
#include "f3/nn/optim.hpp"
#include "f3/retrieval.hpp"

namespace f3 {

using Graph = nn::Graph<double>;
using nn::Var;
using Store = nn::ParameterStore<double>;

enum class OaeTarget {
  kRetrieved,   // opponent suffixes of the retrieved records
  kTrueFuture,  // the sampled record's own suffix (extension)
};

struct OaeConfig {
  int num_actions = 2;
  int hidden = 64;
  int hops = 3;
  int top_k = kDefaultTopK;
  SuffixMode mode = SuffixMode::kOneStep;
  OaeTarget target = OaeTarget::kRetrieved;
  double init_range = 0.08;
};

// φ1: memory network over (C, retrieved prefixes). embeddings[j] encodes
// retrieved prefixes; hop l (1-based) uses embeddings[l-1] as its input
// (key) embedding and embeddings[l] as its output (value) embedding, so the
// output embedding of hop l is the same object as the input embedding of
// hop l+1.
struct EstimateNetwork {
  nn::LstmCell<double> query;
  std::vector<nn::LstmCell<double>> embeddings;  // hops + 1
  nn::Feedforward<double> projection;            // d -> d, one affine layer
  int hops = 0;

  const nn::LstmCell<double>& input_embedding(int hop) const { return embeddings[hop - 1]; }
  const nn::LstmCell<double>& output_embedding(int hop) const { return embeddings[hop]; }
};

// φ2: sequence encoder over an opponent-action suffix, averaged over the K
// suffixes, then an MLP.
struct FusionNet {
  nn::LstmCell<double> encoder;
  nn::Feedforward<double> head;  // d -> d -> d
};

class OpponentActionEstimator {
 public:
  OpponentActionEstimator(const OaeConfig& cfg, Rng& rng);
  static std::unique_ptr<OpponentActionEstimator> from_checkpoint(const nn::Checkpoint& ck);

  const OaeConfig& config() const { return cfg_; }
  const EstimateNetwork& estimate_net() const { return estimate_; }
  const FusionNet& fusion_net() const { return fusion_; }
  Store& store() { return store_; }
  const Store& store() const { return store_; }

  // E_x for history `c` and retrieved records (each longer than c). With no
  // records only the query pathway contributes.
  Var estimate(Graph& g, const CurrentHistory& c,
               std::span<const GameRecord* const> sim) const;
  // E_y from the K opponent-action suffixes.
  Var fuse_targets(Graph& g, const std::vector<std::vector<Action>>& suffix_sets) const;

  // Hops computed from already-encoded inputs. `keys_values[j][i]` is record
  // i under embeddings[j].
  Var estimate_from_encodings(Graph& g, Var query_encoding,
                              const std::vector<std::vector<Var>>& keys_values) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // Metadata written with the checkpoint (mode, source game, shapes).
  std::map<std::string, std::string>& tags() { return tags_; }
  const std::map<std::string, std::string>& tags() const { return tags_; }
  std::map<std::string, std::string> checkpoint_meta() const;
  std::string checkpoint() const;

 private:
  explicit OpponentActionEstimator(const OaeConfig& cfg);
  void check_recording(const Graph& g) const;

  OaeConfig cfg_;
  Store store_;
  EstimateNetwork estimate_;
  FusionNet fusion_;
  bool frozen_ = false;
  std::map<std::string, std::string> tags_;
};

std::vector<Var> joint_step_inputs(Graph& g, std::span<const JointAction> pairs, int s);

// Suffix sets O_i of the retrieved records split at m.
std::vector<std::vector<Action>> retrieved_suffixes(
    std::span<const GameRecord* const> sim, int m, SuffixMode mode);

struct OaeTrainConfig {
  int steps = 2000;
  nn::OptimizerConfig optimizer{};
};

struct OaeTrainReport {
  std::vector<double> losses;
  double mean_first(std::size_t n) const;
  double mean_last(std::size_t n) const;
};

// Fits φ1 and φ2 jointly under the L1 loss, then freezes the estimator.
// Each step samples a record and a split point m in [1, n-1], retrieves the
// top-K records for the prefix with the sampled record left out, and
// regresses E_x onto E_y. Throws TrainingError if fewer than two records are
// long enough to split.
OaeTrainReport train_oae(OpponentActionEstimator& oae, const PastMemory& memory,
                         const OaeTrainConfig& cfg, Rng& rng);

// Frozen-estimator evaluation for acting. Encodings of memory records are
// cached per record serial, and the query encoding advances one stage at a
// time, so each turn costs one recurrent step plus the hops. Results match
// OpponentActionEstimator::estimate exactly.
class OaeRuntime {
 public:
  OaeRuntime(std::shared_ptr<const OpponentActionEstimator> oae,
             std::shared_ptr<const PastMemory> memory);

  void begin_game();
  // Advances the query encoding by one completed stage.
  void observe(const JointAction& stage);
  // E_x for the current history (must match what observe() has seen).
  Eigen::MatrixXd estimate(const CurrentHistory& c);

  // Takes effect at the next begin_game().
  void set_memory(std::shared_ptr<const PastMemory> memory) { memory_ = std::move(memory); }
  void forget(std::uint64_t serial) { cache_.erase(serial); }
  const OpponentActionEstimator& estimator() const { return *oae_; }
  std::size_t cached_records() const { return cache_.size(); }

 private:
  const std::vector<Eigen::MatrixXd>& encodings(const StoredRecord& item);

  std::shared_ptr<const OpponentActionEstimator> oae_;
  std::shared_ptr<const PastMemory> memory_;
  Eigen::MatrixXd query_state_;
  int observed_ = 0;
  // Per stored record: positions matching the current history so far.
  // Memory only changes between games, so counts advance with observe().
  std::vector<int> matches_;
  std::vector<JointAction> seen_;
  std::uint64_t memory_serial_ = 0;  // memory version at begin_game
  // serial -> per-embedding d x (n+1) hidden states (column t: after t stages)
  std::unordered_map<std::uint64_t, std::vector<Eigen::MatrixXd>> cache_;
};

}  // namespace f3
