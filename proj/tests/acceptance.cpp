// Acceptance run: one PASS/FAIL line per criterion. With arguments, only the
// listed criterion numbers run (e.g. `acceptance 1 2 5`).

#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "f3/harness.hpp"
#include "support/grad_suite.hpp"
#include "support/random_memory.hpp"

using namespace f3;
using namespace f3::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kOut = "acceptance-results";

void note(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void note(const char* fmt, ...) {
  std::fputs("    ", stdout);
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stdout, fmt, ap);
  va_end(ap);
  std::fputc('\n', stdout);
  std::fflush(stdout);
}

std::string memory_bytes(const PastMemory& p) {
  std::ostringstream out;
  write_memory(out, p);
  return out.str();
}

// ---------------------------------------------------------------- 1

bool payoff_tables() {
  struct Cell {
    int row, col;
    double r, c;
  };
  const std::vector<Cell> pd{{0, 0, 3, 3}, {0, 1, 0, 5}, {1, 0, 5, 0}, {1, 1, 1, 1}};
  const std::vector<Cell> chicken{{0, 0, 2, 2}, {0, 1, 1, 5}, {1, 0, 5, 1}, {1, 1, 0, 0}};
  bool ok = true;
  const auto check = [&ok](const PayoffMatrix& m, const std::vector<Cell>& cells,
                           const std::vector<std::string>& labels) {
    ok &= m.num_actions() == 2;
    for (int a = 0; a < 2; ++a) ok &= m.label(Action{a}) == labels[static_cast<std::size_t>(a)];
    for (const auto& c : cells) {
      const auto [r, o] = payoff_lookup(m, Action{c.row}, Action{c.col});
      if (r != c.r || o != c.c) {
        ok = false;
        note("%s (%d,%d): got %g,%g want %g,%g", m.name().c_str(), c.row, c.col, r, o, c.r, c.c);
      }
    }
  };
  check(builtin_game("PD"), pd, {"C", "D"});
  check(builtin_game("Chicken"), chicken, {"S", "G"});
  return ok;
}

// ---------------------------------------------------------------- 2

// Plain re-statement of the six deterministic rules on raw move vectors.
int oracle_move(const std::string& id, const std::vector<int>& own, const std::vector<int>& other) {
  const std::size_t t = own.size();
  if (id == "Cooperator") return 0;
  if (id == "Defector") return 1;
  if (id == "TitForTat") return t == 0 ? 0 : other[t - 1];
  if (id == "Grudger") {
    for (int o : other) {
      if (o == 1) return 1;
    }
    return 0;
  }
  if (id == "Alternator") return static_cast<int>(t % 2);
  if (id == "WinStayLoseShift") {
    if (t == 0) return 0;
    // Win (opponent cooperated) keeps the last move, otherwise switch.
    return other[t - 1] == 0 ? own[t - 1] : 1 - own[t - 1];
  }
  throw std::logic_error("oracle: unknown strategy " + id);
}

double oracle_delta(const std::string& a, const std::string& b) {
  const double pay[2][2][2] = {{{3, 3}, {0, 5}}, {{5, 0}, {1, 1}}};
  std::vector<int> ma, mb;
  double ra = 0, rb = 0;
  for (int t = 0; t < 50; ++t) {
    const int x = oracle_move(a, ma, mb);
    const int y = oracle_move(b, mb, ma);
    ra += pay[x][y][0];
    rb += pay[x][y][1];
    ma.push_back(x);
    mb.push_back(y);
  }
  return ra / 50.0 - rb / 50.0;
}

bool matchup_oracle() {
  const std::vector<std::string> ids{"Cooperator", "Defector", "TitForTat",
                                     "Grudger",    "Alternator", "WinStayLoseShift"};
  bool ok = true;
  int pairs = 0;
  for (const auto& a : ids) {
    for (const auto& b : ids) {
      auto sa = make_strategy(a);
      auto sb = make_strategy(b);
      Rng ra(1), rb(2);
      GameConfig cfg;
      const auto rec = play_repeated_game(cfg, as_player(*sa, ra), as_player(*sb, rb), b);
      const double want = oracle_delta(a, b);
      ++pairs;
      if (rec.delta_R != want || rec.length() != 50) {
        ok = false;
        note("%s vs %s: engine %.17g oracle %.17g", a.c_str(), b.c_str(), rec.delta_R, want);
      }
    }
  }
  const double tft = oracle_delta("TitForTat", "Defector");
  note("%d ordered pairs; TitForTat vs Defector %.4f", pairs, tft);
  ok &= std::abs(tft - (-0.10)) < 1e-12;
  return ok;
}

// ---------------------------------------------------------------- 3

bool gradient_suite() {
  struct Suite {
    const char* name;
    std::function<GradCheckResult(std::uint64_t)> run;
    int instances;
  };
  // Policy seeds cycle through four input layouts; 80 seeds give 40
  // hierarchical-encoder instances.
  const std::vector<Suite> suites{
      {"sequence encoder", grad_lstm, 20},      {"feedforward", grad_feedforward, 20},
      {"attention", grad_attention, 20},        {"L1 loss", grad_l1, 20},
      {"OAE forward", grad_oae, 20},            {"HE+AD forward", grad_policy, 80},
      {"REINFORCE surrogate", grad_reinforce, 30},
  };
  bool ok = true;
  for (const auto& s : suites) {
    GradCheckResult total;
    int passed = 0;
    for (int i = 0; i < s.instances; ++i) {
      const auto r = s.run(1000 + static_cast<std::uint64_t>(i));
      passed += r.ok();
      total.merge(r);
    }
    const bool pass = passed == s.instances;
    ok &= pass;
    note("%-20s %d/%d instances, %d entries, max abs diff %.1e, max rel %.1e%s%s", s.name, passed,
           s.instances, total.checked, total.max_abs, total.max_rel, pass ? "" : "  worst ", pass ? "" : total.worst.c_str());
  }
  return ok;
}

// ---------------------------------------------------------------- 4

bool retrieval_oracle() {
  Rng rng(4);
  bool ok = true;
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto size = 1 + uniform_index(rng, 1000);
    PastMemory p(size);
    const double bias = 0.2 + 0.6 * uniform01(rng);
    for (std::size_t i = 0; i < size; ++i) {
      p.insert(random_record(rng, 1 + static_cast<int>(uniform_index(rng, 50)), bias));
    }
    const int m = 1 + static_cast<int>(uniform_index(rng, 49));
    const auto c = random_history(rng, m, bias);
    const int k = trial % 4 == 0 ? 1 + static_cast<int>(uniform_index(rng, 10)) : kDefaultTopK;
    std::optional<std::uint64_t> exclude;
    if (trial % 2 == 1) exclude = p[uniform_index(rng, p.size())].serial;
    const auto got = top_k_similar(c, p, k, exclude);
    const auto want = brute_force_top_k(c, p, k, exclude);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].record_ref == want[i].index && got[i].matches == want[i].matches &&
             got[i].value == static_cast<double>(want[i].matches) / m;
    }
    compared += static_cast<int>(got.size());
    if (!same) {
      ok = false;
      note("trial %d (size %zu, m %d, k %d) differs from the exhaustive scan", trial, size, m, k);
    }
  }
  note("200 memories, %d ranked hits compared", compared);
  return ok;
}

// ---------------------------------------------------------------- 5

bool eviction_property() {
  Rng rng(5);
  PastMemory p(100);
  bool ok = true;
  int evictions = 0;
  for (int i = 0; i < 10000; ++i) {
    GameRecord rec = random_record(rng, 3);
    // Half the stream is coarse so that minimum ties are common.
    if (i % 2 == 0) rec.delta_R = 8.0 * uniform01(rng) - 4.0;
    const std::uint64_t incoming = p.next_serial();
    double lowest = rec.delta_R;
    std::uint64_t oldest = incoming;
    for (const auto& it : p.items()) {
      if (it.record.delta_R < lowest || (it.record.delta_R == lowest && it.serial < oldest)) {
        lowest = it.record.delta_R;
        oldest = it.serial;
      }
    }
    const bool full = p.size() == p.capacity();
    const auto evicted = p.insert(rec);
    if (p.size() > p.capacity() || evicted.has_value() != full) ok = false;
    if (evicted) {
      ++evictions;
      if (evicted->record.delta_R != lowest || evicted->serial != oldest) ok = false;
    }
  }
  note("%d evictions, final size %zu", evictions, p.size());
  return ok;
}

// ---------------------------------------------------------------- 6

std::shared_ptr<OpponentActionEstimator> trained_o_oae;
std::shared_ptr<PastMemory> training_memory;

bool oae_training_signal() {
  Rng mem_rng(6);
  training_memory = std::make_shared<PastMemory>(played_memory(mem_rng, 500));
  bool ok = true;
  for (auto mode : {SuffixMode::kOneStep, SuffixMode::kMultiStep}) {
    Rng rng(60);
    OaeConfig cfg;
    cfg.mode = mode;
    auto oae = std::make_shared<OpponentActionEstimator>(cfg, rng);
    OaeTrainConfig tc;
    tc.steps = 2000;
    const auto report = train_oae(*oae, *training_memory, tc, rng);
    const double first = report.mean_first(100), last = report.mean_last(100);
    const bool pass = report.losses.size() == 2000 && last < first;
    ok &= pass;
    note("%s: first-100 %.5f  last-100 %.5f", mode == SuffixMode::kOneStep ? "O-OAE" : "M-OAE",
           first, last);
    if (mode == SuffixMode::kOneStep) trained_o_oae = oae;
  }
  return ok;
}

// ---------------------------------------------------------------- 7

bool freeze_contract() {
  if (!trained_o_oae) oae_training_signal();
  const std::string before = trained_o_oae->checkpoint();
  ExperimentConfig cfg;
  cfg.pathway = Pathway::kOaeHeAd;
  cfg.epochs = 5000;
  cfg.eval_every = 5000;
  cfg.eval_games = 20;
  cfg.memory_capacity = training_memory->capacity();
  cfg.memory_games = training_memory->size();
  auto memory = std::make_shared<PastMemory>(*training_memory);
  const auto serial = memory->next_serial();
  const auto res = run_training(cfg, 7, trained_o_oae, memory);
  const std::string after = trained_o_oae->checkpoint();
  note("%zu checkpoint bytes, %llu games added to memory, frozen %s", before.size(),
         static_cast<unsigned long long>(memory->next_serial() - serial),
         trained_o_oae->frozen() ? "yes" : "no");
  return before == after && res.oae->checkpoint() == before && memory->next_serial() > serial;
}

// ---------------------------------------------------------------- 8

double pooled(const std::vector<ResultRow>& rows, const std::string& label) {
  return 0.5 * (final_mean(rows, label, PoolSide::kOld) + final_mean(rows, label, PoolSide::kNew));
}

bool comparison_grid() {
  const std::vector<Pathway> grid{Pathway::kQLearning, Pathway::kDqn, Pathway::kHeAd,
                                  Pathway::kOaeHeAd};
  ExperimentConfig base;  // PD, default pools, 20000 epochs
  base.eval_every = base.epochs;
  std::vector<ResultRow> all;
  std::map<std::uint64_t, std::vector<ResultRow>> by_seed;
  for (auto p : grid) {
    for (auto seed : base.seeds) {
      auto cfg = base;
      cfg.pathway = p;
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = run_cell(cfg, seed);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto fin = final_rows(res.rows);
      for (const auto& r : fin) {
        note("%-12s seed %llu %s %+.4f (se %.4f)", r.pathway.c_str(),
               static_cast<unsigned long long>(seed), std::string(to_string(r.pool)).c_str(),
               r.mean_delta_r, r.stderr_);
      }
      note("%-12s seed %llu took %.0f s", std::string(pathway_label(p, SuffixMode::kOneStep)).c_str(),
             static_cast<unsigned long long>(seed), secs);
      by_seed[seed].insert(by_seed[seed].end(), fin.begin(), fin.end());
      all.insert(all.end(), res.rows.begin(), res.rows.end());
    }
  }
  emit_results(all, (kOut / "grid").string());

  const std::string q = "Q-learning", dqn = "HE+AD(DQN)", pg = "HE+AD(PG)", oae = "O-OAE+HE+AD";
  struct Check {
    const char* name;
    std::function<bool(const std::vector<ResultRow>&)> holds;
  };
  const std::vector<Check> checks{
      {"8a Q-learning mean < HE+AD(DQN) mean",
       [&](const auto& r) { return pooled(r, q) < pooled(r, dqn); }},
      {"8b HE+AD(DQN) mean < HE+AD(PG) mean",
       [&](const auto& r) { return pooled(r, dqn) < pooled(r, pg); }},
      {"8c Q-learning old < 0",
       [&](const auto& r) { return final_mean(r, q, PoolSide::kOld) < 0.0; }},
      {"8d O-OAE+HE+AD new >= HE+AD(PG) new - 0.05",
       [&](const auto& r) {
         return final_mean(r, oae, PoolSide::kNew) >= final_mean(r, pg, PoolSide::kNew) - 0.05;
       }},
      {"HE+AD(PG) old > 0 (sanity)",
       [&](const auto& r) { return final_mean(r, pg, PoolSide::kOld) > 0.0; }},
  };
  bool ok = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    int seeds_ok = 0;
    for (const auto& [seed, rows] : by_seed) seeds_ok += checks[i].holds(rows);
    const bool pass = seeds_ok >= 4;
    if (i < 4) ok &= pass;
    note("%s %s on %d/5 seeds", pass ? "PASS" : "FAIL", checks[i].name, seeds_ok);
  }
  for (const auto& label : {q, dqn, pg, oae}) {
    note("mean over seeds %-12s old %+.3f new %+.3f", label.c_str(),
           final_mean(all, label, PoolSide::kOld), final_mean(all, label, PoolSide::kNew));
  }
  return ok;
}

// ---------------------------------------------------------------- 9

constexpr long kTransferEpochs = 2500;

bool transfer() {
  ExperimentConfig base;
  base.epochs = kTransferEpochs;
  base.eval_every = kTransferEpochs;
  std::vector<ResultRow> all;
  bool hashes = true;
  for (auto mode : {SuffixMode::kOneStep, SuffixMode::kMultiStep}) {
    for (auto seed : base.seeds) {
      // Both models of one OAE kind reuse the same source estimator.
      auto source = base;
      source.oae_mode = mode;
      source.pathway = Pathway::kOaeAd;
      Rng memory_rng(stream_seed(seed, "source-memory"));
      const auto src_memory = populate_memory(source, memory_rng);
      Rng oae_rng(stream_seed(seed, "source-oae"));
      std::shared_ptr<const OpponentActionEstimator> src_oae =
          pretrain_oae(source, *src_memory, oae_rng);
      for (auto p : {Pathway::kOaeAd, Pathway::kOaeHeAd}) {
        source.pathway = p;
        auto target = source;
        target.game = "Chicken";
        const auto res = run_transfer(source, target, seed, src_oae);
        hashes &= res.reused_oae_hash == res.source_oae_hash;
        for (const auto* rows : {&res.new_trained, &res.reused}) {
          for (const auto& r : final_rows(*rows)) {
            note("%-12s seed %llu %-11s %s %+.4f", r.pathway.c_str(),
                   static_cast<unsigned long long>(seed), r.variant.c_str(),
                   std::string(to_string(r.pool)).c_str(), r.mean_delta_r);
          }
          all.insert(all.end(), rows->begin(), rows->end());
        }
      }
    }
  }
  emit_results(all, (kOut / "transfer").string());
  bool ok = hashes;
  for (const auto& label : {"O-OAE+AD", "M-OAE+AD", "O-OAE+HE+AD", "M-OAE+HE+AD"}) {
    for (auto side : {PoolSide::kOld, PoolSide::kNew}) {
      const double fresh = final_mean(all, label, side, "new_trained", "Chicken");
      const double reused = final_mean(all, label, side, "reused", "Chicken");
      const double gap = std::abs(reused - fresh);
      ok &= gap <= 0.15;
      note("%-12s %s new-trained %+.3f reused %+.3f gap %.3f", label,
             std::string(to_string(side)).c_str(), fresh, reused, gap);
    }
  }
  note("reused estimator hash equals source hash: %s", hashes ? "yes" : "no");
  return ok;
}

// ---------------------------------------------------------------- 10

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

bool run_cli(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string exe = F3LAB_PATH;
  const std::string small =
      " --seed 3 --set hidden=8 --set epochs=40 --set eval_every=20 --set eval_games=10"
      " --set memory_games=30 --set memory_capacity=40 --set oae_steps=30";
  // Relative paths, so the written configs do not name the directory.
  const std::string d = ".";
  const std::vector<std::string> cmds{
      " populate-memory" + small + " -o " + d + "/memory.tsv",
      " train-oae" + small + " -m " + d + "/memory.tsv -o " + d + "/oae.ckpt",
      " train" + small + " --set pathway=oae_he_ad -m " + d + "/memory.tsv --oae " + d +
          "/oae.ckpt -o " + d + "/train-oae",
      " train" + small + " --set pathway=he_ad -o " + d + "/train-he",
      " train" + small + " --set pathway=dqn -o " + d + "/train-dqn",
      " train" + small + " --set pathway=qlearning -o " + d + "/train-q",
      " eval" + small + " --set pathway=he_ad -a " + d + "/train-he/agent-seed3.ckpt -o " + d +
          "/eval",
      " populate-memory" + small + " --populate from-checkpoint --agent " + d +
          "/train-he/agent-seed3.ckpt -o " + d + "/memory-agent.tsv",
      " transfer --seed 3 --source-set hidden=8 --source-set memory_games=30"
      " --source-set oae_steps=30 --source-set pathway=oae_ad --target-set hidden=8"
      " --target-set memory_games=30 --target-set oae_steps=30 --target-set pathway=oae_ad"
      " --target-set game=Chicken --target-set epochs=40 --target-set eval_every=20"
      " --target-set eval_games=10 -o " + d + "/transfer",
  };
  for (const auto& c : cmds) {
    const std::string line = "cd '" + dir.string() + "' && " + exe + c + " > .log 2>&1";
    if (std::system(line.c_str()) != 0) {
      note("command failed: f3lab%s", c.c_str());
      return false;
    }
  }
  fs::remove(dir / ".log");
  return true;
}

bool determinism() {
  bool ok = true;
  // In-process: every pathway, twice.
  for (auto p : {Pathway::kHeAd, Pathway::kPg, Pathway::kOaeAd, Pathway::kOaeHeAd,
                 Pathway::kQLearning, Pathway::kDqn}) {
    ExperimentConfig cfg;
    cfg.pathway = p;
    cfg.hidden = 16;
    cfg.epochs = 200;
    cfg.eval_every = 100;
    cfg.eval_games = 20;
    cfg.memory_games = 100;
    cfg.oae_steps = 100;
    const auto a = run_cell(cfg, 11);
    const auto b = run_cell(cfg, 11);
    bool same = results_tsv(a.rows) == results_tsv(b.rows) &&
                a.agent->checkpoint() == b.agent->checkpoint();
    if (a.oae) same &= a.oae->checkpoint() == b.oae->checkpoint();
    if (a.memory) same &= memory_bytes(*a.memory) == memory_bytes(*b.memory);
    ok &= same;
    note("%-12s run twice: %s", std::string(pathway_label(p, SuffixMode::kOneStep)).c_str(),
           same ? "identical" : "DIFFERENT");
  }
  // Command line: the same commands into two directories.
  const auto d1 = kOut / "cli-1", d2 = kOut / "cli-2";
  if (!run_cli(d1) || !run_cli(d2)) return false;
  const auto f1 = directory_bytes(d1), f2 = directory_bytes(d2);
  int same = 0;
  for (const auto& [name, bytes] : f1) {
    const auto it = f2.find(name);
    const bool eq = it != f2.end() && it->second == bytes;
    same += eq;
    if (!eq) note("differs: %s", name.c_str());
  }
  note("command line: %d/%zu output files identical", same, f1.size());
  return ok && f1.size() == f2.size() && same == static_cast<int>(f1.size()) && !f1.empty();
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    bool (*run)();
  };
  const std::vector<Criterion> all{
      {1, "payoff tables", payoff_tables},
      {2, "deterministic matchups vs brute-force simulator", matchup_oracle},
      {3, "finite-difference gradient suite", gradient_suite},
      {4, "retrieval vs exhaustive scan", retrieval_oracle},
      {5, "eviction removes the global minimum", eviction_property},
      {6, "OAE training lowers the loss", oae_training_signal},
      {7, "OAE unchanged by 5000 epochs of policy training", freeze_contract},
      {8, "comparison grid ordering (PD, 5 seeds, 20000 epochs)", comparison_grid},
      {9, "cross-game OAE reuse gap on Chicken", transfer},
      {10, "byte-identical reruns", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  fs::create_directories(kOut);
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::printf("criterion %d: %s\n", c.id, c.name);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    try {
      pass = c.run();
    } catch (const std::exception& e) {
      note("exception: %s", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s (%.1f s)\n", pass ? "PASS" : "FAIL", c.id, c.name, secs);
    std::fflush(stdout);
    failed += !pass;
  }
  return failed == 0 ? 0 : 1;
}
