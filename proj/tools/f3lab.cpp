// f3lab: memory population, OAE pre-training, policy training and the
// comparison/transfer experiments from the command line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "f3/errors.hpp"
#include "f3/harness.hpp"

namespace fs = std::filesystem;
using namespace f3;

namespace {

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.file, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--set", a.overrides, "override a config key, key=value (repeatable)");
  cmd->add_option("--seed", a.seed, "run this seed only");
}

ExperimentConfig resolve(const ConfigArgs& a) {
  ExperimentConfig cfg = a.file.empty() ? ExperimentConfig{} : load_config(a.file);
  for (const auto& o : a.overrides) apply_override(cfg, o);
  if (a.seed) cfg.seeds = {*a.seed};
  validate_config(cfg);
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Resolved config next to a single-file output, e.g. memory.tsv.config.json.
void write_config_beside(const std::string& file, const ExperimentConfig& cfg) {
  const auto parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  write_text_file(file + ".config.json", config_to_json(cfg));
}

void print_row(const ResultRow& r) {
  std::printf("%-14s %-4s epoch %6ld seed %llu  dR %+.4f  se %.4f%s%s\n", r.pathway.c_str(),
              std::string(to_string(r.pool)).c_str(), r.epoch,
              static_cast<unsigned long long>(r.seed), r.mean_delta_r, r.stderr_,
              r.variant.empty() ? "" : "  ", r.variant.c_str());
  std::fflush(stdout);
}

std::shared_ptr<OpponentActionEstimator> load_oae(const std::string& path) {
  auto oae = OpponentActionEstimator::from_checkpoint(nn::load_checkpoint_file(path));
  if (!oae->frozen()) oae->freeze();
  return std::shared_ptr<OpponentActionEstimator>(std::move(oae));
}

std::shared_ptr<PastMemory> load_memory_for(const ExperimentConfig& cfg, const std::string& path) {
  return std::make_shared<PastMemory>(load_memory(path, resolve_game(cfg.game), cfg.memory_capacity));
}

int cmd_list_strategies() {
  const auto pool = default_pool();
  const auto side_of = [&pool](const std::string& id) -> std::string {
    if (std::count(pool.old_ids.begin(), pool.old_ids.end(), id)) return "old";
    if (std::count(pool.new_ids.begin(), pool.new_ids.end(), id)) return "new";
    return "-";
  };
  for (const auto& id : strategy_ids()) {
    std::printf("%-22s %-4s %s\n", id.c_str(), side_of(id).c_str(),
                std::string(strategy_description(id)).c_str());
  }
  return 0;
}

int cmd_populate(const ConfigArgs& a, const std::string& mode, const std::string& agent_file,
                 const std::string& out) {
  ExperimentConfig cfg = resolve(a);
  if (!mode.empty()) cfg.populate = mode;
  if (!agent_file.empty()) cfg.populate_agent = agent_file;
  validate_config(cfg);
  const auto seed = cfg.seeds.front();
  Rng rng(stream_seed(seed, "memory"));
  std::shared_ptr<PastMemory> memory;
  if (cfg.populate == "from-checkpoint") {
    std::istringstream in(read_text_file(cfg.populate_agent));
    const auto ck = nn::read_checkpoint(in);
    ExperimentConfig pc = cfg;
    pc.pathway = pathway_from_string(ck.meta_at("pathway"));
    if (uses_oae(pc.pathway)) throw ConfigError("from-checkpoint population needs an agent without an OAE");
    pc.hidden = std::stoi(ck.meta_at("hidden"));
    Rng init(stream_seed(seed, "populate-init"));
    auto agent = make_agent(agent_config(pc, resolve_game(cfg.game).num_actions()), init);
    agent->restore(read_text_file(cfg.populate_agent));
    memory = populate_memory_with(cfg, *agent, rng);
  } else {
    memory = populate_memory(cfg, rng);
  }
  write_config_beside(out, cfg);
  save_memory(out, *memory);
  std::printf("wrote %zu records to %s\n", memory->size(), out.c_str());
  return 0;
}

int cmd_train_oae(const ConfigArgs& a, const std::string& memory_file, const std::string& out) {
  const ExperimentConfig cfg = resolve(a);
  const auto seed = cfg.seeds.front();
  const auto memory = load_memory_for(cfg, memory_file);
  Rng rng(stream_seed(seed, "oae"));
  OaeTrainReport report;
  const auto oae = pretrain_oae(cfg, *memory, rng, &report);
  write_config_beside(out, cfg);
  write_text_file(out, oae->checkpoint());
  std::ostringstream losses;
  losses << "step\tloss\n";
  char buf[48];
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", report.losses[i]);
    losses << i + 1 << '\t' << buf << '\n';
  }
  write_text_file(out + ".losses.tsv", losses.str());
  std::printf("loss first-100 %.5f  last-100 %.5f  -> %s\n", report.mean_first(100),
              report.mean_last(100), out.c_str());
  return 0;
}

int cmd_train(const ConfigArgs& a, const std::string& memory_file, const std::string& oae_file,
              std::string out) {
  const ExperimentConfig cfg = resolve(a);
  if (out.empty()) out = cfg.output_dir;
  ensure_dir(out);
  write_text_file(in_dir(out, "config.json"), config_to_json(cfg));
  std::vector<ResultRow> rows;
  for (const auto seed : cfg.seeds) {
    TrainingResult res;
    if (!memory_file.empty() || !oae_file.empty()) {
      if (!uses_oae(cfg.pathway)) throw ConfigError("--memory/--oae only apply to OAE pathways");
      if (memory_file.empty() || oae_file.empty()) throw ConfigError("give both --memory and --oae");
      res = run_training(cfg, seed, load_oae(oae_file), load_memory_for(cfg, memory_file), print_row);
    } else {
      res = run_cell(cfg, seed, print_row);
    }
    const std::string tag = "seed" + std::to_string(seed);
    write_text_file(in_dir(out, "agent-" + tag + ".ckpt"), res.agent->checkpoint());
    if (res.oae) write_text_file(in_dir(out, "oae-" + tag + ".ckpt"), res.oae->checkpoint());
    if (res.memory) save_memory(in_dir(out, "memory-" + tag + ".tsv"), *res.memory);
    rows.insert(rows.end(), res.rows.begin(), res.rows.end());
  }
  emit_results(rows, out);
  std::printf("results in %s\n", out.c_str());
  return 0;
}

int cmd_eval(const ConfigArgs& a, const std::string& agent_file, const std::string& memory_file,
             const std::string& oae_file, const std::string& out) {
  const ExperimentConfig cfg = resolve(a);
  const auto seed = cfg.seeds.front();
  const PayoffMatrix game = resolve_game(cfg.game);
  std::shared_ptr<const OpponentActionEstimator> oae;
  std::shared_ptr<PastMemory> memory;
  if (uses_oae(cfg.pathway)) {
    if (memory_file.empty() || oae_file.empty()) throw ConfigError("OAE pathways need --memory and --oae");
    oae = load_oae(oae_file);
    memory = load_memory_for(cfg, memory_file);
  }
  Rng init(stream_seed(seed, "init"));
  auto agent = make_agent(agent_config(cfg, game.num_actions()), init, oae, memory);
  agent->restore(read_text_file(agent_file));
  std::vector<ResultRow> rows;
  for (PoolSide side : {PoolSide::kOld, PoolSide::kNew}) {
    Rng rng(derive_seed(stream_seed(seed, "eval"), "cli/" + std::string(to_string(side))));
    ResultRow row = evaluate(*agent, cfg, side, rng, 0);
    row.seed = seed;
    print_row(row);
    rows.push_back(row);
  }
  if (!out.empty()) {
    ensure_dir(out);
    write_text_file(in_dir(out, "config.json"), config_to_json(cfg));
    emit_results(rows, out);
  }
  return 0;
}

int cmd_transfer(const ConfigArgs& src_args, const ConfigArgs& dst_args, std::string out) {
  const ExperimentConfig source = resolve(src_args);
  const ExperimentConfig target = resolve(dst_args);
  if (out.empty()) out = target.output_dir;
  ensure_dir(out);
  write_text_file(in_dir(out, "source.config.json"), config_to_json(source));
  write_text_file(in_dir(out, "config.json"), config_to_json(target));
  std::vector<ResultRow> rows;
  for (const auto seed : target.seeds) {
    const auto res = run_transfer(source, target, seed);
    for (const auto& r : res.new_trained) print_row(r);
    for (const auto& r : res.reused) print_row(r);
    std::printf("seed %llu: source OAE %016llx, reused %016llx\n",
                static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(res.source_oae_hash),
                static_cast<unsigned long long>(res.reused_oae_hash));
    rows.insert(rows.end(), res.new_trained.begin(), res.new_trained.end());
    rows.insert(rows.end(), res.reused.begin(), res.reused.end());
  }
  emit_results(rows, out);
  std::printf("results in %s\n", out.c_str());
  return 0;
}

// Final-epoch means over seeds: one line per model, one column per
// game x pool, in the order rows first appear.
int cmd_table(const std::vector<std::string>& files) {
  std::vector<ResultRow> rows;
  for (const auto& f : files) {
    auto part = parse_results_tsv(read_text_file(f));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::vector<std::string> labels, columns;
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> cells;
  const auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : final_rows(rows)) {
    const std::string label = r.variant.empty() ? r.pathway : r.pathway + " [" + r.variant + "]";
    const std::string column = r.game + "/" + std::string(to_string(r.pool));
    remember(labels, label);
    remember(columns, column);
    auto& c = cells[{label, column}];
    c.first += r.mean_delta_r;
    ++c.second;
  }
  std::printf("%-28s", "model");
  for (const auto& c : columns) std::printf(" %14s", c.c_str());
  std::printf("\n");
  for (const auto& l : labels) {
    std::printf("%-28s", l.c_str());
    for (const auto& c : columns) {
      const auto it = cells.find({l, c});
      if (it == cells.end()) {
        std::printf(" %14s", "-");
      } else {
        std::printf(" %14.3f", it->second.first / it->second.second);
      }
    }
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f3lab: fast-adapting agents in finitely repeated games"};
  app.require_subcommand(1);

  ConfigArgs pop_args, oae_args, train_args, eval_args, src_args, dst_args;
  std::string populate_mode, populate_agent, pop_out = "memory.tsv";
  auto* pop = app.add_subcommand("populate-memory", "fill a Past Memory with warm-up games");
  add_config_options(pop, pop_args);
  pop->add_option("--populate", populate_mode, "random | from-checkpoint")
      ->check(CLI::IsMember({"random", "from-checkpoint"}));
  pop->add_option("--agent", populate_agent, "agent checkpoint for from-checkpoint");
  pop->add_option("-o,--out", pop_out, "memory file");

  std::string oae_memory, oae_out = "oae.ckpt";
  auto* toae = app.add_subcommand("train-oae", "pre-train and freeze an Opponent Action Estimator");
  add_config_options(toae, oae_args);
  toae->add_option("-m,--memory", oae_memory, "memory file")->required()->check(CLI::ExistingFile);
  toae->add_option("-o,--out", oae_out, "checkpoint file");

  std::string train_memory, train_oae_file, train_out;
  auto* train = app.add_subcommand("train", "train a pathway with periodic evaluation");
  add_config_options(train, train_args);
  train->add_option("-m,--memory", train_memory, "use this memory instead of populating one");
  train->add_option("--oae", train_oae_file, "use this OAE instead of pre-training one");
  train->add_option("-o,--out", train_out, "output directory (default: config output_dir)");

  std::string eval_agent, eval_memory, eval_oae, eval_out;
  auto* ev = app.add_subcommand("eval", "greedy evaluation of a trained agent on both pools");
  add_config_options(ev, eval_args);
  ev->add_option("-a,--agent", eval_agent, "agent checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("-m,--memory", eval_memory, "memory file (OAE pathways)");
  ev->add_option("--oae", eval_oae, "OAE checkpoint (OAE pathways)");
  ev->add_option("-o,--out", eval_out, "output directory for results");

  std::string transfer_out;
  auto* tr = app.add_subcommand("transfer", "reuse a source-game OAE on a target game");
  tr->add_option("--source", src_args.file, "source-game config")->check(CLI::ExistingFile);
  tr->add_option("--source-set", src_args.overrides, "override a source config key");
  tr->add_option("--target", dst_args.file, "target-game config")->check(CLI::ExistingFile);
  tr->add_option("--target-set", dst_args.overrides, "override a target config key");
  tr->add_option("--seed", dst_args.seed, "run this seed only");
  tr->add_option("-o,--out", transfer_out, "output directory (default: target output_dir)");

  std::vector<std::string> table_files;
  auto* table = app.add_subcommand("table", "summarise result tables by model and pool");
  table->add_option("results", table_files, "results.tsv files")->required()->check(CLI::ExistingFile);

  auto* list = app.add_subcommand("list-strategies", "print the strategy catalog");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pop) return cmd_populate(pop_args, populate_mode, populate_agent, pop_out);
    if (*toae) return cmd_train_oae(oae_args, oae_memory, oae_out);
    if (*train) return cmd_train(train_args, train_memory, train_oae_file, train_out);
    if (*ev) return cmd_eval(eval_args, eval_agent, eval_memory, eval_oae, eval_out);
    if (*tr) {
      src_args.seed = dst_args.seed;
      return cmd_transfer(src_args, dst_args, transfer_out);
    }
    if (*table) return cmd_table(table_files);
    if (*list) return cmd_list_strategies();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
