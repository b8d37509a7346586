// kgpolicy: train, evaluate and compare negative samplers from the shell.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgp/config.hpp"
#include "kgp/error.hpp"
#include "kgp/evaluation.hpp"
#include "kgp/synthetic.hpp"
#include "kgp/trainer.hpp"

namespace fs = std::filesystem;
using namespace kgp;

namespace {

struct RunSummary {
  std::string sampler;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  double avg_delta = 0.0;
  std::size_t users = 0;
};

void write_report(const fs::path& path, const std::vector<RunSummary>& runs, std::size_t k) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "sampler,seed,epochs,users,recall@" << k << ",ndcg@" << k << ",avg_delta\n";
  for (const auto& r : runs) {
    out << r.sampler << ',' << r.seed << ',' << r.epochs << ',' << r.users << ',' << r.recall << ','
        << r.ndcg << ',' << r.avg_delta << '\n';
  }
}

TrainConfig load_config(const std::string& path) {
  return path.empty() ? TrainConfig{} : TrainConfig::load(path);
}

Dataset load_data(const std::string& override_dir, const TrainConfig& config) {
  const std::string dir = override_dir.empty() ? config.data_dir : override_dir;
  if (dir.empty()) throw UsageError("no dataset directory: pass --data or set data_dir in the config");
  return Dataset::load(dir);
}

std::vector<std::size_t> user_train_counts(const Dataset& data) {
  std::vector<std::size_t> counts(data.data.num_users());
  for (std::size_t u = 0; u < counts.size(); ++u) counts[u] = data.data.train(static_cast<UserId>(u)).size();
  return counts;
}

RunSummary summarize(const Trainer& trainer) {
  const auto per_user = trainer.evaluate_per_user();
  const auto m = average_metrics(per_user, trainer.config().top_k);
  RunSummary s;
  s.sampler = to_string(trainer.config().sampler);
  s.seed = trainer.config().seed;
  s.epochs = trainer.epoch();
  s.recall = m.recall;
  s.ndcg = m.ndcg;
  s.users = m.users;
  s.avg_delta = trainer.log().empty() ? 0.0 : trainer.log().back().avg_delta;
  return s;
}

// Trains to the configured epoch count, checkpointing on schedule, and writes
// the standard run artifacts into `out`.
RunSummary run_training(Trainer& trainer, const Dataset& data, const fs::path& out) {
  fs::create_directories(out);
  const auto& cfg = trainer.config();
  trainer.initialize();
  while (trainer.epoch() < cfg.epochs) {
    const auto row = trainer.run_epoch();
    std::cerr << "epoch " << trainer.epoch() << " loss " << row.bpr_loss << " delta " << row.avg_delta;
    if (row.recall) std::cerr << " recall@" << cfg.top_k << ' ' << *row.recall;
    std::cerr << '\n';
    if (cfg.checkpoint_every > 0 && trainer.epoch() % cfg.checkpoint_every == 0) {
      trainer.save_checkpoint(out / "checkpoint.bin");
    }
  }
  trainer.save_checkpoint(out / "checkpoint.bin");
  write_metrics_csv(out / "metrics.csv", trainer.log(), cfg.top_k);
  const auto per_user = trainer.evaluate_per_user();
  write_sparsity_csv(out / "sparsity.csv", sparsity_report(per_user, user_train_counts(data)));
  auto summary = summarize(trainer);
  write_report(out / "report.csv", {summary}, cfg.top_k);
  return summary;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph policy negative sampling for BPR matrix factorization"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "run", sampler_name, checkpoint, resume_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::size_t n_paths = 10;
  std::string samplers = "rns,dns,kgpolicy", seeds = "0";
  SyntheticConfig synth;

  auto* train = app.add_subcommand("train", "Train one model");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--data", data_dir, "Dataset directory (overrides data_dir)");
  train->add_option("--sampler", sampler_name, "rns|pns|dns|rws|kgpolicy");
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--epochs", epochs, "Alternating epochs");
  train->add_option("--out", out_dir, "Output directory")->capture_default_str();
  train->add_option("--resume", resume_path, "Continue from a checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data_dir, "Dataset directory (defaults to the checkpoint's)");
  std::string sparsity_out;
  eval->add_option("--sparsity", sparsity_out, "Write per-bucket metrics to this CSV");

  auto* paths = app.add_subcommand("export-paths", "Write sampled exploration paths as JSON lines");
  paths->add_option("--checkpoint", checkpoint, "Checkpoint of a kgpolicy run")->required();
  paths->add_option("--n", n_paths, "Number of trajectories")->capture_default_str();
  paths->add_option("--data", data_dir, "Dataset directory (defaults to the checkpoint's)");
  std::string paths_out = "paths.jsonl";
  paths->add_option("--out", paths_out, "Output file")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Train several samplers under one config");
  compare->add_option("--samplers", samplers, "Comma-separated sampler names")->capture_default_str();
  compare->add_option("--config", config_path, "JSON config file");
  compare->add_option("--data", data_dir, "Dataset directory (overrides data_dir)");
  compare->add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();
  compare->add_option("--out", out_dir, "Output directory")->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic attribute world");
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--users", synth.users)->capture_default_str();
  synth_cmd->add_option("--items", synth.items)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (!resume_path.empty()) {
        const auto cfg = Trainer::checkpoint_config(resume_path);
        const Dataset data = load_data(data_dir, cfg);
        Trainer trainer = Trainer::resume(data, resume_path);
        run_training(trainer, data, out_dir);
        return 0;
      }
      TrainConfig cfg = load_config(config_path);
      if (!sampler_name.empty()) cfg.sampler = parse_sampler(sampler_name);
      if (seed) cfg.seed = *seed;
      if (epochs) cfg.epochs = *epochs;
      if (!data_dir.empty()) cfg.data_dir = fs::absolute(data_dir).string();
      cfg.validate();
      const Dataset data = load_data("", cfg);
      Trainer trainer(data, cfg);
      const auto s = run_training(trainer, data, out_dir);
      std::cout << s.sampler << " seed " << s.seed << " recall@" << cfg.top_k << ' ' << s.recall
                << " ndcg@" << cfg.top_k << ' ' << s.ndcg << '\n';
    } else if (*eval) {
      const auto cfg = Trainer::checkpoint_config(checkpoint);
      const Dataset data = load_data(data_dir, cfg);
      const Trainer trainer = Trainer::resume(data, checkpoint);
      const auto per_user = trainer.evaluate_per_user();
      const auto m = average_metrics(per_user, cfg.top_k);
      std::cout << "users " << m.users << " recall@" << cfg.top_k << ' ' << m.recall << " ndcg@"
                << cfg.top_k << ' ' << m.ndcg << '\n';
      if (!sparsity_out.empty()) {
        write_sparsity_csv(sparsity_out, sparsity_report(per_user, user_train_counts(data)));
      }
    } else if (*paths) {
      const auto cfg = Trainer::checkpoint_config(checkpoint);
      const Dataset data = load_data(data_dir, cfg);
      Trainer trainer = Trainer::resume(data, checkpoint);
      std::ofstream out(paths_out);
      if (!out) throw LoadError("cannot write " + paths_out);
      for (const auto& t : trainer.sample_trajectories(n_paths)) out << trajectory_json(t, data.layout) << '\n';
    } else if (*compare) {
      TrainConfig base = load_config(config_path);
      if (!data_dir.empty()) base.data_dir = fs::absolute(data_dir).string();
      const Dataset data = load_data("", base);
      std::vector<RunSummary> runs;
      for (const auto& name : split_list(samplers)) {
        for (const auto& s : split_list(seeds)) {
          TrainConfig cfg = base;
          cfg.sampler = parse_sampler(name);
          cfg.seed = std::stoull(s);
          cfg.validate();
          Trainer trainer(data, cfg);
          runs.push_back(run_training(trainer, data, fs::path(out_dir) / (name + "_seed" + s)));
          std::cout << name << " seed " << s << " recall@" << cfg.top_k << ' ' << runs.back().recall
                    << '\n';
        }
      }
      write_report(fs::path(out_dir) / "report.csv", runs, base.top_k);
    } else if (*synth_cmd) {
      write_dataset(out_dir, make_synthetic_world(synth));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
