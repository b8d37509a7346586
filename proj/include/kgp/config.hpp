#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kgp/kgpolicy_sampler.hpp"

namespace kgp {

enum class SamplerKind { rns, pns, dns, rws, kgpolicy };
enum class RewardMode { both, prediction_only, similarity_only };
enum class WarmStart { auto_, always, never };

SamplerKind parse_sampler(const std::string& name);
std::string to_string(SamplerKind kind);
RewardMode parse_reward(const std::string& name);
std::string to_string(RewardMode mode);
PolicyEstimator parse_estimator(const std::string& name);
std::string to_string(PolicyEstimator e);

// Hyperparameter grids searched in the reference experiments.
inline const std::vector<double> kLearningRateGrid{0.0001, 0.0005, 0.001, 0.005};
inline const std::vector<double> kL2Grid{1e-6, 1e-5, 1e-4, 1e-3};
inline const std::vector<std::size_t> kPrunedSizeGrid{4, 8, 16, 32, 64};

struct TrainConfig {
  std::string data_dir;
  SamplerKind sampler = SamplerKind::kgpolicy;
  std::uint64_t seed = 0;

  std::size_t dim = 64;
  std::size_t layers = 2;
  double lr_rec = 0.001;
  double lr_sampler = 0.001;
  double l2 = 1e-5;
  std::size_t batch_size = 1024;
  std::size_t sampler_batch_size = 1024;
  std::size_t epochs = 50;

  std::size_t steps = 2;  // exploration operations per rollout
  std::size_t n1 = 64;
  std::size_t n2 = 32;
  std::size_t n_rand = 8;
  double gamma = 1.0;
  double slope = 0.01;
  RewardMode reward = RewardMode::both;
  PolicyEstimator estimator = PolicyEstimator::return_to_go;
  std::size_t baseline_window = 10000;

  std::size_t k_dns = 16;
  std::size_t rws_walk_len = 16;
  double pns_exponent = 0.75;

  WarmStart warm_start = WarmStart::auto_;
  std::size_t pretrain_epochs = 200;  // cap
  std::size_t pretrain_patience = 10;
  double validation_fraction = 0.05;

  std::size_t eval_every = 5;
  std::size_t top_k = 20;
  std::size_t checkpoint_every = 0;  // 0: only at the end

  // Throws ConfigError on out-of-domain values.
  void validate() const;
  bool uses_warm_start() const;
  PolicyConfig policy() const;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

}  // namespace kgp
