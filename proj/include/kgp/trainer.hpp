#pragma once

// Warm start plus alternating optimization: each epoch encodes the graph,
// trains the recommender on one sampled negative per positive, then (for the
// policy sampler) rolls out an equal number of trajectories and takes
// REINFORCE steps on the sampler.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgp/baseline_samplers.hpp"
#include "kgp/config.hpp"
#include "kgp/evaluation.hpp"
#include "kgp/graph_encoder.hpp"
#include "kgp/graph_store.hpp"
#include "kgp/kgpolicy_sampler.hpp"
#include "kgp/recommender.hpp"

namespace kgp {

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string phase;  // "pretrain" or "train"
  double bpr_loss = 0.0;
  double avg_delta = 0.0;
  std::optional<double> recall;
  std::optional<double> ndcg;
  std::optional<double> mean_reward;
  std::optional<double> baseline;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows,
                       std::size_t k = 20);

// Holds out `fraction` of each user's train items (at least one when the user
// has two or more) for early stopping.
struct ValidationSplit {
  std::vector<std::vector<ItemId>> fit;
  std::vector<std::vector<ItemId>> held_out;
};
ValidationSplit split_validation(const InteractionStore& data, double fraction, Rng& rng);

class Trainer {
 public:
  Trainer(const Dataset& dataset, TrainConfig config);

  // Draws initial parameters and, when configured, runs the warm start.
  void initialize();

  // MF with uniform negatives until validation recall@K stops improving for
  // `pretrain_patience` epochs or the epoch cap. Returns the best parameters.
  RecommenderParams pretrain();

  // (a) encode, (b) recommender phase, (c) sampler phase, (d) metrics.
  EpochMetrics run_epoch();
  void train();

  // Phases of run_epoch, exposed for the freeze contract tests.
  BprStepStats recommender_phase();
  std::optional<ReinforceStats> sampler_phase();

  RankingMetrics evaluate() const;
  std::vector<UserMetrics> evaluate_per_user() const;
  std::vector<Trajectory> sample_trajectories(std::size_t n);

  void save_checkpoint(const std::filesystem::path& path) const;
  // Restores every piece of training state, including the random stream.
  static Trainer resume(const Dataset& dataset, const std::filesystem::path& path);
  static TrainConfig checkpoint_config(const std::filesystem::path& path);

  const TrainConfig& config() const noexcept { return config_; }
  const RecommenderParams& recommender() const noexcept { return rec_; }
  const SamplerParams& sampler_params() const noexcept { return sampler_; }
  const RewardBaseline& baseline() const noexcept { return baseline_; }
  const std::vector<EpochMetrics>& log() const noexcept { return log_; }
  // Per-sample deltas of the most recent recommender phase.
  const std::vector<double>& last_deltas() const noexcept { return last_deltas_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t negatives_drawn() const noexcept { return negatives_drawn_; }
  bool has_policy() const noexcept { return config_.sampler == SamplerKind::kgpolicy; }

 private:
  ItemId draw_negative(UserId u, ItemId pos, const EncodedGraph* encoded);
  void refresh_encoding();
  PolicyContext policy_context(const EncodedGraph& encoded) const;

  const Dataset& dataset_;
  TrainConfig config_;
  PolicyConfig policy_;
  Rng rng_;
  RecommenderParams rec_;
  MfOptimizer mf_opt_;
  SamplerParams sampler_;
  PolicyOptimizer policy_opt_;
  RewardBaseline baseline_;
  std::unique_ptr<PopularityTable> popularity_;
  std::optional<EncodedGraph> encoded_;
  std::vector<EpochMetrics> log_;
  std::vector<double> last_deltas_;
  std::size_t epoch_ = 0;         // completed alternating epochs
  std::size_t log_epoch_ = 0;     // global row index including warm start
  std::size_t negatives_drawn_ = 0;
  bool initialized_ = false;
};

}  // namespace kgp
