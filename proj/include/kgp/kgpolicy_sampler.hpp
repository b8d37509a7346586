#pragma once

// Knowledge-graph policy sampler. Starting from a positive item, each
// exploration step picks an internal node among the pruned neighbors of the
// current item, then an unobserved item among the pruned item neighbors of
// that node. Both picks are softmaxes over h_u . lrelu(h_a * h_b). The final
// item of a T-step rollout is the negative handed to the recommender.

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgp/adam.hpp"
#include "kgp/graph_encoder.hpp"
#include "kgp/graph_store.hpp"
#include "kgp/recommender.hpp"

namespace kgp {

// How step rewards are paired with log-probabilities in the update.
enum class PolicyEstimator {
  // Score function times discounted return from step t on. Unbiased for the
  // expected discounted reward.
  return_to_go,
  // (1/T) gamma^(t-1) R_t times the step's own log-probability only.
  per_step,
};

struct PolicyConfig {
  std::size_t steps = 2;   // T
  std::size_t n1 = 64;     // neighbors sampled before scoring
  std::size_t n2 = 32;     // candidates kept after scoring
  std::size_t n_rand = 8;  // uniform extras drawn from the whole space
  double gamma = 1.0;
  double slope = 0.01;
  double prediction_weight = 1.0;
  double similarity_weight = 1.0;
  std::size_t baseline_window = 10000;
  PolicyEstimator estimator = PolicyEstimator::return_to_go;
};

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Stage : std::uint8_t { via, item };

// Candidate pool and softmax of one selection.
struct StageRecord {
  std::vector<NodeId> candidates;
  std::vector<double> scores;
  std::vector<double> probs;
  std::size_t chosen = 0;
};

struct ExplorationStep {
  NodeId from = kNoNode;
  NodeId via = kNoNode;
  NodeId to = kNoNode;
  double logp_first = 0.0;
  double logp_second = 0.0;
  double reward = 0.0;
  // Proposal came from the uniform fallback; contributes no gradient.
  bool fallback = false;
  StageRecord first;
  StageRecord second;
};

struct Trajectory {
  UserId user = 0;
  ItemId positive = 0;
  std::vector<ExplorationStep> steps;

  NodeId negative_node() const { return steps.back().to; }
};

// Mean of the most recent step rewards.
class RewardBaseline {
 public:
  explicit RewardBaseline(std::size_t window = 10000) : window_(window) {}

  double value() const noexcept;
  void push(double reward);
  std::size_t size() const noexcept { return rewards_.size(); }
  std::vector<double> contents() const { return {rewards_.begin(), rewards_.end()}; }

  void write(std::ostream& out) const;
  void read(std::istream& in);

  bool operator==(const RewardBaseline&) const = default;

 private:
  std::size_t window_;
  std::deque<double> rewards_;
  double sum_ = 0.0;
  std::size_t pushes_since_resum_ = 0;
};

struct PolicyContext {
  const UnifiedGraph& graph;
  const InteractionStore& data;
  const EncodedGraph& encoded;
  const RecommenderParams& rec;
  const PolicyConfig& config;
};

struct PruneSpec {
  std::size_t n1 = 64;
  std::size_t n2 = 32;
  std::size_t n_rand = 8;
  NodeId random_lo = 0;  // extras are uniform over [random_lo, random_hi)
  NodeId random_hi = 0;
};

// n1 uniform neighbors (all of them when the list is not longer than n1)
// followed by n_rand uniform nodes from the random range. May repeat.
std::vector<NodeId> draw_candidate_pool(std::span<const NodeId> neighbors, const PruneSpec& spec,
                                        Rng& rng);

// Pool from draw_candidate_pool, deduplicated, minus `excluded`, ranked by
// h_e . h_c, cut to the top n2 (ties to the smaller id).
std::vector<NodeId> prune_neighbors(NodeId e, std::span<const NodeId> neighbors,
                                    const EncodedGraph& encoded, const PruneSpec& spec, Rng& rng,
                                    const std::function<bool(NodeId)>& excluded);

// h_u . lrelu(h_from * h_to)
double attention_score(std::span<const double> h_user, std::span<const double> h_from,
                       std::span<const double> h_to, double slope);
double attention_score(const EncodedGraph& encoded, NodeId user, NodeId from, NodeId to);

// Fills scores/probs of `record` from its candidates; returns false when empty.
bool score_candidates(const EncodedGraph& encoded, NodeId user, NodeId from, StageRecord& record);

double step_reward(const RecommenderParams& rec, UserId u, ItemId positive, ItemId proposal,
                   double prediction_weight = 1.0, double similarity_weight = 1.0);

struct RolloutState {
  UserId user = 0;
  NodeId current = kNoNode;
  std::vector<NodeId> visited;

  bool was_visited(NodeId n) const;
};

// Returns the index into record.candidates to take.
using Chooser = std::function<std::size_t(Stage, const StageRecord&, Rng&)>;

std::size_t sample_index(std::span<const double> probs, Rng& rng);

struct Selection {
  NodeId node = kNoNode;
  double logp = 0.0;
  StageRecord record;
};

std::optional<Selection> select_via(const PolicyContext& ctx, const RolloutState& state, Rng& rng,
                                    const Chooser& chooser = {});
std::optional<Selection> select_item(const PolicyContext& ctx, const RolloutState& state,
                                     NodeId via, Rng& rng, const Chooser& chooser = {});

Trajectory rollout(const PolicyContext& ctx, UserId u, ItemId positive, Rng& rng,
                   const Chooser& chooser = {});

// Per-step weight multiplying the step's summed log-probability gradient.
std::vector<double> step_weights(const Trajectory& traj, double baseline, const PolicyConfig& config);

// Ascent direction of the surrogate averaged over the batch:
//   (1/B) sum_traj sum_t weight_t * grad(logp_first_t + logp_second_t)
SamplerGradients policy_gradient(const PolicyContext& ctx, const SamplerParams& params,
                                 std::span<const Trajectory> batch, double baseline);

// One JSON-lines record: user, positive item, per-step from/via/to with both
// selection probabilities and the reward, and the final negative.
std::string trajectory_json(const Trajectory& traj, const GraphLayout& layout);

struct ReinforceStats {
  double mean_reward = 0.0;
  double baseline = 0.0;
  std::size_t steps = 0;
  bool skipped = false;
};

// Adam ascent on the sampler parameters.
class PolicyOptimizer {
 public:
  PolicyOptimizer() = default;
  explicit PolicyOptimizer(const SamplerParams& params, AdamConfig config = {});

  // Trajectories must come from `ctx.encoded`, the encoding of `params`.
  // Non-finite gradients skip the update. The baseline absorbs every step
  // reward after the update either way.
  ReinforceStats reinforce_update(SamplerParams& params, const PolicyContext& ctx,
                                  std::span<const Trajectory> batch, RewardBaseline& baseline,
                                  double lr);

  void write(std::ostream& out) const;
  void read(std::istream& in);

  bool operator==(const PolicyOptimizer&) const = default;

 private:
  AdamState base_state_;
  std::vector<AdamState> weight_states_;
};

}  // namespace kgp
