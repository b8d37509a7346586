#pragma once

// Full-ranking top-K evaluation (recall@K, ndcg@K with binary gains),
// sparsity-group breakdown and gradient-magnitude curves.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "kgp/graph_store.hpp"
#include "kgp/recommender.hpp"

namespace kgp {

// Every item ordered by predicted score (descending, ties to the smaller id),
// with `exclude` (sorted) removed.
std::vector<ItemId> rank_items(const RecommenderParams& rec, UserId u, std::span<const ItemId> exclude);

// First k entries of rank_items without sorting the whole catalogue.
std::vector<ItemId> top_k_items(const RecommenderParams& rec, UserId u,
                                std::span<const ItemId> exclude, std::size_t k);

// |top-k ∩ relevant| / |relevant|. `relevant` must be sorted and non-empty.
double recall_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k);

// DCG@k / IDCG@k, gains 1/log2(rank + 1) for hits at 1-based rank.
double ndcg_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k);

struct UserMetrics {
  UserId user = 0;
  double recall = 0.0;
  double ndcg = 0.0;
};

struct RankingMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t k = 20;
  std::size_t users = 0;
};

// Scores every user with a non-empty `relevant` list; the rest are skipped.
std::vector<UserMetrics> evaluate_users(const RecommenderParams& rec,
                                        const std::vector<std::vector<ItemId>>& exclude,
                                        const std::vector<std::vector<ItemId>>& relevant,
                                        std::size_t k);

// Test-side evaluation with train positives excluded.
std::vector<UserMetrics> evaluate_users(const RecommenderParams& rec, const InteractionStore& data,
                                        std::size_t k);

RankingMetrics average_metrics(std::span<const UserMetrics> per_user, std::size_t k);

class StreamingMean {
 public:
  void add(double x) {
    ++count_;
    mean_ += (x - mean_) / static_cast<double>(count_);
  }
  double mean() const noexcept { return mean_; }
  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
};

// Mean delta per epoch, one entry per input row.
std::vector<double> gradient_curve(const std::vector<std::vector<double>>& deltas_per_epoch);

struct SparsityBucket {
  std::size_t users = 0;
  std::size_t min_interactions = 0;
  std::size_t max_interactions = 0;
  double recall = 0.0;
  double ndcg = 0.0;
};

struct SparsityReport {
  std::array<SparsityBucket, 4> buckets{};
  // Bucket index per entry of the metrics passed in.
  std::vector<std::size_t> assignment;
};

// Users sorted by train interaction count and cut into four groups that each
// hold about a quarter of the total interaction mass.
SparsityReport sparsity_report(std::span<const UserMetrics> per_user,
                               std::span<const std::size_t> train_counts);

void write_sparsity_csv(const std::filesystem::path& path, const SparsityReport& report);

}  // namespace kgp
