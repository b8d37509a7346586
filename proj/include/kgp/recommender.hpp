#pragma once

// Matrix-factorization recommender trained with the pairwise BPR loss.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "kgp/adam.hpp"
#include "kgp/graph_store.hpp"
#include "kgp/matrix.hpp"

namespace kgp {

struct PairwiseSample {
  UserId user = 0;
  ItemId pos = 0;
  ItemId neg = 0;
};

class RecommenderParams {
 public:
  RecommenderParams() = default;
  RecommenderParams(std::size_t num_users, std::size_t num_items, std::size_t dim)
      : user_emb_(num_users, dim), item_emb_(num_items, dim) {}

  static RecommenderParams xavier(std::size_t num_users, std::size_t num_items, std::size_t dim,
                                  Rng& rng);

  std::size_t dim() const noexcept { return user_emb_.cols(); }
  std::size_t num_users() const noexcept { return user_emb_.rows(); }
  std::size_t num_items() const noexcept { return item_emb_.rows(); }

  Matrix& user_emb() noexcept { return user_emb_; }
  Matrix& item_emb() noexcept { return item_emb_; }
  const Matrix& user_emb() const noexcept { return user_emb_; }
  const Matrix& item_emb() const noexcept { return item_emb_; }

  std::span<const double> user(UserId u) const;
  std::span<const double> item(ItemId i) const;

  // Header (magic "KGPR", d, |U|, |I|) followed by both tables as row-major
  // little-endian doubles.
  void write(std::ostream& out) const;
  static RecommenderParams read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static RecommenderParams load(const std::filesystem::path& path);

  bool operator==(const RecommenderParams&) const = default;

 private:
  Matrix user_emb_;
  Matrix item_emb_;
};

double sigmoid(double x);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// r_u . r_i
double predict(const RecommenderParams& params, UserId u, ItemId i);

// -ln sigma(y_ui - y_uj) + l2 * (|r_u|^2 + |r_i|^2 + |r_j|^2)
double bpr_loss(const RecommenderParams& params, const PairwiseSample& s, double l2);

struct BprGradients {
  std::vector<double> user;
  std::vector<double> pos;
  std::vector<double> neg;
};

BprGradients bpr_gradients(const RecommenderParams& params, const PairwiseSample& s, double l2);

// 1 - sigma(y_ui - y_uj), the sample's informativeness.
double gradient_magnitude(const RecommenderParams& params, const PairwiseSample& s);

struct BprStepStats {
  double mean_loss = 0.0;
  double mean_delta = 0.0;
  std::size_t samples = 0;
};

// Adam over both embedding tables. Gradients are averaged over the batch and
// only rows referenced by the batch move.
class MfOptimizer {
 public:
  MfOptimizer() = default;
  explicit MfOptimizer(const RecommenderParams& params, AdamConfig config = {});

  // Loss and delta in the returned stats are measured before the update.
  // Throws NumericError on a non-finite gradient; params are untouched then.
  BprStepStats bpr_step(RecommenderParams& params, std::span<const PairwiseSample> batch, double lr,
                        double l2);

  void write(std::ostream& out) const;
  void read(std::istream& in);

  bool operator==(const MfOptimizer& o) const {
    return user_state_ == o.user_state_ && item_state_ == o.item_state_;
  }

 private:
  AdamState user_state_;
  AdamState item_state_;
  Matrix user_grad_;
  Matrix item_grad_;
};

}  // namespace kgp
