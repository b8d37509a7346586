#include "kgp/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "kgp/binary_io.hpp"
#include "kgp/error.hpp"
#include "kgp/kernels.hpp"

namespace kgp {

RecommenderParams RecommenderParams::xavier(std::size_t num_users, std::size_t num_items,
                                            std::size_t dim, Rng& rng) {
  RecommenderParams p;
  p.user_emb_ = Matrix::xavier_uniform(num_users, dim, rng);
  p.item_emb_ = Matrix::xavier_uniform(num_items, dim, rng);
  return p;
}

std::span<const double> RecommenderParams::user(UserId u) const {
  if (u >= num_users()) throw ValidationError("user id " + std::to_string(u) + " out of range");
  return user_emb_.row(u);
}

std::span<const double> RecommenderParams::item(ItemId i) const {
  if (i >= num_items()) throw ValidationError("item id " + std::to_string(i) + " out of range");
  return item_emb_.row(i);
}

void RecommenderParams::write(std::ostream& out) const {
  out.write("KGPR", 4);
  io::write_pod<std::uint64_t>(out, dim());
  io::write_pod<std::uint64_t>(out, num_users());
  io::write_pod<std::uint64_t>(out, num_items());
  out.write(reinterpret_cast<const char*>(user_emb_.values().data()),
            static_cast<std::streamsize>(user_emb_.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(item_emb_.values().data()),
            static_cast<std::streamsize>(item_emb_.size() * sizeof(double)));
}

RecommenderParams RecommenderParams::read(std::istream& in) {
  io::expect_magic(in, "KGPR");
  const auto d = io::read_pod<std::uint64_t>(in);
  const auto users = io::read_pod<std::uint64_t>(in);
  const auto items = io::read_pod<std::uint64_t>(in);
  RecommenderParams p(users, items, d);
  in.read(reinterpret_cast<char*>(p.user_emb_.values().data()),
          static_cast<std::streamsize>(p.user_emb_.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(p.item_emb_.values().data()),
          static_cast<std::streamsize>(p.item_emb_.size() * sizeof(double)));
  if (!in) throw LoadError("truncated recommender checkpoint");
  return p;
}

void RecommenderParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  write(out);
}

RecommenderParams RecommenderParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return read(in);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double predict(const RecommenderParams& params, UserId u, ItemId i) {
  return kernels::dot(params.user(u), params.item(i));
}

namespace {

double score_gap(const RecommenderParams& params, const PairwiseSample& s) {
  const auto ru = params.user(s.user);
  return kernels::dot(ru, params.item(s.pos)) - kernels::dot(ru, params.item(s.neg));
}

double squared_norm(std::span<const double> v) { return kernels::dot(v, v); }

}  // namespace

double bpr_loss(const RecommenderParams& params, const PairwiseSample& s, double l2) {
  double loss = softplus(-score_gap(params, s));
  if (l2 != 0.0) {
    loss += l2 * (squared_norm(params.user(s.user)) + squared_norm(params.item(s.pos)) +
                  squared_norm(params.item(s.neg)));
  }
  return loss;
}

BprGradients bpr_gradients(const RecommenderParams& params, const PairwiseSample& s, double l2) {
  const auto ru = params.user(s.user);
  const auto ri = params.item(s.pos);
  const auto rj = params.item(s.neg);
  // d/dx [-ln sigma(x)] = sigma(x) - 1 = -sigma(-x)
  const double g = -sigmoid(-score_gap(params, s));
  const std::size_t d = params.dim();
  BprGradients out{std::vector<double>(d), std::vector<double>(d), std::vector<double>(d)};
  for (std::size_t k = 0; k < d; ++k) {
    out.user[k] = g * (ri[k] - rj[k]) + 2.0 * l2 * ru[k];
    out.pos[k] = g * ru[k] + 2.0 * l2 * ri[k];
    out.neg[k] = -g * ru[k] + 2.0 * l2 * rj[k];
  }
  // When pos == neg both terms land on the same row; the caller sums them.
  return out;
}

double gradient_magnitude(const RecommenderParams& params, const PairwiseSample& s) {
  return sigmoid(-score_gap(params, s));
}

MfOptimizer::MfOptimizer(const RecommenderParams& params, AdamConfig config)
    : user_state_(params.num_users(), params.dim(), config),
      item_state_(params.num_items(), params.dim(), config),
      user_grad_(params.num_users(), params.dim()),
      item_grad_(params.num_items(), params.dim()) {}

BprStepStats MfOptimizer::bpr_step(RecommenderParams& params, std::span<const PairwiseSample> batch,
                                   double lr, double l2) {
  if (batch.empty()) throw UsageError("bpr_step called with an empty batch");
  if (user_grad_.rows() != params.num_users() || item_grad_.rows() != params.num_items()) {
    throw UsageError("optimizer state does not match recommender shape");
  }
  BprStepStats stats;
  stats.samples = batch.size();
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<UserId> users;
  std::vector<ItemId> items;
  users.reserve(batch.size());
  items.reserve(2 * batch.size());
  for (const auto& s : batch) {
    stats.mean_loss += bpr_loss(params, s, l2);
    stats.mean_delta += gradient_magnitude(params, s);
    const auto g = bpr_gradients(params, s, l2);
    kernels::axpy(scale, g.user, user_grad_.row(s.user));
    kernels::axpy(scale, g.pos, item_grad_.row(s.pos));
    kernels::axpy(scale, g.neg, item_grad_.row(s.neg));
    users.push_back(s.user);
    items.push_back(s.pos);
    items.push_back(s.neg);
  }
  stats.mean_loss *= scale;
  stats.mean_delta *= scale;
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());

  auto clear = [&] {
    for (UserId u : users) std::fill(user_grad_.row(u).begin(), user_grad_.row(u).end(), 0.0);
    for (ItemId i : items) std::fill(item_grad_.row(i).begin(), item_grad_.row(i).end(), 0.0);
  };
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  bool ok = std::isfinite(stats.mean_loss);
  for (UserId u : users) ok = ok && finite(user_grad_.row(u));
  for (ItemId i : items) ok = ok && finite(item_grad_.row(i));
  if (!ok) {
    clear();
    throw NumericError("non-finite BPR gradient (mean loss " + std::to_string(stats.mean_loss) + ")");
  }

  user_state_.begin_step();
  item_state_.begin_step();
  for (UserId u : users) user_state_.update_row(u, params.user_emb().row(u), user_grad_.row(u), lr);
  for (ItemId i : items) item_state_.update_row(i, params.item_emb().row(i), item_grad_.row(i), lr);
  clear();
  return stats;
}

void MfOptimizer::write(std::ostream& out) const {
  user_state_.save(out);
  item_state_.save(out);
}

void MfOptimizer::read(std::istream& in) {
  user_state_.load(in);
  item_state_.load(in);
  user_grad_ = Matrix(user_state_.rows(), user_state_.cols());
  item_grad_ = Matrix(item_state_.rows(), item_state_.cols());
}

}  // namespace kgp
