#include "kgp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "kgp/error.hpp"
#include "kgp/kernels.hpp"

namespace kgp {
namespace {

struct Scored {
  double score;
  ItemId item;
};

bool ranks_before(const Scored& a, const Scored& b) {
  return a.score != b.score ? a.score > b.score : a.item < b.item;
}

std::vector<Scored> score_all(const RecommenderParams& rec, UserId u, std::span<const ItemId> exclude) {
  const auto ru = rec.user(u);
  std::vector<Scored> scored;
  scored.reserve(rec.num_items());
  for (std::size_t i = 0; i < rec.num_items(); ++i) {
    const auto item = static_cast<ItemId>(i);
    if (std::binary_search(exclude.begin(), exclude.end(), item)) continue;
    scored.push_back({kernels::dot(ru, rec.item_emb().row(i)), item});
  }
  return scored;
}

std::vector<ItemId> items_of(const std::vector<Scored>& scored, std::size_t n) {
  std::vector<ItemId> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = scored[k].item;
  return out;
}

}  // namespace

std::vector<ItemId> rank_items(const RecommenderParams& rec, UserId u, std::span<const ItemId> exclude) {
  auto scored = score_all(rec, u, exclude);
  std::sort(scored.begin(), scored.end(), ranks_before);
  return items_of(scored, scored.size());
}

std::vector<ItemId> top_k_items(const RecommenderParams& rec, UserId u,
                                std::span<const ItemId> exclude, std::size_t k) {
  auto scored = score_all(rec, u, exclude);
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    ranks_before);
  return items_of(scored, n);
}

double recall_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (relevant.empty()) throw UsageError("recall@k undefined for an empty relevant set");
  const std::size_t n = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (relevant.empty()) throw UsageError("ndcg@k undefined for an empty relevant set");
  const std::size_t n = std::min(k, ranked.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, relevant.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

std::vector<UserMetrics> evaluate_users(const RecommenderParams& rec,
                                        const std::vector<std::vector<ItemId>>& exclude,
                                        const std::vector<std::vector<ItemId>>& relevant,
                                        std::size_t k) {
  std::vector<UserMetrics> out;
  for (std::size_t u = 0; u < relevant.size(); ++u) {
    if (relevant[u].empty()) continue;
    const std::span<const ItemId> ex =
        u < exclude.size() ? std::span<const ItemId>(exclude[u]) : std::span<const ItemId>();
    const auto top = top_k_items(rec, static_cast<UserId>(u), ex, k);
    out.push_back({static_cast<UserId>(u), recall_at_k(top, relevant[u], k),
                   ndcg_at_k(top, relevant[u], k)});
  }
  return out;
}

std::vector<UserMetrics> evaluate_users(const RecommenderParams& rec, const InteractionStore& data,
                                        std::size_t k) {
  std::vector<UserMetrics> out;
  for (std::size_t u = 0; u < data.num_users(); ++u) {
    const auto uid = static_cast<UserId>(u);
    const auto test = data.test(uid);
    if (test.empty()) continue;
    const auto top = top_k_items(rec, uid, data.train(uid), k);
    out.push_back({uid, recall_at_k(top, test, k), ndcg_at_k(top, test, k)});
  }
  return out;
}

RankingMetrics average_metrics(std::span<const UserMetrics> per_user, std::size_t k) {
  RankingMetrics m;
  m.k = k;
  m.users = per_user.size();
  if (per_user.empty()) return m;
  for (const auto& u : per_user) {
    m.recall += u.recall;
    m.ndcg += u.ndcg;
  }
  m.recall /= static_cast<double>(per_user.size());
  m.ndcg /= static_cast<double>(per_user.size());
  return m;
}

std::vector<double> gradient_curve(const std::vector<std::vector<double>>& deltas_per_epoch) {
  std::vector<double> curve;
  curve.reserve(deltas_per_epoch.size());
  for (const auto& epoch : deltas_per_epoch) {
    StreamingMean mean;
    for (double d : epoch) mean.add(d);
    curve.push_back(mean.mean());
  }
  return curve;
}

SparsityReport sparsity_report(std::span<const UserMetrics> per_user,
                               std::span<const std::size_t> train_counts) {
  SparsityReport report;
  report.assignment.assign(per_user.size(), 0);
  std::vector<std::size_t> order(per_user.size());
  std::iota(order.begin(), order.end(), 0);
  auto count_of = [&](std::size_t idx) { return train_counts[per_user[idx].user]; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return count_of(a) != count_of(b) ? count_of(a) < count_of(b) : per_user[a].user < per_user[b].user;
  });
  std::size_t total = 0;
  for (std::size_t idx : order) total += count_of(idx);

  std::size_t before = 0;
  for (std::size_t idx : order) {
    const std::size_t c = count_of(idx);
    std::size_t b = total == 0 ? 0 : std::min<std::size_t>(3, (4 * before) / total);
    report.assignment[idx] = b;
    auto& bucket = report.buckets[b];
    if (bucket.users == 0) bucket.min_interactions = c;
    bucket.max_interactions = std::max(bucket.max_interactions, c);
    ++bucket.users;
    bucket.recall += per_user[idx].recall;
    bucket.ndcg += per_user[idx].ndcg;
    before += c;
  }
  for (auto& bucket : report.buckets) {
    if (bucket.users == 0) continue;
    bucket.recall /= static_cast<double>(bucket.users);
    bucket.ndcg /= static_cast<double>(bucket.users);
  }
  return report;
}

void write_sparsity_csv(const std::filesystem::path& path, const SparsityReport& report) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "bucket,users,min_interactions,max_interactions,recall@20,ndcg@20\n";
  out.precision(17);
  for (std::size_t b = 0; b < report.buckets.size(); ++b) {
    const auto& bk = report.buckets[b];
    out << b << ',' << bk.users << ',' << bk.min_interactions << ',' << bk.max_interactions << ','
        << bk.recall << ',' << bk.ndcg << '\n';
  }
}

}  // namespace kgp
