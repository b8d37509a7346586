#include "kgp/baseline_samplers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgp/error.hpp"

namespace kgp {

ItemId rns_sample(const InteractionStore& data, UserId u, Rng& rng) {
  const auto pos = data.train(u);
  const std::size_t n = data.num_items();
  if (pos.size() >= n) {
    throw ValidationError("user " + std::to_string(u) + " has no unobserved item to sample");
  }
  if (2 * pos.size() < n) {
    std::uniform_int_distribution<ItemId> dist(0, static_cast<ItemId>(n - 1));
    for (;;) {
      const ItemId j = dist(rng);
      if (!std::binary_search(pos.begin(), pos.end(), j)) return j;
    }
  }
  // Dense users: pick the r-th unobserved item directly.
  std::uniform_int_distribution<ItemId> dist(0, static_cast<ItemId>(n - pos.size() - 1));
  ItemId j = dist(rng);
  for (ItemId p : pos) {
    if (p <= j) ++j;
    else break;
  }
  return j;
}

PopularityTable::PopularityTable(const InteractionStore& data, double exponent) {
  const auto counts = data.item_train_counts();
  weights_.resize(counts.size());
  cumulative_.resize(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weights_[i] = std::pow(static_cast<double>(counts[i]) + 1.0, exponent);
    total += weights_[i];
    cumulative_[i] = total;
  }
}

ItemId PopularityTable::draw(Rng& rng) const {
  std::uniform_real_distribution<double> dist(0.0, cumulative_.back());
  const double x = dist(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  return static_cast<ItemId>(std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1));
}

ItemId pns_sample(const InteractionStore& data, const PopularityTable& table, UserId u, Rng& rng) {
  const auto pos = data.train(u);
  if (pos.size() >= data.num_items()) {
    throw ValidationError("user " + std::to_string(u) + " has no unobserved item to sample");
  }
  for (int attempt = 0; attempt < 256; ++attempt) {
    const ItemId j = table.draw(rng);
    if (!std::binary_search(pos.begin(), pos.end(), j)) return j;
  }
  // Positives hold most of the mass: sample from the restricted table.
  std::vector<double> cumulative(data.num_items());
  double total = 0.0;
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    if (!std::binary_search(pos.begin(), pos.end(), static_cast<ItemId>(i))) total += table.weights()[i];
    cumulative[i] = total;
  }
  std::uniform_real_distribution<double> dist(0.0, total);
  const double x = dist(rng);
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  ItemId j = static_cast<ItemId>(std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1));
  while (std::binary_search(pos.begin(), pos.end(), j)) j = (j + 1) % data.num_items();
  return j;
}

ItemId dns_sample(const InteractionStore& data, const RecommenderParams& rec, UserId u,
                  std::size_t candidates, Rng& rng) {
  if (candidates == 0) throw ConfigError("DNS needs at least one candidate");
  ItemId best = rns_sample(data, u, rng);
  double best_score = predict(rec, u, best);
  for (std::size_t k = 1; k < candidates; ++k) {
    const ItemId j = rns_sample(data, u, rng);
    const double s = predict(rec, u, j);
    if (s > best_score || (s == best_score && j < best)) {
      best = j;
      best_score = s;
    }
  }
  return best;
}

ItemId rws_sample(const InteractionStore& data, const UnifiedGraph& graph, UserId u, ItemId pos,
                  std::size_t walk_len, Rng& rng) {
  const auto& layout = graph.layout();
  NodeId current = layout.item_node(pos);
  for (std::size_t hop = 1; hop <= walk_len; ++hop) {
    const auto nbrs = graph.neighbors(current);
    if (nbrs.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
    current = nbrs[pick(rng)];
    if (hop >= 2 && layout.is_item(current) && !data.is_train_positive(u, layout.item_of(current))) {
      return layout.item_of(current);
    }
  }
  return rns_sample(data, u, rng);
}

}  // namespace kgp
