#include "kgp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "kgp/error.hpp"
#include "kgp/matrix.hpp"

namespace kgp {
namespace {

void write_lists(const std::filesystem::path& path, const InteractionStore& data, bool test) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  for (std::size_t u = 0; u < data.num_users(); ++u) {
    const auto items = test ? data.test(static_cast<UserId>(u)) : data.train(static_cast<UserId>(u));
    out << u;
    for (ItemId i : items) out << ' ' << i;
    out << '\n';
  }
}

}  // namespace

Dataset make_synthetic_world(const SyntheticConfig& c) {
  if (c.users == 0 || c.items == 0 || c.factors == 0 || c.entities_per_factor == 0 ||
      c.attributes_per_item == 0 || c.liked_factors == 0 || c.liked_factors > c.factors) {
    throw ConfigError("synthetic world needs positive sizes and liked_factors <= factors");
  }
  if (c.interactions_per_user + c.interaction_spread >= c.items) {
    throw ConfigError("synthetic users would own every item");
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  Rng rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t E = c.num_entities();

  // Item attributes, as entity indices in [0, E).
  std::vector<std::vector<std::uint32_t>> attrs(c.items);
  std::uniform_int_distribution<std::size_t> pick_factor(0, c.factors - 1);
  std::uniform_int_distribution<std::size_t> pick_member(0, c.entities_per_factor - 1);
  std::uniform_int_distribution<std::size_t> pick_entity(0, E - 1);
  for (auto& a : attrs) {
    const std::size_t primary = pick_factor(rng);
    while (a.size() < c.attributes_per_item) {
      const std::size_t e = unit(rng) < c.primary_attribute_prob
                                ? primary * c.entities_per_factor + pick_member(rng)
                                : pick_entity(rng);
      if (std::find(a.begin(), a.end(), e) == a.end()) a.push_back(static_cast<std::uint32_t>(e));
    }
    std::sort(a.begin(), a.end());
  }

  std::vector<std::size_t> factor_order(c.factors);
  std::iota(factor_order.begin(), factor_order.end(), 0);
  std::vector<double> affinity(E);
  std::vector<double> utility(c.items);
  std::vector<ItemId> order(c.items);
  std::uniform_int_distribution<std::size_t> spread(0, 2 * c.interaction_spread);
  UserItemLists train, test;
  train.items.resize(c.users);
  test.items.resize(c.users);
  for (std::size_t u = 0; u < c.users; ++u) {
    std::shuffle(factor_order.begin(), factor_order.end(), rng);
    std::fill(affinity.begin(), affinity.end(), 0.0);
    for (std::size_t k = 0; k < c.liked_factors; ++k) {
      const std::size_t f = factor_order[k];
      for (std::size_t m = 0; m < c.entities_per_factor; ++m) {
        affinity[f * c.entities_per_factor + m] = 1.0 + c.entity_affinity * normal(rng);
      }
    }
    for (std::size_t i = 0; i < c.items; ++i) {
      double s = 0.0;
      for (auto e : attrs[i]) s += affinity[e];
      const double gumbel = -std::log(-std::log(std::max(unit(rng), 1e-300)));
      utility[i] = s / static_cast<double>(attrs[i].size()) + c.utility_noise * gumbel;
    }
    const std::size_t n = c.interactions_per_user - c.interaction_spread + spread(rng);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](ItemId a, ItemId b) {
                        return utility[a] != utility[b] ? utility[a] > utility[b] : a < b;
                      });
    std::vector<ItemId> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    const std::size_t n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::round(c.test_fraction * static_cast<double>(n))), 1, n - 1);
    test.items[u].assign(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.items[u].assign(chosen.begin() + static_cast<std::ptrdiff_t>(n_test), chosen.end());
    std::sort(test.items[u].begin(), test.items[u].end());
    std::sort(train.items[u].begin(), train.items[u].end());
  }

  // Items keep their own ids as KG ids; attribute entities follow them.
  std::vector<KgEdge> kg;
  for (std::size_t i = 0; i < c.items; ++i) {
    for (auto e : attrs[i]) {
      kg.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c.items + e), 0});
    }
  }
  // Pin the entity count so unused entities still get nodes.
  auto store = InteractionStore::build(std::move(train), std::move(test), c.users, c.items);
  Dataset d = Dataset::assemble(std::move(store), std::move(kg));
  if (d.layout.num_entities != E) {
    GraphLayout layout = d.layout;
    layout.num_entities = E;
    d.graph = UnifiedGraph::build(d.data, d.kg, layout);
    d.layout = layout;
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  write_lists(dir / "train.txt", dataset.data, false);
  write_lists(dir / "test.txt", dataset.data, true);
  std::ofstream kg(dir / "kg_final.txt");
  if (!kg) throw LoadError("cannot write " + (dir / "kg_final.txt").string());
  for (const auto& e : dataset.kg) kg << e.head << ' ' << e.relation << ' ' << e.tail << '\n';
}

}  // namespace kgp
