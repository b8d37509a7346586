#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "kgp/baseline_samplers.hpp"
#include "kgp/error.hpp"

using namespace kgp;

namespace {

// Users 0..3 with 1, 5, 12 and 18 of 20 items; the dense ones take the
// direct-index path of the uniform sampler.
Dataset density_ladder() {
  std::vector<std::vector<ItemId>> train(4);
  const std::size_t sizes[] = {1, 5, 12, 18};
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t k = 0; k < sizes[u]; ++k) train[u].push_back(static_cast<ItemId>((7 * k + u) % 20));
    std::sort(train[u].begin(), train[u].end());
  }
  std::vector<KgEdge> kg;
  for (std::uint32_t i = 0; i < 20; ++i) kg.push_back({i, 20 + i % 4, 0});
  return testing::make_dataset(train, {}, kg, 20);
}

void expect_uniform_over_unobserved(const InteractionStore& data, UserId u,
                                    const std::function<ItemId(Rng&)>& draw, int n) {
  Rng rng(u + 100);
  std::vector<int> hits(data.num_items(), 0);
  for (int k = 0; k < n; ++k) ++hits[draw(rng)];
  const double free = static_cast<double>(data.num_items() - data.train(u).size());
  for (ItemId i = 0; i < data.num_items(); ++i) {
    if (data.is_train_positive(u, i)) {
      CHECK(hits[i] == 0);
    } else {
      CHECK(hits[i] / double(n) == doctest::Approx(1.0 / free).epsilon(0.08));
    }
  }
}

}  // namespace

TEST_CASE("uniform sampler is uniform over unobserved items at every density") {
  const auto d = density_ladder();
  for (UserId u = 0; u < 4; ++u) {
    expect_uniform_over_unobserved(d.data, u, [&](Rng& r) { return rns_sample(d.data, u, r); }, 40000);
  }
}

TEST_CASE("a user owning every item cannot be sampled for") {
  auto d = testing::make_dataset(testing::lists({{0, 1, 2}}), {}, {}, 3);
  Rng rng(0);
  CHECK_THROWS_AS(rns_sample(d.data, 0, rng), ValidationError);
  PopularityTable table(d.data);
  CHECK_THROWS_AS(pns_sample(d.data, table, 0, rng), ValidationError);
}

TEST_CASE("popularity table uses smoothed counts to the 3/4 power") {
  auto d = testing::make_dataset(testing::lists({{0, 1}, {0}, {0, 2}}), {}, {}, 4);
  PopularityTable t(d.data);
  CHECK(t.weights()[0] == doctest::Approx(std::pow(4.0, 0.75)));
  CHECK(t.weights()[1] == doctest::Approx(std::pow(2.0, 0.75)));
  CHECK(t.weights()[3] == doctest::Approx(1.0));
}

TEST_CASE("popularity sampler follows the restricted table") {
  const auto d = density_ladder();
  PopularityTable table(d.data, 0.75);
  for (UserId u : {UserId{1}, UserId{3}}) {
    Rng rng(u);
    const int n = 60000;
    std::vector<int> hits(20, 0);
    for (int k = 0; k < n; ++k) ++hits[pns_sample(d.data, table, u, rng)];
    double total = 0.0;
    for (ItemId i = 0; i < 20; ++i) {
      if (!d.data.is_train_positive(u, i)) total += table.weights()[i];
    }
    for (ItemId i = 0; i < 20; ++i) {
      const double expected = d.data.is_train_positive(u, i) ? 0.0 : table.weights()[i] / total;
      CHECK(hits[i] / double(n) == doctest::Approx(expected).epsilon(0.1));
    }
  }
}

TEST_CASE("dynamic sampler picks the best of K uniform candidates") {
  // One user with 5 unobserved items of distinct scores.
  auto d = testing::make_dataset(testing::lists({{0, 1, 2}}), {}, {}, 8);
  RecommenderParams rec(1, 8, 1);
  rec.user_emb()(0, 0) = 1.0;
  const double scores[] = {9, 9, 9, 0.5, -1.0, 2.0, 0.1, 3.0};
  for (ItemId i = 0; i < 8; ++i) rec.item_emb()(i, 0) = scores[i];
  Rng rng(3);
  const std::size_t K = 3;
  const int n = 60000;
  std::map<ItemId, int> hits;
  for (int k = 0; k < n; ++k) ++hits[dns_sample(d.data, rec, 0, K, rng)];
  // P(max = j) = F_j^K - (F_j - 1/m)^K with F_j the share of candidates scoring <= s_j.
  const std::vector<ItemId> ascending{4, 6, 3, 5, 7};
  for (std::size_t r = 0; r < ascending.size(); ++r) {
    const double F = (r + 1) / 5.0;
    const double p = std::pow(F, K) - std::pow(F - 0.2, K);
    CHECK(hits[ascending[r]] / double(n) == doctest::Approx(p).epsilon(0.05));
  }
  CHECK(hits.count(0) == 0);
  CHECK_THROWS_AS(dns_sample(d.data, rec, 0, 0, rng), ConfigError);
  // Large K essentially always finds the top unobserved item.
  int top = 0;
  for (int k = 0; k < 200; ++k) top += dns_sample(d.data, rec, 0, 64, rng) == 7;
  CHECK(top >= 199);
}

TEST_CASE("random walk sampler returns items at least two hops away") {
  // Bipartite path: item0 - user0 - item1 - user1 - item2; user 0 owns 0 and 1.
  auto d = testing::make_dataset(testing::lists({{0, 1}, {1, 2}}), {}, {}, 4);
  Rng rng(4);
  std::map<ItemId, int> hits;
  for (int k = 0; k < 5000; ++k) ++hits[rws_sample(d.data, d.graph, 0, 0, 8, rng)];
  CHECK(hits.count(0) == 0);
  CHECK(hits.count(1) == 0);
  CHECK(hits[2] > 0);
  // Item 3 is isolated and only reachable through the uniform fallback.
  CHECK(hits[3] > 0);
  // Walk of length 1 never qualifies, so everything comes from the fallback.
  std::map<ItemId, int> short_hits;
  for (int k = 0; k < 4000; ++k) ++short_hits[rws_sample(d.data, d.graph, 0, 0, 1, rng)];
  CHECK(short_hits[2] / 4000.0 == doctest::Approx(0.5).epsilon(0.1));
  CHECK(short_hits[3] / 4000.0 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("exclusion sweep: no sampler returns a train positive") {
  Rng rng(5);
  const auto d = testing::random_dataset(40, 30, 10, 25, rng);
  auto rec = RecommenderParams::xavier(40, 30, 4, rng);
  RnsSampler rns(d.data);
  PnsSampler pns(d.data);
  DnsSampler dns(d.data, rec, 8);
  RwsSampler rws(d.data, d.graph, 6);
  const auto pairs = d.data.train_pairs();
  for (NegativeSampler* s : std::initializer_list<NegativeSampler*>{&rns, &pns, &dns, &rws}) {
    std::size_t bad = 0;
    for (int k = 0; k < 20000; ++k) {
      const auto [u, i] = pairs[k % pairs.size()];
      bad += d.data.is_train_positive(u, s->sample(u, i, rng));
    }
    INFO(s->name());
    CHECK(bad == 0);
  }
}
