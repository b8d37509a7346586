#pragma once

// Shared builders and independent reference implementations for the tests.
// The oracles here deliberately avoid the library's kernels and CSR layout.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "kgp/graph_encoder.hpp"
#include "kgp/graph_store.hpp"
#include "kgp/kgpolicy_sampler.hpp"
#include "kgp/matrix.hpp"
#include "kgp/recommender.hpp"

namespace kgp::testing {

using Vec = std::vector<double>;
using Table = std::vector<Vec>;

inline double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

// Central differences at h = 1e-5 carry roughly 1e-11 absolute error per
// coordinate, so relative checks need gradients well above this norm.
inline constexpr double kFdNoiseFloor = 1e-5;

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - b[k]) * (a[k] - b[k]);
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

inline std::vector<std::vector<ItemId>> lists(std::initializer_list<std::vector<ItemId>> l) {
  return std::vector<std::vector<ItemId>>(l);
}

inline Dataset make_dataset(std::vector<std::vector<ItemId>> train,
                            std::vector<std::vector<ItemId>> test, std::vector<KgEdge> kg,
                            std::size_t num_items) {
  const std::size_t users = train.size();
  test.resize(users);
  return Dataset::assemble(
      InteractionStore::build(UserItemLists{std::move(train)}, UserItemLists{std::move(test)}, users,
                              num_items),
      std::move(kg));
}

// Random world: every user owns between 1 and max_pos items (never all),
// items link to random entities, plus a few entity-entity edges.
inline Dataset random_dataset(std::size_t users, std::size_t items, std::size_t entities,
                              std::size_t max_pos, Rng& rng) {
  std::vector<std::vector<ItemId>> train(users), test(users);
  std::uniform_int_distribution<ItemId> pick_item(0, static_cast<ItemId>(items - 1));
  std::uniform_int_distribution<std::size_t> count(1, max_pos);
  for (std::size_t u = 0; u < users; ++u) {
    std::set<ItemId> s;
    const std::size_t n = count(rng);
    while (s.size() < n) s.insert(pick_item(rng));
    std::vector<ItemId> v(s.begin(), s.end());
    test[u].push_back(v.back());
    v.pop_back();
    if (v.empty()) {
      v.push_back(test[u].back());
      test[u].clear();
    }
    train[u] = v;
  }
  std::vector<KgEdge> kg;
  std::uniform_int_distribution<std::uint32_t> pick_entity(0, static_cast<std::uint32_t>(entities - 1));
  for (std::size_t i = 0; i < items; ++i) {
    for (int k = 0; k < 2; ++k) {
      kg.push_back({static_cast<std::uint32_t>(i),
                    static_cast<std::uint32_t>(items + pick_entity(rng)), 0});
    }
  }
  for (std::size_t k = 0; k + 1 < entities; k += 2) {
    kg.push_back({static_cast<std::uint32_t>(items + k), static_cast<std::uint32_t>(items + k + 1), 1});
  }
  // Pin the entity count so every entity gets a node.
  kg.push_back({static_cast<std::uint32_t>(items + entities - 1), static_cast<std::uint32_t>(items), 2});
  return make_dataset(std::move(train), std::move(test), std::move(kg), items);
}

// Two users, four items, three entities (9 nodes). For user 0 with positive
// item 0 every two-step rollout stays on graph edges without a fallback.
inline Dataset enumerable_dataset() {
  return make_dataset(lists({{0}, {1, 2}}), lists({{3}, {}}),
                      {{0, 4, 0}, {0, 5, 0}, {1, 4, 0}, {2, 4, 0}, {2, 5, 0}, {3, 5, 0}, {3, 6, 0},
                       {1, 6, 0}},
                      4);
}

// Adjacency straight from the edge set, no CSR.
inline std::vector<std::set<NodeId>> naive_adjacency(const UnifiedGraph& g) {
  std::vector<std::set<NodeId>> adj(g.num_nodes());
  for (NodeId a = 0; a < g.num_nodes(); ++a) {
    for (NodeId b = 0; b < g.num_nodes(); ++b) {
      if (a != b && g.has_edge(a, b)) adj[a].insert(b);
    }
  }
  return adj;
}

inline double lrelu(double x, double slope) { return x > 0.0 ? x : slope * x; }

// Forward pass of the encoder written from the layer formula.
inline Table naive_encode(const SamplerParams& p, const std::vector<std::set<NodeId>>& adj,
                          double slope) {
  const std::size_t n = adj.size();
  Table h(n);
  for (std::size_t e = 0; e < n; ++e) {
    h[e].assign(p.base_emb.row(e).begin(), p.base_emb.row(e).end());
  }
  for (const auto& w : p.weights) {
    const std::size_t din = h[0].size();
    Table next(n, Vec(w.rows(), 0.0));
    for (std::size_t e = 0; e < n; ++e) {
      Vec concat(2 * din, 0.0);
      for (std::size_t c = 0; c < din; ++c) concat[c] = h[e][c];
      for (NodeId nb : adj[e]) {
        const double norm = std::sqrt(static_cast<double>(adj[e].size() * adj[nb].size()));
        for (std::size_t c = 0; c < din; ++c) concat[din + c] += h[nb][c] / norm;
      }
      for (std::size_t r = 0; r < w.rows(); ++r) {
        double z = 0.0;
        for (std::size_t c = 0; c < 2 * din; ++c) z += w(r, c) * concat[c];
        next[e][r] = lrelu(z, slope);
      }
    }
    h = std::move(next);
  }
  return h;
}

inline double naive_attention(const Vec& hu, const Vec& ha, const Vec& hb, double slope) {
  double s = 0.0;
  for (std::size_t k = 0; k < hu.size(); ++k) s += hu[k] * lrelu(ha[k] * hb[k], slope);
  return s;
}

inline Vec naive_softmax(const Vec& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  Vec p(scores.size());
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) total += p[k] = std::exp(scores[k] - top);
  for (double& x : p) x /= total;
  return p;
}

// Exact trajectory law for deterministic pruning (no random extras, n1 and
// n2 at least the largest degree). Keyed by the (via, item) node sequence.
// Fallback states are reported through `fallback_seen`.
struct NaivePolicy {
  const Dataset& d;
  Table h;
  std::vector<std::set<NodeId>> adj;
  double slope;

  std::map<std::vector<NodeId>, double> law(UserId u, ItemId pos, std::size_t steps,
                                            bool* fallback_seen = nullptr) const {
    std::map<std::vector<NodeId>, double> out;
    const NodeId un = d.layout.user_node(u);
    std::vector<NodeId> path;
    std::vector<NodeId> visited{d.layout.item_node(pos)};
    std::function<void(NodeId, std::size_t, double)> walk = [&](NodeId cur, std::size_t t, double p) {
      if (t == steps) {
        out[path] += p;
        return;
      }
      auto seen = [&](NodeId n) { return std::find(visited.begin(), visited.end(), n) != visited.end(); };
      std::vector<NodeId> vias;
      for (NodeId n : adj[cur]) {
        if (n != un && n != cur && !seen(n)) vias.push_back(n);
      }
      if (vias.empty()) {
        if (fallback_seen) *fallback_seen = true;
        return;
      }
      Vec s1;
      for (NodeId v : vias) s1.push_back(naive_attention(h[un], h[cur], h[v], slope));
      const Vec p1 = naive_softmax(s1);
      for (std::size_t a = 0; a < vias.size(); ++a) {
        const NodeId v = vias[a];
        visited.push_back(v);
        std::vector<NodeId> items;
        for (NodeId n : adj[v]) {
          if (d.layout.is_item(n) && n != v && !seen(n) &&
              !d.data.is_train_positive(u, d.layout.item_of(n))) {
            items.push_back(n);
          }
        }
        if (items.empty()) {
          if (fallback_seen) *fallback_seen = true;
          visited.pop_back();
          continue;
        }
        Vec s2;
        for (NodeId j : items) s2.push_back(naive_attention(h[un], h[v], h[j], slope));
        const Vec p2 = naive_softmax(s2);
        for (std::size_t b = 0; b < items.size(); ++b) {
          path.push_back(v);
          path.push_back(items[b]);
          visited.push_back(items[b]);
          walk(items[b], t + 1, p * p1[a] * p2[b]);
          visited.pop_back();
          path.pop_back();
          path.pop_back();
        }
        visited.pop_back();
      }
    };
    walk(d.layout.item_node(pos), 0, 1.0);
    return out;
  }
};

inline std::vector<NodeId> path_key(const Trajectory& t) {
  std::vector<NodeId> key;
  for (const auto& s : t.steps) {
    key.push_back(s.via);
    key.push_back(s.to);
  }
  return key;
}

// Every trajectory reachable under deterministic pruning, produced through
// rollout() with a scripted chooser, together with its probability.
inline std::vector<std::pair<Trajectory, double>> enumerate_rollouts(const PolicyContext& ctx, UserId u,
                                                                     ItemId pos) {
  std::vector<std::pair<Trajectory, double>> out;
  std::vector<std::size_t> script;  // choice indices of the branch being explored
  std::vector<std::size_t> widths;
  Rng rng(0);
  while (true) {
    std::size_t cursor = 0;
    widths.clear();
    Chooser chooser = [&](Stage, const StageRecord& rec, Rng&) {
      if (cursor == script.size()) script.push_back(0);
      widths.push_back(rec.candidates.size());
      return script[cursor++];
    };
    Trajectory t = rollout(ctx, u, pos, rng, chooser);
    script.resize(cursor);
    double p = 1.0;
    for (const auto& s : t.steps) p *= std::exp(s.logp_first + s.logp_second);
    out.emplace_back(std::move(t), p);
    // Odometer increment, last choice fastest.
    std::size_t k = script.size();
    while (k > 0 && script[k - 1] + 1 >= widths[k - 1]) --k;
    if (k == 0) break;
    ++script[k - 1];
    script.resize(k);
  }
  return out;
}

inline PolicyConfig deterministic_policy(std::size_t steps) {
  PolicyConfig c;
  c.steps = steps;
  c.n1 = 1000;
  c.n2 = 1000;
  c.n_rand = 0;
  return c;
}

}  // namespace kgp::testing
