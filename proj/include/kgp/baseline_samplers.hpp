#pragma once

// Reference negative samplers: uniform (RNS), popularity-biased (PNS),
// dynamic hard-negative (DNS) and graph random walk (RWS). Every sampler
// returns an item the user has no train interaction with.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kgp/graph_store.hpp"
#include "kgp/matrix.hpp"
#include "kgp/recommender.hpp"

namespace kgp {

// Uniform over I \ train_pos(u). Throws ValidationError when u owns every item.
ItemId rns_sample(const InteractionStore& data, UserId u, Rng& rng);

// Sampling weights (train count + 1)^exponent over all items.
class PopularityTable {
 public:
  explicit PopularityTable(const InteractionStore& data, double exponent = 0.75);

  std::span<const double> weights() const noexcept { return weights_; }
  ItemId draw(Rng& rng) const;

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

ItemId pns_sample(const InteractionStore& data, const PopularityTable& table, UserId u, Rng& rng);

// Best-scored of `candidates` uniform unobserved draws; ties go to the
// smallest item id.
ItemId dns_sample(const InteractionStore& data, const RecommenderParams& rec, UserId u,
                  std::size_t candidates, Rng& rng);

// Uniform walk from the positive's node; returns the first unobserved item
// reached after at least two hops, else a uniform negative.
ItemId rws_sample(const InteractionStore& data, const UnifiedGraph& graph, UserId u, ItemId pos,
                  std::size_t walk_len, Rng& rng);

class NegativeSampler {
 public:
  virtual ~NegativeSampler() = default;
  virtual ItemId sample(UserId u, ItemId pos, Rng& rng) = 0;
  virtual std::string_view name() const = 0;
};

class RnsSampler final : public NegativeSampler {
 public:
  explicit RnsSampler(const InteractionStore& data) : data_(data) {}
  ItemId sample(UserId u, ItemId, Rng& rng) override { return rns_sample(data_, u, rng); }
  std::string_view name() const override { return "rns"; }

 private:
  const InteractionStore& data_;
};

class PnsSampler final : public NegativeSampler {
 public:
  explicit PnsSampler(const InteractionStore& data, double exponent = 0.75)
      : data_(data), table_(data, exponent) {}
  ItemId sample(UserId u, ItemId, Rng& rng) override { return pns_sample(data_, table_, u, rng); }
  std::string_view name() const override { return "pns"; }

 private:
  const InteractionStore& data_;
  PopularityTable table_;
};

// Reads the recommender live, so its distribution follows training.
class DnsSampler final : public NegativeSampler {
 public:
  DnsSampler(const InteractionStore& data, const RecommenderParams& rec, std::size_t candidates)
      : data_(data), rec_(rec), candidates_(candidates) {}
  ItemId sample(UserId u, ItemId, Rng& rng) override {
    return dns_sample(data_, rec_, u, candidates_, rng);
  }
  std::string_view name() const override { return "dns"; }

 private:
  const InteractionStore& data_;
  const RecommenderParams& rec_;
  std::size_t candidates_;
};

class RwsSampler final : public NegativeSampler {
 public:
  RwsSampler(const InteractionStore& data, const UnifiedGraph& graph, std::size_t walk_len)
      : data_(data), graph_(graph), walk_len_(walk_len) {}
  ItemId sample(UserId u, ItemId pos, Rng& rng) override {
    return rws_sample(data_, graph_, u, pos, walk_len_, rng);
  }
  std::string_view name() const override { return "rws"; }

 private:
  const InteractionStore& data_;
  const UnifiedGraph& graph_;
  std::size_t walk_len_;
};

}  // namespace kgp
