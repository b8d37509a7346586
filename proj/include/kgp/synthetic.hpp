#pragma once

// Attribute-driven toy world for end-to-end checks. Entities are grouped into
// latent factors; items carry a few entities, mostly from one primary factor;
// users like a handful of factors and, within them, favor particular
// entities. Users pick items by noisy utility, so same-factor items they
// skipped are the natural hard negatives and are reachable through the KG.

#include <cstdint>
#include <filesystem>

#include "kgp/graph_store.hpp"

namespace kgp {

struct SyntheticConfig {
  std::size_t users = 200;
  std::size_t items = 500;
  std::size_t factors = 30;
  std::size_t entities_per_factor = 10;
  std::size_t attributes_per_item = 3;
  double primary_attribute_prob = 0.8;
  std::size_t liked_factors = 3;
  std::size_t interactions_per_user = 20;
  std::size_t interaction_spread = 4;  // per-user count is uniform in +-spread
  double entity_affinity = 1.0;        // scale of within-factor preferences
  double utility_noise = 0.3;          // Gumbel scale on item utilities
  double test_fraction = 0.2;
  std::uint64_t seed = 7;

  std::size_t num_entities() const noexcept { return factors * entities_per_factor; }
};

Dataset make_synthetic_world(const SyntheticConfig& config = {});

// KGAT layout: train.txt, test.txt, kg_final.txt.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace kgp
