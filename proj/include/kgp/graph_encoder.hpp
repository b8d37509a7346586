#pragma once

// GraphSage-style encoder over the unified graph:
//   h^(l)_e = lrelu(W^(l) [h^(l-1)_e || sum_{e' in N_e} h^(l-1)_{e'} / sqrt(|N_e||N_e'|)])
// with a hand-written reverse pass used by the policy gradient.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "kgp/graph_store.hpp"
#include "kgp/matrix.hpp"

namespace kgp {

struct SamplerParams {
  Matrix base_emb;              // |E| x d_0
  std::vector<Matrix> weights;  // W^(l): d_l x 2 d_{l-1}

  // dims = {d_0, d_1, ..., d_L}
  static SamplerParams xavier(std::size_t num_nodes, const std::vector<std::size_t>& dims, Rng& rng);

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t out_dim() const noexcept {
    return weights.empty() ? base_emb.cols() : weights.back().rows();
  }
  // Throws ConfigError when layer shapes do not chain.
  void validate(std::size_t num_nodes) const;

  void write(std::ostream& out) const;
  static SamplerParams read(std::istream& in);

  bool operator==(const SamplerParams&) const = default;
};

struct SamplerGradients {
  Matrix base_emb;
  std::vector<Matrix> weights;

  static SamplerGradients zeros_like(const SamplerParams& params);
  void add_scaled(const SamplerGradients& other, double scale);
  bool all_finite() const;
};

struct EncodedGraph {
  std::vector<Matrix> activations;     // h^(0) .. h^(L)
  std::vector<Matrix> aggregated;      // neighbor sums feeding layer l, l = 1..L
  std::vector<Matrix> preactivations;  // W^(l)[..] before the activation
  double slope = 0.01;
  bool keeps_intermediates = false;

  bool has_cache() const noexcept {
    return keeps_intermediates && !activations.empty() && aggregated.size() + 1 == activations.size() &&
           preactivations.size() == aggregated.size();
  }
  const Matrix& final_emb() const { return activations.back(); }
  std::span<const double> node(NodeId e) const { return activations.back().row(e); }
};

// Degree-normalized neighbor sum of `layer_inputs` around e; zero when isolated.
std::vector<double> aggregate_neighbors(const UnifiedGraph& graph, NodeId e,
                                        const Matrix& layer_inputs);

// One layer for every node. `aggregated` and `preactivations`, when given,
// receive the intermediates needed by backward().
Matrix encode_layer(const UnifiedGraph& graph, const Matrix& weight, const Matrix& layer_inputs,
                    double slope, Matrix* aggregated = nullptr, Matrix* preactivations = nullptr);

EncodedGraph encode_all(const SamplerParams& params, const UnifiedGraph& graph, double slope,
                        bool keep_intermediates = true);

// Reverse pass of a scalar whose gradient w.r.t. final_emb is `upstream`
// (|E| x d_L, rows not involved left at zero). Throws UsageError when
// `encoded` was produced without intermediates.
SamplerGradients backward(const EncodedGraph& encoded, const SamplerParams& params,
                          const UnifiedGraph& graph, const Matrix& upstream);

}  // namespace kgp
