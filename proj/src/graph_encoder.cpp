#include "kgp/graph_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgp/binary_io.hpp"
#include "kgp/error.hpp"
#include "kgp/kernels.hpp"

namespace kgp {

SamplerParams SamplerParams::xavier(std::size_t num_nodes, const std::vector<std::size_t>& dims,
                                    Rng& rng) {
  if (dims.empty()) throw ConfigError("encoder needs at least the input dimension");
  SamplerParams p;
  p.base_emb = Matrix::xavier_uniform(num_nodes, dims[0], rng);
  for (std::size_t l = 1; l < dims.size(); ++l) {
    p.weights.push_back(Matrix::xavier_uniform(dims[l], 2 * dims[l - 1], rng));
  }
  return p;
}

void SamplerParams::validate(std::size_t num_nodes) const {
  if (base_emb.rows() != num_nodes) {
    throw ConfigError("base embedding has " + std::to_string(base_emb.rows()) + " rows, graph has " +
                      std::to_string(num_nodes) + " nodes");
  }
  std::size_t in = base_emb.cols();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].cols() != 2 * in) {
      throw ConfigError("layer " + std::to_string(l + 1) + " expects " +
                        std::to_string(weights[l].cols()) + " input columns, previous layer gives 2x" +
                        std::to_string(in));
    }
    in = weights[l].rows();
  }
}

void SamplerParams::write(std::ostream& out) const {
  out.write("KGPS", 4);
  io::write_matrix(out, base_emb);
  io::write_pod<std::uint64_t>(out, weights.size());
  for (const auto& w : weights) io::write_matrix(out, w);
}

SamplerParams SamplerParams::read(std::istream& in) {
  io::expect_magic(in, "KGPS");
  SamplerParams p;
  p.base_emb = io::read_matrix(in);
  const auto layers = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t l = 0; l < layers; ++l) p.weights.push_back(io::read_matrix(in));
  return p;
}

SamplerGradients SamplerGradients::zeros_like(const SamplerParams& params) {
  SamplerGradients g;
  g.base_emb = Matrix(params.base_emb.rows(), params.base_emb.cols());
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  return g;
}

void SamplerGradients::add_scaled(const SamplerGradients& other, double scale) {
  kernels::axpy(scale, other.base_emb.values(), base_emb.values());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    kernels::axpy(scale, other.weights[l].values(), weights[l].values());
  }
}

bool SamplerGradients::all_finite() const {
  return base_emb.all_finite() &&
         std::all_of(weights.begin(), weights.end(), [](const Matrix& w) { return w.all_finite(); });
}

namespace {

double norm_coef(const UnifiedGraph& graph, std::size_t deg_e, NodeId other) {
  return 1.0 / std::sqrt(static_cast<double>(deg_e) * static_cast<double>(graph.degree(other)));
}

void aggregate_into(const UnifiedGraph& graph, NodeId e, const Matrix& inputs,
                    std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto nbrs = graph.neighbors(e);
  for (NodeId n : nbrs) kernels::axpy(norm_coef(graph, nbrs.size(), n), inputs.row(n), out);
}

}  // namespace

std::vector<double> aggregate_neighbors(const UnifiedGraph& graph, NodeId e,
                                        const Matrix& layer_inputs) {
  std::vector<double> out(layer_inputs.cols());
  aggregate_into(graph, e, layer_inputs, out);
  return out;
}

Matrix encode_layer(const UnifiedGraph& graph, const Matrix& weight, const Matrix& layer_inputs,
                    double slope, Matrix* aggregated, Matrix* preactivations) {
  const std::size_t n = graph.num_nodes();
  const std::size_t d_in = layer_inputs.cols();
  const std::size_t d_out = weight.rows();
  if (weight.cols() != 2 * d_in) {
    throw ConfigError("weight has " + std::to_string(weight.cols()) + " columns, expected " +
                      std::to_string(2 * d_in));
  }
  if (layer_inputs.rows() != n) throw ConfigError("layer input rows do not match node count");
  Matrix out(n, d_out);
  Matrix agg(n, d_in);
  if (preactivations) *preactivations = Matrix(n, d_out);
  for (std::size_t e = 0; e < n; ++e) {
    aggregate_into(graph, static_cast<NodeId>(e), layer_inputs, agg.row(e));
    const auto self = layer_inputs.row(e);
    const auto nb = agg.row(e);
    auto dst = out.row(e);
    for (std::size_t r = 0; r < d_out; ++r) {
      const auto w = weight.row(r);
      const double z = kernels::dot(w.first(d_in), self) + kernels::dot(w.subspan(d_in), nb);
      if (preactivations) (*preactivations)(e, r) = z;
      dst[r] = kernels::leaky_relu(z, slope);
    }
  }
  if (aggregated) *aggregated = std::move(agg);
  return out;
}

EncodedGraph encode_all(const SamplerParams& params, const UnifiedGraph& graph, double slope,
                        bool keep_intermediates) {
  params.validate(graph.num_nodes());
  EncodedGraph enc;
  enc.slope = slope;
  enc.keeps_intermediates = keep_intermediates;
  enc.activations.push_back(params.base_emb);
  for (const auto& w : params.weights) {
    Matrix agg;
    Matrix pre;
    Matrix next = encode_layer(graph, w, enc.activations.back(), slope,
                               keep_intermediates ? &agg : nullptr,
                               keep_intermediates ? &pre : nullptr);
    if (keep_intermediates) {
      enc.aggregated.push_back(std::move(agg));
      enc.preactivations.push_back(std::move(pre));
      enc.activations.push_back(std::move(next));
    } else {
      enc.activations.back() = std::move(next);
    }
  }
  return enc;
}

SamplerGradients backward(const EncodedGraph& encoded, const SamplerParams& params,
                          const UnifiedGraph& graph, const Matrix& upstream) {
  if (!encoded.has_cache() || encoded.aggregated.size() != params.num_layers()) {
    throw UsageError("backward needs an encoding produced with intermediates");
  }
  if (upstream.rows() != graph.num_nodes() || upstream.cols() != params.out_dim()) {
    throw ConfigError("upstream gradient shape does not match the final embedding");
  }
  SamplerGradients grads = SamplerGradients::zeros_like(params);
  const std::size_t n = graph.num_nodes();
  Matrix grad_h = upstream;
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    const Matrix& w = params.weights[l];
    const Matrix& inputs = encoded.activations[l];
    const Matrix& agg = encoded.aggregated[l];
    const Matrix& pre = encoded.preactivations[l];
    const std::size_t d_in = inputs.cols();
    const std::size_t d_out = w.rows();
    Matrix& grad_w = grads.weights[l];
    Matrix grad_prev(n, d_in);
    std::vector<double> grad_z(d_out);
    std::vector<double> grad_cat(2 * d_in);
    for (std::size_t e = 0; e < n; ++e) {
      const auto gh = grad_h.row(e);
      bool any = false;
      for (std::size_t r = 0; r < d_out; ++r) {
        grad_z[r] = gh[r] * kernels::leaky_relu_grad(pre(e, r), encoded.slope);
        any = any || grad_z[r] != 0.0;
      }
      if (!any) continue;
      std::fill(grad_cat.begin(), grad_cat.end(), 0.0);
      for (std::size_t r = 0; r < d_out; ++r) {
        if (grad_z[r] == 0.0) continue;
        auto gw = grad_w.row(r);
        kernels::axpy(grad_z[r], inputs.row(e), gw.first(d_in));
        kernels::axpy(grad_z[r], agg.row(e), gw.subspan(d_in));
        kernels::axpy(grad_z[r], w.row(r), grad_cat);
      }
      const std::span<const double> cat(grad_cat);
      kernels::axpy(1.0, cat.first(d_in), grad_prev.row(e));
      const auto nbrs = graph.neighbors(static_cast<NodeId>(e));
      for (NodeId nb : nbrs) {
        kernels::axpy(norm_coef(graph, nbrs.size(), nb), cat.subspan(d_in), grad_prev.row(nb));
      }
    }
    grad_h = std::move(grad_prev);
  }
  grads.base_emb = std::move(grad_h);
  return grads;
}

}  // namespace kgp
