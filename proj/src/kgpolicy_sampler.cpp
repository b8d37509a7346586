#include "kgp/kgpolicy_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <json.hpp>

#include "kgp/baseline_samplers.hpp"
#include "kgp/binary_io.hpp"
#include "kgp/error.hpp"
#include "kgp/kernels.hpp"

namespace kgp {

double RewardBaseline::value() const noexcept {
  return rewards_.empty() ? 0.0 : sum_ / static_cast<double>(rewards_.size());
}

void RewardBaseline::push(double reward) {
  if (window_ == 0) return;
  rewards_.push_back(reward);
  sum_ += reward;
  if (rewards_.size() > window_) {
    sum_ -= rewards_.front();
    rewards_.pop_front();
  }
  // Periodic exact resum keeps the running sum from drifting.
  if (++pushes_since_resum_ >= window_) {
    sum_ = std::accumulate(rewards_.begin(), rewards_.end(), 0.0);
    pushes_since_resum_ = 0;
  }
}

void RewardBaseline::write(std::ostream& out) const {
  io::write_pod<std::uint64_t>(out, window_);
  io::write_pod<std::uint64_t>(out, pushes_since_resum_);
  io::write_pod(out, sum_);
  io::write_pod<std::uint64_t>(out, rewards_.size());
  for (double r : rewards_) io::write_pod(out, r);
}

void RewardBaseline::read(std::istream& in) {
  window_ = io::read_pod<std::uint64_t>(in);
  pushes_since_resum_ = io::read_pod<std::uint64_t>(in);
  sum_ = io::read_pod<double>(in);
  const auto n = io::read_pod<std::uint64_t>(in);
  rewards_.clear();
  for (std::uint64_t k = 0; k < n; ++k) rewards_.push_back(io::read_pod<double>(in));
}

std::vector<NodeId> draw_candidate_pool(std::span<const NodeId> neighbors, const PruneSpec& spec,
                                        Rng& rng) {
  std::vector<NodeId> pool;
  pool.reserve(std::min(neighbors.size(), spec.n1) + spec.n_rand);
  if (neighbors.size() <= spec.n1) {
    // Oversampling with replacement can only reproduce this set.
    pool.assign(neighbors.begin(), neighbors.end());
  } else {
    // Floyd's algorithm: n1 distinct positions.
    std::vector<std::size_t> picked;
    picked.reserve(spec.n1);
    const std::size_t n = neighbors.size();
    for (std::size_t j = n - spec.n1; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> dist(0, j);
      const std::size_t t = dist(rng);
      const bool seen = std::find(picked.begin(), picked.end(), t) != picked.end();
      picked.push_back(seen ? j : t);
    }
    for (std::size_t p : picked) pool.push_back(neighbors[p]);
  }
  if (spec.n_rand > 0 && spec.random_hi > spec.random_lo) {
    std::uniform_int_distribution<NodeId> dist(spec.random_lo, spec.random_hi - 1);
    for (std::size_t k = 0; k < spec.n_rand; ++k) pool.push_back(dist(rng));
  }
  return pool;
}

std::vector<NodeId> prune_neighbors(NodeId e, std::span<const NodeId> neighbors,
                                    const EncodedGraph& encoded, const PruneSpec& spec, Rng& rng,
                                    const std::function<bool(NodeId)>& excluded) {
  std::vector<NodeId> pool = draw_candidate_pool(neighbors, spec, rng);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (excluded) std::erase_if(pool, excluded);
  if (pool.size() <= spec.n2) return pool;

  const auto h_e = encoded.node(e);
  std::vector<std::pair<double, NodeId>> ranked;
  ranked.reserve(pool.size());
  for (NodeId c : pool) ranked.emplace_back(kernels::dot(h_e, encoded.node(c)), c);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(spec.n2),
                    ranked.end(), [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<NodeId> kept;
  kept.reserve(spec.n2);
  for (std::size_t k = 0; k < spec.n2; ++k) kept.push_back(ranked[k].second);
  return kept;
}

double attention_score(std::span<const double> h_user, std::span<const double> h_from,
                       std::span<const double> h_to, double slope) {
  return kernels::gated_dot(h_user, h_from, h_to, slope);
}

double attention_score(const EncodedGraph& encoded, NodeId user, NodeId from, NodeId to) {
  return attention_score(encoded.node(user), encoded.node(from), encoded.node(to), encoded.slope);
}

namespace {

bool score_candidates_with(const EncodedGraph& encoded, NodeId user, NodeId from, double slope,
                           StageRecord& record) {
  const std::size_t k = record.candidates.size();
  record.scores.resize(k);
  record.probs.resize(k);
  if (k == 0) return false;
  const auto h_u = encoded.node(user);
  const auto h_from = encoded.node(from);
  for (std::size_t c = 0; c < k; ++c) {
    record.scores[c] = attention_score(h_u, h_from, encoded.node(record.candidates[c]), slope);
  }
  const double top = *std::max_element(record.scores.begin(), record.scores.end());
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    record.probs[c] = std::exp(record.scores[c] - top);
    total += record.probs[c];
  }
  for (double& p : record.probs) p /= total;
  return true;
}

double log_prob(const StageRecord& record) {
  const double top = *std::max_element(record.scores.begin(), record.scores.end());
  double total = 0.0;
  for (double s : record.scores) total += std::exp(s - top);
  return record.scores[record.chosen] - top - std::log(total);
}

std::size_t choose(Stage stage, const StageRecord& record, Rng& rng, const Chooser& chooser) {
  const std::size_t idx = chooser ? chooser(stage, record, rng) : sample_index(record.probs, rng);
  if (idx >= record.candidates.size()) throw UsageError("chooser returned an out-of-range index");
  return idx;
}

}  // namespace

bool score_candidates(const EncodedGraph& encoded, NodeId user, NodeId from, StageRecord& record) {
  return score_candidates_with(encoded, user, from, encoded.slope, record);
}

double step_reward(const RecommenderParams& rec, UserId u, ItemId positive, ItemId proposal,
                   double prediction_weight, double similarity_weight) {
  const auto r_j = rec.item(proposal);
  double r = 0.0;
  if (prediction_weight != 0.0) r += prediction_weight * kernels::dot(rec.user(u), r_j);
  if (similarity_weight != 0.0) r += similarity_weight * kernels::dot(rec.item(positive), r_j);
  return r;
}

bool RolloutState::was_visited(NodeId n) const {
  return std::find(visited.begin(), visited.end(), n) != visited.end();
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double x = dist(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (x < acc) return k;
  }
  return probs.size() - 1;
}

std::optional<Selection> select_via(const PolicyContext& ctx, const RolloutState& state, Rng& rng,
                                    const Chooser& chooser) {
  const auto& cfg = ctx.config;
  const NodeId user_node = ctx.graph.layout().user_node(state.user);
  const PruneSpec spec{cfg.n1, cfg.n2, cfg.n_rand, 0, static_cast<NodeId>(ctx.graph.num_nodes())};
  Selection sel;
  sel.record.candidates = prune_neighbors(
      state.current, ctx.graph.neighbors(state.current), ctx.encoded, spec, rng,
      [&](NodeId n) { return n == user_node || n == state.current || state.was_visited(n); });
  if (!score_candidates_with(ctx.encoded, user_node, state.current, cfg.slope, sel.record)) {
    return std::nullopt;
  }
  sel.record.chosen = choose(Stage::via, sel.record, rng, chooser);
  sel.node = sel.record.candidates[sel.record.chosen];
  sel.logp = log_prob(sel.record);
  return sel;
}

std::optional<Selection> select_item(const PolicyContext& ctx, const RolloutState& state,
                                     NodeId via, Rng& rng, const Chooser& chooser) {
  const auto& cfg = ctx.config;
  const auto& layout = ctx.graph.layout();
  const NodeId user_node = layout.user_node(state.user);
  const NodeId lo = layout.item_node(0);
  const PruneSpec spec{cfg.n1, cfg.n2, cfg.n_rand, lo,
                       static_cast<NodeId>(lo + layout.num_items)};
  Selection sel;
  sel.record.candidates = prune_neighbors(
      via, ctx.graph.item_neighbors(via), ctx.encoded, spec, rng, [&](NodeId n) {
        return n == via || state.was_visited(n) ||
               ctx.data.is_train_positive(state.user, layout.item_of(n));
      });
  if (!score_candidates_with(ctx.encoded, user_node, via, cfg.slope, sel.record)) {
    return std::nullopt;
  }
  sel.record.chosen = choose(Stage::item, sel.record, rng, chooser);
  sel.node = sel.record.candidates[sel.record.chosen];
  sel.logp = log_prob(sel.record);
  return sel;
}

Trajectory rollout(const PolicyContext& ctx, UserId u, ItemId positive, Rng& rng,
                   const Chooser& chooser) {
  const auto& layout = ctx.graph.layout();
  const auto& cfg = ctx.config;
  if (cfg.steps == 0) throw ConfigError("rollout needs at least one exploration step");
  Trajectory traj;
  traj.user = u;
  traj.positive = positive;
  traj.steps.reserve(cfg.steps);
  RolloutState state;
  state.user = u;
  state.current = layout.item_node(positive);
  state.visited.push_back(state.current);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    ExplorationStep step;
    step.from = state.current;
    auto via = select_via(ctx, state, rng, chooser);
    std::optional<Selection> item;
    if (via) {
      step.via = via->node;
      state.visited.push_back(via->node);
      item = select_item(ctx, state, via->node, rng, chooser);
    }
    if (via && item) {
      step.to = item->node;
      step.logp_first = via->logp;
      step.logp_second = item->logp;
      step.first = std::move(via->record);
      step.second = std::move(item->record);
    } else {
      step.fallback = true;
      step.to = layout.item_node(rns_sample(ctx.data, u, rng));
    }
    state.visited.push_back(step.to);
    state.current = step.to;
    step.reward = step_reward(ctx.rec, u, positive, layout.item_of(step.to), cfg.prediction_weight,
                              cfg.similarity_weight);
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

std::vector<double> step_weights(const Trajectory& traj, double baseline, const PolicyConfig& config) {
  const std::size_t n = traj.steps.size();
  std::vector<double> w(n, 0.0);
  std::vector<double> discounted(n);
  for (std::size_t t = 0; t < n; ++t) {
    discounted[t] = std::pow(config.gamma, static_cast<double>(t)) * (traj.steps[t].reward - baseline);
  }
  switch (config.estimator) {
    case PolicyEstimator::return_to_go: {
      double acc = 0.0;
      for (std::size_t t = n; t-- > 0;) {
        acc += discounted[t];
        w[t] = acc;
      }
      break;
    }
    case PolicyEstimator::per_step:
      for (std::size_t t = 0; t < n; ++t) w[t] = discounted[t] / static_cast<double>(n);
      break;
  }
  return w;
}

namespace {

void accumulate_stage(const EncodedGraph& encoded, Matrix& upstream, NodeId user, NodeId from,
                      const StageRecord& record, double coef, double slope) {
  const auto h_u = encoded.node(user);
  const auto h_from = encoded.node(from);
  for (std::size_t k = 0; k < record.candidates.size(); ++k) {
    const double c = coef * ((k == record.chosen ? 1.0 : 0.0) - record.probs[k]);
    if (c == 0.0) continue;
    const NodeId cand = record.candidates[k];
    kernels::gated_dot_backward(c, h_u, h_from, encoded.node(cand), slope, upstream.row(user),
                                upstream.row(from), upstream.row(cand));
  }
}

}  // namespace

SamplerGradients policy_gradient(const PolicyContext& ctx, const SamplerParams& params,
                                 std::span<const Trajectory> batch, double baseline) {
  const auto& enc = ctx.encoded;
  Matrix upstream(ctx.graph.num_nodes(), params.out_dim());
  if (batch.empty()) return SamplerGradients::zeros_like(params);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const auto& traj : batch) {
    const auto weights = step_weights(traj, baseline, ctx.config);
    const NodeId user_node = ctx.graph.layout().user_node(traj.user);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      const double coef = weights[t] * inv_batch;
      if (step.fallback || coef == 0.0) continue;
      accumulate_stage(enc, upstream, user_node, step.from, step.first, coef, ctx.config.slope);
      accumulate_stage(enc, upstream, user_node, step.via, step.second, coef, ctx.config.slope);
    }
  }
  return backward(enc, params, ctx.graph, upstream);
}

std::string trajectory_json(const Trajectory& traj, const GraphLayout& layout) {
  using nlohmann::json;
  auto role_name = [&](NodeId n) {
    switch (layout.role(n)) {
      case NodeRole::user: return "user";
      case NodeRole::item: return "item";
      case NodeRole::entity: return "entity";
    }
    return "unknown";
  };
  json steps = json::array();
  for (const auto& s : traj.steps) {
    json step{{"from", layout.item_of(s.from)},
              {"to", layout.item_of(s.to)},
              {"p_first", s.fallback ? json(nullptr) : json(std::exp(s.logp_first))},
              {"p_second", s.fallback ? json(nullptr) : json(std::exp(s.logp_second))},
              {"reward", s.reward},
              {"fallback", s.fallback}};
    if (s.via == kNoNode) {
      step["via"] = nullptr;
    } else {
      step["via"] = json{{"node", s.via}, {"role", role_name(s.via)}};
    }
    steps.push_back(std::move(step));
  }
  json record{{"user", traj.user},
              {"positive", traj.positive},
              {"steps", std::move(steps)},
              {"negative", layout.item_of(traj.negative_node())}};
  return record.dump();
}

PolicyOptimizer::PolicyOptimizer(const SamplerParams& params, AdamConfig config)
    : base_state_(params.base_emb.rows(), params.base_emb.cols(), config) {
  for (const auto& w : params.weights) weight_states_.emplace_back(w.rows(), w.cols(), config);
}

ReinforceStats PolicyOptimizer::reinforce_update(SamplerParams& params, const PolicyContext& ctx,
                                                 std::span<const Trajectory> batch,
                                                 RewardBaseline& baseline, double lr) {
  ReinforceStats stats;
  stats.baseline = baseline.value();
  for (const auto& traj : batch) {
    for (const auto& s : traj.steps) {
      stats.mean_reward += s.reward;
      ++stats.steps;
    }
  }
  if (stats.steps > 0) stats.mean_reward /= static_cast<double>(stats.steps);

  SamplerGradients grads = policy_gradient(ctx, params, batch, stats.baseline);
  if (!grads.all_finite()) {
    stats.skipped = true;
  } else {
    // Ascent: feed the negated direction to the minimizer.
    for (double& g : grads.base_emb.values()) g = -g;
    for (auto& w : grads.weights) {
      for (double& g : w.values()) g = -g;
    }
    base_state_.begin_step();
    base_state_.update_all(params.base_emb, grads.base_emb, lr);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      weight_states_[l].begin_step();
      weight_states_[l].update_all(params.weights[l], grads.weights[l], lr);
    }
  }
  for (const auto& traj : batch) {
    for (const auto& s : traj.steps) baseline.push(s.reward);
  }
  return stats;
}

void PolicyOptimizer::write(std::ostream& out) const {
  base_state_.save(out);
  io::write_pod<std::uint64_t>(out, weight_states_.size());
  for (const auto& s : weight_states_) s.save(out);
}

void PolicyOptimizer::read(std::istream& in) {
  base_state_.load(in);
  const auto n = io::read_pod<std::uint64_t>(in);
  weight_states_.assign(n, AdamState{});
  for (auto& s : weight_states_) s.load(in);
}

}  // namespace kgp
