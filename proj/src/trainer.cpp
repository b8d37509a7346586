#include "kgp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kgp/binary_io.hpp"
#include "kgp/error.hpp"

namespace kgp {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::size_t> encoder_dims(const TrainConfig& c) {
  return std::vector<std::size_t>(c.layers + 1, c.dim);
}

void write_optional(std::ostream& out, const std::optional<double>& v) {
  io::write_pod<std::uint8_t>(out, v.has_value() ? 1 : 0);
  io::write_pod<double>(out, v.value_or(0.0));
}

std::optional<double> read_optional(std::istream& in) {
  const auto has = io::read_pod<std::uint8_t>(in);
  const auto v = io::read_pod<double>(in);
  return has ? std::optional<double>(v) : std::nullopt;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows,
                       std::size_t k) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoch,phase,bpr_loss,avg_delta,recall@" << k << ",ndcg@" << k << ",mean_reward,baseline\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.phase << ',' << r.bpr_loss << ',' << r.avg_delta << ',';
    opt(r.recall);
    out << ',';
    opt(r.ndcg);
    out << ',';
    opt(r.mean_reward);
    out << ',';
    opt(r.baseline);
    out << '\n';
  }
}

ValidationSplit split_validation(const InteractionStore& data, double fraction, Rng& rng) {
  ValidationSplit split;
  split.fit.resize(data.num_users());
  split.held_out.resize(data.num_users());
  for (std::size_t u = 0; u < data.num_users(); ++u) {
    const auto train = data.train(static_cast<UserId>(u));
    std::vector<ItemId> items(train.begin(), train.end());
    std::size_t hold = 0;
    if (fraction > 0.0 && items.size() >= 2) {
      hold = std::max<std::size_t>(1, static_cast<std::size_t>(
                                          std::round(fraction * static_cast<double>(items.size()))));
      hold = std::min(hold, items.size() - 1);
    }
    std::shuffle(items.begin(), items.end(), rng);
    split.held_out[u].assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(hold));
    split.fit[u].assign(items.begin() + static_cast<std::ptrdiff_t>(hold), items.end());
    std::sort(split.held_out[u].begin(), split.held_out[u].end());
    std::sort(split.fit[u].begin(), split.fit[u].end());
  }
  return split;
}

Trainer::Trainer(const Dataset& dataset, TrainConfig config)
    : dataset_(dataset),
      config_(std::move(config)),
      policy_(config_.policy()),
      rng_(config_.seed),
      baseline_(config_.baseline_window) {
  config_.validate();
}

void Trainer::initialize() {
  const auto& data = dataset_.data;
  rec_ = RecommenderParams::xavier(data.num_users(), data.num_items(), config_.dim, rng_);
  if (has_policy()) {
    sampler_ = SamplerParams::xavier(dataset_.graph.num_nodes(), encoder_dims(config_), rng_);
    policy_opt_ = PolicyOptimizer(sampler_);
  }
  if (config_.uses_warm_start()) rec_ = pretrain();
  mf_opt_ = MfOptimizer(rec_);
  if (config_.sampler == SamplerKind::pns) {
    popularity_ = std::make_unique<PopularityTable>(data, config_.pns_exponent);
  }
  initialized_ = true;
}

RecommenderParams Trainer::pretrain() {
  const auto& data = dataset_.data;
  ValidationSplit split = split_validation(data, config_.validation_fraction, rng_);
  const bool has_validation = std::any_of(split.held_out.begin(), split.held_out.end(),
                                          [](const auto& v) { return !v.empty(); });
  const InteractionStore fit = InteractionStore::build(UserItemLists{split.fit}, UserItemLists{},
                                                       data.num_users(), data.num_items());
  RecommenderParams params = rec_;
  MfOptimizer opt(params);
  RecommenderParams best = params;
  double best_recall = -1.0;
  if (has_validation) {
    best_recall = average_metrics(evaluate_users(params, split.fit, split.held_out, config_.top_k),
                                  config_.top_k).recall;
  }
  auto pairs = fit.train_pairs();
  std::size_t since_best = 0;
  std::vector<PairwiseSample> batch;
  for (std::size_t e = 0; e < config_.pretrain_epochs && !pairs.empty(); ++e) {
    std::shuffle(pairs.begin(), pairs.end(), rng_);
    double loss = 0.0;
    StreamingMean delta;
    for (std::size_t start = 0; start < pairs.size(); start += config_.batch_size) {
      const std::size_t end = std::min(pairs.size(), start + config_.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto [u, i] = pairs[k];
        batch.push_back({u, i, rns_sample(fit, u, rng_)});
      }
      const auto stats = opt.bpr_step(params, batch, config_.lr_rec, config_.l2);
      loss += stats.mean_loss * static_cast<double>(batch.size());
      delta.add(stats.mean_delta);
    }
    if (!std::isfinite(loss)) throw NumericError("warm start diverged");
    EpochMetrics row;
    row.epoch = ++log_epoch_;
    row.phase = "pretrain";
    row.bpr_loss = loss / static_cast<double>(pairs.size());
    row.avg_delta = delta.mean();
    if (has_validation) {
      const auto m = average_metrics(evaluate_users(params, split.fit, split.held_out, config_.top_k),
                                     config_.top_k);
      row.recall = m.recall;
      row.ndcg = m.ndcg;
      if (m.recall > best_recall) {
        best_recall = m.recall;
        best = params;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      best = params;
    }
    log_.push_back(row);
    if (has_validation && since_best >= config_.pretrain_patience) break;
  }
  return best;
}

PolicyContext Trainer::policy_context(const EncodedGraph& encoded) const {
  return PolicyContext{dataset_.graph, dataset_.data, encoded, rec_, policy_};
}

void Trainer::refresh_encoding() {
  if (!encoded_) encoded_ = encode_all(sampler_, dataset_.graph, config_.slope);
}

ItemId Trainer::draw_negative(UserId u, ItemId pos, const EncodedGraph* encoded) {
  ++negatives_drawn_;
  const auto& data = dataset_.data;
  switch (config_.sampler) {
    case SamplerKind::rns: return rns_sample(data, u, rng_);
    case SamplerKind::pns: return pns_sample(data, *popularity_, u, rng_);
    case SamplerKind::dns: return dns_sample(data, rec_, u, config_.k_dns, rng_);
    case SamplerKind::rws: return rws_sample(data, dataset_.graph, u, pos, config_.rws_walk_len, rng_);
    case SamplerKind::kgpolicy: {
      const auto traj = rollout(policy_context(*encoded), u, pos, rng_);
      return dataset_.layout.item_of(traj.negative_node());
    }
  }
  throw UsageError("unhandled sampler kind");
}

BprStepStats Trainer::recommender_phase() {
  if (!initialized_) throw UsageError("trainer not initialized");
  if (has_policy()) refresh_encoding();
  const EncodedGraph* encoded = has_policy() ? &*encoded_ : nullptr;
  auto pairs = dataset_.data.train_pairs();
  std::shuffle(pairs.begin(), pairs.end(), rng_);
  last_deltas_.clear();
  last_deltas_.reserve(pairs.size());
  BprStepStats total;
  std::vector<PairwiseSample> batch;
  for (std::size_t start = 0; start < pairs.size(); start += config_.batch_size) {
    const std::size_t end = std::min(pairs.size(), start + config_.batch_size);
    batch.clear();
    for (std::size_t k = start; k < end; ++k) {
      const auto [u, i] = pairs[k];
      batch.push_back({u, i, draw_negative(u, i, encoded)});
    }
    for (const auto& s : batch) last_deltas_.push_back(gradient_magnitude(rec_, s));
    const auto stats = mf_opt_.bpr_step(rec_, batch, config_.lr_rec, config_.l2);
    total.mean_loss += stats.mean_loss * static_cast<double>(stats.samples);
    total.samples += stats.samples;
  }
  if (total.samples > 0) total.mean_loss /= static_cast<double>(total.samples);
  StreamingMean mean;
  for (double d : last_deltas_) mean.add(d);
  total.mean_delta = mean.mean();
  return total;
}

std::optional<ReinforceStats> Trainer::sampler_phase() {
  if (!has_policy()) return std::nullopt;
  if (!initialized_) throw UsageError("trainer not initialized");
  auto pairs = dataset_.data.train_pairs();
  std::shuffle(pairs.begin(), pairs.end(), rng_);
  ReinforceStats total;
  double reward_sum = 0.0;
  std::vector<Trajectory> batch;
  for (std::size_t start = 0; start < pairs.size(); start += config_.sampler_batch_size) {
    const std::size_t end = std::min(pairs.size(), start + config_.sampler_batch_size);
    refresh_encoding();
    const PolicyContext ctx = policy_context(*encoded_);
    batch.clear();
    for (std::size_t k = start; k < end; ++k) {
      batch.push_back(rollout(ctx, pairs[k].first, pairs[k].second, rng_));
    }
    const auto stats = policy_opt_.reinforce_update(sampler_, ctx, batch, baseline_, config_.lr_sampler);
    reward_sum += stats.mean_reward * static_cast<double>(stats.steps);
    total.steps += stats.steps;
    total.skipped = total.skipped || stats.skipped;
    encoded_.reset();
  }
  if (total.steps > 0) total.mean_reward = reward_sum / static_cast<double>(total.steps);
  total.baseline = baseline_.value();
  return total;
}

EpochMetrics Trainer::run_epoch() {
  if (!initialized_) initialize();
  const auto rec_stats = recommender_phase();
  const auto pol_stats = sampler_phase();
  ++epoch_;
  EpochMetrics row;
  row.epoch = ++log_epoch_;
  row.phase = "train";
  row.bpr_loss = rec_stats.mean_loss;
  row.avg_delta = rec_stats.mean_delta;
  const bool eval_now =
      (config_.eval_every > 0 && epoch_ % config_.eval_every == 0) || epoch_ == config_.epochs;
  if (eval_now) {
    const auto m = evaluate();
    row.recall = m.recall;
    row.ndcg = m.ndcg;
  }
  if (pol_stats) {
    row.mean_reward = pol_stats->mean_reward;
    row.baseline = pol_stats->baseline;
  }
  log_.push_back(row);
  return row;
}

void Trainer::train() {
  if (!initialized_) initialize();
  while (epoch_ < config_.epochs) run_epoch();
}

RankingMetrics Trainer::evaluate() const {
  return average_metrics(evaluate_per_user(), config_.top_k);
}

std::vector<UserMetrics> Trainer::evaluate_per_user() const {
  return evaluate_users(rec_, dataset_.data, config_.top_k);
}

std::vector<Trajectory> Trainer::sample_trajectories(std::size_t n) {
  if (!has_policy()) throw UsageError("path export needs the kgpolicy sampler");
  if (!initialized_) throw UsageError("trainer not initialized");
  refresh_encoding();
  const PolicyContext ctx = policy_context(*encoded_);
  auto pairs = dataset_.data.train_pairs();
  std::shuffle(pairs.begin(), pairs.end(), rng_);
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < std::min(n, pairs.size()); ++k) {
    out.push_back(rollout(ctx, pairs[k].first, pairs[k].second, rng_));
  }
  return out;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write("KGPC", 4);
  io::write_pod(out, kCheckpointVersion);
  io::write_string(out, config_.to_json());
  io::write_pod<std::uint64_t>(out, epoch_);
  io::write_pod<std::uint64_t>(out, log_epoch_);
  io::write_pod<std::uint64_t>(out, negatives_drawn_);
  io::write_pod<std::uint8_t>(out, initialized_ ? 1 : 0);
  std::ostringstream rng_state;
  rng_state << rng_;
  io::write_string(out, rng_state.str());
  rec_.write(out);
  mf_opt_.write(out);
  io::write_pod<std::uint8_t>(out, has_policy() ? 1 : 0);
  if (has_policy()) {
    sampler_.write(out);
    policy_opt_.write(out);
  }
  baseline_.write(out);
  io::write_pod<std::uint64_t>(out, log_.size());
  for (const auto& r : log_) {
    io::write_pod<std::uint64_t>(out, r.epoch);
    io::write_string(out, r.phase);
    io::write_pod(out, r.bpr_loss);
    io::write_pod(out, r.avg_delta);
    write_optional(out, r.recall);
    write_optional(out, r.ndcg);
    write_optional(out, r.mean_reward);
    write_optional(out, r.baseline);
  }
  if (!out) throw LoadError("write failed for " + path.string());
}

namespace {

std::ifstream open_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  io::expect_magic(in, "KGPC");
  const auto version = io::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }
  return in;
}

}  // namespace

TrainConfig Trainer::checkpoint_config(const std::filesystem::path& path) {
  auto in = open_checkpoint(path);
  return TrainConfig::from_json(io::read_string(in));
}

Trainer Trainer::resume(const Dataset& dataset, const std::filesystem::path& path) {
  auto in = open_checkpoint(path);
  Trainer t(dataset, TrainConfig::from_json(io::read_string(in)));
  t.epoch_ = io::read_pod<std::uint64_t>(in);
  t.log_epoch_ = io::read_pod<std::uint64_t>(in);
  t.negatives_drawn_ = io::read_pod<std::uint64_t>(in);
  t.initialized_ = io::read_pod<std::uint8_t>(in) != 0;
  std::istringstream rng_state(io::read_string(in));
  rng_state >> t.rng_;
  t.rec_ = RecommenderParams::read(in);
  if (t.rec_.num_users() != dataset.data.num_users() || t.rec_.num_items() != dataset.data.num_items()) {
    throw ValidationError("checkpoint does not match the dataset shape");
  }
  t.mf_opt_.read(in);
  if (io::read_pod<std::uint8_t>(in) != 0) {
    t.sampler_ = SamplerParams::read(in);
    t.sampler_.validate(dataset.graph.num_nodes());
    t.policy_opt_.read(in);
  }
  t.baseline_.read(in);
  const auto rows = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < rows; ++k) {
    EpochMetrics r;
    r.epoch = io::read_pod<std::uint64_t>(in);
    r.phase = io::read_string(in);
    r.bpr_loss = io::read_pod<double>(in);
    r.avg_delta = io::read_pod<double>(in);
    r.recall = read_optional(in);
    r.ndcg = read_optional(in);
    r.mean_reward = read_optional(in);
    r.baseline = read_optional(in);
    t.log_.push_back(std::move(r));
  }
  if (t.config_.sampler == SamplerKind::pns) {
    t.popularity_ = std::make_unique<PopularityTable>(dataset.data, t.config_.pns_exponent);
  }
  return t;
}

}  // namespace kgp
