#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "kgp/baseline_samplers.hpp"
#include "kgp/error.hpp"
#include "kgp/synthetic.hpp"
#include "kgp/trainer.hpp"

using namespace kgp;
namespace fs = std::filesystem;

namespace {

const Dataset& small_world() {
  static const Dataset d = [] {
    SyntheticConfig c;
    c.users = 30;
    c.items = 60;
    c.factors = 5;
    c.entities_per_factor = 4;
    c.interactions_per_user = 8;
    c.interaction_spread = 2;
    c.seed = 3;
    return make_synthetic_world(c);
  }();
  return d;
}

TrainConfig small_config(SamplerKind kind) {
  TrainConfig c;
  c.sampler = kind;
  c.seed = 5;
  c.dim = 8;
  c.layers = 2;
  c.lr_rec = 0.01;
  c.lr_sampler = 0.01;
  c.batch_size = 64;
  c.sampler_batch_size = 64;
  c.epochs = 3;
  c.n1 = 8;
  c.n2 = 6;
  c.n_rand = 2;
  c.pretrain_epochs = 4;
  c.pretrain_patience = 2;
  c.validation_fraction = 0.2;
  c.eval_every = 2;
  return c;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("kgp_tr_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synthetic world has the requested shape") {
  SyntheticConfig c;
  const auto d = make_synthetic_world(c);
  CHECK(d.data.num_users() == 200);
  CHECK(d.data.num_items() == 500);
  CHECK(d.layout.num_entities == 300);
  CHECK(d.kg.size() == 500 * 3);
  const double per_user = double(d.data.num_train() + d.data.num_test()) / 200.0;
  CHECK(per_user == doctest::Approx(20.0).epsilon(0.05));
  for (UserId u = 0; u < 200; ++u) {
    CHECK_FALSE(d.data.train(u).empty());
    CHECK_FALSE(d.data.test(u).empty());
  }
  // Same seed, same world.
  const auto again = make_synthetic_world(c);
  CHECK(again.graph == d.graph);

  TempDir dir;
  write_dataset(dir.path, d);
  const auto loaded = Dataset::load(dir.path);
  CHECK(loaded.graph == d.graph);
  CHECK(loaded.data.num_test() == d.data.num_test());
  CHECK_THROWS_AS(make_synthetic_world(SyntheticConfig{.users = 0}), ConfigError);
}

TEST_CASE("validation split partitions each user's train items") {
  Rng rng(1);
  const auto& d = small_world();
  const auto split = split_validation(d.data, 0.2, rng);
  for (UserId u = 0; u < d.data.num_users(); ++u) {
    std::vector<ItemId> merged;
    std::merge(split.fit[u].begin(), split.fit[u].end(), split.held_out[u].begin(), split.held_out[u].end(),
               std::back_inserter(merged));
    const auto train = d.data.train(u);
    CHECK(merged == std::vector<ItemId>(train.begin(), train.end()));
    if (train.size() >= 2) {
      CHECK(split.held_out[u].size() >= 1);
      CHECK(split.fit[u].size() >= 1);
    }
  }
}

TEST_CASE("identical runs give identical checkpoints and metrics") {
  for (auto kind : {SamplerKind::rns, SamplerKind::kgpolicy}) {
    TempDir dir;
    for (int run = 0; run < 2; ++run) {
      Trainer t(small_world(), small_config(kind));
      t.train();
      t.save_checkpoint(dir.path / ("ck" + std::to_string(run)));
      write_metrics_csv(dir.path / ("m" + std::to_string(run)), t.log());
    }
    CHECK(slurp(dir.path / "ck0") == slurp(dir.path / "ck1"));
    CHECK(slurp(dir.path / "m0") == slurp(dir.path / "m1"));

    auto other = small_config(kind);
    other.seed = 6;
    Trainer t(small_world(), other);
    t.train();
    t.save_checkpoint(dir.path / "ck2");
    CHECK(slurp(dir.path / "ck0") != slurp(dir.path / "ck2"));
  }
}

TEST_CASE("resuming from a checkpoint continues bitwise identically") {
  TempDir dir;
  auto cfg = small_config(SamplerKind::kgpolicy);
  cfg.epochs = 4;
  Trainer straight(small_world(), cfg);
  straight.train();
  straight.save_checkpoint(dir.path / "straight");

  Trainer first(small_world(), cfg);
  first.initialize();
  first.run_epoch();
  first.run_epoch();
  first.save_checkpoint(dir.path / "half");
  Trainer second = Trainer::resume(small_world(), dir.path / "half");
  CHECK(second.epoch() == 2);
  second.train();
  second.save_checkpoint(dir.path / "resumed");
  CHECK(slurp(dir.path / "straight") == slurp(dir.path / "resumed"));
  CHECK(Trainer::checkpoint_config(dir.path / "half").to_json() == cfg.to_json());
}

TEST_CASE("checkpoints reject the wrong dataset and corrupt files") {
  TempDir dir;
  Trainer t(small_world(), small_config(SamplerKind::rns));
  t.initialize();
  t.save_checkpoint(dir.path / "ck");
  const auto other = testing::enumerable_dataset();
  CHECK_THROWS_AS(Trainer::resume(other, dir.path / "ck"), ValidationError);
  std::ofstream(dir.path / "bad") << "KGPC garbage";
  CHECK_THROWS_AS(Trainer::resume(small_world(), dir.path / "bad"), LoadError);
  CHECK_THROWS_AS(Trainer::resume(small_world(), dir.path / "missing"), LoadError);
}

TEST_CASE("each phase leaves the other model frozen") {
  Trainer t(small_world(), small_config(SamplerKind::kgpolicy));
  t.initialize();
  const auto sampler_before = t.sampler_params();
  const auto rec_before = t.recommender();
  t.recommender_phase();
  CHECK(t.sampler_params() == sampler_before);
  CHECK_FALSE(t.recommender() == rec_before);

  const auto rec_mid = t.recommender();
  const auto stats = t.sampler_phase();
  REQUIRE(stats.has_value());
  CHECK(t.recommender() == rec_mid);
  CHECK_FALSE(t.sampler_params() == sampler_before);
  CHECK(stats->steps == small_world().data.num_train() * 2);
}

TEST_CASE("uniform sampling path equals a hand-written training loop") {
  auto cfg = small_config(SamplerKind::rns);
  Trainer t(small_world(), cfg);
  t.train();

  const auto& d = small_world();
  Rng rng(cfg.seed);
  auto rec = RecommenderParams::xavier(d.data.num_users(), d.data.num_items(), cfg.dim, rng);
  MfOptimizer opt(rec);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    auto pairs = d.data.train_pairs();
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (std::size_t s = 0; s < pairs.size(); s += cfg.batch_size) {
      std::vector<PairwiseSample> batch;
      for (std::size_t k = s; k < std::min(pairs.size(), s + cfg.batch_size); ++k) {
        batch.push_back({pairs[k].first, pairs[k].second, rns_sample(d.data, pairs[k].first, rng)});
      }
      opt.bpr_step(rec, batch, cfg.lr_rec, cfg.l2);
    }
  }
  CHECK(t.recommender() == rec);
  CHECK(t.negatives_drawn() == cfg.epochs * d.data.num_train());
}

TEST_CASE("epoch log, deltas and metrics file") {
  TempDir dir;
  auto cfg = small_config(SamplerKind::kgpolicy);
  Trainer t(small_world(), cfg);
  t.train();
  const auto& log = t.log();
  std::size_t pretrain_rows = 0, train_rows = 0;
  for (const auto& r : log) {
    (r.phase == "pretrain" ? pretrain_rows : train_rows) += 1;
    if (r.phase == "train") {
      CHECK(r.mean_reward.has_value());
      CHECK(r.baseline.has_value());
    }
  }
  CHECK(pretrain_rows >= 1);
  CHECK(pretrain_rows <= cfg.pretrain_epochs);
  CHECK(train_rows == cfg.epochs);
  CHECK(log.back().recall.has_value());     // last epoch is always evaluated
  CHECK_FALSE(log[pretrain_rows].recall);   // epoch 1 is not on the schedule
  for (std::size_t k = 0; k < log.size(); ++k) CHECK(log[k].epoch == k + 1);

  CHECK(t.last_deltas().size() == small_world().data.num_train());
  for (double x : t.last_deltas()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
  write_metrics_csv(dir.path / "m.csv", log);
  std::ifstream in(dir.path / "m.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,phase,bpr_loss,avg_delta,recall@20,ndcg@20,mean_reward,baseline");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == log.size());

  const auto paths = t.sample_trajectories(5);
  CHECK(paths.size() == 5);
  const auto m = t.evaluate();
  CHECK(m.users == small_world().data.num_users());
}

TEST_CASE("every sampler trains and never feeds a positive as negative") {
  for (auto kind : {SamplerKind::rns, SamplerKind::pns, SamplerKind::dns, SamplerKind::rws, SamplerKind::kgpolicy}) {
    auto cfg = small_config(kind);
    cfg.epochs = 1;
    Trainer t(small_world(), cfg);
    CHECK_NOTHROW(t.train());
    CHECK(t.has_policy() == (kind == SamplerKind::kgpolicy));
    if (!t.has_policy()) CHECK_THROWS_AS(t.sample_trajectories(1), UsageError);
  }
}
