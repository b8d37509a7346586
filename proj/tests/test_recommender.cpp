#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "kgp/adam.hpp"
#include "kgp/error.hpp"
#include "kgp/recommender.hpp"

using namespace kgp;

namespace {

PairwiseSample random_sample(const RecommenderParams& p, Rng& rng) {
  std::uniform_int_distribution<UserId> pu(0, static_cast<UserId>(p.num_users() - 1));
  std::uniform_int_distribution<ItemId> pi(0, static_cast<ItemId>(p.num_items() - 1));
  PairwiseSample s{pu(rng), pi(rng), pi(rng)};
  while (s.neg == s.pos) s.neg = pi(rng);
  return s;
}

// Reference loss written directly from the definition.
double oracle_loss(const RecommenderParams& p, const PairwiseSample& s, double l2) {
  double x = 0.0, reg = 0.0;
  for (std::size_t k = 0; k < p.dim(); ++k) {
    x += p.user(s.user)[k] * (p.item(s.pos)[k] - p.item(s.neg)[k]);
    reg += p.user(s.user)[k] * p.user(s.user)[k] + p.item(s.pos)[k] * p.item(s.pos)[k] +
           p.item(s.neg)[k] * p.item(s.neg)[k];
  }
  return -std::log(1.0 / (1.0 + std::exp(-x))) + l2 * reg;
}

}  // namespace

TEST_CASE("sigmoid and softplus stay finite at extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  for (double x : {-30.0, -3.0, -0.1, 0.4, 7.0, 25.0}) {
    CHECK(softplus(x) == doctest::Approx(std::log1p(std::exp(x))).epsilon(1e-12));
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0));
  }
}

TEST_CASE("bpr loss matches the definition") {
  Rng rng(1);
  auto p = RecommenderParams::xavier(7, 11, 5, rng);
  for (int k = 0; k < 50; ++k) {
    const auto s = random_sample(p, rng);
    CHECK(bpr_loss(p, s, 0.0) == doctest::Approx(oracle_loss(p, s, 0.0)).epsilon(1e-12));
    CHECK(bpr_loss(p, s, 0.03) == doctest::Approx(oracle_loss(p, s, 0.03)).epsilon(1e-12));
    const double x = predict(p, s.user, s.pos) - predict(p, s.user, s.neg);
    CHECK(gradient_magnitude(p, s) == doctest::Approx(1.0 - 1.0 / (1.0 + std::exp(-x))).epsilon(1e-12));
  }
}

TEST_CASE("bpr loss edge cases") {
  RecommenderParams p(1, 2, 3);
  // Zero embeddings: loss ln 2 and delta one half.
  CHECK(bpr_loss(p, {0, 0, 1}, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(gradient_magnitude(p, {0, 0, 1}) == doctest::Approx(0.5));
  // A huge margin gives a vanishing but finite loss.
  p.user_emb().fill(30.0);
  p.item_emb().row(0)[0] = 30.0;
  CHECK(bpr_loss(p, {0, 0, 1}, 0.0) >= 0.0);
  CHECK(bpr_loss(p, {0, 0, 1}, 0.0) < 1e-100);
  CHECK(std::isfinite(bpr_loss(p, {0, 1, 0}, 0.0)));
  CHECK(bpr_loss(p, {0, 1, 0}, 0.0) == doctest::Approx(900.0));
  CHECK_THROWS(p.user(5));
}

TEST_CASE("bpr gradients match central differences on 100 samples") {
  Rng rng(42);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto p = RecommenderParams::xavier(5, 9, 4, rng);
    for (double& v : p.user_emb().values()) v *= 3.0;
    const auto s = random_sample(p, rng);
    const double l2 = trial % 2 ? 0.01 : 0.0;
    const auto g = bpr_gradients(p, s, l2);
    std::vector<double> analytic, numeric;
    auto probe = [&](std::span<double> row, const std::vector<double>& grad) {
      for (std::size_t k = 0; k < row.size(); ++k) {
        const double keep = row[k];
        row[k] = keep + h;
        const double up = bpr_loss(p, s, l2);
        row[k] = keep - h;
        const double down = bpr_loss(p, s, l2);
        row[k] = keep;
        analytic.push_back(grad[k]);
        numeric.push_back((up - down) / (2 * h));
      }
    };
    probe(p.user_emb().row(s.user), g.user);
    probe(p.item_emb().row(s.pos), g.pos);
    probe(p.item_emb().row(s.neg), g.neg);
    CHECK(testing::relative_error(analytic, numeric) < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("adam row update follows the textbook recursion") {
  AdamConfig cfg;
  AdamState state(2, 3, cfg);
  std::vector<double> param{0.5, -1.0, 2.0}, grad{0.1, -0.3, 0.0};
  std::vector<double> m(3, 0.0), v(3, 0.0), ref = param;
  for (int t = 1; t <= 4; ++t) {
    state.begin_step();
    state.update_row(1, param, grad, 0.01);
    for (std::size_t k = 0; k < 3; ++k) {
      m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * grad[k];
      v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * grad[k] * grad[k];
      const double mh = m[k] / (1 - std::pow(cfg.beta1, t));
      const double vh = v[k] / (1 - std::pow(cfg.beta2, t));
      ref[k] -= 0.01 * mh / (std::sqrt(vh) + cfg.epsilon);
    }
    for (std::size_t k = 0; k < 3; ++k) CHECK(param[k] == doctest::Approx(ref[k]).epsilon(1e-14));
  }
  CHECK(state.step() == 4);
}

TEST_CASE("optimizer touches only the rows in the batch") {
  Rng rng(9);
  auto p = RecommenderParams::xavier(6, 10, 4, rng);
  const auto before = p;
  MfOptimizer opt(p);
  std::vector<PairwiseSample> batch{{1, 2, 7}, {1, 3, 7}, {4, 2, 9}};
  const auto stats = opt.bpr_step(p, batch, 0.05, 1e-4);
  CHECK(stats.samples == 3);
  double loss = 0.0, delta = 0.0;
  for (const auto& s : batch) {
    loss += bpr_loss(before, s, 1e-4);
    delta += gradient_magnitude(before, s);
  }
  CHECK(stats.mean_loss == doctest::Approx(loss / 3));
  CHECK(stats.mean_delta == doctest::Approx(delta / 3));
  for (UserId u = 0; u < 6; ++u) {
    const bool touched = u == 1 || u == 4;
    CHECK((p.user_emb().row(u)[0] != before.user_emb().row(u)[0]) == touched);
  }
  for (ItemId i = 0; i < 10; ++i) {
    const bool touched = i == 2 || i == 3 || i == 7 || i == 9;
    const auto a = p.item(i), b = before.item(i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()) == !touched);
  }
  // A step on the averaged gradient lowers the batch loss for a small rate.
  double after = 0.0;
  for (const auto& s : batch) after += bpr_loss(p, s, 1e-4);
  CHECK(after < loss);
}

TEST_CASE("non-finite gradients raise and leave parameters untouched") {
  Rng rng(4);
  auto p = RecommenderParams::xavier(2, 3, 2, rng);
  p.user_emb()(0, 0) = std::numeric_limits<double>::infinity();
  const auto before = p;
  MfOptimizer opt(p);
  std::vector<PairwiseSample> batch{{0, 1, 2}};
  CHECK_THROWS_AS(opt.bpr_step(p, batch, 0.1, 0.0), NumericError);
  CHECK(std::equal(p.item_emb().values().begin(), p.item_emb().values().end(),
                   before.item_emb().values().begin()));
  // The optimizer stays usable for finite batches.
  std::vector<PairwiseSample> ok{{1, 1, 2}};
  CHECK_NOTHROW(opt.bpr_step(p, ok, 0.1, 0.0));
}

TEST_CASE("parameter and optimizer serialization round trip") {
  Rng rng(8);
  auto p = RecommenderParams::xavier(3, 4, 5, rng);
  MfOptimizer opt(p);
  std::vector<PairwiseSample> batch{{0, 1, 2}, {2, 3, 0}};
  opt.bpr_step(p, batch, 0.01, 0.0);
  std::stringstream ss;
  p.write(ss);
  opt.write(ss);
  const auto p2 = RecommenderParams::read(ss);
  MfOptimizer opt2;
  opt2.read(ss);
  CHECK(p2 == p);
  CHECK(opt2 == opt);
  // Continuing from the restored copy is bitwise identical.
  auto a = p, b = p2;
  opt.bpr_step(a, batch, 0.01, 0.0);
  opt2.bpr_step(b, batch, 0.01, 0.0);
  CHECK(a == b);

  std::stringstream bad("KGPX");
  CHECK_THROWS_AS(RecommenderParams::read(bad), LoadError);
}

TEST_CASE("xavier initialization respects the bound") {
  Rng rng(0);
  const auto m = Matrix::xavier_uniform(40, 10, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  double mean = 0.0;
  for (double v : m.values()) {
    CHECK(std::abs(v) <= bound);
    mean += v;
  }
  CHECK(std::abs(mean / 400.0) < 0.05);
}
