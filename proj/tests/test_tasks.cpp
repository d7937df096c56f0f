#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "gambo/rng.hpp"
#include "gambo/tasks.hpp"

using namespace gambo;

namespace {

double branin_formula(double x1, double x2) {
  const double a = 1.0, b = 5.1 / (4 * M_PI * M_PI), c = 5.0 / M_PI, r = 6.0, s = 10.0, t = 1.0 / (8 * M_PI);
  const double q = x2 - b * x1 * x1 + c * x1 - r;
  return a * q * q + s * (1 - t) * std::cos(x1) + s;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

VectorXd seq_vec(const Sequence& s) {
  VectorXd v(kMotifLength);
  for (int p = 0; p < kMotifLength; ++p) v(p) = s[static_cast<std::size_t>(p)];
  return v;
}

}  // namespace

TEST_CASE("Branin oracle") {
  CHECK(branin_oracle(vec({M_PI, 2.275})) == doctest::Approx(-0.39789).epsilon(1e-5));
  CHECK(branin_oracle(vec({9.42478, 2.475})) == doctest::Approx(-0.39789).epsilon(1e-5));
  CHECK(branin_oracle(vec({-M_PI, 12.275})) == doctest::Approx(-0.39789).epsilon(1e-5));
  CHECK(branin_oracle(vec({2.0, 7.0})) == doctest::Approx(-branin_formula(2.0, 7.0)));
  const auto before = branin_clamp_count();
  CHECK(branin_oracle(vec({-100, 0})) == branin_oracle(vec({-5, 0})));
  CHECK(branin_oracle(vec({20, 40})) == branin_oracle(vec({10, 15})));
  CHECK(branin_clamp_count() >= before + 2);
  CHECK_THROWS(branin_oracle(vec({NAN, 1})));
}

TEST_CASE("Branin dataset") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const OfflineDataset ds = build_branin_dataset(1000, seed);
    REQUIRE(ds.size() == 800);
    CHECK(ds.best_score() > -16.0);
    CHECK(ds.best_score() < -10.0);

    // regenerate the raw sample to check the cut
    Rng rng(derive_seed(seed, "branin-dataset"));
    std::uniform_real_distribution<double> u1(-5.0, 10.0), u2(0.0, 15.0);
    std::vector<double> all;
    for (int i = 0; i < 1000; ++i) {
      const double x1 = u1(rng), x2 = u2(rng);
      all.push_back(-branin_formula(x1, x2));
    }
    std::sort(all.begin(), all.end());
    CHECK(ds.best_score() == doctest::Approx(all[799]));
    CHECK(ds.best_score() < all[800]);

    for (Eigen::Index i = 0; i < ds.size(); ++i)
      CHECK(ds.scores(i) == branin_oracle(ds.raw_designs.row(i).transpose()));
  }
  CHECK(build_branin_dataset(1000, 3).designs == build_branin_dataset(1000, 3).designs);
}

TEST_CASE("standardization") {
  const BraninTask task(1);
  const auto& ds = task.dataset();
  const VectorXd mean = ds.designs.colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() <= 1e-9);
  for (Eigen::Index j = 0; j < ds.designs.cols(); ++j) {
    const double sd = std::sqrt((ds.designs.col(j).array() - mean(j)).square().mean());
    CHECK(std::abs(sd - 1.0) <= 1e-9);
  }
  CHECK(ds.design_stats.standardize(ds.design_stats.mean).isZero());
  const VectorXd x = vec({3.3, 11.1});
  CHECK((ds.design_stats.destandardize(ds.design_stats.standardize(x)) - x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((task.decode(task.encode(x)) - x).cwiseAbs().maxCoeff() <= 1e-12);
  const VectorXd ys = ds.standardized_scores();
  CHECK(std::abs(ys.mean()) <= 1e-9);

  MatrixXd constant = MatrixXd::Ones(4, 2);
  const Standardizer s = Standardizer::fit(constant);
  CHECK(s.scale.minCoeff() >= 1e-8);
}

TEST_CASE("motif oracle") {
  const MotifOracle o = MotifOracle::seeded(0);
  double best = -1.0;
  int best_index = -1;
  for (int i = 0; i < 65536; ++i) {
    const double v = o(MotifOracle::sequence_from_index(i));
    CHECK_FALSE(v < 0.0);
    CHECK_FALSE(v > 1.0);
    if (v > best) {
      best = v;
      best_index = i;
    }
  }
  CHECK(best == 1.0);
  CHECK(MotifOracle::sequence_from_index(best_index) == o.argmax());
  Sequence bad{};
  bad[3] = 4;
  CHECK_THROWS_AS(o(bad), std::out_of_range);
  CHECK(MotifOracle::sequence_from_index(1) == Sequence{0, 0, 0, 0, 0, 0, 0, 1});
}

TEST_CASE("motif relabeling permutes the argmax") {
  const MotifOracle o = MotifOracle::seeded(2);
  const std::array<int, 4> perm = {2, 0, 3, 1};
  MotifOracle::Pwm pwm{};
  MotifOracle::Pairs pairs{};
  for (std::size_t p = 0; p < kMotifLength; ++p)
    for (std::size_t a = 0; a < 4; ++a) pwm[p][static_cast<std::size_t>(perm[a])] = o.pwm()[p][a];
  for (std::size_t p = 0; p + 1 < kMotifLength; ++p)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        pairs[p][static_cast<std::size_t>(perm[a])][static_cast<std::size_t>(perm[b])] = o.pairs()[p][a][b];
  const MotifOracle relabeled(pwm, pairs);
  Sequence expected{};
  for (std::size_t p = 0; p < kMotifLength; ++p) expected[p] = perm[static_cast<std::size_t>(o.argmax()[p])];
  CHECK(relabeled.argmax() == expected);
}

TEST_CASE("motif dataset and decoding") {
  const MotifTask task(0);
  const auto& ds = task.dataset();
  CHECK(ds.size() == 4096);
  CHECK(task.opt_dim() == 32);
  CHECK(ds.best_score() < 1.0);
  for (Eigen::Index i = 0; i < ds.size(); i += 37) {
    const VectorXd z = ds.designs.row(i).transpose();
    const VectorXd s = task.decode(z);
    CHECK((task.encode(s) - z).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(task.oracle(s) == ds.scores(i));
  }
  const VectorXd top = seq_vec(task.motif_oracle().argmax());
  CHECK(task.decode(task.encode(top)) == top);

  // all-zero z decodes through the per-column means, i.e. the most frequent
  // symbol at each position of the retained sequences
  const VectorXd at_mean = task.decode(VectorXd::Zero(32));
  CHECK(at_mean == vec({3, 0, 0, 1, 3, 0, 1, 1}));
  const VectorXd counts = ds.raw_designs.colwise().sum().transpose();
  for (int p = 0; p < kMotifLength; ++p) {
    Eigen::Index arg = 0;
    counts.segment(p * 4, 4).maxCoeff(&arg);
    CHECK(at_mean(p) == static_cast<double>(arg));
  }

  // a large logit bump wins its position
  VectorXd z = task.encode(top);
  const int pos = 5, sym = (task.motif_oracle().argmax()[pos] + 1) % 4;
  z(pos * 4 + sym) += 10.0 / ds.design_stats.scale(pos * 4 + sym);
  CHECK(task.decode(z)(pos) == sym);

  // ties go to the lowest symbol
  Standardizer unit{VectorXd::Zero(32), VectorXd::Ones(32)};
  CHECK(discrete_decode(VectorXd::Zero(32), unit) == Sequence{});
  CHECK_THROWS(task.encode(vec({0, 1, 2, 3, 0, 1, 2, 5})));
}

TEST_CASE("dosing score formula") {
  DosingModel m;
  m.weights = VectorXd::Zero(kCovariates);
  m.weights(0) = 1.0;
  m.intercept = 5.0;
  m.mean_dose = 4.0;
  VectorXd x = VectorXd::Zero(kCovariates);
  x(0) = 1.0;  // oracle dose 6
  CHECK(m.score(6.0, x) == 1.0);
  CHECK(m.score(4.0, x) == 0.0);
  // c(z-bar) = 4, so dose 6 + 2 sqrt(2) costs 8
  CHECK(m.score(6.0 + 2.0 * std::sqrt(2.0), x) == doctest::Approx(-1.0));
  m.mean_dose = 6.0;
  CHECK_THROWS(m.score(5.0, x));
}

TEST_CASE("dosing task") {
  const DosingTask task(0);
  const auto& ds = task.dataset();
  CHECK(ds.size() == 512);
  CHECK(task.opt_dim() == kCovariates + 1);
  CHECK(task.conditional());
  CHECK(task.conditions().rows() == 50);
  for (int j = 0; j < kCovariates; ++j) CHECK_FALSE(task.free_mask()[static_cast<std::size_t>(j)]);
  CHECK(task.free_mask()[kCovariates]);
  CHECK(ds.scores.maxCoeff() <= 1.0);
  CHECK(ds.scores.mean() == doctest::Approx(0.060783680177645905).epsilon(1e-12));

  // the exhaustive 1-D grid ceiling for each evaluation patient
  const auto& m = task.model();
  for (int p = 0; p < 50; ++p) {
    const VectorXd x = task.eval_patients().row(p).transpose();
    double best = -1e300;
    const double lo = m.oracle_dose(x) - 10.0;
    for (int k = 0; k <= 20000; ++k) best = std::max(best, m.score(lo + k * 1e-3, x));
    CHECK(best >= 0.999);
    VectorXd design(kCovariates + 1);
    design << x, m.mean_dose;
    CHECK(task.oracle(design) == doctest::Approx(0.0).epsilon(1e-12));
    // conditions carry the patient's covariates in standardized form
    const VectorXd raw = task.decode(task.conditions().row(p).transpose());
    CHECK((raw.head(kCovariates) - x).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("registry") {
  for (const auto& name : task_names()) CHECK(make_task(name, 0)->name() == name);
  CHECK_THROWS(make_task("tfbind", 0));
  CHECK_FALSE(make_task("branin", 0)->conditional());
}
