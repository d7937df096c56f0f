#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "gambo/gp.hpp"
#include "gambo/rng.hpp"
#include "gambo/sobol.hpp"

using namespace gambo;

namespace {

// Largest local discrepancy over anchored boxes [0, x) on a 64 x 64 corner grid.
double star_discrepancy_estimate(const MatrixXd& X) {
  double worst = 0.0;
  const double n = static_cast<double>(X.rows());
  for (int a = 1; a <= 64; ++a)
    for (int b = 1; b <= 64; ++b) {
      const double u = a / 64.0, v = b / 64.0;
      int inside = 0;
      for (Eigen::Index i = 0; i < X.rows(); ++i) inside += (X(i, 0) < u && X(i, 1) < v) ? 1 : 0;
      worst = std::max(worst, std::abs(inside / n - u * v));
    }
  return worst;
}

double analytic_ei(double mean, double sd, double best) {
  const double z = (mean - best) / sd;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return (mean - best) * cdf + sd * pdf;
}

}  // namespace

TEST_CASE("Sobol golden values") {
  // unscrambled points 1..8 of the 6-dimensional sequence
  const double expected[8][6] = {{0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
                                 {0.75, 0.25, 0.25, 0.25, 0.75, 0.75},
                                 {0.25, 0.75, 0.75, 0.75, 0.25, 0.25},
                                 {0.375, 0.375, 0.625, 0.875, 0.375, 0.125},
                                 {0.875, 0.875, 0.125, 0.375, 0.875, 0.625},
                                 {0.625, 0.125, 0.875, 0.625, 0.625, 0.875},
                                 {0.125, 0.625, 0.375, 0.125, 0.125, 0.375},
                                 {0.1875, 0.3125, 0.9375, 0.4375, 0.5625, 0.3125}};
  const MatrixXd S = sobol_sample(8, 6, 0, false);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 6; ++j) CHECK(S(i, j) == expected[i][j]);
  CHECK(sobol_sample(1, 40, 0, false).isConstant(0.5));
}

TEST_CASE("Sobol range, determinism and dimension limits") {
  const MatrixXd S = sobol_sample(500, 64, 3);
  CHECK(S.minCoeff() >= 0.0);
  CHECK(S.maxCoeff() < 1.0);
  CHECK(S == sobol_sample(500, 64, 3));
  CHECK_FALSE(S == sobol_sample(500, 64, 4));
  CHECK_THROWS(sobol_sample(4, 0, 0));
  CHECK_THROWS(sobol_sample(4, kSobolMaxDim + 1, 0));
}

TEST_CASE("Sobol discrepancy beats uniform sampling") {
  const double sobol = star_discrepancy_estimate(sobol_sample(1024, 2, 0, false));
  std::vector<double> uniform;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd X(1024, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = u(rng);
    uniform.push_back(star_discrepancy_estimate(X));
  }
  std::nth_element(uniform.begin(), uniform.begin() + 10, uniform.end());
  CHECK(sobol < uniform[10]);
}

TEST_CASE("Matern kernel closed form") {
  const GpHyper h{0.7, 1.3, 1e-4};
  const double r = 0.4, s = std::sqrt(5.0) * r / 0.7;
  CHECK(matern52(r, h) == doctest::Approx(1.3 * (1 + s + s * s / 3) * std::exp(-s)));
  CHECK(matern52(0.0, h) == doctest::Approx(1.3));
}

TEST_CASE("GP interpolation and prior reversion") {
  Rng rng(1);
  const MatrixXd X = standard_normal(25, 2, rng);
  VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = std::sin(X(i, 0)) + 0.5 * X(i, 1);
  const GpHyper h{0.9, 1.0, kGpJitter};
  const Gp gp = Gp::condition(X, y, h);
  const double scale2 = gp.y_scale() * gp.y_scale();
  CHECK(((gp.mean(X) - y) / gp.y_scale()).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(gp.variance(X).maxCoeff() / scale2 <= 1e-4);
  CHECK(gp.variance(X).minCoeff() >= 0.0);

  MatrixXd far(1, 2);
  far << 30.0, -30.0;
  CHECK(gp.mean(far)(0) == doctest::Approx(gp.y_mean()).epsilon(1e-6));
  CHECK(gp.variance(far)(0) / scale2 == doctest::Approx(h.outputscale).epsilon(0.05));
}

TEST_CASE("posterior symmetry") {
  MatrixXd X(3, 1);
  X << -1, 0, 1;
  VectorXd y(3);
  y << 1, 0, 1;
  const Gp gp = Gp::condition(X, y, {1.0, 1.0, 1e-6});
  MatrixXd Xs(2, 1);
  Xs << -0.5, 0.5;
  const auto post = gp.posterior(Xs);
  CHECK(post.mean(0) == doctest::Approx(post.mean(1)));
  CHECK(post.cov(0, 0) == doctest::Approx(post.cov(1, 1)));
  CHECK(post.cov(0, 1) == doctest::Approx(post.cov(1, 0)));
}

TEST_CASE("adding a noiseless observation") {
  Rng rng(2);
  MatrixXd X = standard_normal(12, 3, rng);
  VectorXd y = standard_normal(12, 1, rng).col(0);
  MatrixXd Xn(13, 3);
  Xn << X, standard_normal(1, 3, rng);
  VectorXd yn(13);
  yn << y, 0.37;
  const Gp gp = Gp::condition(Xn, yn, {1.0, 1.0, kGpJitter});
  CHECK(std::abs(gp.mean(Xn.bottomRows(1))(0) - 0.37) / gp.y_scale() <= 1e-6);
}

TEST_CASE("hyperparameter fitting") {
  Rng rng(3);
  MatrixXd X = standard_normal(32, 2, rng);
  VectorXd y = 1.5 * X.col(0);

  SUBCASE("linear data interpolated") {
    const Gp gp = Gp::fit(X, y);
    CHECK(((gp.mean(X) - y) / gp.y_scale()).cwiseAbs().maxCoeff() <= 1e-3);
  }
  SUBCASE("likelihood beats the default") {
    VectorXd noisy = y + 0.1 * standard_normal(32, 1, rng).col(0);
    const Gp gp = Gp::fit(X, noisy);
    const VectorXd ys = (noisy.array() - gp.y_mean()) / gp.y_scale();
    CHECK(gp.log_marginal_likelihood() >= log_marginal_likelihood(X, ys, GpHyper{}) - 1e-9);
  }
  SUBCASE("deterministic") {
    const Gp a = Gp::fit(X, y), b = Gp::fit(X, y);
    CHECK(a.hyper().lengthscale == b.hyper().lengthscale);
    CHECK(a.hyper().outputscale == b.hyper().outputscale);
    CHECK(a.hyper().noise == b.hyper().noise);
  }
  SUBCASE("constant targets") {
    MatrixXd X2(2, 2);
    X2 << 0, 0, 1, 1;
    const Gp gp = Gp::fit(X2, VectorXd::Constant(2, 4.0));
    MatrixXd far(1, 2);
    far << 50, 50;
    CHECK(gp.mean(far)(0) == doctest::Approx(4.0));
    CHECK(gp.mean(X2)(0) == doctest::Approx(4.0));
  }
  SUBCASE("identical rows") {
    const MatrixXd same = MatrixXd::Ones(6, 2);
    const VectorXd v = standard_normal(6, 1, rng).col(0);
    const Gp gp = Gp::fit(same, v);
    CHECK(std::isfinite(gp.mean(same)(0)));
    CHECK(gp.mean(same)(0) == doctest::Approx(v.mean()).epsilon(1e-3));
  }
}

TEST_CASE("Monte Carlo expected improvement") {
  Rng rng(4);
  const VectorXd normals = standard_normal(200000, 1, rng).col(0);
  CHECK(mc_expected_improvement(0.3, 0.8, 0.5, normals) == doctest::Approx(analytic_ei(0.3, 0.8, 0.5)).epsilon(0.01));
  CHECK(mc_expected_improvement(-2.0, 0.0, 0.5, normals) == 0.0);
  CHECK(mc_expected_improvement(1.0, 0.0, 0.5, normals) == doctest::Approx(0.5));
}

TEST_CASE("qEI acquisition") {
  Rng rng(5);
  const MatrixXd X = (standard_normal(30, 2, rng).array() * 0.6).matrix();
  VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = -X.row(i).squaredNorm();
  const Gp gp = Gp::fit(X, y);
  const double incumbent = y.maxCoeff();

  SUBCASE("nonnegative over the pool") {
    AcquireConfig cfg;
    cfg.batch = 4;
    cfg.candidate_pool = 1000;
    AcquireTrace trace;
    const MatrixXd picks = qei_acquire(gp, incumbent, cfg, -1.0, 1.0, rng, &trace);
    CHECK(picks.rows() == 4);
    REQUIRE(trace.ei.size() == 4);
    for (const auto& ei : trace.ei) CHECK(ei.minCoeff() >= 0.0);
    CHECK(picks.minCoeff() >= -1.0);
    CHECK(picks.maxCoeff() <= 1.0);
  }
  SUBCASE("known optimum") {
    AcquireConfig cfg;
    const MatrixXd pick = qei_acquire(gp, incumbent, cfg, -1.0, 1.0, rng);
    CHECK(pick.row(0).norm() < 0.2);
  }
  SUBCASE("fantasy variance collapse moves the second pick") {
    MatrixXd pool(2, 2);
    // far from the data both candidates revert to the prior mean, below the
    // incumbent, so their EI comes from variance alone
    pool << 2.5, 2.5, -2.5, 2.5;
    AcquireConfig cfg;
    cfg.batch = 2;
    cfg.candidate_pool = 2;
    AcquireTrace trace;
    const Gp fixed = Gp::condition(X, y, {0.5, 1.0, 1e-6});
    qei_acquire_from_pool(fixed, fixed.y_mean() + 0.5 * fixed.y_scale(), cfg, pool, rng, &trace);
    REQUIRE(trace.picks.size() == 2);
    const auto first = trace.picks[0];
    CHECK(trace.ei[1](first) < 1e-3 * trace.ei[0](first));
    CHECK(trace.picks[1] != first);
  }
  SUBCASE("deterministic") {
    AcquireConfig cfg;
    cfg.batch = 3;
    Rng a(9), b(9);
    CHECK(qei_acquire(gp, incumbent, cfg, -4.0, 4.0, a) == qei_acquire(gp, incumbent, cfg, -4.0, 4.0, b));
  }
  SUBCASE("unfitted gp") {
    CHECK_THROWS(qei_acquire(Gp{}, 0.0, AcquireConfig{}, -1.0, 1.0, rng));
  }
}
