#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "gambo/rng.hpp"
#include "gambo/wasserstein.hpp"

using namespace gambo;

namespace {

double brute_force_w1(const MatrixXd& P, const MatrixXd& Q) {
  std::vector<int> perm(static_cast<std::size_t>(P.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) s += (P.row(perm[static_cast<std::size_t>(i)]) - Q.row(i)).norm();
    best = std::min(best, s / static_cast<double>(P.rows()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

MatrixXd column(std::initializer_list<double> v) {
  MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Mlp affine_first_coordinate(int d) {
  RowMatrix W = RowMatrix::Zero(1, d);
  W(0, 0) = 1.0;
  return Mlp::from_parameters({W}, {VectorXd::Zero(1)});
}

}  // namespace

TEST_CASE("exact W1 closed forms") {
  Rng rng(0);
  const MatrixXd P = standard_normal(6, 3, rng);
  CHECK(w1_exact(P, P) == 0.0);
  CHECK(w1_exact(column({0}), column({3})) == doctest::Approx(3.0));
  CHECK(w1_exact(column({0, 1}), column({1, 2})) == doctest::Approx(1.0));
  CHECK_THROWS(w1_exact(column({0, 1}), column({1})));
  CHECK_THROWS(w1_exact(MatrixXd(0, 2), MatrixXd(0, 2)));
}

TEST_CASE("exact W1 against permutation enumeration") {
  Rng rng(1);
  for (int n = 1; n <= 7; ++n)
    for (int d = 1; d <= 3; ++d) {
      const MatrixXd P = standard_normal(n, d, rng), Q = standard_normal(n, d, rng);
      const double w = w1_exact(P, Q);
      CHECK(std::abs(w - brute_force_w1(P, Q)) <= 1e-9);
      CHECK(w == doctest::Approx(w1_exact(Q, P)).epsilon(1e-12));
      CHECK(w >= 0.0);
    }
}

TEST_CASE("assignment solver returns a permutation") {
  Rng rng(2);
  const MatrixXd C = standard_normal(9, 9, rng).cwiseAbs();
  auto a = solve_assignment(C);
  std::sort(a.begin(), a.end());
  for (int i = 0; i < 9; ++i) CHECK(a[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("dual estimate closed forms") {
  Rng rng(3);
  const MatrixXd P = standard_normal(5, 2, rng), Q = standard_normal(7, 2, rng);
  const Mlp constant = Mlp::from_parameters({RowMatrix::Zero(1, 2)}, {VectorXd::Constant(1, 7.0)});
  CHECK(w1_dual_estimate(constant, P, Q) == 0.0);
  CHECK(reference_expectation(constant, P) == 7.0);
  const Mlp net = Mlp::init({2, 6, 1}, 4);
  CHECK(w1_dual_estimate(net, P, P) == 0.0);
  MatrixXd p(1, 2), q(1, 2);
  p << 1, 0;
  q << 0, 0;
  CHECK(w1_dual_estimate(affine_first_coordinate(2), p, q) == doctest::Approx(1.0));
  CHECK(reference_expectation(net, P.topRows(1)) == net.forward(P.row(0).transpose()));
  const MatrixXd R = standard_normal(100, 2, rng);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < R.rows(); ++i) sum += net.forward(R.row(i).transpose());
  CHECK(reference_expectation(net, R) == doctest::Approx(sum / 100.0).epsilon(1e-13));
  CHECK_THROWS(reference_expectation(net, MatrixXd(0, 2)));
  CHECK_THROWS(w1_dual_estimate(net, P, MatrixXd(0, 2)));
  CHECK_THROWS(w1_dual_estimate(Mlp::init({3, 2, 1}, 0), P, Q));
}

TEST_CASE("duality bound for arbitrary critics") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd P = standard_normal(20, 2, rng);
    const MatrixXd Q = (standard_normal(20, 2, rng).array() + 1.5).matrix();
    const Mlp c = Mlp::init({2, 8, 2, 1}, static_cast<std::uint64_t>(rep));
    const double K = std::max(c.lipschitz_upper_bound(), 1e-12);
    CHECK(w1_dual_estimate(c, P, Q) / K <= w1_exact(P, Q) + 1e-12);
  }
}

TEST_CASE("critic training") {
  Rng rng(6);
  CriticTrainConfig cfg;

  SUBCASE("separated Gaussians") {
    const MatrixXd P = (standard_normal(256, 2, rng).array() + 5.0).matrix();
    const MatrixXd Q = (standard_normal(256, 2, rng).array() - 5.0).matrix();
    const auto res = train_critic(make_critic(2, 1, cfg.clip_bound), P, Q, cfg);
    CHECK(res.best_estimate > 0.0);
    CHECK(res.best_estimate / res.critic.lipschitz_upper_bound() <= w1_exact(P, Q) * 1.05);
    CHECK(res.best_estimate == doctest::Approx(w1_dual_estimate(res.critic, P, Q)).epsilon(1e-12));
    for (const auto& W : res.critic.weights()) CHECK(W.cwiseAbs().maxCoeff() <= cfg.clip_bound);
    for (const auto& b : res.critic.biases()) CHECK(b.cwiseAbs().maxCoeff() <= cfg.clip_bound);
  }
  SUBCASE("identical sets") {
    const MatrixXd P = standard_normal(128, 2, rng);
    const auto res = train_critic(make_critic(2, 2, cfg.clip_bound), P, P, cfg);
    CHECK(res.best_estimate <= 0.05);
  }
  SUBCASE("step cap") {
    cfg.patience = 1;
    cfg.max_steps = 1;
    const MatrixXd P = standard_normal(16, 2, rng), Q = standard_normal(16, 2, rng);
    CHECK(train_critic(make_critic(2, 3, cfg.clip_bound), P, Q, cfg).steps <= 1);
  }
  SUBCASE("deterministic") {
    cfg.max_steps = 300;
    const MatrixXd P = standard_normal(64, 3, rng), Q = standard_normal(64, 3, rng);
    const auto a = train_critic(make_critic(3, 4, cfg.clip_bound), P, Q, cfg);
    const auto b = train_critic(make_critic(3, 4, cfg.clip_bound), P, Q, cfg);
    CHECK(a.critic == b.critic);
    CHECK(a.steps == b.steps);
  }
  SUBCASE("errors") {
    CHECK_THROWS(train_critic(make_critic(2, 0, 0.01), MatrixXd(0, 2), standard_normal(4, 2, rng), cfg));
    cfg.patience = 0;
    CHECK_THROWS(cfg.validate());
  }
}

TEST_CASE("critic architecture") {
  const Mlp c = make_critic(3, 0, 0.01);
  CHECK(c.layer_dims() == std::vector<int>{3, 12, 3, 1});
  for (const auto& W : c.weights()) CHECK(W.cwiseAbs().maxCoeff() <= 0.01);
}
