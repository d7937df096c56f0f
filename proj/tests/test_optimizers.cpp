#include "doctest.h"

#include <cmath>

#include "gambo/optimizers.hpp"
#include "gambo/rng.hpp"

using namespace gambo;

namespace {

// f(z) = -|z|^2
class NegSquaredNorm final : public Model {
 public:
  explicit NegSquaredNorm(int d) : d_(d) {}
  int input_dim() const override { return d_; }
  VectorXd forward_batch(const MatrixXd& Z) const override { return -Z.rowwise().squaredNorm(); }
  BatchResult forward_and_input_grads(const MatrixXd& Z) const override {
    return {forward_batch(Z), -2.0 * Z};
  }

 private:
  int d_;
};

Problem quadratic_problem(const Model& f, int d, double shift, std::uint64_t seed) {
  Rng rng(seed);
  Problem p;
  p.surrogate = &f;
  p.reference = (standard_normal(200, d, rng).array() + shift).matrix();
  p.reference_scores = f.forward_batch(p.reference);
  p.condition = VectorXd::Zero(d);
  return p;
}

void check_same_records(const Trajectory& a, const Trajectory& b) {
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].iteration == b.records[i].iteration);
    CHECK(a.records[i].index == b.records[i].index);
    CHECK(a.records[i].z == b.records[i].z);
    CHECK(a.records[i].y == b.records[i].y);
  }
}

RunConfig small(OptimizerKind k) {
  RunConfig cfg = RunConfig::defaults(k);
  if (k == OptimizerKind::gabo || k == OptimizerKind::bo_qei) {
    cfg.T = 4;
    cfg.b = 8;
    cfg.acquire.candidate_pool = 256;
    cfg.gp.restarts = 2;
  } else {
    cfg.T = 12;
    cfg.b = 4;
  }
  cfg.ascr.search_budget = 64;
  cfg.critic.max_steps = 300;
  return cfg;
}

struct SmallBranin {
  BraninTask task{0};
  Mlp surrogate;
  SmallBranin() {
    SurrogateTrainConfig sc;
    sc.hidden = {32, 32};
    sc.epochs = 20;
    surrogate = train_task_surrogate(task, sc, 0).net;
  }
};

const SmallBranin& branin() {
  static const SmallBranin b;
  return b;
}

}  // namespace

TEST_CASE("run config defaults and validation") {
  const RunConfig gabo = RunConfig::defaults(OptimizerKind::gabo);
  CHECK(gabo.T == 32);
  CHECK(gabo.b == 64);
  CHECK(gabo.total_budget() == 2048);
  CHECK(gabo.n_generator == 4);
  CHECK(gabo.alpha_mode == AlphaMode::adaptive);
  const RunConfig gaga = RunConfig::defaults(OptimizerKind::gaga);
  CHECK(gaga.T == 128);
  CHECK(gaga.b == 16);
  CHECK(gaga.eta == 0.05);
  CHECK(gaga.total_budget() == 2048);
  CHECK(RunConfig::defaults(OptimizerKind::bo_qei).alpha_mode == AlphaMode::off);
  CHECK(RunConfig::defaults(OptimizerKind::anneal).total_budget() == 2048);
  CHECK_FALSE(RunConfig::defaults(OptimizerKind::grad_ascent).uses_critic());

  RunConfig bad = gabo;
  bad.alpha_mode = AlphaMode::constant;
  bad.alpha_value = 1.5;
  CHECK_THROWS(bad.validate());
  bad = gabo;
  bad.T = 0;
  CHECK_THROWS(bad.validate());
  CHECK(parse_optimizer("bo_qei") == OptimizerKind::bo_qei);
  CHECK_THROWS(parse_optimizer("turbo"));
}

TEST_CASE("gradient ascent on a quadratic contracts geometrically") {
  const NegSquaredNorm f(3);
  const Problem p = quadratic_problem(f, 3, 2.0, 1);
  RunConfig cfg = RunConfig::defaults(OptimizerKind::gaga);
  cfg.T = 20;
  cfg.b = 4;
  cfg.alpha_mode = AlphaMode::constant;
  cfg.alpha_value = 0.5;
  cfg.initial_critic = Mlp::zeros({3, 12, 3, 1});
  cfg.train_critic = false;
  const Trajectory traj = run_gaga(p, cfg, 0);
  REQUIRE(traj.records.size() == 80);
  // z <- z + eta * (-2 z) = 0.9 z
  for (int i = 0; i < 4; ++i) {
    const VectorXd z0 = traj.records[static_cast<std::size_t>(i)].z;
    double prev = z0.norm();
    for (int t = 2; t <= 20; ++t) {
      const auto& r = traj.records[static_cast<std::size_t>((t - 1) * 4 + i)];
      CHECK((r.z - std::pow(0.9, t - 1) * z0).norm() <= 1e-12 * z0.norm());
      CHECK(r.z.norm() < prev);
      prev = r.z.norm();
    }
  }
  CHECK(traj.critic_events.empty());
}

TEST_CASE("GAGA starts from the top offline designs") {
  const NegSquaredNorm f(2);
  const Problem p = quadratic_problem(f, 2, 0.0, 2);
  RunConfig cfg = small(OptimizerKind::grad_ascent);
  const Trajectory traj = run_optimizer(p, cfg, 0);
  std::vector<double> scores(p.reference_scores.data(), p.reference_scores.data() + p.reference_scores.size());
  std::sort(scores.rbegin(), scores.rend());
  for (int i = 0; i < cfg.b; ++i) CHECK(traj.records[static_cast<std::size_t>(i)].y == scores[static_cast<std::size_t>(i)]);
  cfg.b = 201;
  CHECK_THROWS(run_optimizer(p, cfg, 0));
}

TEST_CASE("annealing") {
  const NegSquaredNorm f(2);
  const Problem p = quadratic_problem(f, 2, 2.0, 3);

  SUBCASE("finds the known optimum") {
    const RunConfig cfg = RunConfig::defaults(OptimizerKind::anneal);
    const Trajectory traj = run_anneal(p, cfg, 0);
    REQUIRE(traj.records.size() == 2048);
    double best = 1e300;
    for (const auto& r : traj.records) best = std::min(best, r.z.norm());
    CHECK(best < 0.3);
    check_same_records(traj, run_anneal(p, cfg, 0));
  }
  SUBCASE("zero temperature accepts only improvements") {
    RunConfig cfg = RunConfig::defaults(OptimizerKind::anneal);
    cfg.anneal_floor = 0.0;
    cfg.T = 60;
    const Trajectory traj = run_anneal(p, cfg, 1);
    // each proposal is one small step away from the best point of its chain
    for (int i = 0; i < cfg.b; ++i) {
      VectorXd center = traj.records[static_cast<std::size_t>(i)].z;
      double best = traj.records[static_cast<std::size_t>(i)].y;
      for (int t = 2; t <= cfg.T; ++t) {
        const auto& r = traj.records[static_cast<std::size_t>((t - 1) * cfg.b + i)];
        CHECK((r.z - center).norm() < 0.1 * 8.0);
        if (r.y >= best) {
          best = r.y;
          center = r.z;
        }
      }
    }
  }
}

TEST_CASE("GABO budget, alpha history and critic schedule") {
  const auto& B = branin();
  const Problem p = make_problem(B.task, B.surrogate);
  RunConfig cfg = small(OptimizerKind::gabo);
  cfg.T = 8;
  const Trajectory traj = run_gabo(p, cfg, 4);
  CHECK(traj.records.size() == 64);
  CHECK(traj.evaluations == 64);
  CHECK(traj.probe_queries == 8 * 64);
  REQUIRE(traj.alpha_history.size() == 8);
  for (const auto& r : traj.records) {
    CHECK(r.alpha >= 0.0);
    CHECK(r.alpha < 1.0);
    CHECK(r.z.cwiseAbs().maxCoeff() <= cfg.box);
  }
  // initial fit, then t = 4 and t = 8
  REQUIRE(traj.critic_events.size() == 3);
  CHECK(traj.critic_events[0].iteration == 1);
  CHECK(traj.critic_events[1].iteration == 4);
  CHECK(traj.critic_events[2].iteration == 8);

  cfg.n_generator = 0;
  CHECK(run_gabo(p, cfg, 4).critic_events.size() == 1);
}

TEST_CASE("determinism") {
  const auto& B = branin();
  const Problem p = make_problem(B.task, B.surrogate);
  for (auto k : {OptimizerKind::gabo, OptimizerKind::gaga}) {
    const RunConfig cfg = small(k);
    const Trajectory a = run_optimizer(p, cfg, 9), b = run_optimizer(p, cfg, 9);
    check_same_records(a, b);
    REQUIRE(a.alpha_history.size() == b.alpha_history.size());
    for (std::size_t i = 0; i < a.alpha_history.size(); ++i) CHECK(a.alpha_history[i].alpha == b.alpha_history[i].alpha);
  }
}

TEST_CASE("constant zero reduces to the unpenalized parent") {
  const auto& B = branin();
  const Problem p = make_problem(B.task, B.surrogate);
  for (std::uint64_t seed : {0, 1, 2}) {
    RunConfig g0 = small(OptimizerKind::gabo);
    g0.alpha_mode = AlphaMode::constant;
    g0.alpha_value = 0.0;
    check_same_records(run_optimizer(p, g0, seed), run_optimizer(p, small(OptimizerKind::bo_qei), seed));
    RunConfig a0 = small(OptimizerKind::gaga);
    a0.alpha_mode = AlphaMode::constant;
    a0.alpha_value = 0.0;
    check_same_records(run_optimizer(p, a0, seed), run_optimizer(p, small(OptimizerKind::grad_ascent), seed));
  }
}

TEST_CASE("unpenalized evaluations equal the surrogate") {
  const auto& B = branin();
  const Problem p = make_problem(B.task, B.surrogate);
  const Trajectory traj = run_optimizer(p, small(OptimizerKind::bo_qei), 3);
  for (const auto& r : traj.records) CHECK(r.y == B.surrogate.forward(r.z));
  CHECK(traj.probe_queries == 0);
  CHECK(traj.critic_events.empty());
}

TEST_CASE("pure critic mode") {
  const auto& B = branin();
  RunConfig cfg = small(OptimizerKind::gabo);
  cfg.alpha_mode = AlphaMode::constant;
  cfg.alpha_value = 1.0;
  REQUIRE(cfg.pure_critic());

  SUBCASE("independent of the surrogate") {
    const NegSquaredNorm other(2);
    const Problem a = make_problem(B.task, B.surrogate), b = make_problem(B.task, other);
    check_same_records(run_gabo(a, cfg, 5), run_gabo(b, cfg, 5));
  }
  SUBCASE("zero critic gives zero scores") {
    cfg.initial_critic = Mlp::zeros({2, 8, 2, 1});
    cfg.train_critic = false;
    const Trajectory traj = run_pure_critic(make_problem(B.task, B.surrogate), cfg, 5);
    CHECK(traj.records.size() == 32);
    for (const auto& r : traj.records) {
      CHECK(r.y == 0.0);
      CHECK(r.alpha == 1.0);
    }
  }
}

TEST_CASE("conditional runs never touch fixed coordinates") {
  const DosingTask task(0, 128, 3);
  SurrogateTrainConfig sc;
  sc.hidden = {16, 16};
  sc.epochs = 5;
  const Mlp surrogate = train_task_surrogate(task, sc, 0).net;
  for (auto k : {OptimizerKind::gabo, OptimizerKind::gaga, OptimizerKind::anneal}) {
    const RunConfig cfg = small(k);
    const Trajectory traj = run_task(task, surrogate, cfg, 0);
    CHECK(traj.records.size() == static_cast<std::size_t>(3 * cfg.total_budget()));
    for (const auto& r : traj.records) {
      const VectorXd cond = task.conditions().row(r.condition).transpose();
      CHECK(r.z.head(kCovariates) == cond.head(kCovariates));
    }
  }
}

TEST_CASE("problem validation") {
  const auto& B = branin();
  const NegSquaredNorm wrong(3);
  CHECK_THROWS_AS(make_problem(B.task, wrong), DimensionError);
  CHECK_THROWS(make_problem(B.task, B.surrogate, 1));
}
