#include "gambo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gambo/sobol.hpp"

namespace gambo {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gabo: return "gabo";
    case OptimizerKind::gaga: return "gaga";
    case OptimizerKind::bo_qei: return "bo_qei";
    case OptimizerKind::grad_ascent: return "grad_ascent";
    case OptimizerKind::anneal: return "anneal";
  }
  return "?";
}

std::string to_string(AlphaMode m) {
  switch (m) {
    case AlphaMode::adaptive: return "adaptive";
    case AlphaMode::constant: return "constant";
    case AlphaMode::off: return "off";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
  for (auto k : {OptimizerKind::gabo, OptimizerKind::gaga, OptimizerKind::bo_qei, OptimizerKind::grad_ascent,
                 OptimizerKind::anneal})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

RunConfig RunConfig::defaults(OptimizerKind k) {
  RunConfig cfg;
  cfg.optimizer = k;
  if (k == OptimizerKind::gabo || k == OptimizerKind::bo_qei) {
    cfg.T = 32;
    cfg.b = 64;
  } else {
    cfg.T = 128;
    cfg.b = 16;
  }
  if (k == OptimizerKind::bo_qei || k == OptimizerKind::grad_ascent || k == OptimizerKind::anneal)
    cfg.alpha_mode = AlphaMode::off;
  return cfg;
}

bool RunConfig::uses_critic() const {
  if (alpha_mode == AlphaMode::off) return false;
  return optimizer == OptimizerKind::gabo || optimizer == OptimizerKind::gaga;
}

void RunConfig::validate() const {
  if (T < 1 || b < 1) throw std::invalid_argument("RunConfig: T and b must be positive");
  if (alpha_mode == AlphaMode::constant && !(alpha_value >= 0.0 && alpha_value <= 1.0))
    throw std::invalid_argument("RunConfig: constant alpha must lie in [0, 1]");
  if (n_generator < 0) throw std::invalid_argument("RunConfig: n_generator must be >= 0 (0 = never retrain)");
  if (!(eta > 0.0)) throw std::invalid_argument("RunConfig: eta must be positive");
  if (!(box > 0.0)) throw std::invalid_argument("RunConfig: box must be positive");
  if (!(anneal_step > 0.0) || !(anneal_floor >= 0.0)) throw std::invalid_argument("RunConfig: bad annealing schedule");
  if (acquire.candidate_pool < b) throw std::invalid_argument("RunConfig: candidate pool smaller than b");
  ascr.validate();
  critic.validate();
}

std::vector<int> Problem::free_indices() const {
  std::vector<int> out;
  for (int j = 0; j < dim(); ++j)
    if (is_free(j)) out.push_back(j);
  return out;
}

void Problem::validate() const {
  if (surrogate == nullptr) throw std::invalid_argument("Problem: missing surrogate");
  if (reference.rows() == 0) throw std::invalid_argument("Problem: empty offline dataset");
  if (surrogate->input_dim() != dim()) throw DimensionError("Problem: surrogate input dimension differs from the task");
  if (reference_scores.size() != reference.rows()) throw DimensionError("Problem: score count differs from design count");
  if (!free_mask.empty() && static_cast<int>(free_mask.size()) != dim())
    throw DimensionError("Problem: free mask length differs from the task");
  if (condition.size() != dim()) throw DimensionError("Problem: condition length differs from the task");
  if (free_indices().empty()) throw std::invalid_argument("Problem: no free coordinates");
}

Problem make_problem(const Task& task, const Model& surrogate, int condition_index) {
  if (condition_index < 0 || condition_index >= task.conditions().rows())
    throw std::out_of_range("make_problem: condition index out of range");
  Problem p;
  p.surrogate = &surrogate;
  p.reference = task.dataset().designs;
  p.reference_scores = task.dataset().standardized_scores();
  if (task.conditional()) p.free_mask = task.free_mask();
  p.condition = task.conditions().row(condition_index).transpose();
  p.condition_index = condition_index;
  p.validate();
  return p;
}

void Trajectory::append(const Trajectory& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
  critic_events.insert(critic_events.end(), other.critic_events.begin(), other.critic_events.end());
  alpha_history.insert(alpha_history.end(), other.alpha_history.begin(), other.alpha_history.end());
  evaluations += other.evaluations;
  probe_queries += other.probe_queries;
  critic_updates += other.critic_updates;
}

namespace {

std::string tagged(const char* tag, int t) { return std::string(tag) + "/" + std::to_string(t); }

// Shared machinery of the GABO and GAGA loops: critic lifecycle, alpha
// choice and penalized evaluation.
class Penalized {
 public:
  Penalized(const Problem& p, const RunConfig& cfg, std::uint64_t seed, bool pure)
      : p_(p), cfg_(cfg), seed_(seed), pure_(pure), ascr_rng_(derive_seed(seed, "ascr")) {
    mask_ = p.free_mask;
    if (mask_.empty()) mask_.assign(static_cast<std::size_t>(p.dim()), true);
    if (pure_ || cfg_.uses_critic()) {
      critic_ = cfg_.initial_critic ? *cfg_.initial_critic
                                    : make_critic(p.dim(), derive_seed(seed, "critic-init"), cfg_.critic.clip_bound);
      if (critic_.input_dim() != p.dim()) throw DimensionError("initial critic dimension differs from the task");
      has_critic_ = true;
      ref_exp_ = reference_expectation(critic_, p_.reference);
    }
    if (pure_) alpha_ = 1.0;
  }

  void maybe_train(const MatrixXd& Z, int t, Trajectory& traj) {
    if (!has_critic_ || !cfg_.train_critic) return;
    const bool first = traj.critic_events.empty();
    if (!first && !(cfg_.n_generator > 0 && t % cfg_.n_generator == 0)) return;
    CriticTrainConfig cc = cfg_.critic;
    cc.seed = derive_seed(seed_, tagged("critic-train", t));
    CriticTrainResult r = train_critic(critic_, p_.reference, Z, cc);
    critic_ = std::move(r.critic);
    ref_exp_ = reference_expectation(critic_, p_.reference);
    traj.critic_events.push_back({t, p_.condition_index, r.steps, r.best_estimate});
    traj.critic_updates += r.steps;
  }

  void choose_alpha(int t, Trajectory& traj) {
    bool fallback = false;
    if (pure_) {
      alpha_ = 1.0;
    } else if (cfg_.alpha_mode == AlphaMode::adaptive) {
      // Probes are standard normal in the free coordinates; fixed coordinates
      // carry the condition so the stationarity search stays on its slice.
      MatrixXd Z = standard_normal(cfg_.ascr.search_budget, p_.dim(), ascr_rng_);
      for (int j = 0; j < p_.dim(); ++j)
        if (!p_.is_free(j)) Z.col(j).setConstant(p_.condition(j));
      const AscrOutcome out =
          select_alpha(*p_.surrogate, critic_, ref_exp_, cfg_.ascr, Z, last_valid_, p_.free_mask.empty() ? nullptr : &mask_);
      if (!out.fallback) last_valid_ = out.alpha;
      alpha_ = out.alpha;
      fallback = out.fallback;
      traj.probe_queries += cfg_.ascr.search_budget;
    } else if (cfg_.alpha_mode == AlphaMode::constant) {
      alpha_ = cfg_.alpha_value;
    } else {
      alpha_ = 0.0;
    }
    traj.alpha_history.push_back({t, alpha_, fallback});
  }

  /// y = -L(z; alpha) per row; fills the surrogate gradients when asked.
  VectorXd evaluate(const MatrixXd& Z, MatrixXd* f_grads) const {
    if (pure_) return (critic_.forward_batch(Z).array() - ref_exp_).matrix();
    VectorXd f;
    if (f_grads != nullptr) {
      BatchResult fs = p_.surrogate->forward_and_input_grads(Z);
      f = std::move(fs.values);
      *f_grads = std::move(fs.grads);
    } else {
      f = p_.surrogate->forward_batch(Z);
    }
    const double lambda = penalty_weight(alpha_);
    if (lambda == 0.0) return f;
    return (f.array() - lambda * (ref_exp_ - critic_.forward_batch(Z).array())).matrix();
  }

  /// -grad L at the rows of Z given the surrogate gradients there.
  MatrixXd ascent_direction(const MatrixXd& Z, const MatrixXd& f_grads) const {
    MatrixXd g;
    if (pure_) {
      g = critic_.forward_and_input_grads(Z).grads;
    } else {
      const double lambda = penalty_weight(alpha_);
      g = f_grads;
      if (lambda != 0.0) g += lambda * critic_.forward_and_input_grads(Z).grads;
    }
    for (int j = 0; j < p_.dim(); ++j)
      if (!p_.is_free(j)) g.col(j).setZero();
    return g;
  }

  double alpha() const { return alpha_; }

 private:
  const Problem& p_;
  const RunConfig& cfg_;
  std::uint64_t seed_;
  bool pure_;
  Rng ascr_rng_;
  std::vector<bool> mask_;
  Mlp critic_;
  bool has_critic_ = false;
  double ref_exp_ = 0.0;
  double alpha_ = 0.0;
  double last_valid_ = 0.0;
};

void record_batch(Trajectory& traj, const Problem& p, int t, const MatrixXd& Z, const VectorXd& y, double alpha) {
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    traj.records.push_back({t, static_cast<int>(i), p.condition_index, Z.row(i).transpose(), y(i), alpha});
  traj.evaluations += Z.rows();
}

// Rows of the offline data with the highest scores (ties to the earlier
// row), fixed coordinates replaced by the condition.
MatrixXd top_offline(const Problem& p, int b) {
  if (b > p.reference.rows()) throw std::invalid_argument("batch size exceeds the offline dataset");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p.reference.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto c) { return p.reference_scores(a) > p.reference_scores(c); });
  MatrixXd Z(b, p.dim());
  for (int i = 0; i < b; ++i) Z.row(i) = p.reference.row(order[static_cast<std::size_t>(i)]);
  for (int j = 0; j < p.dim(); ++j)
    if (!p.is_free(j)) Z.col(j).setConstant(p.condition(j));
  return Z;
}

Trajectory gabo_loop(const Problem& p, const RunConfig& cfg, std::uint64_t seed, bool pure) {
  p.validate();
  cfg.validate();
  const std::vector<int> free = p.free_indices();
  const int k = static_cast<int>(free.size());
  const auto embed = [&](const MatrixXd& U) {
    MatrixXd Z = p.condition.transpose().replicate(U.rows(), 1);
    for (int j = 0; j < k; ++j) Z.col(free[static_cast<std::size_t>(j)]) = U.col(j);
    return Z;
  };

  Trajectory traj;
  Penalized obj(p, cfg, seed, pure);
  Rng acquire_rng(derive_seed(seed, "acquire"));

  const MatrixXd U1 =
      (sobol_sample(cfg.b, k, derive_seed(seed, "sobol-init")).array() * (2.0 * cfg.box) - cfg.box).matrix();
  MatrixXd Z = embed(U1);
  obj.maybe_train(Z, 1, traj);
  obj.choose_alpha(1, traj);
  VectorXd y = obj.evaluate(Z, nullptr);
  record_batch(traj, p, 1, Z, y, obj.alpha());

  MatrixXd X(static_cast<Eigen::Index>(cfg.total_budget()), k);
  VectorXd Y(cfg.total_budget());
  X.topRows(cfg.b) = U1;
  Y.head(cfg.b) = y;
  Eigen::Index n = cfg.b;

  AcquireConfig acq = cfg.acquire;
  acq.batch = cfg.b;
  for (int t = 2; t <= cfg.T; ++t) {
    GpFitOptions go = cfg.gp;
    go.seed = derive_seed(seed, tagged("gp-fit", t));
    const Gp gp = Gp::fit(X.topRows(n), Y.head(n), go);
    const MatrixXd U = qei_acquire(gp, Y.head(n).maxCoeff(), acq, -cfg.box, cfg.box, acquire_rng);
    Z = embed(U);
    obj.choose_alpha(t, traj);
    y = obj.evaluate(Z, nullptr);
    record_batch(traj, p, t, Z, y, obj.alpha());
    X.middleRows(n, cfg.b) = U;
    Y.segment(n, cfg.b) = y;
    n += cfg.b;
    obj.maybe_train(Z, t, traj);
  }
  return traj;
}

Trajectory gaga_loop(const Problem& p, const RunConfig& cfg, std::uint64_t seed, bool pure) {
  p.validate();
  cfg.validate();
  Trajectory traj;
  Penalized obj(p, cfg, seed, pure);

  MatrixXd Z = top_offline(p, cfg.b);
  MatrixXd f_grads;
  obj.maybe_train(Z, 1, traj);
  obj.choose_alpha(1, traj);
  VectorXd y = obj.evaluate(Z, &f_grads);
  record_batch(traj, p, 1, Z, y, obj.alpha());

  for (int t = 2; t <= cfg.T; ++t) {
    Z += cfg.eta * obj.ascent_direction(Z, f_grads);
    obj.choose_alpha(t, traj);
    y = obj.evaluate(Z, &f_grads);
    record_batch(traj, p, t, Z, y, obj.alpha());
    obj.maybe_train(Z, t, traj);
  }
  return traj;
}

RunConfig with_alpha_off(RunConfig cfg) {
  cfg.alpha_mode = AlphaMode::off;
  return cfg;
}

}  // namespace

Trajectory run_gabo(const Problem& problem, const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.pure_critic()) return gabo_loop(problem, cfg, seed, true);
  return gabo_loop(problem, cfg, seed, false);
}

Trajectory run_gaga(const Problem& problem, const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.pure_critic()) return gaga_loop(problem, cfg, seed, true);
  return gaga_loop(problem, cfg, seed, false);
}

Trajectory run_pure_critic(const Problem& problem, const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.optimizer == OptimizerKind::gaga || cfg.optimizer == OptimizerKind::grad_ascent)
    return gaga_loop(problem, cfg, seed, true);
  return gabo_loop(problem, cfg, seed, true);
}

Trajectory run_anneal(const Problem& p, const RunConfig& cfg, std::uint64_t seed) {
  p.validate();
  cfg.validate();
  Trajectory traj;
  Rng rng(derive_seed(seed, "anneal"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const VectorXd& s = p.reference_scores;
  const double temp0 = std::max(std::sqrt((s.array() - s.mean()).square().mean()), cfg.anneal_floor);

  MatrixXd Z = top_offline(p, cfg.b);
  VectorXd cur = p.surrogate->forward_batch(Z);
  record_batch(traj, p, 1, Z, cur, 0.0);
  traj.alpha_history.push_back({1, 0.0, false});

  for (int t = 2; t <= cfg.T; ++t) {
    const double frac = cfg.T > 2 ? static_cast<double>(t - 2) / static_cast<double>(cfg.T - 2) : 1.0;
    const double temp = cfg.anneal_floor > 0.0 ? temp0 * std::pow(cfg.anneal_floor / temp0, frac) : 0.0;
    MatrixXd P = Z;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      for (int j = 0; j < p.dim(); ++j)
        if (p.is_free(j)) P(i, j) += cfg.anneal_step * normal(rng);
    const VectorXd fp = p.surrogate->forward_batch(P);
    record_batch(traj, p, t, P, fp, 0.0);
    traj.alpha_history.push_back({t, 0.0, false});
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const double u = unit(rng);
      const bool accept = fp(i) >= cur(i) || (temp > 0.0 && u < std::exp((fp(i) - cur(i)) / temp));
      if (accept) {
        Z.row(i) = P.row(i);
        cur(i) = fp(i);
      }
    }
  }
  return traj;
}

Trajectory run_optimizer(const Problem& problem, const RunConfig& cfg, std::uint64_t seed) {
  switch (cfg.optimizer) {
    case OptimizerKind::gabo: return run_gabo(problem, cfg, seed);
    case OptimizerKind::gaga: return run_gaga(problem, cfg, seed);
    case OptimizerKind::bo_qei: return gabo_loop(problem, with_alpha_off(cfg), seed, false);
    case OptimizerKind::grad_ascent: return gaga_loop(problem, with_alpha_off(cfg), seed, false);
    case OptimizerKind::anneal: return run_anneal(problem, cfg, seed);
  }
  throw std::invalid_argument("unknown optimizer");
}

SurrogateFit train_task_surrogate(const Task& task, SurrogateTrainConfig cfg, std::uint64_t seed) {
  cfg.seed = derive_seed(seed, "surrogate");
  return train_surrogate(task.dataset().designs, task.dataset().standardized_scores(), cfg);
}

Trajectory run_task(const Task& task, const Model& surrogate, const RunConfig& cfg, std::uint64_t seed) {
  const Eigen::Index n = task.conditions().rows();
  Trajectory all;
  for (Eigen::Index c = 0; c < n; ++c) {
    const Problem p = make_problem(task, surrogate, static_cast<int>(c));
    const std::uint64_t s = n == 1 ? seed : derive_seed(seed, tagged("condition", static_cast<int>(c)));
    all.append(run_optimizer(p, cfg, s));
  }
  return all;
}

}  // namespace gambo
