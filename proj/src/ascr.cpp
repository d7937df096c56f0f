#include "gambo/ascr.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gambo {

double penalty_weight(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in [0, 1)");
  return alpha / (1.0 - alpha);
}

double lagrangian(const VectorXd& z, double alpha, const Model& surrogate, const Mlp& critic,
                  double ref_exp) {
  const double lambda = penalty_weight(alpha);
  const double f = surrogate.value(z);
  if (lambda == 0.0) return -f;
  return -f + lambda * (ref_exp - critic.forward(z));
}

VectorXd lagrangian_grad(const VectorXd& z, double alpha, const Model& surrogate, const Mlp& critic) {
  const double lambda = penalty_weight(alpha);
  VectorXd g = -surrogate.gradient(z);
  if (lambda == 0.0) return g;
  return g - lambda * critic.input_grad(z);
}

void AscrConfig::validate() const {
  if (alpha_steps < 2) throw std::invalid_argument("aSCR alpha_steps must be >= 2");
  if (search_budget < 1) throw std::invalid_argument("aSCR search budget must be >= 1");
  if (threshold_mode != ThresholdMode::disabled && !(threshold > 0.0))
    throw std::invalid_argument("aSCR norm threshold must be positive");
}

std::vector<double> alpha_grid(int alpha_steps) {
  std::vector<double> grid(static_cast<std::size_t>(alpha_steps));
  for (int k = 0; k < alpha_steps; ++k)
    grid[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(alpha_steps);
  return grid;
}

AscrOutcome select_alpha(const Model& surrogate, const Mlp& critic, double ref_exp, const AscrConfig& cfg,
                         const MatrixXd& Z, double fallback_alpha, const std::vector<bool>* free_mask) {
  cfg.validate();
  if (surrogate.input_dim() != critic.input_dim())
    throw DimensionError("aSCR: surrogate and critic input dimensions differ");
  auto fs = surrogate.forward_and_input_grads(Z);
  auto cs = critic.forward_and_input_grads(Z);
  if (free_mask != nullptr) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j)
      if (!(*free_mask)[static_cast<std::size_t>(j)]) {
        fs.grads.col(j).setZero();
        cs.grads.col(j).setZero();
      }
  }

  const VectorXd f_norms = fs.grads.rowwise().norm();

  double tau = std::numeric_limits<double>::infinity();
  if (cfg.threshold_mode == ThresholdMode::absolute) {
    tau = cfg.threshold;
  } else if (cfg.threshold_mode == ThresholdMode::relative) {
    tau = cfg.threshold * f_norms.mean();
  }

  AscrOutcome out{fallback_alpha, true, -std::numeric_limits<double>::infinity(), 0};
  for (double alpha : alpha_grid(cfg.alpha_steps)) {
    const double a = 1.0 - alpha;
    // Gradients are computed once; each alpha only recombines them.
    Eigen::Index best = 0;
    const double best_norm = (a * fs.grads + alpha * cs.grads).rowwise().norm().minCoeff(&best);
    if (best_norm > tau) continue;
    ++out.surviving;
    const double g = -a * fs.values(best) + alpha * (ref_exp - cs.values(best));
    if (g > out.dual_value) {
      out.dual_value = g;
      out.alpha = alpha;
      out.fallback = false;
    }
  }
  return out;
}

AscrOutcome adaptive_scr(const Model& surrogate, const Mlp& critic, double ref_exp, const AscrConfig& cfg,
                         AscrState& state, int iteration, Rng& rng, const std::vector<bool>* free_mask) {
  const MatrixXd Z = standard_normal(cfg.search_budget, surrogate.input_dim(), rng);
  AscrOutcome out = select_alpha(surrogate, critic, ref_exp, cfg, Z, state.last_valid_alpha, free_mask);
  if (!out.fallback) state.last_valid_alpha = out.alpha;
  state.current_alpha = out.alpha;
  state.history.push_back({iteration, out.alpha, out.fallback});
  return out;
}

}  // namespace gambo
