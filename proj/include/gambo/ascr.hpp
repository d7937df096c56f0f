#pragma once

#include <optional>
#include <vector>

#include "gambo/nets.hpp"
#include "gambo/rng.hpp"

namespace gambo {

/// Lagrangian -f(z) + alpha/(1-alpha) * (ref_exp - c(z)). Requires 0 <= alpha < 1.
double lagrangian(const VectorXd& z, double alpha, const Model& surrogate, const Mlp& critic,
                  double ref_exp);

/// Gradient of the Lagrangian with respect to z: -grad f - alpha/(1-alpha) grad c.
VectorXd lagrangian_grad(const VectorXd& z, double alpha, const Model& surrogate, const Mlp& critic);

/// Multiplier lambda = alpha / (1 - alpha); throws outside [0, 1).
double penalty_weight(double alpha);

enum class ThresholdMode { relative, absolute, disabled };

struct AscrConfig {
  int alpha_steps = 200;
  int search_budget = 512;
  ThresholdMode threshold_mode = ThresholdMode::relative;
  /// Multiplier on the batch-mean surrogate gradient norm (relative) or the
  /// threshold itself (absolute).
  double threshold = 1.0;

  void validate() const;
};

struct AlphaRecord {
  int iteration = 0;
  double alpha = 0.0;
  bool fallback = false;
};

struct AscrState {
  double current_alpha = 0.0;
  double last_valid_alpha = 0.0;
  std::vector<AlphaRecord> history;
};

struct AscrOutcome {
  double alpha = 0.0;
  bool fallback = false;  // every grid value was discarded
  double dual_value = 0.0;
  int surviving = 0;      // grid values under the norm threshold
};

/// Grid value alpha_k = k / alpha_steps for k = 0 .. alpha_steps - 1.
std::vector<double> alpha_grid(int alpha_steps);

/// One dual-maximization pass over the alpha grid using fixed probe points Z
/// (B x d). `free_mask`, when given, restricts the stationarity norm to the
/// masked coordinates.
AscrOutcome select_alpha(const Model& surrogate, const Mlp& critic, double ref_exp, const AscrConfig& cfg,
                         const MatrixXd& Z, double fallback_alpha,
                         const std::vector<bool>* free_mask = nullptr);

/// Draws search_budget standard-normal probes from rng and runs select_alpha;
/// records the result in state.
AscrOutcome adaptive_scr(const Model& surrogate, const Mlp& critic, double ref_exp, const AscrConfig& cfg,
                         AscrState& state, int iteration, Rng& rng,
                         const std::vector<bool>* free_mask = nullptr);

}  // namespace gambo
