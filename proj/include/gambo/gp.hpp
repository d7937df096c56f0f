#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "gambo/rng.hpp"

namespace gambo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Matern-5/2 kernel hyperparameters, in standardized target units.
struct GpHyper {
  double lengthscale = 1.0;
  double outputscale = 1.0;
  double noise = 1e-4;
};

inline constexpr double kGpJitter = 1e-8;

struct GpFitOptions {
  int restarts = 8;
  int max_evals_per_restart = 80;
  /// Hyperparameters are fitted on at most this many rows (seeded subset);
  /// the posterior always conditions on every row.
  int max_fit_points = 128;
  double min_lengthscale = 1e-2, max_lengthscale = 1e2;
  double min_outputscale = 1e-2, max_outputscale = 1e2;
  double min_noise = kGpJitter, max_noise = 1.0;
  std::uint64_t seed = 0;
};

double matern52(double r, const GpHyper& h);

/// Exact GP posterior with a Matern-5/2 kernel and a constant prior mean equal
/// to the training-target mean. Targets are standardized internally; every
/// public query returns original units.
class Gp {
 public:
  /// Conditions on (X, y) with the given hyperparameters.
  static Gp condition(const MatrixXd& X, const VectorXd& y, const GpHyper& hyper);
  /// Maximizes the log marginal likelihood by multi-start Nelder-Mead in log
  /// space, then conditions on all of (X, y).
  static Gp fit(const MatrixXd& X, const VectorXd& y, const GpFitOptions& opts = {});

  struct Posterior {
    VectorXd mean;
    MatrixXd cov;
  };
  Posterior posterior(const MatrixXd& Xs) const;
  VectorXd mean(const MatrixXd& Xs) const;
  VectorXd variance(const MatrixXd& Xs) const;

  const GpHyper& hyper() const { return hyper_; }
  const MatrixXd& train_X() const { return X_; }
  const VectorXd& train_y() const { return y_; }
  double y_mean() const { return y_mean_; }
  double y_scale() const { return y_scale_; }
  int dim() const { return static_cast<int>(X_.cols()); }
  double log_marginal_likelihood() const { return lml_; }
  /// Jitter actually added to the noise to make the factorization succeed.
  double extra_jitter() const { return extra_jitter_; }

  // Internal pieces used by the acquisition routine, all in standardized units.
  MatrixXd cross_kernel(const MatrixXd& A, const MatrixXd& B) const;
  const Eigen::LLT<MatrixXd>& factor() const { return llt_; }
  const VectorXd& weights() const { return alpha_; }

 private:
  MatrixXd X_;
  VectorXd y_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  GpHyper hyper_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd alpha_;
  double lml_ = 0.0;
  double extra_jitter_ = 0.0;
};

/// Log marginal likelihood of standardized targets under the given hyperparameters.
double log_marginal_likelihood(const MatrixXd& X, const VectorXd& y_standardized, const GpHyper& hyper);

struct AcquireConfig {
  int batch = 1;
  int candidate_pool = 4096;
  int mc_samples = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Monte Carlo expected improvement of N(mean, sd^2) over incumbent using
/// shared standard-normal draws. Always >= 0.
double mc_expected_improvement(double mean, double sd, double incumbent, const VectorXd& normals);

struct AcquireTrace {
  MatrixXd pool;                 // candidate pool in box coordinates
  std::vector<VectorXd> ei;      // EI over the pool at each greedy step
  std::vector<Eigen::Index> picks;
};

/// Greedy fantasy batch expected improvement over a Sobol pool in
/// [lower, upper]^d. Each pick is fantasized at its posterior mean, which
/// leaves the mean unchanged and collapses the variance around it.
MatrixXd qei_acquire(const Gp& gp, double incumbent, const AcquireConfig& cfg, double lower, double upper,
                     Rng& rng, AcquireTrace* trace = nullptr);

/// Same with an explicit candidate pool (rows in box coordinates).
MatrixXd qei_acquire_from_pool(const Gp& gp, double incumbent, const AcquireConfig& cfg,
                               const MatrixXd& pool, Rng& rng, AcquireTrace* trace = nullptr);

}  // namespace gambo
