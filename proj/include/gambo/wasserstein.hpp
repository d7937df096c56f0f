#pragma once

#include <cstdint>

#include "gambo/nets.hpp"

namespace gambo {

/// Exact empirical 1-Wasserstein distance between equal-size point clouds
/// (rows of P and Q) under the Euclidean ground metric, via an O(n^3)
/// assignment solver.
double w1_exact(const MatrixXd& P, const MatrixXd& Q);

/// Minimum-cost perfect matching on a square cost matrix. Returns the column
/// assigned to each row.
std::vector<int> solve_assignment(const MatrixXd& cost);

/// Kantorovich-Rubinstein dual value mean_P c - mean_Q c.
double w1_dual_estimate(const Mlp& critic, const MatrixXd& P, const MatrixXd& Q);

/// Mean critic output over the reference set.
double reference_expectation(const Mlp& critic, const MatrixXd& P);

struct CriticTrainConfig {
  double learning_rate = 1e-3;
  double clip_bound = 0.01;
  int patience = 100;
  int max_steps = 20000;
  int minibatch = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CriticTrainResult {
  Mlp critic;              // parameters achieving best_estimate
  int steps = 0;           // updates performed
  double best_estimate = 0.0;
};

/// Gradient ascent on the dual value with weight clipping after each update.
/// Stops after `patience` consecutive updates without a strict improvement of
/// the full-data estimate, or at max_steps.
CriticTrainResult train_critic(Mlp critic, const MatrixXd& P, const MatrixXd& Q,
                               const CriticTrainConfig& cfg);

/// Critic architecture [d, 4d, d, 1].
Mlp make_critic(int dim, std::uint64_t seed, double clip_bound);

}  // namespace gambo
