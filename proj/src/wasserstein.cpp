#include "gambo/wasserstein.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "gambo/rng.hpp"

namespace gambo {

// Shortest augmenting path with row/column potentials (Jonker-Volgenant style).
std::vector<int> solve_assignment(const MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (n != cost.cols()) throw DimensionError("solve_assignment: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double w1_exact(const MatrixXd& P, const MatrixXd& Q) {
  if (P.rows() != Q.rows()) throw DimensionError("w1_exact: sample counts differ");
  if (P.cols() != Q.cols()) throw DimensionError("w1_exact: dimensions differ");
  if (P.size() == 0) throw DimensionError("w1_exact: empty samples");
  const Eigen::Index n = P.rows();
  MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (P.row(i) - Q.row(j)).norm();
  const auto match = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(n);
}

double reference_expectation(const Mlp& critic, const MatrixXd& P) {
  if (P.rows() == 0) throw std::invalid_argument("reference_expectation: empty reference set");
  return critic.forward_batch(P).mean();
}

double w1_dual_estimate(const Mlp& critic, const MatrixXd& P, const MatrixXd& Q) {
  if (P.rows() == 0 || Q.rows() == 0) throw std::invalid_argument("w1_dual_estimate: empty sample");
  return critic.mean_output(P) - critic.mean_output(Q);
}

void CriticTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("critic learning_rate must be positive");
  if (!(clip_bound > 0.0)) throw std::invalid_argument("critic clip_bound must be positive");
  if (patience < 1) throw std::invalid_argument("critic patience must be >= 1");
  if (max_steps < patience) throw std::invalid_argument("critic max_steps must be >= patience");
  if (minibatch < 1) throw std::invalid_argument("critic minibatch must be >= 1");
}

namespace {

MatrixXd sample_rows(const MatrixXd& X, int count, Rng& rng) {
  if (count >= X.rows()) return X;
  std::uniform_int_distribution<Eigen::Index> pick(0, X.rows() - 1);
  MatrixXd out(count, X.cols());
  for (int i = 0; i < count; ++i) out.row(i) = X.row(pick(rng));
  return out;
}

}  // namespace

CriticTrainResult train_critic(Mlp critic, const MatrixXd& P, const MatrixXd& Q,
                               const CriticTrainConfig& cfg) {
  cfg.validate();
  if (P.rows() == 0 || Q.rows() == 0) throw std::invalid_argument("train_critic: empty sample");
  if (P.cols() != critic.input_dim() || Q.cols() != critic.input_dim())
    throw DimensionError("train_critic: critic input dimension mismatch");

  Rng rng(derive_seed(cfg.seed, "critic-batch"));
  CriticTrainResult result{critic, 0, w1_dual_estimate(critic, P, Q)};
  int since_improvement = 0;
  while (result.steps < cfg.max_steps && since_improvement < cfg.patience) {
    const MatrixXd Pb = sample_rows(P, cfg.minibatch, rng);
    const MatrixXd Qb = sample_rows(Q, cfg.minibatch, rng);
    MatrixXd Zb(Pb.rows() + Qb.rows(), Pb.cols());
    Zb << Pb, Qb;
    VectorXd w(Zb.rows());
    w.head(Pb.rows()).setConstant(1.0 / static_cast<double>(Pb.rows()));
    w.tail(Qb.rows()).setConstant(-1.0 / static_cast<double>(Qb.rows()));
    sgd_step(critic, critic.param_grads(Zb, w), cfg.learning_rate);
    critic.clip_weights(cfg.clip_bound);
    ++result.steps;

    const double estimate = w1_dual_estimate(critic, P, Q);
    if (estimate > result.best_estimate) {
      result.best_estimate = estimate;
      result.critic = critic;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
  }
  return result;
}

Mlp make_critic(int dim, std::uint64_t seed, double clip_bound) {
  Mlp critic = Mlp::init({dim, 4 * dim, dim, 1}, seed);
  critic.clip_weights(clip_bound);
  return critic;
}

}  // namespace gambo
