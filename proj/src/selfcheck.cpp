#include "gambo/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gambo/ascr.hpp"
#include "gambo/gp.hpp"
#include "gambo/nets.hpp"
#include "gambo/rng.hpp"
#include "gambo/tasks.hpp"
#include "gambo/wasserstein.hpp"

namespace gambo {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

// Smallest |pre-activation| over every hidden unit at z.
double kink_margin(const Mlp& net, const VectorXd& z) {
  VectorXd h = z;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    VectorXd pre = net.weights()[l] * h + net.biases()[l];
    margin = std::min(margin, pre.cwiseAbs().minCoeff());
    h = pre.unaryExpr([&](double v) { return v > 0 ? v : net.negative_slope() * v; });
  }
  return margin;
}

CheckResult check_gradients() {
  Rng rng(derive_seed(0, "selfcheck/fd"));
  std::uniform_int_distribution<int> width(1, 12), depth(1, 3), dim(1, 6);
  const double h = 1e-4;
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    std::vector<int> dims = {dim(rng)};
    for (int l = depth(rng); l > 0; --l) dims.push_back(width(rng));
    dims.push_back(1);
    Mlp net = Mlp::init(std::span<const int>(dims), rng());
    for (auto& b : net.biases()) b = 0.3 * standard_normal(b.size(), 1, rng).col(0);
    VectorXd z;
    do {
      z = standard_normal(dims[0], 1, rng).col(0);
    } while (kink_margin(net, z) < 1e-3);
    const VectorXd g = net.input_grad(z);
    VectorXd fd(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      VectorXd zp = z, zm = z;
      zp(j) += h;
      zm(j) -= h;
      fd(j) = (net.forward(zp) - net.forward(zm)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-8));
  }
  return {"finite-difference input gradients (100 nets)", worst < 1e-4, "max rel err " + fmt(worst)};
}

double brute_force_w1(const MatrixXd& P, const MatrixXd& Q) {
  std::vector<int> perm(static_cast<std::size_t>(P.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) s += (P.row(i) - Q.row(perm[static_cast<std::size_t>(i)])).norm();
    best = std::min(best, s / static_cast<double>(P.rows()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CheckResult check_w1() {
  Rng rng(derive_seed(0, "selfcheck/w1"));
  double worst = 0.0;
  for (int n = 1; n <= 7; ++n)
    for (int rep = 0; rep < 5; ++rep) {
      const int d = 1 + rep % 3;
      const MatrixXd P = standard_normal(n, d, rng), Q = standard_normal(n, d, rng);
      worst = std::max(worst, std::abs(w1_exact(P, Q) - brute_force_w1(P, Q)));
    }
  return {"exact W1 vs permutation brute force (n <= 7)", worst <= 1e-9, "max abs diff " + fmt(worst)};
}

CheckResult check_gp() {
  Rng rng(derive_seed(0, "selfcheck/gp"));
  const MatrixXd X = standard_normal(20, 2, rng);
  VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = std::sin(2 * X(i, 0)) + X(i, 1) * X(i, 1);
  const Gp gp = Gp::condition(X, y, {0.8, 1.0, kGpJitter});
  const double err = (gp.mean(X) - y).cwiseAbs().maxCoeff();
  const double var = gp.variance(X).maxCoeff();
  return {"GP noiseless interpolation", err <= 1e-6 && var >= 0.0, "max err " + fmt(err)};
}

// Exact maximum of the chain-structured raw score by dynamic programming.
double motif_chain_max(const MotifOracle& o) {
  std::array<double, kMotifVocab> best{};
  for (int a = 0; a < kMotifVocab; ++a) best[a] = o.pwm()[0][a];
  for (int p = 1; p < kMotifLength; ++p) {
    std::array<double, kMotifVocab> next{};
    for (int b = 0; b < kMotifVocab; ++b) {
      double m = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kMotifVocab; ++a) m = std::max(m, best[a] + o.pairs()[p - 1][a][b]);
      next[b] = m + o.pwm()[p][b];
    }
    best = next;
  }
  return *std::max_element(best.begin(), best.end());
}

CheckResult check_motif() {
  const MotifOracle o = MotifOracle::seeded(0);
  const double dp = motif_chain_max(o);
  const double diff = std::abs(o.raw(o.argmax()) - dp);
  const double top = o(o.argmax());
  return {"motif enumeration maximum vs chain DP", diff <= 1e-12 && std::abs(top - 1.0) <= 1e-12,
          "diff " + fmt(diff)};
}

// Alpha chosen by replaying the grid with per-point Lagrangian gradients.
double replay_alpha(const Mlp& f, const Mlp& c, double ref, const MatrixXd& Z, double fallback) {
  std::vector<VectorXd> gf;
  double mean_norm = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    gf.push_back(f.input_grad(Z.row(i).transpose()));
    mean_norm += gf.back().norm();
  }
  mean_norm /= static_cast<double>(Z.rows());
  double best_g = -std::numeric_limits<double>::infinity(), best_alpha = fallback;
  for (int k = 0; k < 200; ++k) {
    const double alpha = k / 200.0;
    double min_norm = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      const double n = ((1 - alpha) * lagrangian_grad(Z.row(i).transpose(), alpha, f, c)).norm();
      if (n < min_norm) {
        min_norm = n;
        arg = i;
      }
    }
    if (min_norm > mean_norm) continue;
    const double g = (1 - alpha) * lagrangian(Z.row(arg).transpose(), alpha, f, c, ref);
    if (g > best_g) {
      best_g = g;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

CheckResult check_alpha_replay() {
  Rng rng(derive_seed(0, "selfcheck/ascr"));
  int mismatches = 0;
  const int instances = 20;
  for (int inst = 0; inst < instances; ++inst) {
    const int d = 1 + inst % 3;
    const Mlp f = Mlp::init({d, 8, 8, 1}, rng());
    const Mlp c = Mlp::init({d, 4 * d, d, 1}, rng());
    const MatrixXd Z = standard_normal(64, d, rng);
    const double ref = c.forward_batch(standard_normal(32, d, rng)).mean();
    AscrConfig cfg;
    cfg.search_budget = 64;
    const double got = select_alpha(f, c, ref, cfg, Z, 0.5).alpha;
    if (got != replay_alpha(f, c, ref, Z, 0.5)) ++mismatches;
  }
  return {"alpha grid replay (20 instances)", mismatches == 0, std::to_string(mismatches) + " mismatches"};
}

CheckResult check_checkpoint_roundtrip() {
  const Mlp net = Mlp::init({3, 7, 5, 1}, 17);
  bool ok = from_binary_checkpoint(to_binary_checkpoint(net)) == net &&
            from_json_checkpoint(to_json_checkpoint(net)) == net;
  std::string blob = to_binary_checkpoint(net);
  blob[blob.size() / 2] ^= 0x20;
  bool rejected = false;
  try {
    from_binary_checkpoint(blob);
  } catch (const CheckpointError&) {
    rejected = true;
  }
  return {"checkpoint round trip and corruption detection", ok && rejected,
          std::string(ok ? "round trip ok" : "round trip mismatch") + (rejected ? ", flip rejected" : ", flip accepted")};
}

CheckResult check_checkpoint_file(const fs::path& path) {
  try {
    const Mlp net = load_checkpoint(path);
    return {"checkpoint " + path.string(), true, std::to_string(net.parameter_count()) + " parameters"};
  } catch (const std::exception& e) {
    return {"checkpoint " + path.string(), false, e.what()};
  }
}

}  // namespace

std::vector<CheckResult> run_selfcheck(const std::optional<fs::path>& checkpoint) {
  std::vector<CheckResult> out = {check_gradients(),    check_w1(),         check_gp(),
                                  check_motif(),        check_alpha_replay(), check_checkpoint_roundtrip()};
  if (checkpoint) out.push_back(check_checkpoint_file(*checkpoint));
  return out;
}

}  // namespace gambo
