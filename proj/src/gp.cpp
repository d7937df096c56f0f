#include "gambo/gp.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "gambo/sobol.hpp"

namespace gambo {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873;

MatrixXd sq_distances(const MatrixXd& A, const MatrixXd& B) {
  const VectorXd a2 = A.rowwise().squaredNorm();
  const VectorXd b2 = B.rowwise().squaredNorm();
  MatrixXd D = -2.0 * A * B.transpose();
  D.colwise() += a2;
  D.rowwise() += b2.transpose();
  return D.cwiseMax(0.0);
}

MatrixXd kernel_matrix(const MatrixXd& A, const MatrixXd& B, const GpHyper& h) {
  return sq_distances(A, B).unaryExpr([&h](double d2) { return matern52(std::sqrt(d2), h); });
}

struct Factorization {
  Eigen::LLT<MatrixXd> llt;
  double extra_jitter = 0.0;
  bool ok = false;
};

Factorization factorize(const MatrixXd& X, const GpHyper& h) {
  Factorization f;
  MatrixXd K = kernel_matrix(X, X, h);
  K.diagonal().array() += h.noise;
  for (double extra = 0.0; extra <= 1e-2; extra = extra == 0.0 ? kGpJitter : extra * 10.0) {
    MatrixXd Kj = K;
    Kj.diagonal().array() += extra;
    f.llt.compute(Kj);
    if (f.llt.info() == Eigen::Success) {
      f.extra_jitter = extra;
      f.ok = true;
      return f;
    }
  }
  return f;
}

double lml_from(const Factorization& f, const VectorXd& y) {
  const VectorXd a = f.llt.solve(y);
  const MatrixXd& L = f.llt.matrixLLT();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * y.dot(a) - 0.5 * logdet - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

// Nelder-Mead maximization in a box; the best vertex never gets worse.
struct Simplex {
  std::vector<VectorXd> pts;
  std::vector<double> vals;
};

VectorXd nelder_mead_max(const std::function<double(const VectorXd&)>& f, std::vector<VectorXd> start,
                         const VectorXd& lo, const VectorXd& hi, int max_evals, double* best_value) {
  const auto clamp = [&](VectorXd x) { return VectorXd(x.cwiseMax(lo).cwiseMin(hi)); };
  Simplex s;
  for (auto& p : start) {
    s.pts.push_back(clamp(p));
    s.vals.push_back(f(s.pts.back()));
  }
  int evals = static_cast<int>(s.pts.size());
  const std::size_t n = s.pts.size();
  std::vector<std::size_t> idx(n);
  while (evals < max_evals) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.vals[a] > s.vals[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[n - 2];
    if (std::abs(s.vals[best] - s.vals[worst]) < 1e-9 * (1.0 + std::abs(s.vals[best]))) break;
    VectorXd centroid = VectorXd::Zero(lo.size());
    for (std::size_t i = 0; i + 1 < n; ++i) centroid += s.pts[idx[i]];
    centroid /= static_cast<double>(n - 1);

    const VectorXd xr = clamp(centroid + (centroid - s.pts[worst]));
    const double fr = f(xr);
    ++evals;
    if (fr > s.vals[best]) {
      const VectorXd xe = clamp(centroid + 2.0 * (centroid - s.pts[worst]));
      const double fe = f(xe);
      ++evals;
      if (fe > fr) {
        s.pts[worst] = xe;
        s.vals[worst] = fe;
      } else {
        s.pts[worst] = xr;
        s.vals[worst] = fr;
      }
      continue;
    }
    if (fr > s.vals[second]) {
      s.pts[worst] = xr;
      s.vals[worst] = fr;
      continue;
    }
    const VectorXd xc = clamp(centroid + 0.5 * (s.pts[worst] - centroid));
    const double fc = f(xc);
    ++evals;
    if (fc > s.vals[worst]) {
      s.pts[worst] = xc;
      s.vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == best) continue;
      s.pts[i] = clamp(s.pts[best] + 0.5 * (s.pts[i] - s.pts[best]));
      s.vals[i] = f(s.pts[i]);
      ++evals;
    }
  }
  const auto it = std::max_element(s.vals.begin(), s.vals.end());
  *best_value = *it;
  return s.pts[static_cast<std::size_t>(it - s.vals.begin())];
}

GpHyper from_log(const VectorXd& t) { return {std::exp(t(0)), std::exp(t(1)), std::exp(t(2))}; }

}  // namespace

double matern52(double r, const GpHyper& h) {
  const double s = kSqrt5 * r / h.lengthscale;
  return h.outputscale * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double log_marginal_likelihood(const MatrixXd& X, const VectorXd& y_standardized, const GpHyper& hyper) {
  const Factorization f = factorize(X, hyper);
  if (!f.ok) return -std::numeric_limits<double>::infinity();
  return lml_from(f, y_standardized);
}

Gp Gp::condition(const MatrixXd& X, const VectorXd& y, const GpHyper& hyper) {
  if (X.rows() < 1 || X.rows() != y.size()) throw std::invalid_argument("Gp: need matching, non-empty X and y");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("Gp: non-finite training data");
  Gp gp;
  gp.X_ = X;
  gp.y_ = y;
  gp.y_mean_ = y.mean();
  const double var = (y.array() - gp.y_mean_).square().mean();
  gp.y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  gp.hyper_ = hyper;
  Factorization f = factorize(X, hyper);
  if (!f.ok) throw std::runtime_error("Gp: covariance factorization failed");
  const VectorXd ys = (y.array() - gp.y_mean_) / gp.y_scale_;
  gp.llt_ = std::move(f.llt);
  gp.extra_jitter_ = f.extra_jitter;
  gp.alpha_ = gp.llt_.solve(ys);
  const MatrixXd& L = gp.llt_.matrixLLT();
  gp.lml_ = -0.5 * ys.dot(gp.alpha_) - L.diagonal().array().log().sum() -
            0.5 * static_cast<double>(ys.size()) * std::log(2.0 * std::numbers::pi);
  return gp;
}

Gp Gp::fit(const MatrixXd& X, const VectorXd& y, const GpFitOptions& opts) {
  if (X.rows() < 2) throw std::invalid_argument("Gp::fit needs at least two observations");
  if (X.rows() != y.size()) throw std::invalid_argument("Gp::fit: X and y lengths differ");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("Gp::fit: non-finite training data");

  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;

  // Seeded subset for the likelihood search.
  MatrixXd Xf = X;
  VectorXd yf = (y.array() - mean) / scale;
  if (X.rows() > opts.max_fit_points) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(derive_seed(opts.seed, "gp-fit-subset"));
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(opts.max_fit_points));
    std::sort(order.begin(), order.end());
    Xf.resize(opts.max_fit_points, X.cols());
    VectorXd ysub(opts.max_fit_points);
    for (int i = 0; i < opts.max_fit_points; ++i) {
      Xf.row(i) = X.row(order[static_cast<std::size_t>(i)]);
      ysub(i) = yf(order[static_cast<std::size_t>(i)]);
    }
    yf = ysub;
  }

  VectorXd lo(3), hi(3);
  lo << std::log(opts.min_lengthscale), std::log(opts.min_outputscale), std::log(opts.min_noise);
  hi << std::log(opts.max_lengthscale), std::log(opts.max_outputscale), std::log(opts.max_noise);
  const GpHyper defaults{};
  VectorXd t0(3);
  t0 << std::log(defaults.lengthscale), std::log(defaults.outputscale), std::log(defaults.noise);
  t0 = t0.cwiseMax(lo).cwiseMin(hi);

  const auto objective = [&](const VectorXd& t) {
    const double v = gambo::log_marginal_likelihood(Xf, yf, from_log(t));
    return std::isfinite(v) ? v : -1e300;
  };

  // Restart r starts from a Sobol point of the log box; the default
  // hyperparameters sit in every simplex so no restart ends below them.
  const MatrixXd starts = sobol_sample(std::max(1, opts.restarts), 3, opts.seed, true);
  VectorXd best_t = t0;
  double best_v = objective(t0);
  for (int r = 0; r < opts.restarts; ++r) {
    VectorXd s = lo + starts.row(r).transpose().cwiseProduct(hi - lo);
    std::vector<VectorXd> simplex{s, t0};
    for (int k = 0; k < 2; ++k) {
      VectorXd p = s;
      p(k) += (p(k) + 0.5 <= hi(k)) ? 0.5 : -0.5;
      simplex.push_back(p);
    }
    double v = 0.0;
    const VectorXd t = nelder_mead_max(objective, simplex, lo, hi, opts.max_evals_per_restart, &v);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  return condition(X, y, from_log(best_t));
}

MatrixXd Gp::cross_kernel(const MatrixXd& A, const MatrixXd& B) const { return kernel_matrix(A, B, hyper_); }

Gp::Posterior Gp::posterior(const MatrixXd& Xs) const {
  if (Xs.cols() != X_.cols()) throw std::invalid_argument("Gp::posterior: dimension mismatch");
  const MatrixXd Ks = cross_kernel(X_, Xs);
  const MatrixXd V = llt_.matrixL().solve(Ks);
  Posterior p;
  p.mean = (Ks.transpose() * alpha_).array() * y_scale_ + y_mean_;
  MatrixXd cov = cross_kernel(Xs, Xs) - V.transpose() * V;
  cov = 0.5 * (cov + cov.transpose());
  for (Eigen::Index i = 0; i < cov.rows(); ++i) cov(i, i) = std::max(0.0, cov(i, i));
  p.cov = cov * (y_scale_ * y_scale_);
  return p;
}

VectorXd Gp::mean(const MatrixXd& Xs) const {
  if (Xs.cols() != X_.cols()) throw std::invalid_argument("Gp::mean: dimension mismatch");
  return ((cross_kernel(X_, Xs).transpose() * alpha_).array() * y_scale_ + y_mean_).matrix();
}

VectorXd Gp::variance(const MatrixXd& Xs) const {
  if (Xs.cols() != X_.cols()) throw std::invalid_argument("Gp::variance: dimension mismatch");
  const MatrixXd V = llt_.matrixL().solve(cross_kernel(X_, Xs));
  const VectorXd v = (hyper_.outputscale - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  return v * (y_scale_ * y_scale_);
}

void AcquireConfig::validate() const {
  if (batch < 1) throw std::invalid_argument("acquisition batch must be >= 1");
  if (candidate_pool < batch) throw std::invalid_argument("candidate pool must be at least the batch size");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
}

double mc_expected_improvement(double mean, double sd, double incumbent, const VectorXd& normals) {
  double total = 0.0;
  for (Eigen::Index s = 0; s < normals.size(); ++s) total += std::max(0.0, mean + sd * normals(s) - incumbent);
  return total / static_cast<double>(normals.size());
}

MatrixXd qei_acquire(const Gp& gp, double incumbent, const AcquireConfig& cfg, double lower, double upper,
                     Rng& rng, AcquireTrace* trace) {
  cfg.validate();
  if (gp.train_X().rows() == 0) throw std::logic_error("qei_acquire: GP is not fitted");
  const MatrixXd u = sobol_sample(cfg.candidate_pool, gp.dim(), rng(), true);
  const MatrixXd pool = (u.array() * (upper - lower) + lower).matrix();
  return qei_acquire_from_pool(gp, incumbent, cfg, pool, rng, trace);
}

MatrixXd qei_acquire_from_pool(const Gp& gp, double incumbent, const AcquireConfig& cfg, const MatrixXd& pool,
                               Rng& rng, AcquireTrace* trace) {
  cfg.validate();
  if (gp.train_X().rows() == 0) throw std::logic_error("qei_acquire: GP is not fitted");
  if (pool.cols() != gp.dim()) throw std::invalid_argument("qei_acquire: pool dimension mismatch");
  const Eigen::Index m = pool.rows();
  if (m < 1) throw std::invalid_argument("qei_acquire: empty pool");

  const MatrixXd Ks = gp.cross_kernel(gp.train_X(), pool);
  const VectorXd mu = Ks.transpose() * gp.weights();
  const MatrixXd V = gp.factor().matrixL().solve(Ks);
  VectorXd var = (gp.hyper().outputscale - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  const double noise = gp.hyper().noise + gp.extra_jitter();
  const double best = (incumbent - gp.y_mean()) / gp.y_scale();

  VectorXd normals(cfg.mc_samples);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < cfg.mc_samples; ++s) normals(s) = normal(rng);

  std::vector<VectorXd> downdates;
  std::vector<double> denoms;
  std::vector<Eigen::Index> picks;
  MatrixXd out(cfg.batch, pool.cols());
  if (trace != nullptr) {
    trace->pool = pool;
    trace->ei.clear();
    trace->picks.clear();
  }
  for (int j = 0; j < cfg.batch; ++j) {
    VectorXd ei(m);
    for (Eigen::Index i = 0; i < m; ++i)
      ei(i) = mc_expected_improvement(mu(i), std::sqrt(var(i)), best, normals);
    Eigen::Index p = 0;
    if (ei.maxCoeff(&p) <= 0.0) var.maxCoeff(&p);  // no improvement anywhere: explore
    if (trace != nullptr) {
      trace->ei.push_back(ei);
      trace->picks.push_back(p);
    }
    out.row(j) = pool.row(p);
    picks.push_back(p);

    // Covariance of the pool with the pick under the current fantasy posterior.
    VectorXd c = gp.cross_kernel(pool, pool.row(p)).col(0) - V.transpose() * V.col(p);
    for (std::size_t k = 0; k < downdates.size(); ++k) c -= downdates[k] * (downdates[k](p) / denoms[k]);
    const double denom = std::max(var(p), 0.0) + noise;
    var = (var.array() - c.array().square() / denom).cwiseMax(0.0);
    downdates.push_back(std::move(c));
    denoms.push_back(denom);
  }
  return out;
}

}  // namespace gambo
