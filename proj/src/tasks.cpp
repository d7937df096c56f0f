#include "gambo/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gambo/rng.hpp"

namespace gambo {

// ---- Standardizer / dataset --------------------------------------------------

Standardizer Standardizer::fit(const MatrixXd& X) {
  if (X.rows() == 0) throw std::invalid_argument("Standardizer::fit: empty data");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().mean();
    s.scale(j) = std::max(std::sqrt(var), kStdFloor);
  }
  return s;
}

VectorXd Standardizer::standardize(const VectorXd& x) const { return (x - mean).cwiseQuotient(scale); }

VectorXd Standardizer::destandardize(const VectorXd& z) const { return z.cwiseProduct(scale) + mean; }

MatrixXd Standardizer::standardize_rows(const MatrixXd& X) const {
  return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

VectorXd OfflineDataset::standardized_scores() const {
  return (scores.array() - score_mean) / score_scale;
}

namespace {

OfflineDataset make_dataset(MatrixXd raw, VectorXd scores) {
  if (raw.rows() == 0) throw std::invalid_argument("offline dataset must be non-empty");
  if (!scores.allFinite()) throw std::invalid_argument("offline scores must be finite");
  OfflineDataset ds;
  ds.design_stats = Standardizer::fit(raw);
  ds.designs = ds.design_stats.standardize_rows(raw);
  ds.raw_designs = std::move(raw);
  ds.scores = std::move(scores);
  ds.score_mean = ds.scores.mean();
  ds.score_scale = std::max(std::sqrt((ds.scores.array() - ds.score_mean).square().mean()), kStdFloor);
  return ds;
}

// Keeps rows whose rank (by score, stable) falls in [begin, end) of the
// ascending order; preserves the original row order among kept rows.
std::vector<Eigen::Index> rank_slice(const VectorXd& scores, Eigen::Index begin, Eigen::Index end) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores(a) < scores(b); });
  std::vector<Eigen::Index> kept(order.begin() + begin, order.begin() + end);
  std::sort(kept.begin(), kept.end());
  return kept;
}

MatrixXd take_rows(const MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

VectorXd take(const VectorXd& v, const std::vector<Eigen::Index>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

}  // namespace

bool Task::conditional() const {
  return std::any_of(free_mask_.begin(), free_mask_.end(), [](bool f) { return !f; });
}

// ---- Branin --------------------------------------------------------------------

namespace {
std::atomic<std::uint64_t> g_branin_clamps{0};
}

std::uint64_t branin_clamp_count() { return g_branin_clamps.load(); }

double branin_oracle(const VectorXd& x) {
  if (x.size() != 2) throw std::invalid_argument("branin_oracle expects a 2-vector");
  if (!x.allFinite()) throw std::invalid_argument("branin_oracle: non-finite input");
  const double x1 = std::clamp(x(0), kBraninLo[0], kBraninHi[0]);
  const double x2 = std::clamp(x(1), kBraninLo[1], kBraninHi[1]);
  if (x1 != x(0) || x2 != x(1)) g_branin_clamps.fetch_add(1, std::memory_order_relaxed);
  constexpr double pi = std::numbers::pi;
  constexpr double a = 1.0, b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, r = 6.0, s = 10.0, t = 1.0 / (8.0 * pi);
  const double inner = x2 - b * x1 * x1 + c * x1 - r;
  return -(a * inner * inner + s * (1.0 - t) * std::cos(x1) + s);
}

OfflineDataset build_branin_dataset(int n_raw, std::uint64_t seed) {
  if (n_raw < 5) throw std::invalid_argument("build_branin_dataset: need at least 5 samples");
  Rng rng(derive_seed(seed, "branin-dataset"));
  std::uniform_real_distribution<double> u1(kBraninLo[0], kBraninHi[0]);
  std::uniform_real_distribution<double> u2(kBraninLo[1], kBraninHi[1]);
  MatrixXd raw(n_raw, 2);
  VectorXd y(n_raw);
  for (int i = 0; i < n_raw; ++i) {
    raw(i, 0) = u1(rng);
    raw(i, 1) = u2(rng);
    y(i) = branin_oracle(raw.row(i).transpose());
  }
  const Eigen::Index keep = n_raw - n_raw / 5;  // drop the top 20%
  const auto rows = rank_slice(y, 0, keep);
  return make_dataset(take_rows(raw, rows), take(y, rows));
}

BraninTask::BraninTask(std::uint64_t seed, int n_raw) {
  dataset_ = build_branin_dataset(n_raw, seed);
  free_mask_.assign(2, true);
  conditions_ = MatrixXd::Zero(1, 2);
}

VectorXd BraninTask::encode(const VectorXd& x) const { return dataset_.design_stats.standardize(x); }

VectorXd BraninTask::decode(const VectorXd& z) const { return dataset_.design_stats.destandardize(z); }

// ---- Motif -----------------------------------------------------------------------

MotifOracle MotifOracle::seeded(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "motif-oracle"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Pwm pwm{};
  Pairs pairs{};
  for (auto& row : pwm)
    for (auto& w : row) w = unit(rng);
  for (auto& pos : pairs)
    for (auto& row : pos)
      for (auto& j : row) j = 0.5 * unit(rng);
  return MotifOracle(pwm, pairs);
}

Sequence MotifOracle::sequence_from_index(int index) {
  Sequence s{};
  for (int p = kMotifLength - 1; p >= 0; --p) {
    s[static_cast<std::size_t>(p)] = index % kMotifVocab;
    index /= kMotifVocab;
  }
  return s;
}

MotifOracle::MotifOracle(const Pwm& pwm, const Pairs& pairs) : pwm_(pwm), pairs_(pairs) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  constexpr int total = 1 << (2 * kMotifLength);
  for (int i = 0; i < total; ++i) {
    const Sequence s = sequence_from_index(i);
    const double v = raw(s);
    lo = std::min(lo, v);
    if (v > hi) {
      hi = v;
      argmax_ = s;
    }
  }
  min_ = lo;
  max_ = hi;
}

double MotifOracle::raw(const Sequence& s) const {
  double v = 0.0;
  for (std::size_t p = 0; p < kMotifLength; ++p) v += pwm_[p][static_cast<std::size_t>(s[p])];
  for (std::size_t p = 0; p + 1 < kMotifLength; ++p)
    v += pairs_[p][static_cast<std::size_t>(s[p])][static_cast<std::size_t>(s[p + 1])];
  return v;
}

double MotifOracle::operator()(const Sequence& s) const {
  for (int sym : s)
    if (sym < 0 || sym >= kMotifVocab) throw std::out_of_range("motif symbol out of vocabulary");
  return (raw(s) - min_) / (max_ - min_);
}

VectorXd one_hot(const Sequence& s) {
  VectorXd v = VectorXd::Zero(kMotifLength * kMotifVocab);
  for (int p = 0; p < kMotifLength; ++p) v(p * kMotifVocab + s[static_cast<std::size_t>(p)]) = 1.0;
  return v;
}

Sequence discrete_decode(const VectorXd& z, const Standardizer& stats) {
  if (z.size() != kMotifLength * kMotifVocab) throw std::invalid_argument("discrete_decode expects 32 values");
  const VectorXd logits = stats.destandardize(z);
  Sequence s{};
  for (int p = 0; p < kMotifLength; ++p) {
    int best = 0;
    for (int k = 1; k < kMotifVocab; ++k)
      if (logits(p * kMotifVocab + k) > logits(p * kMotifVocab + best)) best = k;
    s[static_cast<std::size_t>(p)] = best;
  }
  return s;
}

OfflineDataset build_motif_dataset(const MotifOracle& oracle, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("build_motif_dataset: need at least 2 sequences");
  Rng rng(derive_seed(seed, "motif-dataset"));
  std::uniform_int_distribution<int> symbol(0, kMotifVocab - 1);
  MatrixXd raw(n, kMotifLength * kMotifVocab);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    Sequence s{};
    for (auto& c : s) c = symbol(rng);
    raw.row(i) = one_hot(s).transpose();
    y(i) = oracle(s);
  }
  const auto rows = rank_slice(y, 0, n / 2);  // bottom 50%
  return make_dataset(take_rows(raw, rows), take(y, rows));
}

namespace {
Sequence to_sequence(const VectorXd& v) {
  if (v.size() != kMotifLength) throw std::invalid_argument("motif designs have 8 positions");
  Sequence s{};
  for (int p = 0; p < kMotifLength; ++p) {
    const double x = v(p);
    if (x != std::floor(x) || x < 0 || x >= kMotifVocab) throw std::out_of_range("motif symbol out of vocabulary");
    s[static_cast<std::size_t>(p)] = static_cast<int>(x);
  }
  return s;
}
}  // namespace

MotifTask::MotifTask(std::uint64_t seed, int n, std::uint64_t oracle_seed)
    : oracle_(MotifOracle::seeded(oracle_seed)) {
  dataset_ = build_motif_dataset(oracle_, n, seed);
  free_mask_.assign(kMotifLength * kMotifVocab, true);
  conditions_ = MatrixXd::Zero(1, kMotifLength * kMotifVocab);
}

VectorXd MotifTask::encode(const VectorXd& seq) const {
  return dataset_.design_stats.standardize(one_hot(to_sequence(seq)));
}

VectorXd MotifTask::decode(const VectorXd& z) const {
  const Sequence s = discrete_decode(z, dataset_.design_stats);
  VectorXd v(kMotifLength);
  for (int p = 0; p < kMotifLength; ++p) v(p) = s[static_cast<std::size_t>(p)];
  return v;
}

double MotifTask::oracle(const VectorXd& seq) const { return oracle_(to_sequence(seq)); }

// ---- Dosing ----------------------------------------------------------------------

double DosingModel::oracle_dose(const VectorXd& x) const { return weights.dot(x) + intercept; }

double DosingModel::cost(double dose, const VectorXd& x) const {
  const double e = dose - oracle_dose(x);
  return e * e;
}

double DosingModel::score(double dose, const VectorXd& x) const {
  const double ref = cost(mean_dose, x);
  if (!(ref > 0.0)) throw std::domain_error("dosing score undefined when the mean dose is optimal");
  return (ref - cost(dose, x)) / ref;
}

DosingTask::DosingTask(std::uint64_t seed, int n_train, int n_eval_patients, std::uint64_t oracle_seed) {
  if (n_train < 2 || n_eval_patients < 1) throw std::invalid_argument("DosingTask: bad sizes");
  {
    Rng rng(derive_seed(oracle_seed, "dosing-oracle"));
    std::normal_distribution<double> w(0.0, 1.5 / std::sqrt(static_cast<double>(kCovariates)));
    model_.weights.resize(kCovariates);
    for (int j = 0; j < kCovariates; ++j) model_.weights(j) = w(rng);
    model_.intercept = 5.0;
  }
  Rng rng(derive_seed(seed, "dosing-patients"));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_patient = [&](Eigen::Ref<VectorXd> x) {
    for (int j = 0; j < kCovariates; ++j) x(j) = normal(rng);
  };

  // Historical doses scatter around the oracle dose. Patients whose oracle
  // dose sits too close to the population mean dose make the normalized
  // score ill-conditioned; redraw them until the mean settles.
  MatrixXd raw(n_train, kCovariates + 1);
  for (int i = 0; i < n_train; ++i) {
    VectorXd x(kCovariates);
    draw_patient(x);
    raw.row(i).head(kCovariates) = x.transpose();
    raw(i, kCovariates) = model_.oracle_dose(x) + kHistoricalNoise * normal(rng);
  }
  for (int round = 0; round < 100; ++round) {
    model_.mean_dose = raw.col(kCovariates).mean();
    bool redrawn = false;
    for (int i = 0; i < n_train; ++i) {
      VectorXd x = raw.row(i).head(kCovariates).transpose();
      if (std::abs(model_.oracle_dose(x) - model_.mean_dose) >= kMinSeparation) continue;
      do {
        draw_patient(x);
      } while (std::abs(model_.oracle_dose(x) - model_.mean_dose) < kMinSeparation);
      raw.row(i).head(kCovariates) = x.transpose();
      raw(i, kCovariates) = model_.oracle_dose(x) + kHistoricalNoise * normal(rng);
      redrawn = true;
    }
    if (!redrawn) break;
  }
  // Final z-bar; any patient that drifted inside the margin still has a
  // strictly positive reference cost, which is all the score needs.
  model_.mean_dose = raw.col(kCovariates).mean();
  VectorXd y(n_train);
  for (int i = 0; i < n_train; ++i) {
    VectorXd x = raw.row(i).head(kCovariates).transpose();
    y(i) = model_.score(raw(i, kCovariates), x);
  }
  dataset_ = make_dataset(raw, y);

  eval_patients_.resize(n_eval_patients, kCovariates);
  for (int p = 0; p < n_eval_patients; ++p) {
    VectorXd x(kCovariates);
    do {
      draw_patient(x);
    } while (std::abs(model_.oracle_dose(x) - model_.mean_dose) < kMinSeparation);
    eval_patients_.row(p) = x.transpose();
  }

  free_mask_.assign(kCovariates + 1, false);
  free_mask_[kCovariates] = true;
  conditions_.resize(n_eval_patients, kCovariates + 1);
  for (int p = 0; p < n_eval_patients; ++p) {
    VectorXd design(kCovariates + 1);
    design.head(kCovariates) = eval_patients_.row(p).transpose();
    design(kCovariates) = dataset_.design_stats.mean(kCovariates);
    conditions_.row(p) = encode(design).transpose();
  }
}

VectorXd DosingTask::encode(const VectorXd& design) const { return dataset_.design_stats.standardize(design); }

VectorXd DosingTask::decode(const VectorXd& z) const { return dataset_.design_stats.destandardize(z); }

double DosingTask::oracle(const VectorXd& design) const {
  if (design.size() != kCovariates + 1) throw std::invalid_argument("dosing designs have 9 entries");
  if (!design.allFinite()) throw std::invalid_argument("dosing oracle: non-finite input");
  return model_.score(design(kCovariates), design.head(kCovariates));
}

// ---- Registry --------------------------------------------------------------------

std::vector<std::string> task_names() { return {"branin", "motif", "dosing"}; }

std::unique_ptr<Task> make_task(const std::string& name, std::uint64_t seed) {
  if (name == "branin") return std::make_unique<BraninTask>(seed);
  if (name == "motif") return std::make_unique<MotifTask>(seed);
  if (name == "dosing") return std::make_unique<DosingTask>(seed);
  throw std::invalid_argument("unknown task '" + name + "'");
}

}  // namespace gambo
