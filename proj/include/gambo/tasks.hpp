#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gambo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kStdFloor = 1e-8;

/// Per-dimension z-scoring.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;

  static Standardizer fit(const MatrixXd& X);
  VectorXd standardize(const VectorXd& x) const;
  VectorXd destandardize(const VectorXd& z) const;
  MatrixXd standardize_rows(const MatrixXd& X) const;
};

/// Frozen offline data. `designs` live in the standardized optimization
/// space; `raw_designs` in the task's design space.
struct OfflineDataset {
  MatrixXd designs;
  MatrixXd raw_designs;
  VectorXd scores;
  Standardizer design_stats;
  double score_mean = 0.0;
  double score_scale = 1.0;

  Eigen::Index size() const { return scores.size(); }
  VectorXd standardized_scores() const;
  double best_score() const { return scores.maxCoeff(); }
};

/// A benchmark task: embedder, hidden oracle and offline data.
/// Optimizers never see a Task; they get the optimization-space view
/// (dataset designs and scores, free mask, conditions) plus a surrogate.
class Task {
 public:
  virtual ~Task() = default;

  virtual std::string name() const = 0;
  virtual int design_dim() const = 0;
  int opt_dim() const { return static_cast<int>(dataset_.designs.cols()); }

  virtual VectorXd encode(const VectorXd& design) const = 0;
  virtual VectorXd decode(const VectorXd& z) const = 0;
  virtual double oracle(const VectorXd& design) const = 0;

  const OfflineDataset& dataset() const { return dataset_; }
  /// True where an optimizer may move the coordinate.
  const std::vector<bool>& free_mask() const { return free_mask_; }
  /// One optimization-space row per condition; fixed coordinates are taken
  /// from it. Unconditional tasks have a single all-zero row.
  const MatrixXd& conditions() const { return conditions_; }
  bool conditional() const;

 protected:
  OfflineDataset dataset_;
  std::vector<bool> free_mask_;
  MatrixXd conditions_;
};

// ---- Branin ----------------------------------------------------------------

inline constexpr double kBraninLo[2] = {-5.0, 0.0};
inline constexpr double kBraninHi[2] = {10.0, 15.0};

/// Negated Branin (maximization). Inputs outside [-5,10] x [0,15] are clamped;
/// non-finite inputs throw.
double branin_oracle(const VectorXd& x);
/// Number of clamped oracle inputs since process start.
std::uint64_t branin_clamp_count();

class BraninTask final : public Task {
 public:
  explicit BraninTask(std::uint64_t seed, int n_raw = 1000);
  std::string name() const override { return "branin"; }
  int design_dim() const override { return 2; }
  VectorXd encode(const VectorXd& x) const override;
  VectorXd decode(const VectorXd& z) const override;
  double oracle(const VectorXd& x) const override { return branin_oracle(x); }
};

/// 1000 uniform draws on the Branin box, top 20% by score removed.
OfflineDataset build_branin_dataset(int n_raw, std::uint64_t seed);

// ---- Motif (8-mer, 4 symbols) ----------------------------------------------

inline constexpr int kMotifLength = 8;
inline constexpr int kMotifVocab = 4;
using Sequence = std::array<int, kMotifLength>;

/// Position weights plus adjacent-pair interactions, normalized to [0,1] by the
/// exact minimum and maximum over all 4^8 sequences.
class MotifOracle {
 public:
  using Pwm = std::array<std::array<double, kMotifVocab>, kMotifLength>;
  using Pairs = std::array<std::array<std::array<double, kMotifVocab>, kMotifVocab>, kMotifLength - 1>;

  static MotifOracle seeded(std::uint64_t seed);
  MotifOracle(const Pwm& pwm, const Pairs& pairs);

  double raw(const Sequence& s) const;
  /// Throws std::out_of_range on an out-of-vocabulary symbol.
  double operator()(const Sequence& s) const;
  const Sequence& argmax() const { return argmax_; }
  const Pwm& pwm() const { return pwm_; }
  const Pairs& pairs() const { return pairs_; }

  static Sequence sequence_from_index(int index);

 private:
  Pwm pwm_;
  Pairs pairs_;
  double min_ = 0.0, max_ = 1.0;
  Sequence argmax_{};
};

class MotifTask final : public Task {
 public:
  MotifTask(std::uint64_t seed, int n = 8192, std::uint64_t oracle_seed = 0);
  std::string name() const override { return "motif"; }
  int design_dim() const override { return kMotifLength; }
  VectorXd encode(const VectorXd& seq) const override;
  VectorXd decode(const VectorXd& z) const override;
  double oracle(const VectorXd& seq) const override;
  const MotifOracle& motif_oracle() const { return oracle_; }

 private:
  MotifOracle oracle_;
};

VectorXd one_hot(const Sequence& s);
/// De-standardize, reshape to 8 x 4 and take per-position argmax (ties to
/// the lowest symbol).
Sequence discrete_decode(const VectorXd& z, const Standardizer& stats);

OfflineDataset build_motif_dataset(const MotifOracle& oracle, int n, std::uint64_t seed);

// ---- Dosing (conditional) --------------------------------------------------

inline constexpr int kCovariates = 8;

struct DosingModel {
  VectorXd weights;       // d_oracle(x) = weights . x + intercept
  double intercept = 5.0;
  double mean_dose = 5.0; // z-bar over the historical training doses

  double oracle_dose(const VectorXd& covariates) const;
  double cost(double dose, const VectorXd& covariates) const;
  /// [c(z-bar|x) - c(dose|x)] / c(z-bar|x)
  double score(double dose, const VectorXd& covariates) const;
};

class DosingTask final : public Task {
 public:
  static constexpr double kHistoricalNoise = 1.0;
  static constexpr double kMinSeparation = 0.5;

  DosingTask(std::uint64_t seed, int n_train = 512, int n_eval_patients = 50, std::uint64_t oracle_seed = 0);
  std::string name() const override { return "dosing"; }
  int design_dim() const override { return kCovariates + 1; }
  VectorXd encode(const VectorXd& design) const override;
  VectorXd decode(const VectorXd& z) const override;
  /// Design layout: covariates followed by the dose.
  double oracle(const VectorXd& design) const override;
  const DosingModel& model() const { return model_; }
  const MatrixXd& eval_patients() const { return eval_patients_; }

 private:
  DosingModel model_;
  MatrixXd eval_patients_;  // raw covariates, one row per patient
};

/// Registry: "branin", "motif", "dosing".
std::unique_ptr<Task> make_task(const std::string& name, std::uint64_t seed);
std::vector<std::string> task_names();

}  // namespace gambo
