#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gambo/eval.hpp"
#include "gambo/io.hpp"
#include "gambo/optimizers.hpp"
#include "gambo/selfcheck.hpp"

namespace gambo {

/// Unknown task or method names and malformed configs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MethodSpec {
  std::string name;
  RunConfig config;
};

struct ExperimentConfig {
  std::string task = "branin";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<MethodSpec> methods;
  SurrogateTrainConfig surrogate;
  std::filesystem::path output_dir;  // empty: decided by the caller
};

/// Parses a version-1 config. A method entry is either an optimizer name or
/// an object with "name" plus RunConfig overrides.
ExperimentConfig parse_experiment_config(const json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
json to_json(const ExperimentConfig& cfg);

/// Resolves a bare method name: the five optimizers plus
/// "<gabo|gaga>_alpha_<value>" and "<gabo|gaga>_ngen_inf".
std::optional<MethodSpec> method_from_name(const std::string& name);

struct ExperimentOptions {
  int jobs = 1;
  /// Trained surrogates are stored here and reused when present.
  std::optional<std::filesystem::path> surrogate_cache;
  std::function<void(const std::string&)> log;
};

struct RunResult {
  std::string method;
  std::uint64_t seed = 0;
  RunConfig config;
  Trajectory trajectory;
  SeedScores scores;
  double dcov = 0.0;
  std::vector<int> ks;
  std::vector<double> curve;
};

struct ExperimentResult {
  std::string task;
  std::vector<RunResult> runs;             // method-major, seeds in config order
  std::vector<double> dataset_best;        // per seed
  std::vector<SeedScores> scores() const;
};

/// Trains (or loads) the surrogate for (task, seed).
Mlp obtain_surrogate(const Task& task, const SurrogateTrainConfig& cfg, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& cache);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts = {});

/// scores.csv, ranks.csv, curve_<task>_<method>.csv, dcov.csv, per-run
/// trajectories and summaries, datasets, and the normalized config.
void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                              const std::filesystem::path& out_dir);

/// Mean budget curve over seeds for one method.
std::vector<double> mean_curve(const ExperimentResult& result, const std::string& method, std::vector<int>* ks);

/// The Branin comparison suite: every optimizer, constant-alpha ablations
/// and the never-retrain critic ablation, 10 seeds, width-2048 surrogate.
ExperimentConfig branin_reproduction_config();

/// Published Branin numbers (mean, std) for the methods of the comparison suite.
struct PublishedScores {
  std::string method;
  double top1 = 0.0, top1_std = 0.0;
  double top128 = 0.0, top128_std = 0.0;
};
const std::vector<PublishedScores>& published_branin_scores();
inline constexpr double kPublishedBraninDatasetBest = -13.0;

/// Branin acceptance checks on a finished suite. A constant-alpha 0 run falls
/// back to bo_qei when the suite has no gabo_alpha_0 method.
std::vector<CheckResult> branin_criteria(const ExperimentResult& result);

/// Method rows with our mean +/- std beside the published numbers.
std::string branin_comparison_table(const ExperimentResult& result);

/// True when the curve never decreases.
bool monotone_curve(const std::vector<double>& curve);

}  // namespace gambo
