#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gambo/ascr.hpp"
#include "gambo/gp.hpp"
#include "gambo/nets.hpp"
#include "gambo/tasks.hpp"
#include "gambo/wasserstein.hpp"

namespace gambo {

enum class OptimizerKind { gabo, gaga, bo_qei, grad_ascent, anneal };
enum class AlphaMode { adaptive, constant, off };

std::string to_string(OptimizerKind k);
std::string to_string(AlphaMode m);
OptimizerKind parse_optimizer(const std::string& name);

struct RunConfig {
  OptimizerKind optimizer = OptimizerKind::gabo;
  AlphaMode alpha_mode = AlphaMode::adaptive;
  /// Used when alpha_mode is constant; 1.0 selects the pure-critic objective.
  double alpha_value = 0.0;
  int T = 32;
  int b = 64;
  /// Critic retraining period in iterations; 0 means never after the first fit.
  int n_generator = 4;
  double eta = 0.05;
  /// Acquisitions and annealing proposals live in [-box, box]^d.
  double box = 4.0;
  AscrConfig ascr;
  CriticTrainConfig critic;
  AcquireConfig acquire;
  GpFitOptions gp;
  double anneal_step = 0.1;
  double anneal_floor = 1e-3;

  /// Starting critic; a fresh [d, 4d, d, 1] critic when empty.
  std::optional<Mlp> initial_critic;
  bool train_critic = true;

  /// Defaults for each optimizer: GABO/BO T=32 b=64, GAGA/gradient
  /// ascent/anneal T=128 b=16.
  static RunConfig defaults(OptimizerKind k);

  int total_budget() const { return T * b; }
  bool pure_critic() const { return alpha_mode == AlphaMode::constant && alpha_value == 1.0; }
  bool uses_critic() const;
  void validate() const;
};

/// What an optimizer is allowed to see: a surrogate over the standardized
/// optimization space and the offline data living there.
struct Problem {
  const Model* surrogate = nullptr;
  MatrixXd reference;          // offline designs (rows)
  VectorXd reference_scores;   // offline scores in surrogate units
  std::vector<bool> free_mask; // empty: every coordinate is free
  VectorXd condition;          // values of the fixed coordinates (full length)
  int condition_index = 0;

  int dim() const { return static_cast<int>(reference.cols()); }
  bool is_free(int j) const { return free_mask.empty() || free_mask[static_cast<std::size_t>(j)]; }
  std::vector<int> free_indices() const;
  void validate() const;
};

/// Problem for one condition of a task.
Problem make_problem(const Task& task, const Model& surrogate, int condition_index = 0);

struct EvalRecord {
  int iteration = 0;   // 1-based
  int index = 0;       // position in the batch
  int condition = 0;
  VectorXd z;
  double y = 0.0;      // -L(z; alpha) at evaluation time
  double alpha = 0.0;
};

struct CriticEvent {
  int iteration = 0;
  int condition = 0;
  int steps = 0;
  double best_estimate = 0.0;
};

struct Trajectory {
  std::vector<EvalRecord> records;
  std::vector<CriticEvent> critic_events;
  std::vector<AlphaRecord> alpha_history;
  std::int64_t evaluations = 0;     // penalized-objective evaluations, T*b per condition
  std::int64_t probe_queries = 0;   // aSCR Monte Carlo surrogate probes
  std::int64_t critic_updates = 0;

  void append(const Trajectory& other);
};

Trajectory run_gabo(const Problem& problem, const RunConfig& cfg, std::uint64_t seed);
Trajectory run_gaga(const Problem& problem, const RunConfig& cfg, std::uint64_t seed);
Trajectory run_anneal(const Problem& problem, const RunConfig& cfg, std::uint64_t seed);
/// GABO (or GAGA, when cfg.optimizer is gaga) loop maximizing c(z) - E_P c.
Trajectory run_pure_critic(const Problem& problem, const RunConfig& cfg, std::uint64_t seed);

/// Dispatches on cfg.optimizer; bo_qei and grad_ascent are the GABO and GAGA
/// loops with the penalty switched off.
Trajectory run_optimizer(const Problem& problem, const RunConfig& cfg, std::uint64_t seed);

/// Surrogate fitted on the task's standardized offline data; the init and
/// shuffle streams derive from seed.
SurrogateFit train_task_surrogate(const Task& task, SurrogateTrainConfig cfg, std::uint64_t seed);

/// Runs every condition of the task, each with its own seed stream.
Trajectory run_task(const Task& task, const Model& surrogate, const RunConfig& cfg, std::uint64_t seed);

}  // namespace gambo
