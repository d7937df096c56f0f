#pragma once

#include <map>
#include <string>
#include <vector>

#include "gambo/optimizers.hpp"
#include "gambo/tasks.hpp"

namespace gambo {

/// Indices of the k records with the highest stored y (ties to the earlier
/// record), best first. Throws for k <= 0 or k > record count.
std::vector<std::size_t> select_top_k(const std::vector<EvalRecord>& records, int k);
std::vector<std::size_t> select_top_k(const Trajectory& traj, int k);

/// Decodes each optimization-space row and returns the best oracle score.
double oracle_eval(const Task& task, const std::vector<VectorXd>& designs);

/// Oracle score of the record at index floor(pct/100 * (N-1)) of the
/// ascending stored-y order (stable, so equal scores keep record order).
double percentile_design_eval(const std::vector<EvalRecord>& records, const Task& task, double pct = 90.0);

/// Empirical distance covariance (square root of the double-centered
/// V-statistic). Throws for fewer than two samples or unequal lengths.
double distance_covariance(const VectorXd& a, const VectorXd& b);

/// oracle_eval of the top-k selection for each k; k is capped at the record count.
std::vector<double> budget_curve(const std::vector<EvalRecord>& records, const Task& task, const std::vector<int>& ks);

/// Powers of two up to n, with n appended when it is not one.
std::vector<int> default_budget_ks(int n);

/// Splits records by condition index, in ascending condition order.
std::vector<std::vector<EvalRecord>> split_by_condition(const Trajectory& traj);

struct SeedScores {
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  double top1 = 0.0;
  double top128 = 0.0;
  double p90 = 0.0;
};

/// Headline metrics for one run; conditional tasks average each metric over
/// conditions.
SeedScores score_trajectory(const Trajectory& traj, const Task& task, const std::string& method, std::uint64_t seed);

/// Budget curve averaged over conditions.
std::vector<double> condition_mean_curve(const Trajectory& traj, const Task& task, const std::vector<int>& ks);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(const std::vector<double>& v);

struct MethodSummary {
  std::string method;
  std::string task;
  int seeds = 0;
  MeanStd top1, top128, p90;
};

/// Groups per-seed rows by (method, task), preserving first-seen order.
std::vector<MethodSummary> summarize(const std::vector<SeedScores>& rows);

struct RankRow {
  std::string method;
  std::map<std::string, double> per_task;  // task -> rank (1 = best)
  double average = 0.0;
};

/// Ranks methods per task by mean top-1 (higher is better), tied means share
/// the mean of their ranks, then averages across tasks. Methods missing a
/// task are ranked only on the tasks they have.
std::vector<RankRow> rank_table(const std::vector<MethodSummary>& summaries);

}  // namespace gambo
