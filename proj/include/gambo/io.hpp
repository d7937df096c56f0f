#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gambo/eval.hpp"
#include "gambo/optimizers.hpp"
#include "gambo/tasks.hpp"

namespace gambo {

using json = nlohmann::json;

inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- RunConfig <-> JSON ----------------------------------------------------

json to_json(const RunConfig& cfg);
/// Applies the keys present in j on top of base. Unknown keys throw SchemaError.
RunConfig run_config_from_json(const json& j, RunConfig base);

json to_json(const SurrogateTrainConfig& cfg);
SurrogateTrainConfig surrogate_config_from_json(const json& j, SurrogateTrainConfig base = {});

// ---- Trajectories ----------------------------------------------------------

json to_json(const EvalRecord& r);
EvalRecord record_from_json(const json& j);

/// One JSON object per line, one line per record.
void write_trajectory_jsonl(const Trajectory& traj, const std::filesystem::path& path);
std::vector<EvalRecord> read_trajectory_jsonl(const std::filesystem::path& path);

struct RunMeta {
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  RunConfig config;
};

/// Metadata, counters, critic events, alpha history and headline scores.
json trajectory_summary(const Trajectory& traj, const RunMeta& meta, const SeedScores& scores, double dcov);
/// Throws SchemaError when a summary lacks a required field or has the wrong version.
void validate_summary(const json& j);

// ---- Tables ----------------------------------------------------------------

void write_scores_csv(const std::vector<SeedScores>& rows, const std::filesystem::path& path);
std::vector<SeedScores> read_scores_csv(const std::filesystem::path& path);
void write_ranks_csv(const std::vector<RankRow>& rows, const std::filesystem::path& path);
void write_curve_csv(const std::vector<int>& ks, const std::vector<double>& scores, const std::filesystem::path& path);

struct DcovRow {
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  double dcov = 0.0;
};
void write_dcov_csv(const std::vector<DcovRow>& rows, const std::filesystem::path& path);

/// Distance covariance between stored y and oracle scores of every record,
/// averaged over conditions.
double trajectory_dcov(const Trajectory& traj, const Task& task);

// ---- Datasets --------------------------------------------------------------

/// Raw designs followed by the score, one row per offline point.
void write_dataset_csv(const OfflineDataset& ds, const std::filesystem::path& path);
json dataset_stats_json(const OfflineDataset& ds);

std::string format_double(double v);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gambo
