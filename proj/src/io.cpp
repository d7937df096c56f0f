#include "gambo/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace gambo {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw SchemaError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + "." + key + ": wrong type");
  }
}

const char* to_string(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::relative: return "relative";
    case ThresholdMode::absolute: return "absolute";
    case ThresholdMode::disabled: return "disabled";
  }
  return "?";
}

}  // namespace

json to_json(const RunConfig& cfg) {
  json alpha;
  if (cfg.alpha_mode == AlphaMode::constant) {
    alpha = cfg.alpha_value;
  } else {
    alpha = to_string(cfg.alpha_mode);
  }
  return {
      {"optimizer", to_string(cfg.optimizer)},
      {"alpha", alpha},
      {"T", cfg.T},
      {"b", cfg.b},
      {"n_generator", cfg.n_generator == 0 ? json(nullptr) : json(cfg.n_generator)},
      {"eta", cfg.eta},
      {"box", cfg.box},
      {"train_critic", cfg.train_critic},
      {"ascr",
       {{"alpha_steps", cfg.ascr.alpha_steps},
        {"search_budget", cfg.ascr.search_budget},
        {"threshold_mode", to_string(cfg.ascr.threshold_mode)},
        {"threshold", cfg.ascr.threshold}}},
      {"critic",
       {{"learning_rate", cfg.critic.learning_rate},
        {"clip_bound", cfg.critic.clip_bound},
        {"patience", cfg.critic.patience},
        {"max_steps", cfg.critic.max_steps},
        {"minibatch", cfg.critic.minibatch}}},
      {"acquire", {{"candidate_pool", cfg.acquire.candidate_pool}, {"mc_samples", cfg.acquire.mc_samples}}},
      {"gp",
       {{"restarts", cfg.gp.restarts},
        {"max_evals_per_restart", cfg.gp.max_evals_per_restart},
        {"max_fit_points", cfg.gp.max_fit_points}}},
      {"anneal", {{"step", cfg.anneal_step}, {"floor", cfg.anneal_floor}}},
  };
}

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
  const std::string where = "method";
  check_keys(j,
             {"name", "optimizer", "alpha", "T", "b", "n_generator", "eta", "box", "train_critic", "ascr", "critic",
              "acquire", "gp", "anneal"},
             where);
  if (j.contains("optimizer")) {
    try {
      const OptimizerKind k = parse_optimizer(j.at("optimizer").get<std::string>());
      if (k != cfg.optimizer) {
        const RunConfig d = RunConfig::defaults(k);
        cfg.optimizer = k;
        cfg.T = d.T;
        cfg.b = d.b;
        cfg.alpha_mode = d.alpha_mode;
      }
    } catch (const json::exception&) {
      throw SchemaError("method.optimizer: expected a string");
    }
  }
  if (j.contains("alpha")) {
    const json& a = j.at("alpha");
    if (a.is_number()) {
      cfg.alpha_mode = AlphaMode::constant;
      cfg.alpha_value = a.get<double>();
    } else if (a == "adaptive") {
      cfg.alpha_mode = AlphaMode::adaptive;
    } else if (a == "off") {
      cfg.alpha_mode = AlphaMode::off;
    } else {
      throw SchemaError("method.alpha: expected \"adaptive\", \"off\" or a number in [0, 1]");
    }
  }
  read(j, "T", cfg.T, where);
  read(j, "b", cfg.b, where);
  if (j.contains("n_generator")) {
    const json& n = j.at("n_generator");
    if (n.is_null() || n == "inf") {
      cfg.n_generator = 0;
    } else if (n.is_number_integer() && n.get<int>() >= 1) {
      cfg.n_generator = n.get<int>();
    } else {
      throw SchemaError("method.n_generator: expected a positive integer, null or \"inf\"");
    }
  }
  read(j, "eta", cfg.eta, where);
  read(j, "box", cfg.box, where);
  read(j, "train_critic", cfg.train_critic, where);
  if (j.contains("ascr")) {
    const json& a = j.at("ascr");
    check_keys(a, {"alpha_steps", "search_budget", "threshold_mode", "threshold"}, "method.ascr");
    read(a, "alpha_steps", cfg.ascr.alpha_steps, "method.ascr");
    read(a, "search_budget", cfg.ascr.search_budget, "method.ascr");
    read(a, "threshold", cfg.ascr.threshold, "method.ascr");
    if (a.contains("threshold_mode")) {
      const json& m = a.at("threshold_mode");
      if (m == "relative") {
        cfg.ascr.threshold_mode = ThresholdMode::relative;
      } else if (m == "absolute") {
        cfg.ascr.threshold_mode = ThresholdMode::absolute;
      } else if (m == "disabled") {
        cfg.ascr.threshold_mode = ThresholdMode::disabled;
      } else {
        throw SchemaError("method.ascr.threshold_mode: expected relative, absolute or disabled");
      }
    }
  }
  if (j.contains("critic")) {
    const json& c = j.at("critic");
    check_keys(c, {"learning_rate", "clip_bound", "patience", "max_steps", "minibatch"}, "method.critic");
    read(c, "learning_rate", cfg.critic.learning_rate, "method.critic");
    read(c, "clip_bound", cfg.critic.clip_bound, "method.critic");
    read(c, "patience", cfg.critic.patience, "method.critic");
    read(c, "max_steps", cfg.critic.max_steps, "method.critic");
    read(c, "minibatch", cfg.critic.minibatch, "method.critic");
  }
  if (j.contains("acquire")) {
    const json& a = j.at("acquire");
    check_keys(a, {"candidate_pool", "mc_samples"}, "method.acquire");
    read(a, "candidate_pool", cfg.acquire.candidate_pool, "method.acquire");
    read(a, "mc_samples", cfg.acquire.mc_samples, "method.acquire");
  }
  if (j.contains("gp")) {
    const json& g = j.at("gp");
    check_keys(g, {"restarts", "max_evals_per_restart", "max_fit_points"}, "method.gp");
    read(g, "restarts", cfg.gp.restarts, "method.gp");
    read(g, "max_evals_per_restart", cfg.gp.max_evals_per_restart, "method.gp");
    read(g, "max_fit_points", cfg.gp.max_fit_points, "method.gp");
  }
  if (j.contains("anneal")) {
    const json& a = j.at("anneal");
    check_keys(a, {"step", "floor"}, "method.anneal");
    read(a, "step", cfg.anneal_step, "method.anneal");
    read(a, "floor", cfg.anneal_floor, "method.anneal");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  return cfg;
}

json to_json(const SurrogateTrainConfig& cfg) {
  return {{"hidden", cfg.hidden},
          {"learning_rate", cfg.learning_rate},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size}};
}

SurrogateTrainConfig surrogate_config_from_json(const json& j, SurrogateTrainConfig cfg) {
  check_keys(j, {"hidden", "learning_rate", "epochs", "batch_size"}, "surrogate");
  read(j, "hidden", cfg.hidden, "surrogate");
  read(j, "learning_rate", cfg.learning_rate, "surrogate");
  read(j, "epochs", cfg.epochs, "surrogate");
  read(j, "batch_size", cfg.batch_size, "surrogate");
  for (int h : cfg.hidden)
    if (h < 1) throw SchemaError("surrogate.hidden: widths must be positive");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    throw SchemaError("surrogate: epochs >= 0, batch_size >= 1, learning_rate > 0 required");
  return cfg;
}

json to_json(const EvalRecord& r) {
  return {{"t", r.iteration}, {"i", r.index}, {"condition", r.condition},
          {"z", std::vector<double>(r.z.data(), r.z.data() + r.z.size())}, {"y", r.y}, {"alpha", r.alpha}};
}

EvalRecord record_from_json(const json& j) {
  try {
    EvalRecord r;
    r.iteration = j.at("t").get<int>();
    r.index = j.at("i").get<int>();
    r.condition = j.at("condition").get<int>();
    const auto z = j.at("z").get<std::vector<double>>();
    r.z = Eigen::Map<const VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    r.y = j.at("y").get<double>();
    r.alpha = j.at("alpha").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("trajectory record: ") + e.what());
  }
}

void write_trajectory_jsonl(const Trajectory& traj, const fs::path& path) {
  std::ostringstream out;
  for (const auto& r : traj.records) out << to_json(r).dump() << '\n';
  write_text(path, out.str());
}

std::vector<EvalRecord> read_trajectory_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

json trajectory_summary(const Trajectory& traj, const RunMeta& meta, const SeedScores& scores, double dcov) {
  json events = json::array();
  for (const auto& e : traj.critic_events)
    events.push_back({{"t", e.iteration}, {"condition", e.condition}, {"steps", e.steps}, {"best_estimate", e.best_estimate}});
  json alphas = json::array();
  for (const auto& a : traj.alpha_history) alphas.push_back({{"t", a.iteration}, {"alpha", a.alpha}, {"fallback", a.fallback}});
  return {
      {"schema", "gambo-trajectory"},
      {"version", kTrajectorySchemaVersion},
      {"method", meta.method},
      {"task", meta.task},
      {"seed", meta.seed},
      {"config", to_json(meta.config)},
      {"records", traj.records.size()},
      {"evaluations", traj.evaluations},
      {"probe_queries", traj.probe_queries},
      {"critic_updates", traj.critic_updates},
      {"critic_events", events},
      {"alpha_history", alphas},
      {"scores", {{"top1", scores.top1}, {"top128", scores.top128}, {"p90", scores.p90}, {"dcov", dcov}}},
  };
}

void validate_summary(const json& j) {
  if (!j.is_object()) throw SchemaError("summary: expected an object");
  if (j.value("schema", "") != "gambo-trajectory") throw SchemaError("summary: wrong schema name");
  if (j.value("version", 0) != kTrajectorySchemaVersion) throw SchemaError("summary: unsupported version");
  for (const char* key : {"method", "task", "seed", "config", "records", "evaluations", "probe_queries",
                          "critic_updates", "critic_events", "alpha_history", "scores"})
    if (!j.contains(key)) throw SchemaError(std::string("summary: missing '") + key + "'");
  for (const char* key : {"top1", "top128", "p90", "dcov"})
    if (!j.at("scores").contains(key)) throw SchemaError(std::string("summary.scores: missing '") + key + "'");
  for (const auto& a : j.at("alpha_history")) {
    const double alpha = a.at("alpha").get<double>();
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw SchemaError("summary: alpha outside [0, 1]");
  }
}

void write_scores_csv(const std::vector<SeedScores>& rows, const fs::path& path) {
  std::ostringstream out;
  out << "method,task,seed,top1,top128,p90\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.task << ',' << r.seed << ',' << format_double(r.top1) << ','
        << format_double(r.top128) << ',' << format_double(r.p90) << '\n';
  write_text(path, out.str());
}

std::vector<SeedScores> read_scores_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "method,task,seed,top1,top128,p90") throw SchemaError("scores.csv: unexpected header");
  std::vector<SeedScores> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw SchemaError("scores.csv: expected 6 columns");
    rows.push_back({f[0], f[1], std::stoull(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return rows;
}

void write_ranks_csv(const std::vector<RankRow>& rows, const fs::path& path) {
  std::vector<std::string> tasks;
  for (const auto& r : rows)
    for (const auto& [task, rank] : r.per_task)
      if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) tasks.push_back(task);
  std::ostringstream out;
  out << "method";
  for (const auto& t : tasks) out << ",rank_" << t;
  out << ",average_rank\n";
  for (const auto& r : rows) {
    out << r.method;
    for (const auto& t : tasks) {
      const auto it = r.per_task.find(t);
      out << ',' << (it == r.per_task.end() ? std::string() : format_double(it->second));
    }
    out << ',' << format_double(r.average) << '\n';
  }
  write_text(path, out.str());
}

void write_curve_csv(const std::vector<int>& ks, const std::vector<double>& scores, const fs::path& path) {
  if (ks.size() != scores.size()) throw std::invalid_argument("write_curve_csv: length mismatch");
  std::ostringstream out;
  out << "k,score\n";
  for (std::size_t i = 0; i < ks.size(); ++i) out << ks[i] << ',' << format_double(scores[i]) << '\n';
  write_text(path, out.str());
}

void write_dcov_csv(const std::vector<DcovRow>& rows, const fs::path& path) {
  std::ostringstream out;
  out << "method,task,seed,dcov\n";
  for (const auto& r : rows) out << r.method << ',' << r.task << ',' << r.seed << ',' << format_double(r.dcov) << '\n';
  write_text(path, out.str());
}

double trajectory_dcov(const Trajectory& traj, const Task& task) {
  const auto groups = split_by_condition(traj);
  double sum = 0.0;
  for (const auto& g : groups) {
    VectorXd y(static_cast<Eigen::Index>(g.size())), o(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      y(static_cast<Eigen::Index>(i)) = g[i].y;
      o(static_cast<Eigen::Index>(i)) = task.oracle(task.decode(g[i].z));
    }
    sum += g.size() >= 2 ? distance_covariance(y, o) : 0.0;
  }
  return groups.empty() ? 0.0 : sum / static_cast<double>(groups.size());
}

void write_dataset_csv(const OfflineDataset& ds, const fs::path& path) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < ds.raw_designs.cols(); ++j) out << 'x' << j << ',';
  out << "score\n";
  for (Eigen::Index i = 0; i < ds.raw_designs.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.raw_designs.cols(); ++j) out << format_double(ds.raw_designs(i, j)) << ',';
    out << format_double(ds.scores(i)) << '\n';
  }
  write_text(path, out.str());
}

json dataset_stats_json(const OfflineDataset& ds) {
  const auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"size", ds.size()},
          {"design_mean", vec(ds.design_stats.mean)},
          {"design_scale", vec(ds.design_stats.scale)},
          {"score_mean", ds.score_mean},
          {"score_scale", ds.score_scale},
          {"best_score", ds.best_score()}};
}

}  // namespace gambo
