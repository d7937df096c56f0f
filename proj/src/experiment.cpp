#include "gambo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "gambo/rng.hpp"

namespace gambo {

namespace fs = std::filesystem;

std::optional<MethodSpec> method_from_name(const std::string& name) {
  for (auto k : {OptimizerKind::gabo, OptimizerKind::gaga, OptimizerKind::bo_qei, OptimizerKind::grad_ascent,
                 OptimizerKind::anneal})
    if (name == to_string(k)) return MethodSpec{name, RunConfig::defaults(k)};
  for (auto k : {OptimizerKind::gabo, OptimizerKind::gaga}) {
    const std::string base = to_string(k);
    if (name == base + "_ngen_inf") {
      MethodSpec m{name, RunConfig::defaults(k)};
      m.config.n_generator = 0;
      return m;
    }
    const std::string prefix = base + "_alpha_";
    if (name.rfind(prefix, 0) == 0) {
      const std::string value = name.substr(prefix.size());
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        return std::nullopt;
      }
      if (used != value.size() || !(v >= 0.0 && v <= 1.0)) return std::nullopt;
      MethodSpec m{name, RunConfig::defaults(k)};
      m.config.alpha_mode = AlphaMode::constant;
      m.config.alpha_value = v;
      return m;
    }
  }
  return std::nullopt;
}

ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::vector<std::string> allowed = {"schema_version", "task", "seeds", "methods", "surrogate",
                                                   "output_dir"};
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown key '" + key + "'");
  if (!j.contains("schema_version") || j.at("schema_version") != kConfigSchemaVersion)
    throw ConfigError("config: schema_version must be " + std::to_string(kConfigSchemaVersion));

  ExperimentConfig cfg;
  try {
    if (j.contains("task")) cfg.task = j.at("task").get<std::string>();
    const auto names = task_names();
    if (std::find(names.begin(), names.end(), cfg.task) == names.end())
      throw ConfigError("config: unknown task '" + cfg.task + "'");
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("surrogate")) cfg.surrogate = surrogate_config_from_json(j.at("surrogate"));
    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty())
      throw ConfigError("config: methods must be a non-empty array");
    for (const json& m : j.at("methods")) {
      if (m.is_string()) {
        auto spec = method_from_name(m.get<std::string>());
        if (!spec) throw ConfigError("config: unknown method '" + m.get<std::string>() + "'");
        cfg.methods.push_back(*spec);
        continue;
      }
      if (!m.is_object() || !m.contains("name")) throw ConfigError("config: method entries need a name");
      const std::string name = m.at("name").get<std::string>();
      std::optional<MethodSpec> base = method_from_name(name);
      if (!base && !m.contains("optimizer"))
        throw ConfigError("config: unknown method '" + name + "' (give an optimizer to define it)");
      if (!base) base = MethodSpec{name, RunConfig::defaults(parse_optimizer(m.at("optimizer").get<std::string>()))};
      base->name = name;
      base->config = run_config_from_json(m, base->config);
      cfg.methods.push_back(*base);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (std::size_t a = 0; a < cfg.methods.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.methods.size(); ++b)
      if (cfg.methods[a].name == cfg.methods[b].name)
        throw ConfigError("config: duplicate method name '" + cfg.methods[a].name + "'");
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (const auto& m : cfg.methods) {
    json e = to_json(m.config);
    e["name"] = m.name;
    methods.push_back(e);
  }
  json j = {{"schema_version", kConfigSchemaVersion},
            {"task", cfg.task},
            {"seeds", cfg.seeds},
            {"methods", methods},
            {"surrogate", to_json(cfg.surrogate)}};
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir.string();
  return j;
}

std::vector<SeedScores> ExperimentResult::scores() const {
  std::vector<SeedScores> out;
  for (const auto& r : runs) out.push_back(r.scores);
  return out;
}

Mlp obtain_surrogate(const Task& task, const SurrogateTrainConfig& cfg, std::uint64_t seed,
                     const std::optional<fs::path>& cache) {
  fs::path file;
  if (cache) {
    const json key = {{"task", task.name()}, {"seed", seed}, {"surrogate", to_json(cfg)}};
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(key.dump())));
    file = *cache / ("surrogate_" + task.name() + "_" + std::to_string(seed) + "_" + hex + ".bin");
    if (fs::exists(file)) return load_checkpoint(file);
  }
  Mlp net = train_task_surrogate(task, cfg, seed).net;
  if (cache) {
    fs::create_directories(*cache);
    save_checkpoint(net, file);
  }
  return net;
}

namespace {

// Runs f(i) for i in [0, n) on up to `jobs` threads; the first exception is
// rethrown after every worker stops.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min<int>(jobs, static_cast<int>(n)); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts) {
  const auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::unique_ptr<Task>> tasks(n_seeds);
  std::vector<Mlp> surrogates(n_seeds);
  std::mutex log_mu;
  parallel_for(n_seeds, opts.jobs, [&](std::size_t s) {
    tasks[s] = make_task(cfg.task, cfg.seeds[s]);
    surrogates[s] = obtain_surrogate(*tasks[s], cfg.surrogate, cfg.seeds[s], opts.surrogate_cache);
    std::lock_guard<std::mutex> lock(log_mu);
    log("surrogate ready: " + cfg.task + " seed " + std::to_string(cfg.seeds[s]));
  });

  ExperimentResult result;
  result.task = cfg.task;
  for (const auto& t : tasks) result.dataset_best.push_back(t->dataset().best_score());
  result.runs.resize(cfg.methods.size() * n_seeds);
  parallel_for(result.runs.size(), opts.jobs, [&](std::size_t i) {
    const MethodSpec& m = cfg.methods[i / n_seeds];
    const std::size_t s = i % n_seeds;
    const Task& task = *tasks[s];
    RunResult r;
    r.method = m.name;
    r.seed = cfg.seeds[s];
    r.config = m.config;
    r.trajectory = run_task(task, surrogates[s], m.config, r.seed);
    r.scores = score_trajectory(r.trajectory, task, m.name, r.seed);
    r.dcov = trajectory_dcov(r.trajectory, task);
    r.ks = default_budget_ks(m.config.total_budget());
    r.curve = condition_mean_curve(r.trajectory, task, r.ks);
    result.runs[i] = std::move(r);
    std::lock_guard<std::mutex> lock(log_mu);
    const auto& sc = result.runs[i].scores;
    log(m.name + " seed " + std::to_string(cfg.seeds[s]) + ": top1 " + format_double(sc.top1) + " top128 " +
        format_double(sc.top128));
  });
  return result;
}

std::vector<double> mean_curve(const ExperimentResult& result, const std::string& method, std::vector<int>* ks) {
  std::vector<double> sum;
  int count = 0;
  for (const auto& r : result.runs) {
    if (r.method != method) continue;
    if (sum.empty()) {
      sum.assign(r.curve.size(), 0.0);
      if (ks != nullptr) *ks = r.ks;
    }
    for (std::size_t i = 0; i < r.curve.size(); ++i) sum[i] += r.curve[i];
    ++count;
  }
  for (double& v : sum) v /= static_cast<double>(count);
  return sum;
}

void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result, const fs::path& out) {
  fs::create_directories(out);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    const auto task = make_task(cfg.task, cfg.seeds[s]);
    const std::string stem = "dataset_" + cfg.task + "_seed" + std::to_string(cfg.seeds[s]);
    write_dataset_csv(task->dataset(), out / "datasets" / (stem + ".csv"));
    write_text(out / "datasets" / (stem + ".stats.json"), dataset_stats_json(task->dataset()).dump(2) + "\n");
  }

  std::vector<DcovRow> dcov;
  for (const auto& r : result.runs) {
    const fs::path dir = out / "runs" / r.method / ("seed" + std::to_string(r.seed));
    write_trajectory_jsonl(r.trajectory, dir / "trajectory.jsonl");
    const json summary = trajectory_summary(r.trajectory, {r.method, cfg.task, r.seed, r.config}, r.scores, r.dcov);
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    dcov.push_back({r.method, cfg.task, r.seed, r.dcov});
  }
  const auto scores = result.scores();
  write_scores_csv(scores, out / "scores.csv");
  write_dcov_csv(dcov, out / "dcov.csv");

  const auto summaries = summarize(scores);
  std::vector<RankRow> ranks;
  if (summaries.size() >= 2) {
    ranks = rank_table(summaries);
  } else {
    for (const auto& s : summaries) ranks.push_back({s.method, {{s.task, 1.0}}, 1.0});
  }
  write_ranks_csv(ranks, out / "ranks.csv");

  for (const auto& m : cfg.methods) {
    std::vector<int> ks;
    const auto curve = mean_curve(result, m.name, &ks);
    write_curve_csv(ks, curve, out / ("curve_" + cfg.task + "_" + m.name + ".csv"));
  }
}

ExperimentConfig branin_reproduction_config() {
  ExperimentConfig cfg;
  cfg.task = "branin";
  cfg.surrogate.hidden = {2048, 2048};
  for (const char* name : {"gabo", "bo_qei", "gaga", "grad_ascent", "anneal", "gabo_alpha_0", "gabo_alpha_0.2",
                           "gabo_alpha_0.5", "gabo_alpha_0.8", "gabo_alpha_1", "gabo_ngen_inf", "gaga_alpha_0",
                           "gaga_ngen_inf"})
    cfg.methods.push_back(*method_from_name(name));
  return cfg;
}

}  // namespace gambo

namespace gambo {

namespace {

struct MethodStats {
  bool present = false;
  MeanStd top1, top128;
  std::vector<double> top1_values;
};

MethodStats stats_for(const ExperimentResult& result, const std::string& method) {
  MethodStats s;
  std::vector<double> t128;
  for (const auto& r : result.runs)
    if (r.method == method) {
      s.top1_values.push_back(r.scores.top1);
      t128.push_back(r.scores.top128);
    }
  if (s.top1_values.empty()) return s;
  s.present = true;
  s.top1 = mean_std(s.top1_values);
  s.top128 = mean_std(t128);
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string cell(double mean, double sd) {
  return num(mean) + " +/- " + num(sd);
}

}  // namespace

const std::vector<PublishedScores>& published_branin_scores() {
  static const std::vector<PublishedScores> rows = {
      {"gabo", -2.6, 1.1, -0.5, 0.1},
      {"bo_qei", -11.0, 7.8, -0.4, 0.0},
      {"gaga", -2.9, 2.2, -1.0, 0.2},
      {"grad_ascent", -245.1, 81.3, -115.3, 20.8},
      {"anneal", -9.6, 1.5, -7.4, 2.8},
      {"gabo_alpha_0", -11.0, 7.8, -0.4, 0.0},
      {"gabo_alpha_0.2", -9.8, 3.9, -0.4, 0.1},
      {"gabo_alpha_0.5", -7.9, 6.6, -0.4, 0.0},
      {"gabo_alpha_0.8", -5.2, 3.1, -0.4, 0.0},
      {"gabo_alpha_1", -99.5, 61.2, -2.2, 1.4},
      {"gabo_ngen_inf", -3.5, 2.5, -0.5, 0.1},
      {"gaga_alpha_0", -245.1, 81.3, -115.3, 20.8},
      {"gaga_ngen_inf", -14.6, 0.8, -13.3, 0.2},
  };
  return rows;
}

bool monotone_curve(const std::vector<double>& curve) {
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i] < curve[i - 1]) return false;
  return true;
}

std::vector<CheckResult> branin_criteria(const ExperimentResult& result) {
  std::vector<CheckResult> out;
  const MethodStats gabo = stats_for(result, "gabo"), bo = stats_for(result, "bo_qei");
  const MethodStats gaga = stats_for(result, "gaga"), grad = stats_for(result, "grad_ascent");
  const auto missing = [&](const std::string& name) { out.push_back({name, false, "required runs missing"}); };

  const std::string c1 = "1 GABO top-1 mean in [-8, -1] and above BO-qEI";
  if (gabo.present && bo.present) {
    const bool ok = gabo.top1.mean >= -8.0 && gabo.top1.mean <= -1.0 && gabo.top1.mean > bo.top1.mean;
    out.push_back({c1, ok, "GABO " + cell(gabo.top1.mean, gabo.top1.std) + ", BO " + cell(bo.top1.mean, bo.top1.std)});
  } else {
    missing(c1);
  }

  const std::string c2 = "2 GABO top-128 mean in [-1.5, -0.3]";
  if (gabo.present)
    out.push_back({c2, gabo.top128.mean >= -1.5 && gabo.top128.mean <= -0.3,
                   "GABO " + cell(gabo.top128.mean, gabo.top128.std)});
  else
    missing(c2);

  const std::string c3 = "3 GAGA top-1 mean >= -10 and gradient ascent <= -50";
  if (gaga.present && grad.present)
    out.push_back({c3, gaga.top1.mean >= -10.0 && grad.top1.mean <= -50.0,
                   "GAGA " + cell(gaga.top1.mean, gaga.top1.std) + ", grad " + cell(grad.top1.mean, grad.top1.std)});
  else
    missing(c3);

  const std::string c4 = "4 adaptive above alpha=1 and within a pooled std of the best constant alpha";
  {
    std::vector<std::pair<std::string, MethodStats>> constants;
    for (const char* name : {"gabo_alpha_0", "gabo_alpha_0.2", "gabo_alpha_0.5", "gabo_alpha_0.8", "gabo_alpha_1"}) {
      MethodStats s = stats_for(result, name);
      if (!s.present && std::string(name) == "gabo_alpha_0") s = bo;
      if (s.present) constants.emplace_back(name, s);
    }
    const MethodStats one = stats_for(result, "gabo_alpha_1");
    if (gabo.present && one.present && constants.size() == 5) {
      const auto best = std::max_element(constants.begin(), constants.end(), [](const auto& a, const auto& b) {
        return a.second.top1.mean < b.second.top1.mean;
      });
      const double pooled =
          std::sqrt(0.5 * (gabo.top1.std * gabo.top1.std + best->second.top1.std * best->second.top1.std));
      const bool ok = gabo.top1.mean > one.top1.mean && gabo.top1.mean >= best->second.top1.mean - pooled;
      out.push_back({c4, ok,
                     "adaptive " + num(gabo.top1.mean) + ", alpha=1 " + num(one.top1.mean) + ", best constant " +
                         best->first + " " + num(best->second.top1.mean) + ", pooled std " + num(pooled)});
    } else {
      missing(c4);
    }
  }

  const std::string c5 = "5 GABO top-1 and top-128 means above the offline dataset best";
  if (gabo.present && !result.dataset_best.empty()) {
    const double best = mean_std(result.dataset_best).mean;
    out.push_back({c5, gabo.top1.mean > best && gabo.top128.mean > best,
                   "dataset best " + num(best) + ", top-1 " + num(gabo.top1.mean) + ", top-128 " +
                       num(gabo.top128.mean)});
  } else {
    missing(c5);
  }

  const std::string c7 = "7 budget curves monotone, GABO k=1 in the criterion-1 band";
  {
    bool monotone = true;
    std::string bad;
    for (const auto& r : result.runs)
      if (!monotone_curve(r.curve)) {
        monotone = false;
        bad = r.method + " seed " + std::to_string(r.seed);
      }
    std::vector<int> ks;
    const auto curve = gabo.present ? mean_curve(result, "gabo", &ks) : std::vector<double>{};
    const bool band = !curve.empty() && ks.front() == 1 && curve.front() >= -8.0 && curve.front() <= -1.0;
    out.push_back({c7, monotone && band,
                   (monotone ? std::string("all monotone") : "non-monotone: " + bad) +
                       (curve.empty() ? ", no GABO curve" : ", GABO k=1 " + num(curve.front()))});
  }
  return out;
}

std::string branin_comparison_table(const ExperimentResult& result) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %-20s %-20s %-20s %-20s\n", "method", "top1", "published top1", "top128",
                "published top128");
  os << line;
  for (const auto& p : published_branin_scores()) {
    const MethodStats s = stats_for(result, p.method);
    if (!s.present) continue;
    std::snprintf(line, sizeof(line), "%-16s %-20s %-20s %-20s %-20s\n", p.method.c_str(),
                  cell(s.top1.mean, s.top1.std).c_str(), cell(p.top1, p.top1_std).c_str(),
                  cell(s.top128.mean, s.top128.std).c_str(), cell(p.top128, p.top128_std).c_str());
    os << line;
  }
  if (!result.dataset_best.empty()) {
    std::snprintf(line, sizeof(line), "%-16s %-20s %-20s\n", "dataset best",
                  cell(mean_std(result.dataset_best).mean, mean_std(result.dataset_best).std).c_str(),
                  cell(kPublishedBraninDatasetBest, 0.0).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace gambo
