#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "gambo/experiment.hpp"
#include "gambo/io.hpp"

using namespace gambo;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gambo_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

json tiny_config() {
  return json::parse(R"({
    "schema_version": 1,
    "task": "branin",
    "seeds": [0, 1],
    "surrogate": {"hidden": [16, 16], "epochs": 5},
    "methods": [
      {"name": "gabo", "T": 3, "b": 4, "acquire": {"candidate_pool": 64}, "gp": {"restarts": 1},
       "ascr": {"search_budget": 32}, "critic": {"max_steps": 100}},
      {"name": "gaga", "T": 4, "b": 3, "ascr": {"search_budget": 32}, "critic": {"max_steps": 100}},
      {"name": "anneal", "T": 5, "b": 2}
    ]
  })");
}

}  // namespace

TEST_CASE("run config json round trip") {
  for (auto k : {OptimizerKind::gabo, OptimizerKind::bo_qei, OptimizerKind::gaga, OptimizerKind::grad_ascent,
                 OptimizerKind::anneal}) {
    RunConfig cfg = RunConfig::defaults(k);
    if (k == OptimizerKind::gaga) {
      cfg.alpha_mode = AlphaMode::constant;
      cfg.alpha_value = 0.2;
      cfg.n_generator = 0;
    }
    const json j = to_json(cfg);
    CHECK(to_json(run_config_from_json(j, RunConfig::defaults(k))) == j);
  }
  const RunConfig base = RunConfig::defaults(OptimizerKind::gabo);
  CHECK(run_config_from_json(json{{"n_generator", "inf"}}, base).n_generator == 0);
  CHECK(run_config_from_json(json{{"n_generator", nullptr}}, base).n_generator == 0);
  CHECK(run_config_from_json(json{{"alpha", "off"}}, base).alpha_mode == AlphaMode::off);
  // switching optimizer picks up its budget shape
  const RunConfig g = run_config_from_json(json{{"optimizer", "gaga"}}, base);
  CHECK(g.T == 128);
  CHECK(g.b == 16);
  CHECK_THROWS_AS(run_config_from_json(json{{"Tee", 3}}, base), SchemaError);
  CHECK_THROWS_AS(run_config_from_json(json{{"alpha", "sometimes"}}, base), SchemaError);
  CHECK_THROWS_AS(run_config_from_json(json{{"alpha", 2.0}}, base), SchemaError);
  CHECK_THROWS_AS(run_config_from_json(json{{"T", "many"}}, base), SchemaError);
  CHECK_THROWS_AS(run_config_from_json(json{{"n_generator", 0}}, base), SchemaError);
  CHECK_THROWS_AS(run_config_from_json(json{{"ascr", {{"threshold_mode", "loose"}}}}, base), SchemaError);
  CHECK_THROWS_AS(surrogate_config_from_json(json{{"hidden", {0}}}), SchemaError);
}

TEST_CASE("method names") {
  const auto a = method_from_name("gabo_alpha_0.5");
  REQUIRE(a);
  CHECK(a->config.optimizer == OptimizerKind::gabo);
  CHECK(a->config.alpha_mode == AlphaMode::constant);
  CHECK(a->config.alpha_value == 0.5);
  const auto n = method_from_name("gaga_ngen_inf");
  REQUIRE(n);
  CHECK(n->config.n_generator == 0);
  CHECK(n->config.alpha_mode == AlphaMode::adaptive);
  CHECK(method_from_name("grad_ascent"));
  CHECK_FALSE(method_from_name("turbo"));
  CHECK_FALSE(method_from_name("gabo_alpha_1.5"));
  CHECK_FALSE(method_from_name("anneal_alpha_0.5"));
}

TEST_CASE("experiment config parsing") {
  const ExperimentConfig cfg = parse_experiment_config(tiny_config());
  CHECK(cfg.methods.size() == 3);
  CHECK(cfg.methods[0].config.T == 3);
  CHECK(cfg.surrogate.hidden == std::vector<int>{16, 16});
  CHECK(to_json(parse_experiment_config(to_json(cfg))) == to_json(cfg));

  auto broken = [](auto edit) {
    json j = tiny_config();
    edit(j);
    return j;
  };
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["task"] = "logp"; })), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["methods"].push_back("turbo"); })), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["methods"].push_back("gaga"); })), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["schema_version"] = 2; })), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["extra"] = 1; })), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["seeds"] = json::array(); })), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(broken([](json& j) { j["methods"][0]["b"] = -1; })), ConfigError);
  try {
    parse_experiment_config(broken([](json& j) { j["methods"].push_back("turbo"); }));
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("turbo") != std::string::npos);
  }

  // a custom name needs an optimizer
  json custom = tiny_config();
  custom["methods"] = json::array({json{{"name", "mine"}, {"optimizer", "anneal"}, {"T", 2}}});
  CHECK(parse_experiment_config(custom).methods[0].config.optimizer == OptimizerKind::anneal);
  custom["methods"][0].erase("optimizer");
  CHECK_THROWS_AS(parse_experiment_config(custom), ConfigError);
}

TEST_CASE("trajectory files round trip exactly") {
  const fs::path dir = scratch_dir("traj");
  Trajectory traj;
  for (int i = 0; i < 5; ++i) {
    EvalRecord r;
    r.iteration = 1 + i / 2;
    r.index = i % 2;
    r.condition = i % 3;
    r.z = VectorXd::Constant(3, 0.1 * i + 1.0 / 3.0);
    r.y = -std::exp(0.7 * i) / 7.0;
    r.alpha = 0.005 * i;
    traj.records.push_back(r);
  }
  write_trajectory_jsonl(traj, dir / "t.jsonl");
  const auto back = read_trajectory_jsonl(dir / "t.jsonl");
  REQUIRE(back.size() == traj.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].iteration == traj.records[i].iteration);
    CHECK(back[i].condition == traj.records[i].condition);
    CHECK(back[i].z == traj.records[i].z);
    CHECK(back[i].y == traj.records[i].y);
    CHECK(back[i].alpha == traj.records[i].alpha);
  }
  write_text(dir / "bad.jsonl", "{\"t\": 1}\n");
  CHECK_THROWS_AS(read_trajectory_jsonl(dir / "bad.jsonl"), SchemaError);
  write_text(dir / "garbage.jsonl", "not json\n");
  CHECK_THROWS_AS(read_trajectory_jsonl(dir / "garbage.jsonl"), SchemaError);

  const std::vector<SeedScores> rows = {{"gabo", "branin", 3, -1.0 / 3.0, -0.25, -1e-17}};
  write_scores_csv(rows, dir / "scores.csv");
  const auto rb = read_scores_csv(dir / "scores.csv");
  REQUIRE(rb.size() == 1);
  CHECK(rb[0].top1 == rows[0].top1);
  CHECK(rb[0].p90 == rows[0].p90);
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("summary validation") {
  Trajectory traj;
  traj.alpha_history.push_back({1, 0.4, false});
  const json s = trajectory_summary(traj, {"gabo", "branin", 0, RunConfig::defaults(OptimizerKind::gabo)}, {}, 0.0);
  CHECK_NOTHROW(validate_summary(s));
  json missing = s;
  missing.erase("probe_queries");
  CHECK_THROWS_AS(validate_summary(missing), SchemaError);
  json version = s;
  version["version"] = 7;
  CHECK_THROWS_AS(validate_summary(version), SchemaError);
  json alpha = s;
  alpha["alpha_history"][0]["alpha"] = 1.5;
  CHECK_THROWS_AS(validate_summary(alpha), SchemaError);
}

TEST_CASE("experiment outputs") {
  const ExperimentConfig cfg = parse_experiment_config(tiny_config());
  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.runs.size() == 6);
  const fs::path out = scratch_dir("outputs");
  write_experiment_outputs(cfg, result, out);

  for (const char* f : {"config.json", "scores.csv", "ranks.csv", "dcov.csv", "curve_branin_gabo.csv",
                        "curve_branin_gaga.csv", "curve_branin_anneal.csv"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  CHECK(to_json(load_experiment_config(out / "config.json")) == to_json(cfg));

  const auto scores = read_scores_csv(out / "scores.csv");
  CHECK(scores.size() == 6);
  CHECK(slurp(out / "ranks.csv").rfind("method,rank_branin,average_rank\n", 0) == 0);
  CHECK(slurp(out / "dcov.csv").rfind("method,task,seed,dcov\n", 0) == 0);
  CHECK(slurp(out / "curve_branin_gabo.csv").rfind("k,score\n1,", 0) == 0);
  CHECK(fs::exists(out / "datasets" / "dataset_branin_seed1.csv"));

  for (const auto& r : result.runs) {
    const fs::path dir = out / "runs" / r.method / ("seed" + std::to_string(r.seed));
    const json summary = json::parse(slurp(dir / "summary.json"));
    CHECK_NOTHROW(validate_summary(summary));
    CHECK(summary["records"] == r.trajectory.records.size());
    CHECK(read_trajectory_jsonl(dir / "trajectory.jsonl").size() == r.trajectory.records.size());
    CHECK(r.scores.top128 >= r.scores.top1);
    CHECK(r.dcov >= 0.0);
  }

  // identical reruns, also with parallel jobs
  ExperimentOptions opts;
  opts.jobs = 3;
  const ExperimentResult again = run_experiment(cfg, opts);
  const fs::path out2 = scratch_dir("outputs2");
  write_experiment_outputs(cfg, again, out2);
  CHECK(slurp(out / "scores.csv") == slurp(out2 / "scores.csv"));
  CHECK(slurp(out / "runs/gabo/seed1/trajectory.jsonl") == slurp(out2 / "runs/gabo/seed1/trajectory.jsonl"));
}

TEST_CASE("surrogate cache") {
  const fs::path cache = scratch_dir("cache");
  const BraninTask task(0);
  SurrogateTrainConfig sc;
  sc.hidden = {8};
  sc.epochs = 3;
  const Mlp a = obtain_surrogate(task, sc, 0, cache);
  CHECK_FALSE(fs::is_empty(cache));
  const Mlp b = obtain_surrogate(task, sc, 0, cache);
  const Mlp c = obtain_surrogate(task, sc, 0, std::nullopt);
  const MatrixXd Z = task.dataset().designs.topRows(10);
  CHECK(a.forward_batch(Z) == b.forward_batch(Z));
  CHECK(a.forward_batch(Z) == c.forward_batch(Z));
}
