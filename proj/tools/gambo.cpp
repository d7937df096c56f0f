// Experiment command line: run, reproduce-branin, selfcheck.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>

#include "CLI11.hpp"

#include "gambo/experiment.hpp"
#include "gambo/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace gambo;

namespace {

constexpr int kOk = 0, kFailure = 1, kUsage = 2;

fs::path output_root() {
  const char* env = std::getenv("GAMBO_OUTPUT_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

bool nonempty_dir(const fs::path& p) { return fs::exists(p) && !fs::is_empty(p); }

std::optional<fs::path> surrogate_cache() {
  const char* env = std::getenv("GAMBO_SURROGATE_CACHE");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return fs::path(env);
}

ExperimentOptions options(int jobs) {
  ExperimentOptions opts;
  opts.jobs = jobs;
  opts.surrogate_cache = surrogate_cache();
  const auto start = std::chrono::steady_clock::now();
  opts.log = [start](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "[" << static_cast<long>(s) << "s] " << msg << "\n";
  };
  return opts;
}

int cmd_run(const fs::path& config_path, bool force, int jobs) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  const fs::path out = cfg.output_dir.empty() ? output_root() / config_path.stem() : cfg.output_dir;
  if (nonempty_dir(out) && !force) {
    std::cerr << "error: " << out.string() << " already exists; pass --force to overwrite\n";
    return kFailure;
  }
  if (force && fs::exists(out)) fs::remove_all(out);
  const ExperimentResult result = run_experiment(cfg, options(jobs));
  write_experiment_outputs(cfg, result, out);
  for (const auto& s : summarize(result.scores()))
    std::cout << s.method << "  top1 " << format_double(s.top1.mean) << " +/- " << format_double(s.top1.std)
              << "  top128 " << format_double(s.top128.mean) << " +/- " << format_double(s.top128.std) << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

int cmd_reproduce_branin(const std::optional<fs::path>& out_opt, int jobs, int n_seeds) {
  ExperimentConfig cfg = branin_reproduction_config();
  if (n_seeds > 0) cfg.seeds.resize(static_cast<std::size_t>(std::min<int>(n_seeds, 10)));
  const fs::path out = out_opt ? *out_opt : output_root() / "branin_reproduction";
  const ExperimentResult result = run_experiment(cfg, options(jobs));
  write_experiment_outputs(cfg, result, out);

  std::cout << branin_comparison_table(result) << "\n";
  for (const auto& c : branin_criteria(result))
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";

  // Adaptivity and reduction evidence.
  int distinct_max = 0;
  bool identical = true;
  for (const auto& r : result.runs) {
    if (r.method == "gabo") {
      std::vector<double> alphas;
      for (const auto& a : r.trajectory.alpha_history) alphas.push_back(a.alpha);
      std::sort(alphas.begin(), alphas.end());
      distinct_max = std::max<int>(distinct_max, static_cast<int>(std::unique(alphas.begin(), alphas.end()) - alphas.begin()));
    }
    const std::string parent = r.method == "gabo_alpha_0" ? "bo_qei" : r.method == "gaga_alpha_0" ? "grad_ascent" : "";
    if (parent.empty()) continue;
    for (const auto& p : result.runs)
      if (p.method == parent && p.seed == r.seed && (p.scores.top1 != r.scores.top1 || p.scores.top128 != r.scores.top128))
        identical = false;
  }
  std::cout << "info: most distinct alpha values in one GABO run: " << distinct_max << "\n";
  std::cout << "info: constant alpha 0 rows " << (identical ? "match" : "differ from") << " their unpenalized parents\n";
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

int cmd_selfcheck(const std::optional<fs::path>& checkpoint) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& c : run_selfcheck(checkpoint)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    ok = ok && c.passed;
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (ok ? "selfcheck passed" : "selfcheck FAILED") << " in " << format_double(std::round(s * 10) / 10)
            << " s\n";
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative adversarial model-based optimization experiments"};
  app.require_subcommand(1);

  fs::path config;
  bool force = false;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run every (method, seed) pair of a JSON config");
  run->add_option("--config", config, "Experiment config")->required();
  run->add_flag("--force", force, "Overwrite an existing output directory");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::optional<fs::path> out;
  int seeds = 0;
  auto* repro = app.add_subcommand("reproduce-branin", "Branin comparison suite against the published numbers");
  repro->add_option("--out", out, "Output directory");
  repro->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  repro->add_option("--seeds", seeds, "Use only the first N seeds (default 10)")->check(CLI::Range(1, 10));

  std::optional<fs::path> checkpoint;
  auto* self = app.add_subcommand("selfcheck", "Fast oracle checks");
  self->add_option("--checkpoint", checkpoint, "Also verify that this checkpoint loads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(config, force, jobs);
    if (*repro) return cmd_reproduce_branin(out, jobs, seeds);
    return cmd_selfcheck(checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
