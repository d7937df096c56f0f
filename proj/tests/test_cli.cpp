#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gambo/nets.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = GAMBO_CLI_PATH;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gambo_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Result {
  int code;
  std::string output;
};

Result cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = "cd '" + dir.string() + "' && '" + kCli.string() + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

const char* kTinyConfig = R"({
  "schema_version": 1,
  "task": "branin",
  "seeds": [0],
  "surrogate": {"hidden": [8, 8], "epochs": 3},
  "methods": [
    {"name": "gaga", "T": 3, "b": 2, "ascr": {"search_budget": 16}, "critic": {"max_steps": 100}},
    {"name": "anneal", "T": 3, "b": 2}
  ]
})";

}  // namespace

TEST_CASE("unknown method exits with a usage error naming it") {
  const fs::path dir = scratch_dir("unknown");
  put(dir / "cfg.json", R"({"schema_version": 1, "methods": ["turbo"]})");
  const Result r = cli("run --config cfg.json", dir);
  CHECK(r.code == 2);
  CHECK(r.output.find("turbo") != std::string::npos);
  CHECK(cli("frobnicate", dir).code == 2);
  CHECK(cli("run", dir).code == 2);
}

TEST_CASE("selfcheck detects a corrupted checkpoint") {
  const fs::path dir = scratch_dir("selfcheck");
  const gambo::Mlp net = gambo::Mlp::init({2, 4, 1}, 1);
  gambo::save_checkpoint(net, dir / "net.bin");
  std::string blob = slurp(dir / "net.bin");
  blob[blob.size() / 2] = static_cast<char>(blob[blob.size() / 2] ^ 0x10);
  put(dir / "bad.bin", blob);

  const Result good = cli("selfcheck --checkpoint net.bin", dir);
  CHECK_MESSAGE(good.code == 0, good.output);
  const Result bad = cli("selfcheck --checkpoint bad.bin", dir);
  CHECK(bad.code != 0);
  CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("run writes reproducible outputs and refuses to overwrite") {
  const fs::path dir = scratch_dir("run");
  put(dir / "tiny.json", kTinyConfig);
  const Result first = cli("run --config tiny.json", dir);
  REQUIRE_MESSAGE(first.code == 0, first.output);
  // default output location is <root>/<config stem>
  CHECK(fs::exists(dir / "runs" / "tiny" / "scores.csv"));

  const Result again = cli("run --config tiny.json", dir);
  CHECK(again.code == 1);
  const std::string before = slurp(dir / "runs/tiny/scores.csv");
  const std::string traj = slurp(dir / "runs/tiny/runs/gaga/seed0/trajectory.jsonl");
  fs::remove(dir / "runs/tiny/scores.csv");
  const Result forced = cli("run --config tiny.json --force --jobs 2", dir);
  REQUIRE_MESSAGE(forced.code == 0, forced.output);
  CHECK(slurp(dir / "runs/tiny/scores.csv") == before);
  CHECK(slurp(dir / "runs/tiny/runs/gaga/seed0/trajectory.jsonl") == traj);
}
