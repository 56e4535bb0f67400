#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "chesslab/game_model.hpp"

using namespace chesslab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run(const std::string& args) {
  fs::path out = fs::temp_directory_path() / "chesslab_cli_stdout.txt";
  std::string cmd = std::string(CHESSLAB_CLI_PATH) + " " + args + " > " + out.string() +
                    " 2>/dev/null";
  int rc = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  result.stdout_text = ss.str();
  return result;
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "chesslab_cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string engine_flags() {
  return std::string(" --engine ") + REF_ENGINE_PATH +
         " --weak-depth 1 --strong-depth 2 --samples 2 --horizon 40 --threads 2";
}

}  // namespace

TEST_CASE("cli pipeline: gen-data, calibrate, fit-uplift, simulate, optimize") {
  fs::path dir = work_dir();
  fs::path d0 = dir / "d0.jsonl";
  fs::path di = dir / "di.jsonl";

  auto gen = run("gen-data --kind d0 --games 12 --seed 5 --out " + d0.string() + engine_flags());
  REQUIRE(gen.exit_code == 0);
  Dataset ds = read_jsonl(d0);
  CHECK(ds.records.size() == 12);
  CHECK(ds.kind == DatasetKind::kD0);

  auto gen_di =
      run("gen-data --kind di --games 12 --seed 6 --out " + di.string() + engine_flags());
  REQUIRE(gen_di.exit_code == 0);
  Dataset dsi = read_jsonl(di);
  CHECK(dsi.kind == DatasetKind::kDI);
  for (const auto& r : dsi.records) CHECK(r.interventions.size() == 1);

  fs::path bank = dir / "bank.jsonl";
  fs::path d0cal = dir / "d0_cal.jsonl";
  auto cal = run("calibrate --d0 " + d0.string() + " --out " + bank.string() + " --apply " +
                 d0cal.string() + " --bucket-width 10 --min-samples 4 --horizon 40");
  REQUIRE(cal.exit_code == 0);
  Dataset calibrated = read_jsonl(d0cal);
  for (const auto& r : calibrated.records)
    for (const auto& p : r.points) CHECK(p.pw.has_value());

  fs::path dical = dir / "di_cal.jsonl";
  auto cal2 = run("calibrate --d0 " + d0.string() + " --out " + (dir / "bank2.jsonl").string() +
                  " --bucket-width 10 --min-samples 4 --horizon 40 --apply-in " + di.string() +
                  " --apply-out " + dical.string());
  REQUIRE(cal2.exit_code == 0);

  fs::path uplift = dir / "uplift.jsonl";
  fs::path banks = dir / "banks.jsonl";
  auto fit = run("fit-uplift --d0 " + d0cal.string() + " --di " + dical.string() + " --out " +
                 uplift.string() + " --banks-out " + banks.string() +
                 " --bin-width 20 --horizon 40");
  REQUIRE(fit.exit_code == 0);

  auto sim1 = run("simulate --banks " + banks.string() + " --uplift " + uplift.string() +
                  " --t 0.2 --runs 100000 --seed 7");
  REQUIRE(sim1.exit_code == 0);
  auto sim2 = run("simulate --banks " + banks.string() + " --uplift " + uplift.string() +
                  " --t 0.2 --runs 100000 --seed 7");
  // Determinism: identical stdout for identical seeds.
  CHECK(sim1.stdout_text == sim2.stdout_text);
  json sim_json = json::parse(sim1.stdout_text);
  CHECK(sim_json.at("avg_score").get<double>() >= 0.0);
  CHECK(sim_json.at("avg_score").get<double>() <= 1.0);

  fs::path best = dir / "best.json";
  fs::path trials = dir / "trials.jsonl";
  auto opt = run("optimize --backend simfree --k 1 --iters 4 --init 3 --banks " +
                 banks.string() + " --uplift " + uplift.string() +
                 " --runs-per-eval 20000 --opt-seed 3 --trials-log " + trials.string() +
                 " --out " + best.string());
  REQUIRE(opt.exit_code == 0);
  CHECK(fs::exists(best));
  CHECK(fs::exists(trials));
  {
    std::ifstream tin(trials);
    int lines = 0;
    std::string line;
    while (std::getline(tin, line)) ++lines;
    CHECK(lines == 7);  // init 3 + iterations 4
  }
  json best_json = json::parse(std::ifstream(best));
  CHECK(best_json.at("best_params").size() == 1);
}

TEST_CASE("cli play applies thresholds and respects the budget") {
  fs::path dir = work_dir();
  fs::path out = dir / "play.jsonl";
  auto play = run("play --policy threshold --t 0.05,0.10 --games 4 --seed 11 --out " +
                  out.string() + engine_flags());
  REQUIRE(play.exit_code == 0);
  Dataset ds = read_jsonl(out);
  CHECK(ds.kind == DatasetKind::kPlay);
  REQUIRE(ds.records.size() == 4);
  for (const auto& r : ds.records) CHECK(r.interventions.size() <= 2);
  json summary = json::parse(play.stdout_text);
  CHECK(summary.at("avg_score").get<double>() >= 0.0);
}

TEST_CASE("cli ingest-pgn imports a corpus") {
  fs::path dir = work_dir();
  fs::path pgn = dir / "mini.pgn";
  {
    std::ofstream out(pgn);
    out << "[Result \"1-0\"]\n[WhiteElo \"2000\"]\n[BlackElo \"1990\"]\n\n"
        << "1. e4 e5 2. Nf3 Nc6 3. Bb5 a6 1-0\n";
  }
  fs::path out = dir / "human.jsonl";
  auto ingest = run("ingest-pgn --pgn " + pgn.string() + " --out " + out.string());
  REQUIRE(ingest.exit_code == 0);
  Dataset ds = read_jsonl(out);
  REQUIRE(ds.records.size() == 1);
  CHECK(ds.records[0].moves.size() == 6);
}

TEST_CASE("cli exit codes") {
  // 2: config errors (bad flags / unknown subcommand).
  CHECK(run("no-such-subcommand").exit_code == 2);
  CHECK(run("gen-data --kind bogus --out /tmp/x.jsonl --engine /bin/true").exit_code == 2);
  // 3: engine failures.
  fs::path out = work_dir() / "never.jsonl";
  CHECK(run("play --policy threshold --t 0.1 --games 1 --engine /nonexistent/engine --out " +
            out.string())
            .exit_code == 3);
  // 4: data errors.
  CHECK(run("calibrate --d0 /nonexistent/d0.jsonl --out /tmp/bank.jsonl").exit_code == 4);
  // report on an empty run dir: error listing what was expected.
  fs::path empty = work_dir() / "empty_run";
  fs::create_directories(empty);
  CHECK(run("report --run-dir " + empty.string()).exit_code == 4);
}

TEST_CASE("cli report renders artifacts from a run directory") {
  fs::path dir = work_dir();
  fs::path run_dir = dir / "run";
  fs::create_directories(run_dir);
  // bank.jsonl from the earlier pipeline test directory.
  REQUIRE(fs::exists(dir / "bank.jsonl"));
  fs::copy_file(dir / "bank.jsonl", run_dir / "bank.jsonl",
                fs::copy_options::overwrite_existing);
  fs::copy_file(dir / "d0.jsonl", run_dir / "budget-0.jsonl",
                fs::copy_options::overwrite_existing);
  auto rep = run("report --run-dir " + run_dir.string());
  REQUIRE(rep.exit_code == 0);
  CHECK(fs::exists(run_dir / "calibration_curves.csv"));
  CHECK(fs::exists(run_dir / "calibration_curves.svg"));
  CHECK(fs::exists(run_dir / "score_vs_budget.csv"));
  // Provenance comment on the first line.
  std::ifstream in(run_dir / "calibration_curves.csv");
  std::string first;
  std::getline(in, first);
  CHECK(first.find("config_hash=") != std::string::npos);
  CHECK(first.find("schema_version=") != std::string::npos);
}
