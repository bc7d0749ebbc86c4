// Copyright 2026 the pto-planner authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "pto/harness.hpp"

namespace fs = std::filesystem;

namespace
{

pto::PlannerMode mode_from_name(const std::string & name)
{
  if (name == "pto1") {
    return pto::PlannerMode::Pto1;
  }
  if (name == "pto6") {
    return pto::PlannerMode::Pto6;
  }
  return pto::PlannerMode::Pto3;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"parallel per-lane trajectory optimization in a closed-loop traffic simulation"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string planner_name;
  std::string out_dir;
  double duration = 0.0;
  bool converge = false;
  int threads = 0;

  CLI::App * run = app.add_subcommand("run", "run a scenario and export log artifacts");
  run->add_option("--scenario", scenario_path, "scenario file to load")->required();
  run->add_option("--planner", planner_name, "candidate set: pto1, pto3, or pto6")
    ->required()
    ->check(CLI::IsMember({"pto1", "pto3", "pto6"}));
  run->add_option("--duration", duration, "simulated seconds")
    ->required()
    ->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory for log.csv, summary.json, candidates.jsonl")
    ->required();
  run->add_flag("--converge", converge, "solve each candidate to convergence instead of one sweep per cycle");
  run->add_option("--threads", threads, "worker threads for candidates: 0 = hardware, 1 = serial");

  std::string log_dir;
  CLI::App * metrics = app.add_subcommand("metrics", "recompute the summary from exported artifacts");
  metrics->add_option("--log", log_dir, "directory holding log.csv and summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      pto::Scenario scenario = pto::load_scenario(scenario_path);
      scenario.duration = duration;
      const pto::SolveMode solve_mode =
        converge ? pto::SolveMode::Converge : pto::SolveMode::RealTimeIteration;
      const pto::RunLog log =
        pto::run_closed_loop(scenario, mode_from_name(planner_name), solve_mode, threads);
      const pto::Summary summary = pto::compute_metrics(log);
      pto::export_artifacts(log, summary, out_dir);
      std::fprintf(
        stderr, "ran %zu cycles, artifacts in %s\n", log.cycles.size(), out_dir.c_str());
      std::fputs(pto::summary_json_text(summary, log.v_g).c_str(), stdout);
      return 0;
    }

    const fs::path dir(log_dir);
    if (!fs::exists(dir / "log.csv") || !fs::exists(dir / "summary.json")) {
      std::fprintf(stderr, "error: %s does not hold log.csv and summary.json\n", log_dir.c_str());
      return 2;
    }
    double v_g = 0.0;
    const pto::Summary stored = pto::read_summary_json(dir / "summary.json", &v_g);
    pto::RunLog log = pto::read_log_csv(dir / "log.csv");
    log.v_g = v_g;
    pto::Summary summary = pto::compute_metrics(log);
    summary.T_solve = stored.T_solve;  // per-cycle timing is not persisted
    std::fputs(pto::summary_json_text(summary, v_g).c_str(), stdout);
    return 0;
  } catch (const pto::ScenarioError & e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception & e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
