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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pto/costs.hpp"
#include "pto/harness.hpp"

namespace pto
{

namespace
{

using njson = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

bool finite_state(const EvState & x)
{
  return std::isfinite(x.px) && std::isfinite(x.py) && std::isfinite(x.theta) &&
         std::isfinite(x.v) && std::isfinite(x.omega);
}

// shortest exact decimal form; reparsing gives the identical double
std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no literals for non-finite numbers, so those become strings
njson num_to_json(double v)
{
  if (std::isfinite(v)) {
    return v;
  }
  if (v > 0.0) {
    return "inf";
  }
  if (v < 0.0) {
    return "-inf";
  }
  return "nan";
}

double json_to_num(const nlohmann::json & j)
{
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") {
      return kInf;
    }
    if (s == "-inf") {
      return -kInf;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

const char * status_name(SolveStatus s)
{
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIter:
      return "max_iter";
    default:
      return "degraded";
  }
}

std::vector<std::string> split_csv(const std::string & line)
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(field);
  }
  return out;
}

const char kCsvHeader[] =
  "time,px,py,theta,v,omega,accel,omega_dot,lane,candidate_id,fallback,min_barrier";

}  // namespace

RunLog run_closed_loop(
  const Scenario & scenario, PlannerMode mode, SolveMode solve_mode, int thread_count)
{
  scenario.validate();

  PlannerConfig cfg;
  cfg.mode = mode;
  cfg.weights = scenario.weights;
  cfg.vehicle = scenario.vehicle;
  cfg.N = scenario.N;
  cfg.Ts = scenario.period;
  cfg.v_g = scenario.eval.v_g;
  cfg.thread_count = thread_count;

  RunLog log;
  log.v_g = scenario.eval.v_g;
  log.period = scenario.period;

  EvState ev = scenario.ev0;
  std::vector<SvAgent> agents = scenario.agents;
  int target_lane = nearest_lane(scenario.lanes, ev.py);
  double target_y = scenario.lanes.centers[static_cast<size_t>(target_lane)];

  const int n_cycles =
    std::max<long long>(1, std::llround(scenario.duration / scenario.period));
  std::vector<Solution> warm;
  std::vector<bool> has_warm;

  for (int k = 0; k < n_cycles; ++k) {
    const std::vector<SvState> svs = perceive_nearest(ev, agents, scenario.M);

    const auto t0 = std::chrono::steady_clock::now();
    const size_t n_slots = make_candidates(scenario.lanes, ev, cfg).size();
    if (warm.size() != n_slots) {
      warm.assign(n_slots, Solution{});
      has_warm.assign(n_slots, false);
    }
    std::vector<const Solution *> prev(n_slots, nullptr);
    for (size_t j = 0; j < n_slots; ++j) {
      if (has_warm[j]) {
        prev[j] = &warm[j];
      }
    }
    std::vector<CandidateTrajectory> cands =
      plan_parallel(ev, svs, prev, scenario.lanes, cfg, solve_mode);
    cands = precheck_safety(std::move(cands), svs, cfg);
    const SelectionResult sel =
      select(cands, scenario.eval, scenario.period, target_lane, target_y);
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;

    CycleRecord rec;
    rec.time = static_cast<double>(k) * scenario.period;
    rec.ev = ev;
    rec.solve_time_s = wall.count();
    rec.barrier.reserve(svs.size());
    for (const SvState & sv : svs) {
      rec.barrier.push_back(barrier_h(ev.px, ev.py, sv, scenario.weights));
    }

    ControlInput u;
    if (sel.found) {
      const CandidateTrajectory & win = cands[static_cast<size_t>(sel.candidate_index)];
      u = win.solution.vars.controls.front();
      target_lane = win.spec.lane;
      target_y = win.spec.target_y;
      rec.candidate_id = win.spec.id;
      rec.fallback = false;
    } else {
      u = fallback_brake(ev, scenario.vehicle, scenario.period);
      rec.candidate_id = -1;
      rec.fallback = true;  // the previous target lane is kept
    }
    rec.lane = target_lane;
    rec.executed = u;

    rec.candidates.reserve(cands.size());
    for (size_t j = 0; j < cands.size(); ++j) {
      CandidateRecord cr;
      cr.id = cands[j].spec.id;
      cr.lane = cands[j].spec.lane;
      cr.target_y = cands[j].spec.target_y;
      cr.target_speed = cands[j].spec.target_speed;
      cr.objective = cands[j].solution.objective;
      cr.iterations = cands[j].solution.iterations;
      cr.status = cands[j].solution.status;
      cr.score = sel.scores[j];
      cr.selected = sel.found && static_cast<int>(j) == sel.candidate_index;
      rec.candidates.push_back(cr);
    }

    // thread this cycle's solutions to the next cycle, slot by slot
    for (size_t j = 0; j < cands.size(); ++j) {
      warm[j] = std::move(cands[j].solution);
      has_warm[j] = true;
    }

    log.cycles.push_back(std::move(rec));

    const int ego_lane = nearest_lane(scenario.lanes, ev.py);
    const EvState snapshot = ev;
    ev = rk4_step(ev, u, scenario.period);
    agents = step_traffic(agents, scenario.period, &snapshot, ego_lane);
    if (!finite_state(ev)) {
      throw std::runtime_error(
        "simulation diverged: ego state became non-finite at t = " +
        std::to_string(rec.time + scenario.period) + " s");
    }
  }
  return log;
}

Summary compute_metrics(const RunLog & log)
{
  if (log.cycles.empty()) {
    throw std::invalid_argument("compute_metrics: the log has no cycles");
  }
  const size_t n = log.cycles.size();

  Summary m;
  m.S_min = kInf;
  double e_sum = 0.0;
  double a_sum = 0.0;
  double t_sum = 0.0;
  size_t safe = 0;
  for (const CycleRecord & c : log.cycles) {
    const double e = std::abs(c.ev.v - log.v_g);
    e_sum += e;
    m.e_max = std::max(m.e_max, e);
    for (const double h : c.barrier) {
      m.S_min = std::min(m.S_min, h);
    }
    if (!c.fallback) {
      ++safe;
    }
    t_sum += c.solve_time_s;
    a_sum += std::abs(c.executed.a);
  }
  m.e_mean = e_sum / static_cast<double>(n);
  m.P_safe = 100.0 * static_cast<double>(safe) / static_cast<double>(n);
  m.T_solve = t_sum / static_cast<double>(n);
  m.A_mean = a_sum / static_cast<double>(n);
  m.L_long = log.cycles.back().ev.px - log.cycles.front().ev.px;

  // a cycle is "clean" unless its target lane was already held, left, and
  // re-entered within the trailing one-second window (an A -> B -> A flap)
  const int wn = log.period > 0.0 ? static_cast<int>(std::llround(1.0 / log.period)) : 0;
  size_t clean = 0;
  for (size_t k = 0; k < n; ++k) {
    const int lane_k = log.cycles[k].lane;
    const size_t lo = k > static_cast<size_t>(wn) ? k - static_cast<size_t>(wn) : 0;
    bool reversal = false;
    for (size_t i = lo; i + 1 < k && !reversal; ++i) {
      if (log.cycles[i].lane != lane_k) {
        continue;
      }
      for (size_t j = i + 1; j < k; ++j) {
        if (log.cycles[j].lane != lane_k) {
          reversal = true;
          break;
        }
      }
    }
    if (!reversal) {
      ++clean;
    }
  }
  m.P_LC = 100.0 * static_cast<double>(clean) / static_cast<double>(n);
  return m;
}

std::string summary_json_text(const Summary & summary, double v_g)
{
  njson j;
  j["e_mean"] = num_to_json(summary.e_mean);
  j["e_max"] = num_to_json(summary.e_max);
  j["s_min"] = num_to_json(summary.S_min);
  j["p_safe"] = num_to_json(summary.P_safe);
  j["t_solve"] = num_to_json(summary.T_solve);
  j["a_mean"] = num_to_json(summary.A_mean);
  j["l_long"] = num_to_json(summary.L_long);
  j["p_lc"] = num_to_json(summary.P_LC);
  j["v_g"] = num_to_json(v_g);
  return j.dump(2) + "\n";
}

void export_artifacts(
  const RunLog & log, const Summary & summary, const std::filesystem::path & dir)
{
  std::filesystem::create_directories(dir);

  {
    std::ofstream csv(dir / "log.csv", std::ios::binary);
    if (!csv) {
      throw std::runtime_error("cannot write " + (dir / "log.csv").string());
    }
    csv << kCsvHeader << '\n';
    for (const CycleRecord & c : log.cycles) {
      double min_barrier = kInf;
      for (const double h : c.barrier) {
        min_barrier = std::min(min_barrier, h);
      }
      csv << fmt(c.time) << ',' << fmt(c.ev.px) << ',' << fmt(c.ev.py) << ','
          << fmt(c.ev.theta) << ',' << fmt(c.ev.v) << ',' << fmt(c.ev.omega) << ','
          << fmt(c.executed.a) << ',' << fmt(c.executed.omega_dot) << ',' << c.lane << ','
          << c.candidate_id << ',' << (c.fallback ? 1 : 0) << ',' << fmt(min_barrier) << '\n';
    }
  }

  {
    std::ofstream js(dir / "summary.json", std::ios::binary);
    if (!js) {
      throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    }
    js << summary_json_text(summary, log.v_g);
  }

  {
    std::ofstream jl(dir / "candidates.jsonl", std::ios::binary);
    if (!jl) {
      throw std::runtime_error("cannot write " + (dir / "candidates.jsonl").string());
    }
    for (size_t k = 0; k < log.cycles.size(); ++k) {
      const CycleRecord & c = log.cycles[k];
      for (const CandidateRecord & cr : c.candidates) {
        njson j;
        j["cycle"] = k;
        j["time"] = num_to_json(c.time);
        j["id"] = cr.id;
        j["lane"] = cr.lane;
        j["target_y"] = num_to_json(cr.target_y);
        j["target_speed"] = num_to_json(cr.target_speed);
        j["objective"] = num_to_json(cr.objective);
        j["iterations"] = cr.iterations;
        j["status"] = status_name(cr.status);
        j["feasible"] = cr.score.feasible;
        j["C_g"] = num_to_json(cr.score.C_g);
        j["C_l"] = num_to_json(cr.score.C_l);
        j["C_c"] = num_to_json(cr.score.C_c);
        j["C_m"] = num_to_json(cr.score.C_m);
        j["F_g"] = num_to_json(cr.score.F_g);
        j["F_l"] = num_to_json(cr.score.F_l);
        j["F_c"] = num_to_json(cr.score.F_c);
        j["F_m"] = num_to_json(cr.score.F_m);
        j["s"] = num_to_json(cr.score.s);
        j["selected"] = cr.selected;
        jl << j.dump() << '\n';
      }
    }
  }
}

RunLog read_log_csv(const std::filesystem::path & path)
{
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != split_csv(kCsvHeader)) {
    throw std::runtime_error("unexpected header in " + path.string());
  }

  RunLog log;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 12) {
      throw std::runtime_error(
        path.string() + " row " + std::to_string(row) + ": expected 12 fields");
    }
    CycleRecord c;
    c.time = std::stod(f[0]);
    c.ev.px = std::stod(f[1]);
    c.ev.py = std::stod(f[2]);
    c.ev.theta = std::stod(f[3]);
    c.ev.v = std::stod(f[4]);
    c.ev.omega = std::stod(f[5]);
    c.executed.a = std::stod(f[6]);
    c.executed.omega_dot = std::stod(f[7]);
    c.lane = std::stoi(f[8]);
    c.candidate_id = std::stoi(f[9]);
    c.fallback = f[10] == "1";
    c.barrier = {std::stod(f[11])};
    log.cycles.push_back(c);
  }
  if (log.cycles.size() >= 2) {
    log.period = log.cycles[1].time - log.cycles[0].time;
  }
  return log;
}

Summary read_summary_json(const std::filesystem::path & path, double * v_g_out)
{
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception & e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  Summary s;
  s.e_mean = json_to_num(j.at("e_mean"));
  s.e_max = json_to_num(j.at("e_max"));
  s.S_min = json_to_num(j.at("s_min"));
  s.P_safe = json_to_num(j.at("p_safe"));
  s.T_solve = json_to_num(j.at("t_solve"));
  s.A_mean = json_to_num(j.at("a_mean"));
  s.L_long = json_to_num(j.at("l_long"));
  s.P_LC = json_to_num(j.at("p_lc"));
  if (v_g_out != nullptr) {
    *v_g_out = json_to_num(j.at("v_g"));
  }
  return s;
}

}  // namespace pto
