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

#include "pto/planner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <utility>

namespace pto
{

void LaneSet::validate() const
{
  if (centers.empty()) {
    throw std::invalid_argument("LaneSet: at least one lane required");
  }
  if (!(width > 0.0)) {
    throw std::invalid_argument("LaneSet: width must be positive");
  }
  for (size_t i = 1; i < centers.size(); ++i) {
    const double d = centers[i] - centers[i - 1];
    const double d0 = centers[1] - centers[0];
    if (d == 0.0 || (d > 0.0) != (d0 > 0.0)) {
      throw std::invalid_argument("LaneSet: centerlines must be strictly monotone");
    }
  }
}

int nearest_lane(const LaneSet & lanes, double py)
{
  int best = 0;
  double best_d = std::abs(py - lanes.centers[0]);
  for (size_t i = 1; i < lanes.centers.size(); ++i) {
    const double d = std::abs(py - lanes.centers[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<CandidateSpec> make_candidates(
  const LaneSet & lanes, const EvState & ev, const PlannerConfig & cfg)
{
  (void)ev;
  lanes.validate();
  // every slot is bound to a fixed lane so that slot j means the same
  // lane/speed combination on every cycle; warm starts and the consistency
  // metric both rely on that stable identity
  const int center = static_cast<int>(lanes.centers.size() / 2);

  std::vector<CandidateSpec> specs;
  switch (cfg.mode) {
    case PlannerMode::Pto1:
      specs.push_back({0, center, lanes.centers[static_cast<size_t>(center)], cfg.v_g});
      break;
    case PlannerMode::Pto3:
      for (size_t i = 0; i < lanes.centers.size(); ++i) {
        specs.push_back({static_cast<int>(i), static_cast<int>(i), lanes.centers[i], cfg.v_g});
      }
      break;
    case PlannerMode::Pto6: {
      int id = 0;
      for (const double f : cfg.speed_fractions) {
        specs.push_back({id++, center, lanes.centers[static_cast<size_t>(center)], f * cfg.v_g});
      }
      const int first = 0;
      const int last = static_cast<int>(lanes.centers.size()) - 1;
      specs.push_back({id++, first, lanes.centers.front(), cfg.v_g});
      specs.push_back({id++, last, lanes.centers.back(), cfg.v_g});
      break;
    }
  }
  return specs;
}

namespace
{

CandidateTrajectory solve_candidate(
  const CandidateSpec & spec, const EvState & ev, const std::vector<SvState> & svs,
  const Solution * prev, const PlannerConfig & cfg, SolveMode mode)
{
  CandidateTrajectory out;
  out.spec = spec;

  const ShootingProblem problem = transcribe(
    ev, svs, spec.target_y, spec.target_speed, cfg.N, cfg.Ts, cfg.weights, cfg.vehicle);
  out.solution = solve_sqp(problem, initialize(problem, prev), mode);

  out.barrier.resize(static_cast<size_t>(cfg.N) + 1);
  for (int k = 0; k <= cfg.N; ++k) {
    auto & row = out.barrier[static_cast<size_t>(k)];
    row.reserve(svs.size());
    const EvState & xk =
      (k == 0) ? ev : out.solution.vars.states[static_cast<size_t>(k - 1)];
    for (const SvState & sv : svs) {
      row.push_back(barrier_h(xk.px, xk.py, predict_sv(sv, k * cfg.Ts), cfg.weights));
    }
  }
  return out;
}

}  // namespace

std::vector<CandidateTrajectory> plan_parallel(
  const EvState & ev, const std::vector<SvState> & svs,
  const std::vector<const Solution *> & prev, const LaneSet & lanes, const PlannerConfig & cfg,
  SolveMode mode)
{
  const std::vector<CandidateSpec> specs = make_candidates(lanes, ev, cfg);
  const auto prev_for = [&](size_t j) -> const Solution * {
    return j < prev.size() ? prev[j] : nullptr;
  };

  std::vector<CandidateTrajectory> cands(specs.size());
  if (cfg.thread_count == 1) {
    for (size_t j = 0; j < specs.size(); ++j) {
      cands[j] = solve_candidate(specs[j], ev, svs, prev_for(j), cfg, mode);
    }
    return cands;
  }

  std::vector<std::future<CandidateTrajectory>> tasks;
  tasks.reserve(specs.size());
  for (size_t j = 0; j < specs.size(); ++j) {
    tasks.push_back(std::async(std::launch::async, [&, j] {
      return solve_candidate(specs[j], ev, svs, prev_for(j), cfg, mode);
    }));
  }
  for (size_t j = 0; j < specs.size(); ++j) {
    cands[j] = tasks[j].get();  // joined in slot order: output order is deterministic
  }
  return cands;
}

std::vector<CandidateTrajectory> precheck_safety(
  std::vector<CandidateTrajectory> cands, const std::vector<SvState> & svs,
  const PlannerConfig & cfg)
{
  for (CandidateTrajectory & cand : cands) {
    if (cand.solution.vars.states.empty()) continue;
    const EvState & x1 = cand.solution.vars.states[0];
    for (const SvState & sv : svs) {
      if (barrier_h(x1.px, x1.py, predict_sv(sv, cfg.Ts), cfg.weights) < 0.0) {
        cand.feasible = false;
        break;
      }
    }
  }
  return cands;
}

ControlInput fallback_brake(const EvState & ev, const VehicleParams & vp, double Ts)
{
  ControlInput u;
  u.a = vp.a_min;
  u.omega_dot = std::clamp(-ev.omega / Ts, vp.omega_dot_min, vp.omega_dot_max);
  return u;
}

}  // namespace pto
