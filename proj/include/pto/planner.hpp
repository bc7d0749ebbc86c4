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

#ifndef PTO__PLANNER_HPP_
#define PTO__PLANNER_HPP_

#include <vector>

#include "pto/costs.hpp"
#include "pto/dynamics.hpp"
#include "pto/nlp.hpp"

namespace pto
{

/// Ordered lane centerlines of a straight multi-lane road.
struct LaneSet
{
  std::vector<double> centers;  ///< lane centerline lateral positions [m]
  double width{4.0};            ///< lane width [m]

  /// Throws std::invalid_argument unless centers are strictly monotone and
  /// the width is positive.
  void validate() const;
};

/// Index of the lane whose centerline is closest to py; ties keep the lower index.
int nearest_lane(const LaneSet & lanes, double py);

/// How many candidate trajectories are optimized per cycle.
enum class PlannerMode { Pto1, Pto3, Pto6 };

/// One candidate slot: a target lane and cruise speed with a stable identity.
struct CandidateSpec
{
  int id{0};              ///< stable slot index; warm starts are routed by id
  int lane{0};            ///< index into LaneSet::centers
  double target_y{0.0};   ///< terminal lateral target, the lane centerline [m]
  double target_speed{0.0};  ///< desired cruise speed for this candidate [m/s]
};

/// An optimized candidate with its per-stage barrier values against each
/// perceived obstacle (rows 0..N, one column per obstacle).
struct CandidateTrajectory
{
  CandidateSpec spec;
  Solution solution;
  std::vector<std::vector<double>> barrier;
  bool feasible{true};
};

/// Planner-wide configuration shared by every candidate solve.
struct PlannerConfig
{
  PlannerMode mode{PlannerMode::Pto3};
  CostWeights weights;
  VehicleParams vehicle;
  int N{50};
  double Ts{0.1};
  double v_g{15.0};  ///< target cruise speed [m/s]
  /// center-lane target-speed ladder for the six-candidate mode, as fractions of v_g
  std::vector<double> speed_fractions{1.0, 0.8, 0.6, 0.4};
  /// 1 solves candidates sequentially; any other value fans out one task per
  /// candidate. Results are identical either way.
  int thread_count{0};
};

/// Candidate slots for the configured mode. Every slot is bound to a fixed
/// lane so that slot j keeps the same meaning on every cycle. Single-lane
/// mode proposes the center lane at v_g; three-lane mode one slot per lane at
/// v_g; the six-candidate mode ladders target speed on the center lane
/// (slots 0-3) and adds the two outermost lanes at v_g (slots 4-5).
std::vector<CandidateSpec> make_candidates(
  const LaneSet & lanes, const EvState & ev, const PlannerConfig & cfg);

/// Transcribe and solve every candidate, fanning the solves out across
/// threads, and attach barrier values against each perceived obstacle's
/// constant-velocity prediction. prev supplies per-slot warm starts (empty or
/// null entries start cold); outputs are returned in slot-id order.
std::vector<CandidateTrajectory> plan_parallel(
  const EvState & ev, const std::vector<SvState> & svs,
  const std::vector<const Solution *> & prev, const LaneSet & lanes, const PlannerConfig & cfg,
  SolveMode mode);

/// Flag any candidate whose next state (k = 1) has a negative barrier against
/// an obstacle predicted one period ahead; a barrier of exactly zero passes.
/// Only the feasible flags change.
std::vector<CandidateTrajectory> precheck_safety(
  std::vector<CandidateTrajectory> cands, const std::vector<SvState> & svs,
  const PlannerConfig & cfg);

/// Last-resort control when no candidate passes the safety pre-check:
/// maximum braking while steering the yaw rate toward zero within rate limits.
ControlInput fallback_brake(const EvState & ev, const VehicleParams & vp, double Ts);

}  // namespace pto

#endif  // PTO__PLANNER_HPP_
