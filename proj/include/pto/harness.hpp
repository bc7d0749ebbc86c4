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

#ifndef PTO_HARNESS_HPP
#define PTO_HARNESS_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pto/evaluator.hpp"
#include "pto/planner.hpp"
#include "pto/traffic.hpp"

namespace pto
{

/// Complete description of one closed-loop experiment: road geometry, the
/// ego's initial condition, the surrounding agents, loop timing, and every
/// tuning knob of the planner and the candidate evaluation.
struct Scenario
{
  LaneSet lanes;
  EvState ev0;
  ControlInput u0;  ///< control applied before the first planned cycle
  std::vector<SvAgent> agents;
  double duration{20.0};  ///< simulated time [s]
  double period{0.1};     ///< control cycle length, equals the shooting interval [s]
  int M{3};               ///< how many nearest vehicles the ego perceives
  int N{50};              ///< shooting intervals per plan
  CostWeights weights;
  EvalWeights eval;
  VehicleParams vehicle;

  void validate() const;  ///< throws ScenarioError on inconsistent values
};

/// Parse or validation failure of a scenario file; the message carries the
/// offending line or field.
class ScenarioError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Per-candidate outcome of one cycle, kept for the artifact logs.
struct CandidateRecord
{
  int id{-1};
  int lane{-1};
  double target_y{0.0};
  double target_speed{0.0};
  double objective{0.0};
  int iterations{0};
  SolveStatus status{SolveStatus::Converged};
  ScoredCandidate score;  ///< raw metrics, normalized metrics, weighted total
  bool selected{false};
};

/// Everything observed in one control cycle.  The ego state is the one the
/// planner saw at the cycle start; barrier holds the current proximity value
/// against each perceived vehicle (positive = outside the safety ellipse).
struct CycleRecord
{
  double time{0.0};
  EvState ev;
  ControlInput executed;
  int lane{-1};          ///< target lane after this cycle's decision
  int candidate_id{-1};  ///< winning candidate id, -1 when braking fallback ran
  bool fallback{false};
  std::vector<double> barrier;
  std::vector<CandidateRecord> candidates;
  double solve_time_s{0.0};
};

struct RunLog
{
  std::vector<CycleRecord> cycles;
  double v_g{15.0};   ///< cruise goal the run was scored against [m/s]
  double period{0.1};  ///< cycle length [s]
};

/// Aggregate run metrics.
struct Summary
{
  double e_mean{0.0};   ///< mean |v - v_g| over cycles [m/s]
  double e_max{0.0};    ///< max |v - v_g| over cycles [m/s]
  double S_min{0.0};    ///< smallest barrier value against any perceived vehicle
  double P_safe{0.0};   ///< % of cycles executing a candidate that passed the pre-check
  double T_solve{0.0};  ///< mean per-cycle planning wall time [s]
  double A_mean{0.0};   ///< mean |a| of the executed control [m/s^2]
  double L_long{0.0};   ///< longitudinal distance covered between first and last record [m]
  double P_LC{0.0};     ///< % of cycles with no target-lane reversal within 1 s
};

/// Parse a scenario text file (sections [lanes], [ev], [[sv]], [planner],
/// [weights]); unknown sections or keys and invariant violations throw
/// ScenarioError.
Scenario load_scenario(const std::filesystem::path & path);

/// Run the receding-horizon loop: perceive -> plan all candidates in parallel
/// -> safety pre-check -> select (or braking fallback) -> apply the first
/// control -> advance traffic. Warm starts are threaded per candidate slot.
/// Throws std::runtime_error if the ego state leaves the finite range.
RunLog run_closed_loop(
  const Scenario & scenario, PlannerMode mode,
  SolveMode solve_mode = SolveMode::RealTimeIteration, int thread_count = 0);

/// Aggregate metrics from a non-empty log (throws std::invalid_argument on an
/// empty one).
Summary compute_metrics(const RunLog & log);

/// Write log.csv (one row per cycle), summary.json, and candidates.jsonl
/// (one line per cycle and candidate) into dir, creating it if needed.
void export_artifacts(
  const RunLog & log, const Summary & summary, const std::filesystem::path & dir);

/// The summary as a JSON document (what export_artifacts writes); non-finite
/// values are encoded as the strings "inf", "-inf", "nan".
std::string summary_json_text(const Summary & summary, double v_g);

/// Rebuild the cycle records stored in log.csv (timing is not persisted, so
/// solve times read as zero; v_g must be set by the caller before metrics).
RunLog read_log_csv(const std::filesystem::path & path);

/// Parse summary.json back into a Summary; v_g_out (optional) receives the
/// stored cruise goal.
Summary read_summary_json(const std::filesystem::path & path, double * v_g_out = nullptr);

}  // namespace pto

#endif  // PTO_HARNESS_HPP
