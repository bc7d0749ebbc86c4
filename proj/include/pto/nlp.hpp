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

#ifndef PTO__NLP_HPP_
#define PTO__NLP_HPP_

#include "pto/costs.hpp"
#include "pto/dynamics.hpp"

#include <span>
#include <vector>

namespace pto
{

/// Multiple-shooting transcription of one candidate's tracking problem:
/// N intervals of length Ts, a fixed initial state, per-stage desired states,
/// a terminal reference and an obstacle prediction grid.
struct ShootingProblem
{
  int N{50};
  double Ts{0.1};
  EvState x0;
  std::vector<std::vector<SvState>> sv_grid;  // [stage][obstacle], sizes (N+1) x M
  std::vector<EvState> desired;               // per-stage references, size N (stages 0..N-1)
  EvState terminal_ref;
  CostWeights weights;
  VehicleParams limits;
};

/// Decision variables: controls u_0..u_{N-1} and shooting states x_1..x_N
/// (x_0 is fixed and lives in the problem).
struct DecisionVariables
{
  std::vector<ControlInput> controls;
  std::vector<EvState> states;  // states[k] holds x_{k+1}
};

enum class SolveStatus { Converged, MaxIter, Degraded };

enum class SolveMode { Converge, RealTimeIteration };

struct Solution
{
  DecisionVariables vars;
  double objective{0.0};
  std::vector<double> defect_norms;  // per-stage infinity norms
  int iterations{0};
  double kkt_residual{0.0};
  SolveStatus status{SolveStatus::Converged};
  double solve_time_s{0.0};
};

/// f(x_k, u_k) (-) x_{k+1}: the shooting gap closed by the equality constraints.
StateTangent continuity_defect(
  const EvState & x_k, const ControlInput & u_k, const EvState & x_k1, double Ts);

/// Build the per-candidate problem: desired states carry the lane centerline and
/// target speed, the terminal reference anchors (py, theta, omega) on the target
/// lane, and the obstacle grid holds constant-velocity predictions at k*Ts.
/// Throws std::invalid_argument on non-finite inputs or non-positive N/Ts.
ShootingProblem transcribe(
  const EvState & ev, std::span<const SvState> svs, double lane_center_y, double target_speed,
  int N, double Ts, const CostWeights & weights, const VehicleParams & limits);

/// Cold start (zero controls, states from a rollout => zero defects) or a
/// shifted warm start when a previous solution is supplied.
DecisionVariables initialize(const ShootingProblem & problem, const Solution * previous);

/// Shift a previous solution one interval: controls drop the head and repeat the
/// tail; states are re-rolled from the problem's new x0 so defects start at zero.
DecisionVariables shift_warm_start(const ShootingProblem & problem, const Solution & previous);

/// One stage of the quadratic subproblem in deviation variables.
struct StageLinearization
{
  Mat5 A;        // d f / d x
  Mat52 B;       // d f / d u
  Vec5 defect;   // f(x_k, u_k) (-) x_{k+1}
  Mat5 Hx;       // state block of the stage Hessian
  Vec5 gx;       // state gradient
  Mat2 Hu;       // control block
  Vec2 gu;       // control gradient
  Vec2 du_lo;    // control box, relative to the current iterate
  Vec2 du_hi;
};

struct TerminalLinearization
{
  Mat5 H;
  Vec5 g;
};

/// Step direction from the backward/forward Riccati sweep, with the control box
/// enforced by clamping the feedforward (clamped rows drop their feedback).
struct QpStep
{
  std::vector<Vec2> du;
  std::vector<Vec5> dx;       // dx[k] is the deviation of x_{k+1}; dx of x0 is zero
  std::vector<Vec2> feedforward;                       // Riccati kff per stage
  std::vector<Eigen::Matrix<double, 2, 5>> feedback;   // Riccati gain K per stage
  double pred_linear{0.0};    // sum kff' Q_u  (expected first-order cost change, <= 0)
  double pred_quadratic{0.0};  // 0.5 * sum kff' Q_uu kff
  double max_costate{0.0};    // largest multiplier estimate, sizes the merit penalty
};

/// Solve the LQ subproblem. `levenberg` adds scale-free Marquardt damping to
/// the control Hessian blocks (Q_uu diagonal scaled by 1 + levenberg), which
/// shortens and stabilizes the step through ill-conditioned valleys. Throws
/// std::runtime_error when a control Hessian block is not positive definite
/// (internal error: inputs must be PSD + R > 0).
QpStep qp_subproblem(
  std::span<const StageLinearization> stages, const TerminalLinearization & terminal,
  double levenberg = 0.0);

/// Gauss-Newton SQP with an l1 merit line search. Converge mode iterates to a
/// KKT/step tolerance; real-time-iteration mode runs exactly 3 iterations.
Solution solve_sqp(const ShootingProblem & problem, DecisionVariables init, SolveMode mode);

/// Objective as transcribed (tracking + obstacle + control energy + terminal);
/// excludes the solver-internal soft state-box penalty.
double nlp_objective(const ShootingProblem & problem, const DecisionVariables & vars);

}  // namespace pto

#endif  // PTO__NLP_HPP_
