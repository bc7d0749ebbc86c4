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

#include "pto/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace pto
{

namespace
{

constexpr double kStateBoxWeight = 1e6;   // soft penalty on state box violations
constexpr double kMeritMuMin = 1e4;       // floor for the l1 defect weight of the merit
constexpr double kArmijoC1 = 1e-4;
constexpr int kMaxBacktracks = 12;
constexpr int kMaxIterations = 50;
constexpr double kKktTol = 1e-4;
constexpr double kStepTol = 1e-6;
constexpr double kDefectTol = 1e-9;       // continuity residual required to report success
constexpr int kMaxEscalations = 5;        // damping rounds per iteration (0, 1e-4, 1e-2, 1, 1e2)
constexpr double kHeadingTrust = 0.5;     // max heading move per accepted step [rad]

// state box as per-component bounds; px is unbounded
void state_bounds(const VehicleParams & p, Vec5 & lo, Vec5 & hi)
{
  constexpr double inf = std::numeric_limits<double>::infinity();
  lo << -inf, p.py_min, p.theta_min, p.v_min, p.omega_min;
  hi << inf, p.py_max, p.theta_max, p.v_max, p.omega_max;
}

double box_penalty(const EvState & x, const Vec5 & lo, const Vec5 & hi)
{
  const Vec5 xv = x.vec();
  double pen = 0.0;
  for (int j = 0; j < 5; ++j) {
    const double over = std::max(0.0, xv(j) - hi(j));
    const double under = std::max(0.0, lo(j) - xv(j));
    pen += kStateBoxWeight * (over * over + under * under);
  }
  return pen;
}

void box_penalty_derivatives(
  const EvState & x, const Vec5 & lo, const Vec5 & hi, Vec5 & grad, Mat5 & hess)
{
  const Vec5 xv = x.vec();
  for (int j = 0; j < 5; ++j) {
    if (xv(j) > hi(j)) {
      grad(j) += 2.0 * kStateBoxWeight * (xv(j) - hi(j));
      hess(j, j) += 2.0 * kStateBoxWeight;
    } else if (xv(j) < lo(j)) {
      grad(j) -= 2.0 * kStateBoxWeight * (lo(j) - xv(j));
      hess(j, j) += 2.0 * kStateBoxWeight;
    }
  }
}

struct MeritParts
{
  double objective{0.0};    // transcribed objective
  double box{0.0};          // soft state-box penalty
  double defect_l1{0.0};    // sum of |defect| over stages and components

  double merit(double mu) const { return objective + box + mu * defect_l1; }
};

const EvState & state_at(const ShootingProblem & p, const DecisionVariables & v, int k)
{
  return k == 0 ? p.x0 : v.states[static_cast<size_t>(k - 1)];
}

MeritParts evaluate_merit(const ShootingProblem & p, const DecisionVariables & v)
{
  MeritParts m;
  Vec5 lo, hi;
  state_bounds(p.limits, lo, hi);
  for (int k = 0; k < p.N; ++k) {
    m.objective += running_cost(
      state_at(p, v, k), v.controls[static_cast<size_t>(k)], p.desired[static_cast<size_t>(k)],
      p.sv_grid[static_cast<size_t>(k)], k * p.Ts, p.weights);
    m.defect_l1 += continuity_defect(
                     state_at(p, v, k), v.controls[static_cast<size_t>(k)],
                     state_at(p, v, k + 1), p.Ts)
                     .cwiseAbs()
                     .sum();
  }
  m.objective += terminal_cost(state_at(p, v, p.N), p.terminal_ref, p.weights);
  for (int k = 1; k <= p.N; ++k) {
    m.box += box_penalty(state_at(p, v, k), lo, hi);
  }
  return m;
}

}  // namespace

StateTangent continuity_defect(
  const EvState & x_k, const ControlInput & u_k, const EvState & x_k1, double Ts)
{
  return state_diff(rk4_step(x_k, u_k, Ts), x_k1);
}

ShootingProblem transcribe(
  const EvState & ev, std::span<const SvState> svs, double lane_center_y, double target_speed,
  int N, double Ts, const CostWeights & weights, const VehicleParams & limits)
{
  if (N <= 0 || !(Ts > 0.0)) {
    throw std::invalid_argument("transcribe: N and Ts must be positive");
  }
  if (!ev.vec().allFinite() || !std::isfinite(lane_center_y) || !std::isfinite(target_speed)) {
    throw std::invalid_argument("transcribe: non-finite ego state or reference");
  }
  for (const auto & o : svs) {
    if (!std::isfinite(o.ox) || !std::isfinite(o.oy) || !std::isfinite(o.ovx) ||
        !std::isfinite(o.ovy)) {
      throw std::invalid_argument("transcribe: non-finite obstacle state");
    }
  }
  weights.validate();
  limits.validate();

  ShootingProblem p;
  p.N = N;
  p.Ts = Ts;
  p.x0 = ev;
  p.weights = weights;
  p.limits = limits;

  p.sv_grid.resize(static_cast<size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    auto & row = p.sv_grid[static_cast<size_t>(k)];
    row.reserve(svs.size());
    for (const auto & o : svs) {
      row.push_back(predict_sv(o, k * Ts));
    }
  }

  EvState ref;
  ref.py = lane_center_y;
  ref.v = target_speed;
  p.desired.assign(static_cast<size_t>(N), ref);

  p.terminal_ref = EvState{0.0, lane_center_y, 0.0, 0.0, 0.0};
  return p;
}

DecisionVariables initialize(const ShootingProblem & problem, const Solution * previous)
{
  if (previous != nullptr && !previous->vars.controls.empty()) {
    return shift_warm_start(problem, *previous);
  }
  DecisionVariables v;
  v.controls.assign(static_cast<size_t>(problem.N), ControlInput{0.0, 0.0});
  const auto states = rollout(problem.x0, v.controls, problem.Ts);
  v.states.assign(states.begin() + 1, states.end());
  return v;
}

DecisionVariables shift_warm_start(const ShootingProblem & problem, const Solution & previous)
{
  const auto & prev_u = previous.vars.controls;
  DecisionVariables v;
  v.controls.reserve(static_cast<size_t>(problem.N));
  for (int k = 0; k < problem.N; ++k) {
    const size_t src = std::min(static_cast<size_t>(k) + 1, prev_u.size() - 1);
    v.controls.push_back(prev_u[src]);
  }
  const auto states = rollout(problem.x0, v.controls, problem.Ts);
  v.states.assign(states.begin() + 1, states.end());
  return v;
}

QpStep qp_subproblem(
  std::span<const StageLinearization> stages, const TerminalLinearization & terminal,
  double levenberg)
{
  const int N = static_cast<int>(stages.size());
  QpStep step;
  step.du.assign(static_cast<size_t>(N), Vec2::Zero());
  step.dx.assign(static_cast<size_t>(N), Vec5::Zero());

  std::vector<Vec2> kff(static_cast<size_t>(N), Vec2::Zero());
  std::vector<Eigen::Matrix<double, 2, 5>> K(
    static_cast<size_t>(N), Eigen::Matrix<double, 2, 5>::Zero());

  Mat5 V = terminal.H;
  Vec5 v = terminal.g;

  for (int k = N - 1; k >= 0; --k) {
    const auto & s = stages[static_cast<size_t>(k)];
    const Vec5 v_plus = v + V * s.defect;
    step.max_costate = std::max(step.max_costate, v_plus.cwiseAbs().maxCoeff());
    const Vec2 Q_u = s.gu + s.B.transpose() * v_plus;
    const Vec5 Q_x = s.gx + s.A.transpose() * v_plus;
    Mat2 Q_uu = s.Hu + s.B.transpose() * V * s.B;
    Q_uu.diagonal() *= 1.0 + levenberg;
    const Mat5 Q_xx = s.Hx + s.A.transpose() * V * s.A;
    const Eigen::Matrix<double, 2, 5> Q_ux = s.B.transpose() * V * s.A;

    Eigen::LLT<Mat2> llt(Q_uu);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("qp_subproblem: control Hessian block is not positive definite");
    }

    Vec2 ff = -llt.solve(Q_u);
    Eigen::Matrix<double, 2, 5> fb = -llt.solve(Q_ux);

    // clamp the feedforward onto the control box; a clamped row becomes an
    // equality, so re-solve the remaining free component conditioned on it and
    // drop the clamped row's feedback
    bool clamped[2] = {false, false};
    for (int j = 0; j < 2; ++j) {
      if (ff(j) <= s.du_lo(j)) {
        ff(j) = s.du_lo(j);
        clamped[j] = true;
      } else if (ff(j) >= s.du_hi(j)) {
        ff(j) = s.du_hi(j);
        clamped[j] = true;
      }
    }
    if (clamped[0] != clamped[1]) {
      const int c = clamped[0] ? 0 : 1;
      const int f = 1 - c;
      double free_ff = -(Q_u(f) + Q_uu(f, c) * ff(c)) / Q_uu(f, f);
      free_ff = std::clamp(free_ff, s.du_lo(f), s.du_hi(f));
      ff(f) = free_ff;
      fb.row(c).setZero();
      fb.row(f) = -Q_ux.row(f) / Q_uu(f, f);
    } else if (clamped[0] && clamped[1]) {
      fb.setZero();
    }

    kff[static_cast<size_t>(k)] = ff;
    K[static_cast<size_t>(k)] = fb;

    step.pred_linear += ff.dot(Q_u);
    step.pred_quadratic += 0.5 * ff.dot(Q_uu * ff);

    // value recursion under the affine policy du = ff + fb dx
    const Mat5 V_new = Q_xx + fb.transpose() * Q_uu * fb + fb.transpose() * Q_ux +
                       Q_ux.transpose() * fb;
    const Vec5 v_new =
      Q_x + fb.transpose() * (Q_uu * ff + Q_u) + Q_ux.transpose() * ff;
    V = 0.5 * (V_new + V_new.transpose());
    v = v_new;
  }

  // forward sweep on the linearized dynamics
  Vec5 dx = Vec5::Zero();
  for (int k = 0; k < N; ++k) {
    const auto & s = stages[static_cast<size_t>(k)];
    Vec2 du = kff[static_cast<size_t>(k)] + K[static_cast<size_t>(k)] * dx;
    du = du.cwiseMax(s.du_lo).cwiseMin(s.du_hi);
    step.du[static_cast<size_t>(k)] = du;
    dx = s.A * dx + s.B * du + s.defect;
    step.dx[static_cast<size_t>(k)] = dx;
  }
  step.feedforward = std::move(kff);
  step.feedback = std::move(K);
  return step;
}

namespace
{

struct Linearized
{
  std::vector<StageLinearization> stages;
  TerminalLinearization terminal;
  double defect_inf{0.0};
};

Linearized linearize(const ShootingProblem & p, const DecisionVariables & v)
{
  Linearized lin;
  lin.stages.resize(static_cast<size_t>(p.N));
  Vec5 lo, hi;
  state_bounds(p.limits, lo, hi);

  for (int k = 0; k < p.N; ++k) {
    auto & s = lin.stages[static_cast<size_t>(k)];
    const EvState & xk = state_at(p, v, k);
    const ControlInput & uk = v.controls[static_cast<size_t>(k)];

    rk4_jacobians(xk, uk, p.Ts, s.A, s.B);
    s.defect = continuity_defect(xk, uk, state_at(p, v, k + 1), p.Ts);
    lin.defect_inf = std::max(lin.defect_inf, s.defect.cwiseAbs().maxCoeff());

    const StageDerivatives d = stage_derivatives(
      xk, uk, p.desired[static_cast<size_t>(k)], p.sv_grid[static_cast<size_t>(k)], k * p.Ts,
      p.weights);
    s.Hx = d.hessian.topLeftCorner<5, 5>();
    s.gx = d.gradient.head<5>();
    s.Hu = d.hessian.bottomRightCorner<2, 2>();
    s.gu = d.gradient.tail<2>();
    if (k > 0) {
      box_penalty_derivatives(xk, lo, hi, s.gx, s.Hx);
    }

    s.du_lo = Vec2(p.limits.a_min - uk.a, p.limits.omega_dot_min - uk.omega_dot);
    s.du_hi = Vec2(p.limits.a_max - uk.a, p.limits.omega_dot_max - uk.omega_dot);
  }

  terminal_derivatives(state_at(p, v, p.N), p.terminal_ref, p.weights, lin.terminal.g,
                       lin.terminal.H);
  Mat5 hess_box = Mat5::Zero();
  Vec5 grad_box = Vec5::Zero();
  box_penalty_derivatives(state_at(p, v, p.N), lo, hi, grad_box, hess_box);
  lin.terminal.g += grad_box;
  lin.terminal.H += hess_box;
  return lin;
}

// first-order stationarity in the controls via the adjoint recursion, projected
// onto the control box; exact once the defects vanish
double projected_control_gradient(
  const ShootingProblem & p, const DecisionVariables & v, const Linearized & lin)
{
  Vec5 adj = lin.terminal.g;
  double res = 0.0;
  for (int k = p.N - 1; k >= 0; --k) {
    const auto & s = lin.stages[static_cast<size_t>(k)];
    const Vec2 grad_u = s.gu + s.B.transpose() * adj;
    const ControlInput & uk = v.controls[static_cast<size_t>(k)];
    const Vec2 u(uk.a, uk.omega_dot);
    const Vec2 u_lo(p.limits.a_min, p.limits.omega_dot_min);
    const Vec2 u_hi(p.limits.a_max, p.limits.omega_dot_max);
    for (int j = 0; j < 2; ++j) {
      double g = grad_u(j);
      if (u(j) <= u_lo(j) + 1e-12) {
        g = std::min(g, 0.0);  // only an increase is feasible
      } else if (u(j) >= u_hi(j) - 1e-12) {
        g = std::max(g, 0.0);
      }
      res = std::max(res, std::abs(g));
    }
    adj = s.gx + s.A.transpose() * adj;
  }
  return res;
}

// trial iterate for step length alpha: roll the nonlinear dynamics forward
// under the scaled feedforward plus the Riccati feedback on the state
// deviation, so every trial keeps the continuity defects exactly closed
DecisionVariables apply_step(
  const ShootingProblem & p, const DecisionVariables & v, const QpStep & step, double alpha)
{
  DecisionVariables out = v;
  const Vec2 u_lo(p.limits.a_min, p.limits.omega_dot_min);
  const Vec2 u_hi(p.limits.a_max, p.limits.omega_dot_max);
  EvState x = p.x0;
  for (int k = 0; k < p.N; ++k) {
    const StateTangent dev = state_diff(x, state_at(p, v, k));
    Vec2 u = v.controls[static_cast<size_t>(k)].vec() +
             alpha * step.feedforward[static_cast<size_t>(k)] +
             step.feedback[static_cast<size_t>(k)] * dev;
    u = u.cwiseMax(u_lo).cwiseMin(u_hi);
    out.controls[static_cast<size_t>(k)] = ControlInput::from_vec(u);
    x = rk4_step(x, out.controls[static_cast<size_t>(k)], p.Ts);
    out.states[static_cast<size_t>(k)] = x;
  }
  return out;
}

double step_inf_norm(const QpStep & step, double alpha)
{
  double n = 0.0;
  for (const auto & du : step.du) {
    n = std::max(n, alpha * du.cwiseAbs().maxCoeff());
  }
  for (const auto & dx : step.dx) {
    n = std::max(n, alpha * dx.cwiseAbs().maxCoeff());
  }
  return n;
}

// largest wrapped heading change between two iterates, stage by stage
double max_heading_move(const DecisionVariables & a, const DecisionVariables & b)
{
  double m = 0.0;
  for (size_t k = 0; k < a.states.size(); ++k) {
    m = std::max(m, std::abs(wrap_angle(a.states[k].theta - b.states[k].theta)));
  }
  return m;
}

}  // namespace

double nlp_objective(const ShootingProblem & problem, const DecisionVariables & vars)
{
  double obj = 0.0;
  for (int k = 0; k < problem.N; ++k) {
    obj += running_cost(
      state_at(problem, vars, k), vars.controls[static_cast<size_t>(k)],
      problem.desired[static_cast<size_t>(k)], problem.sv_grid[static_cast<size_t>(k)],
      k * problem.Ts, problem.weights);
  }
  obj += terminal_cost(state_at(problem, vars, problem.N), problem.terminal_ref, problem.weights);
  return obj;
}

Solution solve_sqp(const ShootingProblem & problem, DecisionVariables init, SolveMode mode)
{
  const auto t_start = std::chrono::steady_clock::now();

  Solution sol;
  sol.vars = std::move(init);
  sol.status = SolveStatus::MaxIter;

  const int max_iters = (mode == SolveMode::RealTimeIteration) ? 3 : kMaxIterations;
  MeritParts merit = evaluate_merit(problem, sol.vars);
  double mu = kMeritMuMin;
  double lm = 0.0;  // Marquardt damping, escalated on failed line searches

  for (int iter = 0; iter < max_iters; ++iter) {
    const Linearized lin = linearize(problem, sol.vars);
    const double grad_res = projected_control_gradient(problem, sol.vars, lin);
    sol.kkt_residual = std::max(grad_res, lin.defect_inf);
    if (mode == SolveMode::Converge && grad_res < kKktTol && lin.defect_inf < kDefectTol) {
      sol.status = SolveStatus::Converged;
      break;
    }

    QpStep step;
    double alpha = 1.0;
    bool accepted = false;
    bool stationary = false;
    for (int round = 0; round < kMaxEscalations && !accepted; ++round) {
      step = qp_subproblem(lin.stages, lin.terminal, lm);

      // exactness of the l1 penalty needs mu above the largest multiplier;
      // never decrease it, so a mid-solve drop in the estimates cannot let the
      // line search trade continuity violations for objective and detach the
      // states
      mu = std::max(mu, 2.0 * step.max_costate);

      // stationarity at the merit's numerical noise floor: when continuity
      // holds and the undamped model predicts less decrease than round-off in
      // a merit of this magnitude, no line search can certify progress
      if (lm == 0.0 && merit.defect_l1 < kDefectTol) {
        const double pred_floor = 1e-8 * std::max(1.0, std::abs(merit.merit(mu)));
        if (step.pred_linear > -pred_floor || step_inf_norm(step, 1.0) < 1e-14) {
          stationary = true;
          break;
        }
      }

      // Armijo backtracking on the l1 merit; the model decrease combines the
      // QP's first-order cost prediction with full defect restoration
      const double directional = step.pred_linear - mu * merit.defect_l1;
      alpha = 1.0;
      for (int bt = 0; bt < kMaxBacktracks && !accepted; ++bt) {
        const DecisionVariables trial = apply_step(problem, sol.vars, step, alpha);
        // trig linearization is only trusted for modest heading moves; a larger
        // jump can wind the heading past the wrap point, where the soft box
        // gradients on either side cancel and the extra turn becomes permanent
        if (max_heading_move(trial, sol.vars) > kHeadingTrust) {
          alpha *= 0.5;
          continue;
        }
        const MeritParts trial_merit = evaluate_merit(problem, trial);
        if (trial_merit.merit(mu) <= merit.merit(mu) + kArmijoC1 * alpha * directional) {
          sol.vars = trial;
          merit = trial_merit;
          accepted = true;
        } else {
          alpha *= 0.5;
        }
      }

      // a failed search usually means the quadratic model overshoots across a
      // curved valley; damp the step and retry before giving up
      if (!accepted) {
        lm = (lm == 0.0) ? 1e-4 : lm * 100.0;
      }
    }
    sol.iterations = iter + 1;

    if (stationary) {
      if (mode == SolveMode::Converge) {
        sol.status = SolveStatus::Converged;
        break;
      }
      continue;  // real-time mode: hold the iterate for this iteration
    }
    if (!accepted) {
      sol.status = SolveStatus::Degraded;
      break;
    }
    lm = (lm <= 1e-4) ? 0.0 : lm / 100.0;

    if (mode == SolveMode::Converge && step_inf_norm(step, alpha) < kStepTol &&
        merit.defect_l1 < kDefectTol) {
      sol.status = SolveStatus::Converged;
      break;
    }
  }

  // final diagnostics on the returned iterate
  {
    const Linearized lin = linearize(problem, sol.vars);
    const double grad_res = projected_control_gradient(problem, sol.vars, lin);
    sol.kkt_residual = std::max(grad_res, lin.defect_inf);
    if (sol.status == SolveStatus::MaxIter && grad_res < kKktTol && lin.defect_inf < kDefectTol) {
      sol.status = SolveStatus::Converged;
    }
    sol.defect_norms.resize(static_cast<size_t>(problem.N));
    for (int k = 0; k < problem.N; ++k) {
      sol.defect_norms[static_cast<size_t>(k)] =
        lin.stages[static_cast<size_t>(k)].defect.cwiseAbs().maxCoeff();
    }
  }
  sol.objective = nlp_objective(problem, sol.vars);
  sol.solve_time_s =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return sol;
}

}  // namespace pto
