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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pto/nlp.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace pto;

namespace
{

// minimum barrier value of a state sequence against the problem's prediction grid
double min_barrier(const ShootingProblem & p, const std::vector<EvState> & states)
{
  double m = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < states.size(); ++k) {
    for (const auto & o : p.sv_grid[k]) {
      m = std::min(m, barrier_h(states[k].px, states[k].py, o, p.weights));
    }
  }
  return m;
}

std::vector<EvState> full_states(const ShootingProblem & p, const DecisionVariables & v)
{
  std::vector<EvState> s;
  s.push_back(p.x0);
  s.insert(s.end(), v.states.begin(), v.states.end());
  return s;
}

bool vars_bitwise_equal(const DecisionVariables & a, const DecisionVariables & b)
{
  if (a.controls.size() != b.controls.size() || a.states.size() != b.states.size()) {
    return false;
  }
  for (size_t k = 0; k < a.controls.size(); ++k) {
    if (a.controls[k].a != b.controls[k].a || a.controls[k].omega_dot != b.controls[k].omega_dot) {
      return false;
    }
  }
  for (size_t k = 0; k < a.states.size(); ++k) {
    if ((a.states[k].vec().array() != b.states[k].vec().array()).any()) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("continuity_defect: exact rollout closes the gap")
{
  const EvState xk{0, -6, 0, 15, 0};
  const ControlInput u{0.7, -0.3};
  const EvState xk1 = rk4_step(xk, u, 0.1);
  CHECK(continuity_defect(xk, u, xk1, 0.1).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // straight-line coasting vs a knot point placed 0.1 m short
  const EvState short_knot{1.4, -6, 0, 15, 0};
  const StateTangent d = continuity_defect(xk, ControlInput{0, 0}, short_knot, 0.1);
  CHECK(d(0) == doctest::Approx(0.1));
  CHECK(d.tail<4>().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("continuity_defect wraps the heading difference")
{
  // a step that lands at theta = +pi against a knot storing -pi+1e-12: the
  // heading defect must be ~0, not ~2*pi
  EvState xk{0, 0, M_PI - 0.0005, 1.0, 0.01};
  const EvState land = rk4_step(xk, ControlInput{0, 0}, 0.1);
  EvState knot = land;
  knot.theta = wrap_angle(land.theta - 2.0 * M_PI);  // same physical heading
  const StateTangent d = continuity_defect(xk, ControlInput{0, 0}, knot, 0.1);
  CHECK(std::abs(d(2)) < 1e-9);
}

TEST_CASE("transcribe: grid shape, references, validation")
{
  const EvState ev{0, -6, 0, 15, 0};
  std::vector<SvState> svs{SvState{-10, -10, 9.5, 0}, SvState{25, -10, 8.5, 0}};
  const CostWeights w;
  const VehicleParams lim;
  const ShootingProblem p = transcribe(ev, svs, -6.0, 15.0, 50, 0.1, w, lim);

  CHECK(p.N == 50);
  CHECK(p.Ts == doctest::Approx(0.1));
  REQUIRE(p.sv_grid.size() == 51);
  REQUIRE(p.sv_grid[0].size() == 2);

  // the tail entry of obstacle 1 is its constant-velocity prediction at T = 5 s
  const SvState expect = predict_sv(svs[1], 5.0);
  CHECK(p.sv_grid[50][1].ox == doctest::Approx(expect.ox));
  CHECK(p.sv_grid[50][1].oy == doctest::Approx(expect.oy));

  REQUIRE(p.desired.size() == 50);
  CHECK(p.desired[17].py == doctest::Approx(-6.0));
  CHECK(p.desired[17].v == doctest::Approx(15.0));
  CHECK(p.terminal_ref.py == doctest::Approx(-6.0));
  CHECK(p.terminal_ref.theta == doctest::Approx(0.0));
  CHECK(p.terminal_ref.omega == doctest::Approx(0.0));

  // no obstacles -> zero safety cost everywhere
  const ShootingProblem empty = transcribe(ev, {}, -6.0, 15.0, 10, 0.1, w, lim);
  CHECK(safety_cost(ev, empty.sv_grid[0], 0.0, w) == doctest::Approx(0.0));

  CHECK_THROWS_AS(transcribe(ev, svs, -6.0, 15.0, 0, 0.1, w, lim), std::invalid_argument);
  CHECK_THROWS_AS(transcribe(ev, svs, -6.0, 15.0, 50, 0.0, w, lim), std::invalid_argument);
  EvState bad = ev;
  bad.v = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(transcribe(bad, svs, -6.0, 15.0, 50, 0.1, w, lim), std::invalid_argument);
  std::vector<SvState> bad_sv{SvState{std::numeric_limits<double>::infinity(), 0, 0, 0}};
  CHECK_THROWS_AS(transcribe(ev, bad_sv, -6.0, 15.0, 50, 0.1, w, lim), std::invalid_argument);
}

TEST_CASE("initialize: cold start rolls out zero controls (zero defects)")
{
  const EvState ev{0, -6, 0.05, 14, 0.1};
  const ShootingProblem p = transcribe(ev, {}, -6.0, 15.0, 20, 0.1, CostWeights{}, VehicleParams{});
  const DecisionVariables v = initialize(p, nullptr);
  REQUIRE(v.controls.size() == 20);
  REQUIRE(v.states.size() == 20);
  for (const auto & u : v.controls) {
    CHECK(u.a == doctest::Approx(0.0));
    CHECK(u.omega_dot == doctest::Approx(0.0));
  }
  for (int k = 0; k < p.N; ++k) {
    const EvState & prev = (k == 0) ? p.x0 : v.states[k - 1];
    CHECK(
      continuity_defect(prev, v.controls[k], v.states[k], p.Ts).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("shift_warm_start: drop head, repeat tail, re-roll states")
{
  const EvState ev0{0, -6, 0, 15, 0};
  ShootingProblem p0 = transcribe(ev0, {}, -6.0, 15.0, 3, 0.1, CostWeights{}, VehicleParams{});
  Solution prev;
  prev.vars.controls = {ControlInput{0.1, 0.01}, ControlInput{0.2, 0.02}, ControlInput{0.3, 0.03}};
  prev.vars.states = rollout(ev0, prev.vars.controls, 0.1);
  prev.vars.states.erase(prev.vars.states.begin());

  // the next cycle starts from the state reached under the executed first control
  const EvState ev1 = rk4_step(ev0, prev.vars.controls[0], 0.1);
  ShootingProblem p1 = transcribe(ev1, {}, -6.0, 15.0, 3, 0.1, CostWeights{}, VehicleParams{});
  const DecisionVariables v = shift_warm_start(p1, prev);

  REQUIRE(v.controls.size() == 3);
  CHECK(v.controls[0].a == doctest::Approx(0.2));
  CHECK(v.controls[1].a == doctest::Approx(0.3));
  CHECK(v.controls[2].a == doctest::Approx(0.3));  // tail repeated
  for (int k = 0; k < 3; ++k) {
    const EvState & prev_x = (k == 0) ? p1.x0 : v.states[k - 1];
    CHECK(
      continuity_defect(prev_x, v.controls[k], v.states[k], 0.1).cwiseAbs().maxCoeff() < 1e-12);
  }

  // a constant-control plan is a fixed point of the shift (controls unchanged)
  Solution cc;
  cc.vars.controls.assign(3, ControlInput{0.5, 0.0});
  cc.vars.states = rollout(ev0, cc.vars.controls, 0.1);
  cc.vars.states.erase(cc.vars.states.begin());
  const DecisionVariables vc = shift_warm_start(p1, cc);
  for (const auto & u : vc.controls) {
    CHECK(u.a == doctest::Approx(0.5));
  }
}

TEST_CASE("qp_subproblem: zero gradient and zero defects give a zero step")
{
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  std::vector<StageLinearization> stages(4);
  for (auto & s : stages) {
    Mat5 Rx = Mat5::Random();
    s.A = Mat5::Identity() + 0.1 * Mat5::Random();
    s.B = 0.1 * Mat52::Random();
    s.defect = Vec5::Zero();
    s.Hx = Rx * Rx.transpose() + Mat5::Identity();
    s.gx = Vec5::Zero();
    s.Hu = Mat2::Identity() * (2.0 + un(rng));
    s.gu = Vec2::Zero();
    s.du_lo = Vec2(-1.0, -1.0);
    s.du_hi = Vec2(1.0, 1.0);
  }
  TerminalLinearization term;
  term.H = Mat5::Identity();
  term.g = Vec5::Zero();

  const QpStep step = qp_subproblem(stages, term);
  for (const auto & du : step.du) {
    CHECK(du.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  for (const auto & dx : step.dx) {
    CHECK(dx.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("qp_subproblem: single stage matches a dense KKT solve")
{
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    StageLinearization s;
    s.A = Mat5::Identity() + 0.1 * Mat5::Random();
    s.B = 0.1 * Mat52::Random();
    s.defect = 0.3 * Vec5::Random();
    Mat5 Rx = Mat5::Random();
    s.Hx = Rx * Rx.transpose() + Mat5::Identity();
    s.gx = Vec5::Random();
    s.Hu = Mat2::Identity() * (3.0 + un(rng));
    s.gu = Vec2::Random();
    s.du_lo = Vec2(-100.0, -100.0);  // inactive box
    s.du_hi = Vec2(100.0, 100.0);

    TerminalLinearization term;
    Mat5 Rt = Mat5::Random();
    term.H = Rt * Rt.transpose() + Mat5::Identity();
    term.g = Vec5::Random();

    // substitute dx1 = B du + d into the terminal quadratic and minimize over du:
    // (Hu + B' H B) du = -(gu + B'(g + H d))
    const Mat2 lhs = s.Hu + s.B.transpose() * term.H * s.B;
    const Vec2 rhs = -(s.gu + s.B.transpose() * (term.g + term.H * s.defect));
    const Vec2 du_expected = lhs.ldlt().solve(rhs);

    const QpStep step = qp_subproblem(std::span<const StageLinearization>(&s, 1), term);
    CHECK((step.du[0] - du_expected).cwiseAbs().maxCoeff() < 1e-9);
    const Vec5 dx_expected = s.B * du_expected + s.defect;
    CHECK((step.dx[0] - dx_expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("qp_subproblem: steps respect the control box exactly")
{
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<StageLinearization> stages(6);
    for (auto & s : stages) {
      s.A = Mat5::Identity() + 0.1 * Mat5::Random();
      s.B = 0.1 * Mat52::Random();
      s.defect = 0.2 * Vec5::Random();
      Mat5 Rx = Mat5::Random();
      s.Hx = 0.1 * (Rx * Rx.transpose()) + 0.01 * Mat5::Identity();
      s.gx = 5.0 * Vec5::Random();
      s.Hu = Mat2::Identity() * 0.2;
      s.gu = 5.0 * Vec2::Random();
      // a tight, asymmetric box
      s.du_lo = Vec2(-0.05 - 0.02 * std::abs(un(rng)), -0.01);
      s.du_hi = Vec2(0.03, 0.06 + 0.02 * std::abs(un(rng)));
    }
    TerminalLinearization term;
    Mat5 Rt = Mat5::Random();
    term.H = Rt * Rt.transpose();
    term.g = 3.0 * Vec5::Random();

    const QpStep step = qp_subproblem(stages, term);
    for (size_t k = 0; k < stages.size(); ++k) {
      CHECK(step.du[k](0) >= stages[k].du_lo(0));
      CHECK(step.du[k](0) <= stages[k].du_hi(0));
      CHECK(step.du[k](1) >= stages[k].du_lo(1));
      CHECK(step.du[k](1) <= stages[k].du_hi(1));
    }
  }
}

TEST_CASE("qp_subproblem rejects a non-PD control Hessian")
{
  StageLinearization s;
  s.A = Mat5::Identity();
  s.B = 0.1 * Mat52::Random();
  s.defect = Vec5::Zero();
  s.Hx = Mat5::Identity();
  s.gx = Vec5::Zero();
  s.Hu = -Mat2::Identity();  // indefinite
  s.gu = Vec2::Ones();
  s.du_lo = Vec2(-1, -1);
  s.du_hi = Vec2(1, 1);
  TerminalLinearization term;
  term.H = Mat5::Zero();
  term.g = Vec5::Zero();
  CHECK_THROWS_AS(
    qp_subproblem(std::span<const StageLinearization>(&s, 1), term), std::runtime_error);
}

TEST_CASE("solve_sqp: obstacle-free centerline cruise is already optimal")
{
  const EvState ev{0, -6, 0, 15, 0};
  const ShootingProblem p =
    transcribe(ev, {}, -6.0, 15.0, 50, 0.1, CostWeights{}, VehicleParams{});
  const Solution sol = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);

  CHECK(sol.status == SolveStatus::Converged);
  CHECK(sol.objective < 1e-6);
  for (const auto & u : sol.vars.controls) {
    CHECK(std::abs(u.a) < 1e-4);
    CHECK(std::abs(u.omega_dot) < 1e-4);
  }
}

TEST_CASE("solve_sqp: two-stage speed step matches the analytic optimum")
{
  // two intervals, no obstacles, target speed 1 m/s above the current speed.
  // Only the stage-1 cost sees the speed reached after the first control, so
  // with omega_dot = 0 by symmetry and a_1* = 0 (pure effort) the problem
  // reduces to min_a R_a a^2 + q_v (0.1 a - 1)^2, whose optimum is
  // a_0* = q_v * 0.1 / (R_a + q_v * 0.01) = 1e4 / 2.1e4 = 10/21. The stage-0
  // speed deviation is fixed at q_v * 1 and rides along in the objective.
  const EvState ev{0, -6, 0, 15, 0};
  const ShootingProblem p =
    transcribe(ev, {}, -6.0, 16.0, 2, 0.1, CostWeights{}, VehicleParams{});
  const Solution sol = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);

  CHECK(sol.status == SolveStatus::Converged);
  CHECK(sol.vars.controls[0].a == doctest::Approx(10.0 / 21.0).epsilon(1e-6));
  CHECK(std::abs(sol.vars.controls[0].omega_dot) < 1e-8);
  CHECK(std::abs(sol.vars.controls[1].a) < 1e-6);
  CHECK(sol.objective == doctest::Approx(1e5 + 4.2e7 / 441.0).epsilon(1e-6));
}

TEST_CASE("solve_sqp: quadratic tracking converges in at most 2 iterations")
{
  // linear longitudinal dynamics + quadratic costs: the first full Newton step
  // already solves the problem
  const EvState ev{0, -6, 0, 14, 0};
  const ShootingProblem p =
    transcribe(ev, {}, -6.0, 15.0, 30, 0.1, CostWeights{}, VehicleParams{});
  const Solution sol = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);
  CHECK(sol.status == SolveStatus::Converged);
  CHECK(sol.iterations <= 2);
}

TEST_CASE("solve_sqp: blocked lane forces deceleration with positive clearance")
{
  // slow car 40 m ahead in a corridor too narrow to swerve around; a
  // constant-deceleration grid search first confirms a safe profile exists
  const EvState ev{0, -6, 0, 15, 0};
  std::vector<SvState> svs{SvState{40, -6, 5, 0}};
  VehicleParams lim;
  lim.py_min = -7.0;
  lim.py_max = -5.0;
  const ShootingProblem p = transcribe(ev, svs, -6.0, 15.0, 50, 0.1, CostWeights{}, lim);

  bool safe_profile_exists = false;
  for (double a = 0.0; a >= -1.5 - 1e-9; a -= 0.1) {
    std::vector<ControlInput> us(50, ControlInput{a, 0});
    // keep the braking profile inside the speed box
    std::vector<EvState> states;
    states.push_back(ev);
    for (int k = 0; k < 50; ++k) {
      const double a_k = (states.back().v + a * 0.1 < 0.0) ? 0.0 : a;
      states.push_back(rk4_step(states.back(), ControlInput{a_k, 0}, 0.1));
    }
    if (min_barrier(p, states) >= 0.0) {
      safe_profile_exists = true;
      break;
    }
  }
  REQUIRE(safe_profile_exists);

  const Solution sol = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);
  const auto states = full_states(p, sol.vars);
  CHECK(min_barrier(p, states) >= 0.0);
  CHECK(states.back().v < ev.v);  // the speed profile gives way
  for (const auto & u : sol.vars.controls) {
    CHECK(u.a >= lim.a_min - 1e-12);
    CHECK(u.a <= lim.a_max + 1e-12);
  }
}

TEST_CASE("solve_sqp: randomized problems keep defects tiny and controls boxed")
{
  // states are drawn from the operating envelope the receding-horizon loop
  // produces (gentle headings and yaw rates); obstacles sit ahead anywhere
  // across the road
  std::mt19937 rng(53);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const EvState ev{un(rng) * 5, -6 + un(rng) * 2, un(rng) * 0.1, 10 + un(rng) * 4,
                     un(rng) * 0.1};
    std::vector<SvState> svs;
    const int n_sv = trial % 3;
    for (int i = 0; i < n_sv; ++i) {
      // obstacles ahead but not on top of the start state
      svs.push_back(SvState{ev.px + 25 + 20 * std::abs(un(rng)), -6 + un(rng) * 4,
                            6 + 2 * un(rng), 0});
    }
    const double lane = (trial % 2 == 0) ? -6.0 : -2.0;
    const double vtar = 12 + 3 * un(rng);
    const ShootingProblem p =
      transcribe(ev, svs, lane, vtar, 50, 0.1, CostWeights{}, VehicleParams{});
    const Solution sol = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);

    CAPTURE(trial);
    CAPTURE(static_cast<int>(sol.status));
    CAPTURE(sol.iterations);
    CHECK(sol.status == SolveStatus::Converged);
    for (double dn : sol.defect_norms) {
      CHECK(dn < 1e-6);
    }
    for (const auto & u : sol.vars.controls) {
      CHECK(u.a >= VehicleParams{}.a_min - 1e-12);
      CHECK(u.a <= VehicleParams{}.a_max + 1e-12);
      CHECK(u.omega_dot >= VehicleParams{}.omega_dot_min - 1e-12);
      CHECK(u.omega_dot <= VehicleParams{}.omega_dot_max + 1e-12);
    }
  }
}

TEST_CASE("solve_sqp: shifted warm start re-converges in a few iterations")
{
  const EvState ev{0, -6, 0, 15, 0};
  std::vector<SvState> svs{SvState{60, -6, 8, 0}};
  const ShootingProblem p0 =
    transcribe(ev, svs, -6.0, 15.0, 50, 0.1, CostWeights{}, VehicleParams{});
  const Solution s0 = solve_sqp(p0, initialize(p0, nullptr), SolveMode::Converge);
  REQUIRE(s0.status == SolveStatus::Converged);

  // advance one period: EV executes u0, obstacles follow their prediction
  const EvState ev1 = rk4_step(ev, s0.vars.controls[0], 0.1);
  std::vector<SvState> svs1{predict_sv(svs[0], 0.1)};
  const ShootingProblem p1 =
    transcribe(ev1, svs1, -6.0, 15.0, 50, 0.1, CostWeights{}, VehicleParams{});
  const Solution s1 = solve_sqp(p1, initialize(p1, &s0), SolveMode::Converge);

  CHECK(s1.status == SolveStatus::Converged);
  CHECK(s1.iterations <= 5);
}

TEST_CASE("solve_sqp: real-time iteration mode runs exactly 3 iterations")
{
  const EvState ev{0, -6, 0, 15, 0};
  std::vector<SvState> svs{SvState{40, -6, 5, 0}};
  VehicleParams lim;
  lim.py_min = -7.0;
  lim.py_max = -5.0;
  const ShootingProblem p = transcribe(ev, svs, -6.0, 15.0, 50, 0.1, CostWeights{}, lim);
  const Solution sol = solve_sqp(p, initialize(p, nullptr), SolveMode::RealTimeIteration);
  CHECK(sol.iterations == 3);
  CHECK((sol.status == SolveStatus::Converged || sol.status == SolveStatus::MaxIter));
}

TEST_CASE("solve_sqp is deterministic for identical inputs")
{
  const EvState ev{0, -6, 0.01, 14.5, 0.05};
  std::vector<SvState> svs{SvState{45, -6, 7, 0}, SvState{30, -10, 9, 0}};
  const ShootingProblem p =
    transcribe(ev, svs, -6.0, 15.0, 50, 0.1, CostWeights{}, VehicleParams{});
  const Solution a = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);
  const Solution b = solve_sqp(p, initialize(p, nullptr), SolveMode::Converge);

  // bit-identical numerics; only the wall-clock field may differ
  CHECK(vars_bitwise_equal(a.vars, b.vars));
  CHECK(a.objective == b.objective);
  CHECK(a.iterations == b.iterations);
  CHECK(a.kkt_residual == b.kkt_residual);
  CHECK(a.status == b.status);
}

TEST_CASE("nlp_objective matches the transcribed sum")
{
  const EvState ev{0, -6, 0, 15, 0};
  std::vector<SvState> svs{SvState{20, -6, 8, 0}};
  const ShootingProblem p =
    transcribe(ev, svs, -6.0, 15.0, 10, 0.1, CostWeights{}, VehicleParams{});
  const DecisionVariables v = initialize(p, nullptr);

  double expect = 0.0;
  std::vector<EvState> xs = full_states(p, v);
  for (int k = 0; k < p.N; ++k) {
    expect += running_cost(xs[k], v.controls[k], p.desired[k], p.sv_grid[k], k * p.Ts, p.weights);
  }
  expect += terminal_cost(xs[p.N], p.terminal_ref, p.weights);
  CHECK(nlp_objective(p, v) == doctest::Approx(expect).epsilon(1e-12));
}
