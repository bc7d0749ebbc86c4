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

#include "pto/costs.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace pto;

namespace
{

CostWeights printed_weights()
{
  CostWeights w;
  w.sv_weight = 5.0;  // the printed per-obstacle scale used by the formula examples
  return w;
}

}  // namespace

TEST_CASE("terminal_cost: zero at the reference, quadratic away from it")
{
  const CostWeights w = printed_weights();
  const EvState ref{0, -6, 0, 15, 0};
  CHECK(terminal_cost(ref, ref, w) == doctest::Approx(0.0));

  // only py deviates by 0.01 -> 1e9 * 1e-4 = 1e5
  EvState x = ref;
  x.py += 0.01;
  CHECK(terminal_cost(x, ref, w) == doctest::Approx(1e5).epsilon(1e-12));

  // unselected entries (px, v) are free
  EvState y = ref;
  y.px += 100.0;
  y.v -= 5.0;
  CHECK(terminal_cost(y, ref, w) == doctest::Approx(0.0));

  // doubling a deviation quadruples the cost
  EvState z1 = ref, z2 = ref;
  z1.omega = 0.1;
  z2.omega = 0.2;
  CHECK(terminal_cost(z2, ref, w) == doctest::Approx(4.0 * terminal_cost(z1, ref, w)));
}

TEST_CASE("goal_cost: selected py/v tracking")
{
  const CostWeights w = printed_weights();
  const EvState desired{0, -6, 0, 15, 0};

  // py error 1 m and v error 0.1 m/s -> 1e3*1 + 1e5*0.01 = 2000
  const EvState x{50, -5, 0.1, 15.1, 0.3};
  CHECK(goal_cost(x, desired, w) == doctest::Approx(2000.0).epsilon(1e-12));

  CHECK(goal_cost(desired, desired, w) == doctest::Approx(0.0));

  // heading and yaw rate are not tracked per stage
  EvState y = desired;
  y.theta = 0.2;
  y.omega = 1.0;
  y.px = 123.0;
  CHECK(goal_cost(y, desired, w) == doctest::Approx(0.0));
}

TEST_CASE("barrier_h: ellipse level values")
{
  const CostWeights w = printed_weights();
  const SvState o{0, 0, 0, 0};
  // on the boundary along the major axis (a = 3)
  CHECK(barrier_h(3.0, 0.0, o, w) == doctest::Approx(0.0));
  // at the obstacle center
  CHECK(barrier_h(0.0, 0.0, o, w) == doctest::Approx(-1.0));
  // twice the major axis ahead: 36/9 - 1 = 3
  CHECK(barrier_h(6.0, 0.0, o, w) == doctest::Approx(3.0));
  // minor axis (b = 2)
  CHECK(barrier_h(0.0, 2.0, o, w) == doctest::Approx(0.0));
  // symmetric in both axes
  CHECK(barrier_h(-4.0, 1.0, o, w) == doctest::Approx(barrier_h(4.0, -1.0, o, w)));
}

TEST_CASE("safety_H: activation step and proximity growth")
{
  const CostWeights w = printed_weights();

  // exactly at the activation threshold the step term vanishes: 1/(1+8)
  CHECK(std::abs(safety_H(w.c, w) - 1.0 / 9.0) < 1e-9);

  // well inside the activation region: ~2/(eta+h)
  CHECK(safety_H(0.0, w) == doctest::Approx(1.99999875).epsilon(1e-9));

  // far outside: essentially off
  CHECK(safety_H(24.0, w) == doctest::Approx(2.5e-8).epsilon(1e-2));

  // strictly decreasing in h across the clamp region, the activation step and
  // the far field
  double prev = safety_H(-0.9999, w);
  for (double h = -0.9995; h < 30.0; h += 0.0007) {
    const double cur = safety_H(h, w);
    CHECK(cur < prev);
    prev = cur;
  }

  // non-negative everywhere
  for (double h = -1.0; h < 50.0; h += 0.13) {
    CHECK(safety_H(h, w) >= 0.0);
  }
}

TEST_CASE("discount_weight: printed scale and monotone decay")
{
  const CostWeights w = printed_weights();
  CHECK(discount_weight(w, 0.0) == doctest::Approx(5.0));
  CHECK(discount_weight(w, 50.0) == doctest::Approx(5.0 / M_E));
  double prev = discount_weight(w, 0.0);
  for (double t = 0.1; t <= 5.0; t += 0.1) {
    const double cur = discount_weight(w, t);
    CHECK(cur < prev);
    CHECK(cur > 0.0);
    prev = cur;
  }
}

TEST_CASE("safety_cost: additive over obstacles")
{
  const CostWeights w = printed_weights();
  const EvState x{0, 0, 0, 10, 0};

  CHECK(safety_cost(x, {}, 0.0, w) == doctest::Approx(0.0));

  // one obstacle placed so that h = c: cost = lambda * 1/9
  std::vector<SvState> one{SvState{9.0, 0.0, 0, 0}};
  CHECK(safety_cost(x, one, 0.0, w) == doctest::Approx(5.0 / 9.0));

  // duplicating the obstacle doubles the cost
  std::vector<SvState> two{one[0], one[0]};
  CHECK(safety_cost(x, two, 0.0, w) == doctest::Approx(2.0 * 5.0 / 9.0));
}

TEST_CASE("running_cost: additivity and control energy")
{
  const CostWeights w = printed_weights();
  const EvState desired{0, -6, 0, 15, 0};
  const EvState x{10, -5.5, 0.02, 14.0, 0.1};
  std::vector<SvState> svs{SvState{18, -6, 8, 0}};

  // u = [1, 0] contributes exactly R(0) = 2e4
  const double base = running_cost(x, ControlInput{0, 0}, desired, svs, 0.3, w);
  const double with_a = running_cost(x, ControlInput{1, 0}, desired, svs, 0.3, w);
  CHECK(with_a - base == doctest::Approx(2e4).epsilon(1e-9));

  // decomposition matches the individual terms
  CHECK(
    base == doctest::Approx(goal_cost(x, desired, w) + safety_cost(x, svs, 0.3, w)));

  // non-negative for PSD weights at random points
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const EvState xr{un(rng) * 30, -6 + un(rng) * 4, un(rng) * 0.2, 12 + un(rng) * 10,
                     un(rng)};
    const ControlInput ur{un(rng) * 1.5, un(rng) * 2.0};
    CHECK(running_cost(xr, ur, desired, svs, 0.5, w) >= 0.0);
  }
}

TEST_CASE("stage_derivatives: gradient matches central finite differences")
{
  // both the printed formula scale and the shipped closed-loop scale
  for (double lambda : {5.0, 5e6}) {
    CostWeights w;
    w.sv_weight = lambda;
    const EvState desired{0, -6, 0, 15, 0};
    std::vector<SvState> svs{SvState{12, -6, 8, 0}, SvState{-4, -2, 10, 0}};

    std::mt19937 rng(23);
    std::uniform_real_distribution<double> un(-1.0, 1.0);
    const double fd = 1e-6;
    int checked = 0;
    int attempts = 0;
    while (checked < 100 && attempts < 1000) {
      ++attempts;
      const EvState x{un(rng) * 25, -6 + un(rng) * 5, un(rng) * 0.25, 12 + un(rng) * 12,
                      un(rng) * 2};
      const ControlInput u{un(rng) * 1.5, un(rng) * 2.0};

      // skip points sitting on the activation step or the proximity clamp, where
      // the cost is (by construction) nearly discontinuous and FD is meaningless
      bool near_kink = false;
      for (const auto & o : svs) {
        const double h = barrier_h(x.px, x.py, o, w);
        if (std::abs(h - w.c) < 1e-2 || w.eta + h < 2e-3) {
          near_kink = true;
        }
      }
      if (near_kink) {
        continue;
      }
      ++checked;

      const StageDerivatives d = stage_derivatives(x, u, desired, svs, 0.4, w);
      Vec7 fd_grad;
      for (int j = 0; j < 7; ++j) {
        Vec5 xp = x.vec(), xm = x.vec();
        Vec2 up = u.vec(), um = u.vec();
        if (j < 5) {
          xp(j) += fd;
          xm(j) -= fd;
        } else {
          up(j - 5) += fd;
          um(j - 5) -= fd;
        }
        const double fp = running_cost(
          EvState::from_vec(xp), ControlInput::from_vec(up), desired, svs, 0.4, w);
        const double fm = running_cost(
          EvState::from_vec(xm), ControlInput::from_vec(um), desired, svs, 0.4, w);
        fd_grad(j) = (fp - fm) / (2.0 * fd);
      }
      const double scale = std::max(1.0, fd_grad.cwiseAbs().maxCoeff());
      CHECK((d.gradient - fd_grad).cwiseAbs().maxCoeff() / scale < 1e-4);
    }
    CHECK(checked == 100);
  }
}

TEST_CASE("stage_derivatives: Hessian is positive semidefinite")
{
  CostWeights w;  // shipped scale
  const EvState desired{0, -6, 0, 15, 0};
  std::vector<SvState> svs{SvState{6, -6, 8, 0}, SvState{2, -4, 9, 0}};

  std::mt19937 rng(29);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const EvState x{un(rng) * 20, -6 + un(rng) * 5, un(rng) * 0.25, 12 + un(rng) * 12,
                    un(rng) * 2};
    const ControlInput u{un(rng) * 1.5, un(rng) * 2.0};
    const StageDerivatives d = stage_derivatives(x, u, desired, svs, 0.2, w);

    CHECK((d.hessian - d.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Mat7> es(d.hessian);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
  }
}

TEST_CASE("terminal_derivatives match finite differences")
{
  const CostWeights w = printed_weights();
  const EvState ref{0, -2, 0, 15, 0};
  const EvState x{40, -5.3, 0.12, 13.0, 0.4};
  Vec5 g;
  Mat5 H;
  terminal_derivatives(x, ref, w, g, H);

  const double fd = 1e-6;
  for (int j = 0; j < 5; ++j) {
    Vec5 xp = x.vec(), xm = x.vec();
    xp(j) += fd;
    xm(j) -= fd;
    const double fp = terminal_cost(EvState::from_vec(xp), ref, w);
    const double fm = terminal_cost(EvState::from_vec(xm), ref, w);
    const double num = (fp - fm) / (2.0 * fd);
    CHECK(g(j) == doctest::Approx(num).epsilon(1e-5));
  }
  Eigen::SelfAdjointEigenSolver<Mat5> es(H);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("terminal_weight_dominates flags degenerate tunings")
{
  CostWeights w;
  // unit deviation on (py, theta, omega) costs 1e9 + 1e9 + 1e6
  CHECK(terminal_weight_dominates(w, 1e6));
  CHECK(terminal_weight_dominates(w, 2.0e9));
  CHECK_FALSE(terminal_weight_dominates(w, 3.0e9));

  CostWeights tiny = w;
  tiny.q_terminal = Vec5::Ones();
  CHECK_FALSE(terminal_weight_dominates(tiny, 100.0));
}

TEST_CASE("CostWeights validation")
{
  CostWeights ok;
  CHECK_NOTHROW(ok.validate());
  CostWeights bad;
  bad.r_control(0) = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CostWeights bad2;
  bad2.ellipse_a = 0.0;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}
