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

#include "pto/costs.hpp"

#include <cmath>
#include <stdexcept>

namespace pto
{

namespace
{

constexpr double kProximityFloor = 1e-5;   // floor on eta + h near the pole
constexpr double kOuterProductFloor = 1e-6;  // floor on the cost in the rank-one scale

// diag(selector^2 .* q) as a vector; selectors are 0/1 so this masks entries
Vec5 masked_diag(const Vec5 & q, const Vec5 & sel)
{
  return q.cwiseProduct(sel.cwiseProduct(sel));
}

// d(safety_H)/dh, consistent with the floored prefactor
double safety_H_slope(double h, const CostWeights & w)
{
  const double denom_raw = w.eta + h;
  const double denom = std::max(denom_raw, kProximityFloor);
  const double s = h - w.c;
  const double abs_s = std::abs(s);
  const double bracket = 1.0 - s / (w.epsilon + abs_s);

  const double du = (denom_raw > kProximityFloor) ? -1.0 / (denom * denom) : 0.0;
  const double db = -w.epsilon / ((w.epsilon + abs_s) * (w.epsilon + abs_s));
  return du * bracket + db / denom;
}

}  // namespace

void CostWeights::validate() const
{
  if ((q_terminal.array() < 0.0).any() || (q_tracking.array() < 0.0).any() ||
      (r_control.array() < 0.0).any()) {
    throw std::invalid_argument("CostWeights: quadratic weights must be non-negative");
  }
  if (sv_weight < 0.0) {
    throw std::invalid_argument("CostWeights: sv_weight must be non-negative");
  }
  if (!(discount_time > 0.0) || !(epsilon > 0.0) || !(ellipse_a > 0.0) || !(ellipse_b > 0.0)) {
    throw std::invalid_argument("CostWeights: shape parameters must be positive");
  }
}

double terminal_cost(const EvState & x_n, const EvState & terminal_ref, const CostWeights & w)
{
  const Vec5 d = state_diff(x_n, terminal_ref);
  return d.cwiseProduct(masked_diag(w.q_terminal, w.terminal_selector)).dot(d);
}

double goal_cost(const EvState & x, const EvState & desired, const CostWeights & w)
{
  const Vec5 d = state_diff(x, desired);
  return d.cwiseProduct(masked_diag(w.q_tracking, w.tracking_selector)).dot(d);
}

double barrier_h(double px, double py, const SvState & o, const CostWeights & w)
{
  const double dx = (px - o.ox) / w.ellipse_a;
  const double dy = (py - o.oy) / w.ellipse_b;
  return dx * dx + dy * dy - 1.0;
}

double safety_H(double h, const CostWeights & w)
{
  const double denom = std::max(w.eta + h, kProximityFloor);
  const double s = h - w.c;
  const double bracket = 1.0 - s / (w.epsilon + std::abs(s));
  return bracket / denom;
}

double discount_weight(const CostWeights & w, double t)
{
  return w.sv_weight * std::exp(-t / w.discount_time);
}

double safety_cost(
  const EvState & x, std::span<const SvState> svs, double t, const CostWeights & w)
{
  const double wt = discount_weight(w, t);
  double sum = 0.0;
  for (const auto & o : svs) {
    sum += wt * safety_H(barrier_h(x.px, x.py, o, w), w);
  }
  return sum;
}

double running_cost(
  const EvState & x, const ControlInput & u, const EvState & desired,
  std::span<const SvState> svs, double t, const CostWeights & w)
{
  const Vec2 uv = u.vec();
  return goal_cost(x, desired, w) + safety_cost(x, svs, t, w) +
         uv.cwiseProduct(w.r_control).dot(uv);
}

StageDerivatives stage_derivatives(
  const EvState & x, const ControlInput & u, const EvState & desired,
  std::span<const SvState> svs, double t, const CostWeights & w)
{
  StageDerivatives d;

  // tracking quadratic: exact gradient and Hessian
  const Vec5 qm = masked_diag(w.q_tracking, w.tracking_selector);
  const Vec5 dx = state_diff(x, desired);
  d.gradient.head<5>() = 2.0 * qm.cwiseProduct(dx);
  d.hessian.topLeftCorner<5, 5>() = (2.0 * qm).asDiagonal();

  // control energy: exact
  const Vec2 uv = u.vec();
  d.gradient.tail<2>() = 2.0 * w.r_control.cwiseProduct(uv);
  d.hessian.bottomRightCorner<2, 2>() = (2.0 * w.r_control).asDiagonal();

  // obstacle term: gradient via chain rule, PSD Hessian as the outer product of
  // the gradient of sqrt(cost) (Gauss-Newton on the square-root residual)
  const double wt = discount_weight(w, t);
  for (const auto & o : svs) {
    const double h = barrier_h(x.px, x.py, o, w);
    Vec5 grad_h = Vec5::Zero();
    grad_h(0) = 2.0 * (x.px - o.ox) / (w.ellipse_a * w.ellipse_a);
    grad_h(1) = 2.0 * (x.py - o.oy) / (w.ellipse_b * w.ellipse_b);

    const double cost = wt * safety_H(h, w);
    const Vec5 grad_c = wt * safety_H_slope(h, w) * grad_h;
    d.gradient.head<5>() += grad_c;
    d.hessian.topLeftCorner<5, 5>() +=
      grad_c * grad_c.transpose() / (2.0 * std::max(cost, kOuterProductFloor));
  }
  return d;
}

void terminal_derivatives(
  const EvState & x_n, const EvState & terminal_ref, const CostWeights & w, Vec5 & grad,
  Mat5 & hess)
{
  const Vec5 qt = masked_diag(w.q_terminal, w.terminal_selector);
  const Vec5 d = state_diff(x_n, terminal_ref);
  grad = 2.0 * qt.cwiseProduct(d);
  hess = (2.0 * qt).asDiagonal();
}

bool terminal_weight_dominates(const CostWeights & w, double summed_running_cost)
{
  const Vec5 unit = w.terminal_selector;  // unit deviation on every selected entry
  const double unit_terminal =
    unit.cwiseProduct(masked_diag(w.q_terminal, w.terminal_selector)).dot(unit);
  return unit_terminal > summed_running_cost;
}

}  // namespace pto
