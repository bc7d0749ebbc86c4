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

#ifndef PTO__COSTS_HPP_
#define PTO__COSTS_HPP_

#include "pto/dynamics.hpp"

#include <span>

namespace pto
{

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat2 = Eigen::Matrix<double, 2, 2>;

/// Quadratic tracking/terminal weights plus obstacle-penalty shape parameters.
/// Selectors are 0/1 masks choosing which state entries each quadratic sees.
struct CostWeights
{
  Vec5 q_terminal{(Vec5() << 0.0, 1e9, 1e9, 0.0, 1e6).finished()};
  Vec5 terminal_selector{(Vec5() << 0.0, 1.0, 1.0, 0.0, 1.0).finished()};
  Vec5 q_tracking{(Vec5() << 0.0, 1e3, 0.0, 1e5, 0.0).finished()};
  Vec5 tracking_selector{(Vec5() << 0.0, 1.0, 0.0, 1.0, 0.0).finished()};
  Vec2 r_control{2e4, 1e6};

  double sv_weight{5e6};    // per-obstacle penalty scale (lambda)
  double discount_time{50.0};  // e^(-t/gamma) horizon discount (s)
  double eta{1.0};          // proximity pole offset: 1/(eta + h)
  double epsilon{1e-5};     // activation smoothing width
  double c{8.0};            // activation threshold in barrier units
  double ellipse_a{3.0};    // ellipse semi-axis, longitudinal (m)
  double ellipse_b{2.0};    // ellipse semi-axis, lateral (m)

  /// Throws std::invalid_argument on negative weights or non-positive shape params.
  void validate() const;
};

/// Gradient and Gauss-Newton Hessian of the stage cost over z = (x, u).
struct StageDerivatives
{
  Vec7 gradient{Vec7::Zero()};
  Mat7 hessian{Mat7::Zero()};
};

/// Terminal deviation cost: (sel*(xN - ref))' diag(q_terminal) (sel*(xN - ref)),
/// heading difference wrapped.
double terminal_cost(const EvState & x_n, const EvState & terminal_ref, const CostWeights & w);

/// Per-stage tracking cost with the tracking selector/diagonal.
double goal_cost(const EvState & x, const EvState & desired, const CostWeights & w);

/// Elliptical clearance value: (px-ox)^2/a^2 + (py-oy)^2/b^2 - 1.
/// Zero on the ellipse boundary, -1 at the obstacle center.
double barrier_h(double px, double py, const SvState & o, const CostWeights & w);

/// Smoothed proximity penalty of a clearance value:
/// 1/(eta+h) * (1 - (h-c)/(epsilon + |h-c|)), with eta+h floored at 1e-5.
/// ~2/(eta+h) once h < c, ~0 once h > c; strictly decreasing in h.
double safety_H(double h, const CostWeights & w);

/// Horizon discount applied to the obstacle penalty: lambda * e^(-t/gamma).
double discount_weight(const CostWeights & w, double t);

/// Sum of discounted safety_H over all obstacles at horizon offset t.
double safety_cost(
  const EvState & x, std::span<const SvState> svs, double t, const CostWeights & w);

/// goal_cost + safety_cost + u'Ru.
double running_cost(
  const EvState & x, const ControlInput & u, const EvState & desired,
  std::span<const SvState> svs, double t, const CostWeights & w);

/// Analytic gradient and positive-semidefinite Hessian approximation of
/// running_cost at (x, u). Quadratic terms contribute their exact Hessians;
/// the obstacle term contributes a rank-one outer product.
StageDerivatives stage_derivatives(
  const EvState & x, const ControlInput & u, const EvState & desired,
  std::span<const SvState> svs, double t, const CostWeights & w);

/// Gradient (5) and Hessian (5x5) of terminal_cost at x_n.
void terminal_derivatives(
  const EvState & x_n, const EvState & terminal_ref, const CostWeights & w, Vec5 & grad,
  Mat5 & hess);

/// Diagnostic for the weight hierarchy: the terminal cost of a unit deviation on the
/// selected terminal entries should exceed the summed running cost of a solution,
/// otherwise the terminal anchor no longer dominates and tuning has drifted.
bool terminal_weight_dominates(const CostWeights & w, double summed_running_cost);

}  // namespace pto

#endif  // PTO__COSTS_HPP_
