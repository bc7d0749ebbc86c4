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

#ifndef PTO__DYNAMICS_HPP_
#define PTO__DYNAMICS_HPP_

#include <Eigen/Dense>

#include <vector>

namespace pto
{

using Vec2 = Eigen::Vector2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat52 = Eigen::Matrix<double, 5, 2>;

/// Wrap an angle to (-pi, pi]; exact -pi maps to +pi.
double wrap_angle(double a);

/// Ego vehicle state: position, heading, speed, yaw rate.
struct EvState
{
  double px{0.0};
  double py{0.0};
  double theta{0.0};
  double v{0.0};
  double omega{0.0};

  Vec5 vec() const;
  static EvState from_vec(const Vec5 & x);  // wraps theta
};

/// Control input: longitudinal acceleration and yaw-rate rate.
struct ControlInput
{
  double a{0.0};
  double omega_dot{0.0};

  Vec2 vec() const;
  static ControlInput from_vec(const Vec2 & u);
};

/// Vehicle geometry and state/control box limits.
struct VehicleParams
{
  double wheelbase{2.7};
  double v_min{0.0};
  double v_max{24.0};
  double theta_min{-0.227};
  double theta_max{0.227};
  double omega_min{-5.0};
  double omega_max{5.0};
  double a_min{-1.5};
  double a_max{3.0};
  double omega_dot_min{-2.0};
  double omega_dot_max{2.0};
  double py_min{-10.5};
  double py_max{-1.5};

  /// Throws std::invalid_argument when a lower bound exceeds its upper bound
  /// or the wheelbase is not positive.
  void validate() const;
};

/// Surrounding-vehicle snapshot used for prediction: position and velocity.
struct SvState
{
  double ox{0.0};
  double oy{0.0};
  double ovx{0.0};
  double ovy{0.0};
};

/// Difference on the state manifold (heading wrapped to (-pi, pi]).
using StateTangent = Vec5;

/// Continuous-time kinematic bicycle: dx/dt = [v cos th, v sin th, omega, a, omega_dot].
Vec5 bicycle_ode(const EvState & x, const ControlInput & u);

/// One RK4 step of bicycle_ode with zero-order-hold controls; output heading wrapped.
EvState rk4_step(const EvState & x, const ControlInput & u, double dt);

/// Jacobians of the discrete RK4 map: A = d(x+)/dx (5x5), B = d(x+)/du (5x2).
void rk4_jacobians(const EvState & x, const ControlInput & u, double dt, Mat5 & A, Mat52 & B);

/// a - b componentwise with the heading entry wrapped.
StateTangent state_diff(const EvState & a, const EvState & b);

/// Constant-velocity prediction of an obstacle t seconds ahead.
SvState predict_sv(const SvState & o, double t);

/// Forward simulation under a control sequence; returns N+1 states starting at x0.
std::vector<EvState> rollout(
  const EvState & x0, const std::vector<ControlInput> & controls, double dt);

/// Equivalent steering angle for logging: atan(omega * L / max(v, 0.1)).
double steering_angle(const EvState & x, const VehicleParams & p);

}  // namespace pto

#endif  // PTO__DYNAMICS_HPP_
