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

#include "pto/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace pto
{

double wrap_angle(double a)
{
  // remainder() lands in [-pi, pi]; fold the open end so exact -pi becomes +pi
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) {
    r += 2.0 * M_PI;
  }
  return r;
}

Vec5 EvState::vec() const
{
  Vec5 x;
  x << px, py, theta, v, omega;
  return x;
}

EvState EvState::from_vec(const Vec5 & x)
{
  return EvState{x(0), x(1), wrap_angle(x(2)), x(3), x(4)};
}

Vec2 ControlInput::vec() const
{
  return Vec2(a, omega_dot);
}

ControlInput ControlInput::from_vec(const Vec2 & u)
{
  return ControlInput{u(0), u(1)};
}

void VehicleParams::validate() const
{
  if (!(wheelbase > 0.0)) {
    throw std::invalid_argument("VehicleParams: wheelbase must be positive");
  }
  const bool ordered = v_min <= v_max && theta_min <= theta_max && omega_min <= omega_max &&
                       a_min <= a_max && omega_dot_min <= omega_dot_max && py_min <= py_max;
  if (!ordered) {
    throw std::invalid_argument("VehicleParams: a lower bound exceeds its upper bound");
  }
}

Vec5 bicycle_ode(const EvState & x, const ControlInput & u)
{
  Vec5 dx;
  dx << x.v * std::cos(x.theta), x.v * std::sin(x.theta), x.omega, u.a, u.omega_dot;
  return dx;
}

namespace
{

// Jacobian of bicycle_ode w.r.t. the state, evaluated at raw state vector x.
Mat5 ode_jacobian_x(const Vec5 & x)
{
  const double th = x(2);
  const double v = x(3);
  Mat5 J = Mat5::Zero();
  J(0, 2) = -v * std::sin(th);
  J(0, 3) = std::cos(th);
  J(1, 2) = v * std::cos(th);
  J(1, 3) = std::sin(th);
  J(2, 4) = 1.0;
  return J;
}

Vec5 ode_rhs(const Vec5 & x, const Vec2 & u)
{
  Vec5 dx;
  dx << x(3) * std::cos(x(2)), x(3) * std::sin(x(2)), x(4), u(0), u(1);
  return dx;
}

}  // namespace

EvState rk4_step(const EvState & x, const ControlInput & u, double dt)
{
  const Vec5 x0 = x.vec();
  const Vec2 uv = u.vec();
  const Vec5 k1 = ode_rhs(x0, uv);
  const Vec5 k2 = ode_rhs(x0 + 0.5 * dt * k1, uv);
  const Vec5 k3 = ode_rhs(x0 + 0.5 * dt * k2, uv);
  const Vec5 k4 = ode_rhs(x0 + dt * k3, uv);
  const Vec5 x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return EvState::from_vec(x1);
}

void rk4_jacobians(const EvState & x, const ControlInput & u, double dt, Mat5 & A, Mat52 & B)
{
  const Vec5 x0 = x.vec();
  const Vec2 uv = u.vec();

  const Vec5 k1 = ode_rhs(x0, uv);
  const Vec5 x2 = x0 + 0.5 * dt * k1;
  const Vec5 k2 = ode_rhs(x2, uv);
  const Vec5 x3 = x0 + 0.5 * dt * k2;
  const Vec5 k3 = ode_rhs(x3, uv);
  const Vec5 x4 = x0 + dt * k3;

  const Mat5 J1 = ode_jacobian_x(x0);
  const Mat5 J2 = ode_jacobian_x(x2);
  const Mat5 J3 = ode_jacobian_x(x3);
  const Mat5 J4 = ode_jacobian_x(x4);

  Mat52 Ju = Mat52::Zero();
  Ju(3, 0) = 1.0;
  Ju(4, 1) = 1.0;

  // chain rule through the four stages
  const Mat5 Dk1 = J1;
  const Mat5 Dk2 = J2 * (Mat5::Identity() + 0.5 * dt * Dk1);
  const Mat5 Dk3 = J3 * (Mat5::Identity() + 0.5 * dt * Dk2);
  const Mat5 Dk4 = J4 * (Mat5::Identity() + dt * Dk3);
  A = Mat5::Identity() + dt / 6.0 * (Dk1 + 2.0 * Dk2 + 2.0 * Dk3 + Dk4);

  const Mat52 Ek1 = Ju;
  const Mat52 Ek2 = J2 * (0.5 * dt * Ek1) + Ju;
  const Mat52 Ek3 = J3 * (0.5 * dt * Ek2) + Ju;
  const Mat52 Ek4 = J4 * (dt * Ek3) + Ju;
  B = dt / 6.0 * (Ek1 + 2.0 * Ek2 + 2.0 * Ek3 + Ek4);
}

StateTangent state_diff(const EvState & a, const EvState & b)
{
  StateTangent d = a.vec() - b.vec();
  d(2) = wrap_angle(d(2));
  return d;
}

SvState predict_sv(const SvState & o, double t)
{
  return SvState{o.ox + o.ovx * t, o.oy + o.ovy * t, o.ovx, o.ovy};
}

std::vector<EvState> rollout(
  const EvState & x0, const std::vector<ControlInput> & controls, double dt)
{
  std::vector<EvState> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (const auto & u : controls) {
    states.push_back(rk4_step(states.back(), u, dt));
  }
  return states;
}

double steering_angle(const EvState & x, const VehicleParams & p)
{
  return std::atan(x.omega * p.wheelbase / std::max(x.v, 0.1));
}

}  // namespace pto
