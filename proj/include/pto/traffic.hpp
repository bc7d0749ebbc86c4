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

#ifndef PTO__TRAFFIC_HPP_
#define PTO__TRAFFIC_HPP_

#include <vector>

#include "pto/dynamics.hpp"

namespace pto
{

/// Intelligent-driver-model parameters of one surrounding vehicle.
struct IdmParams
{
  double a_idm{1.5};      ///< maximum acceleration [m/s^2]
  double b_idm{2.0};      ///< comfortable deceleration [m/s^2]
  double s0{2.0};         ///< jam distance [m]
  double T_hw{1.5};       ///< desired time headway [s]
  double delta_exp{4.0};  ///< free-flow exponent
  double brake_min{-4.0};  ///< hard braking floor [m/s^2]
};

/// A simulated surrounding vehicle: kinematic snapshot plus driver model.
struct SvAgent
{
  SvState state;
  double v0{10.0};  ///< target cruise speed [m/s], > 0
  int lane{0};      ///< lane index; agents only interact within a lane
  IdmParams idm;
};

/// Intelligent-driver-model acceleration for speed v, closing speed dv to the
/// leader (positive when approaching), and bumper gap s (> 0; +infinity when
/// the road ahead is free). The desired-gap term is applied verbatim — no
/// positivity guard — and the result is clamped to [brake_min, a_idm].
double idm_accel(double v, double dv, double s, const SvAgent & agent);

/// Advance every agent by one synchronous Euler step of length dt against the
/// pre-step snapshot: ox moves with the pre-step speed, then the speed applies
/// idm_accel toward the nearest vehicle ahead in the same lane (clamped >= 0).
/// Lateral positions never change. When ego is non-null it acts as a leader
/// for agents in lane ego_lane, at its longitudinal velocity component.
std::vector<SvAgent> step_traffic(
  const std::vector<SvAgent> & agents, double dt, const EvState * ego = nullptr,
  int ego_lane = -1);

/// The M agents closest to the EV by Euclidean distance (all of them when
/// fewer exist), ordered nearest first; exact ties keep the lower agent index.
std::vector<SvState> perceive_nearest(
  const EvState & ev, const std::vector<SvAgent> & agents, int M);

}  // namespace pto

#endif  // PTO__TRAFFIC_HPP_
