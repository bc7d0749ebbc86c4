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

#include "pto/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pto
{

namespace
{

constexpr double kVehicleLength = 5.0;  // nominal center-to-center exclusion [m]
constexpr double kMinGap = 0.1;         // numerical floor for a collapsed gap [m]

struct Leader
{
  double x{std::numeric_limits<double>::infinity()};
  double v{0.0};
  bool found{false};
};

}  // namespace

double idm_accel(double v, double dv, double s, const SvAgent & agent)
{
  const IdmParams & p = agent.idm;
  const double s_star = p.s0 + v * p.T_hw + v * dv / (2.0 * std::sqrt(p.a_idm * p.b_idm));
  const double ratio = s_star / s;
  const double a = p.a_idm * (1.0 - std::pow(v / agent.v0, p.delta_exp) - ratio * ratio);
  return std::clamp(a, p.brake_min, p.a_idm);
}

std::vector<SvAgent> step_traffic(
  const std::vector<SvAgent> & agents, double dt, const EvState * ego, int ego_lane)
{
  std::vector<SvAgent> out = agents;
  for (size_t i = 0; i < agents.size(); ++i) {
    const SvAgent & me = agents[i];

    Leader lead;
    for (size_t j = 0; j < agents.size(); ++j) {
      if (j == i || agents[j].lane != me.lane) continue;
      const double xj = agents[j].state.ox;
      if (xj > me.state.ox && xj < lead.x) {
        lead = Leader{xj, agents[j].state.ovx, true};
      }
    }
    if (ego != nullptr && ego_lane == me.lane && ego->px > me.state.ox && ego->px < lead.x) {
      lead = Leader{ego->px, ego->v * std::cos(ego->theta), true};
    }

    double a = 0.0;
    if (lead.found) {
      const double gap = std::max(lead.x - me.state.ox - kVehicleLength, kMinGap);
      a = idm_accel(me.state.ovx, me.state.ovx - lead.v, gap, me);
    } else {
      a = idm_accel(me.state.ovx, 0.0, std::numeric_limits<double>::infinity(), me);
    }

    out[i].state.ox = me.state.ox + me.state.ovx * dt;
    out[i].state.ovx = std::max(0.0, me.state.ovx + a * dt);
  }
  return out;
}

std::vector<SvState> perceive_nearest(
  const EvState & ev, const std::vector<SvAgent> & agents, int M)
{
  std::vector<size_t> order(agents.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const double da = std::hypot(agents[a].state.ox - ev.px, agents[a].state.oy - ev.py);
    const double db = std::hypot(agents[b].state.ox - ev.px, agents[b].state.oy - ev.py);
    return da < db;
  });

  const size_t n = std::min(static_cast<size_t>(std::max(M, 0)), agents.size());
  std::vector<SvState> seen;
  seen.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    seen.push_back(agents[order[i]].state);
  }
  return seen;
}

}  // namespace pto
