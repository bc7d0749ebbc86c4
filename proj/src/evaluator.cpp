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

#include "pto/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pto
{

namespace
{

// shared shape of all per-stage metrics: plain sum up to stage N_c - 1, then
// exponentially decaying weights e^{-(i - N_c) / gamma} from stage N_c on
// (indices are 1-based; errors[j] holds the squared error of stage j + 1)
double discounted_sum(const std::vector<double> & errors, int N_c, double gamma)
{
  double total = 0.0;
  for (size_t j = 0; j < errors.size(); ++j) {
    const int i = static_cast<int>(j) + 1;
    const double w = (i < N_c) ? 1.0 : std::exp(-static_cast<double>(i - N_c) / gamma);
    total += w * errors[j];
  }
  return total;
}

bool lane_matches(const CandidateTrajectory & cand, int lane)
{
  return cand.spec.lane == lane;
}

}  // namespace

void EvalWeights::validate() const
{
  const auto fail = [](const std::string & what) { throw std::invalid_argument(what); };
  if (!(w_g >= 0.0) || !(w_l >= 0.0) || !(w_c >= 0.0) || !(w_m >= 0.0)) {
    fail("evaluation weights must be non-negative");
  }
  if (N_c < 1) {
    fail("the undiscounted stage count N_c must be at least 1");
  }
  if (!(gamma_g > 0.0) || !(gamma_l > 0.0) || !(gamma_c > 0.0)) {
    fail("discount time constants must be positive");
  }
  if (!std::isfinite(v_g)) {
    fail("the speed goal must be finite");
  }
}

double metric_goal(const CandidateTrajectory & cand, const EvalWeights & ew)
{
  std::vector<double> errors;
  errors.reserve(cand.solution.vars.states.size());
  for (const auto & x : cand.solution.vars.states) {
    const double e = x.v - ew.v_g;
    errors.push_back(e * e);
  }
  return discounted_sum(errors, ew.N_c, ew.gamma_g);
}

double metric_lateral(
  const CandidateTrajectory & cand, double lane_center_y, const EvalWeights & ew)
{
  std::vector<double> errors;
  errors.reserve(cand.solution.vars.states.size());
  for (const auto & x : cand.solution.vars.states) {
    const double e = x.py - lane_center_y;
    errors.push_back(e * e);
  }
  return discounted_sum(errors, ew.N_c, ew.gamma_l);
}

double metric_comfort(const CandidateTrajectory & cand, const EvalWeights & ew, double Ts)
{
  const auto & u = cand.solution.vars.controls;
  if (u.size() < 2) {
    return 0.0;
  }
  std::vector<double> errors;
  errors.reserve(u.size() - 1);
  for (size_t k = 1; k < u.size(); ++k) {
    const double jerk = (u[k].a - u[k - 1].a) / Ts;
    errors.push_back(jerk * jerk);
  }
  return discounted_sum(errors, ew.N_c, ew.gamma_c);
}

double metric_consistency(const CandidateSpec & spec, double prev_target_y)
{
  const double shift = spec.target_y - prev_target_y;
  return shift * shift;
}

std::vector<double> normalize(const std::vector<double> & raw)
{
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) {
    return out;
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double range = hi - lo;
  // a constant list carries no ranking information; mapping it to zeros also
  // avoids dividing by a vanishing range
  if (!(range > 1e-9 * std::max(1.0, std::abs(hi)))) {
    return out;
  }
  for (size_t i = 0; i < raw.size(); ++i) {
    out[i] = (raw[i] - lo) / range;
  }
  return out;
}

SelectionResult select(
  const std::vector<CandidateTrajectory> & cands, const EvalWeights & ew, double Ts,
  int prev_lane, double prev_target_y)
{
  ew.validate();

  SelectionResult result;
  result.scores.resize(cands.size());

  std::vector<size_t> feasible;
  for (size_t i = 0; i < cands.size(); ++i) {
    ScoredCandidate & sc = result.scores[i];
    sc.id = cands[i].spec.id;
    sc.feasible = cands[i].feasible;
    sc.C_g = metric_goal(cands[i], ew);
    sc.C_l = metric_lateral(cands[i], cands[i].spec.target_y, ew);
    sc.C_c = metric_comfort(cands[i], ew, Ts);
    sc.C_m = metric_consistency(cands[i].spec, prev_target_y);
    if (cands[i].feasible) {
      feasible.push_back(i);
    }
  }
  if (feasible.empty()) {
    return result;
  }

  // each metric is rescaled onto [0, 1] across the feasible candidates only,
  // so an unsafe outlier cannot compress the spread of the real contenders
  std::vector<double> raw_g, raw_l, raw_c, raw_m;
  for (const size_t i : feasible) {
    raw_g.push_back(result.scores[i].C_g);
    raw_l.push_back(result.scores[i].C_l);
    raw_c.push_back(result.scores[i].C_c);
    raw_m.push_back(result.scores[i].C_m);
  }
  const std::vector<double> f_g = normalize(raw_g);
  const std::vector<double> f_l = normalize(raw_l);
  const std::vector<double> f_c = normalize(raw_c);
  const std::vector<double> f_m = normalize(raw_m);

  size_t best = std::numeric_limits<size_t>::max();
  for (size_t j = 0; j < feasible.size(); ++j) {
    const size_t i = feasible[j];
    ScoredCandidate & sc = result.scores[i];
    sc.F_g = f_g[j];
    sc.F_l = f_l[j];
    sc.F_c = f_c[j];
    sc.F_m = f_m[j];
    sc.s = ew.w_g * sc.F_g + ew.w_l * sc.F_l + ew.w_c * sc.F_c + ew.w_m * sc.F_m;

    if (best == std::numeric_limits<size_t>::max()) {
      best = i;
      continue;
    }
    const ScoredCandidate & bs = result.scores[best];
    if (sc.s < bs.s) {
      best = i;
    } else if (sc.s == bs.s) {
      // exact tie: staying on the previous lane wins, then the lower id
      const bool here = lane_matches(cands[i], prev_lane);
      const bool there = lane_matches(cands[best], prev_lane);
      if ((here && !there) || (here == there && sc.id < bs.id)) {
        best = i;
      }
    }
  }

  result.found = true;
  result.candidate_index = static_cast<int>(best);
  result.lane = cands[best].spec.lane;
  return result;
}

}  // namespace pto
