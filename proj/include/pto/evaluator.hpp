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

#ifndef PTO_EVALUATOR_HPP
#define PTO_EVALUATOR_HPP

#include <vector>

#include "pto/planner.hpp"

namespace pto
{

// Weights and horizon parameters for candidate scoring.  Each metric is a
// discounted sum over the trajectory: stages before N_c count in full, later
// stages decay exponentially with the matching gamma.
struct EvalWeights
{
  double w_g{2500.0};  // weight on the normalized speed-goal metric
  double w_l{150.0};   // weight on the normalized lateral-offset metric
  double w_c{100.0};   // weight on the normalized comfort (jerk) metric
  double w_m{100.0};   // weight on the normalized target-consistency metric
  int N_c{10};         // first discounted stage index (1-based)
  double gamma_g{40.0};
  double gamma_l{40.0};
  double gamma_c{40.0};
  double v_g{15.0};  // cruise speed goal [m/s]

  void validate() const;  // throws std::invalid_argument on bad values
};

// Raw and normalized metrics of one candidate.  The normalized fields and the
// total are only meaningful when the candidate is feasible: infeasible
// candidates never enter normalization and keep zeros there.
struct ScoredCandidate
{
  int id{-1};
  double C_g{0.0};
  double C_l{0.0};
  double C_c{0.0};
  double C_m{0.0};
  double F_g{0.0};
  double F_l{0.0};
  double F_c{0.0};
  double F_m{0.0};
  double s{0.0};  // weighted total of the normalized metrics
  bool feasible{true};
};

struct SelectionResult
{
  bool found{false};        // false when no candidate is feasible
  int candidate_index{-1};  // index into the candidate vector
  int lane{-1};             // lane of the winning candidate
  std::vector<ScoredCandidate> scores;  // one entry per candidate, input order
};

// Discounted squared deviation of the planned speeds from the cruise goal.
double metric_goal(const CandidateTrajectory & cand, const EvalWeights & ew);

// Discounted squared lateral offset from the given lane centerline.
double metric_lateral(
  const CandidateTrajectory & cand, double lane_center_y, const EvalWeights & ew);

// Discounted squared longitudinal jerk, finite-differenced from the planned
// acceleration sequence.
double metric_comfort(const CandidateTrajectory & cand, const EvalWeights & ew, double Ts);

// Squared shift of the lateral target relative to the previous cycle.
double metric_consistency(const CandidateSpec & spec, double prev_target_y);

// Affine rescaling of a metric list onto [0, 1].  A (numerically) constant
// list maps to all zeros so it cannot influence the ranking.
std::vector<double> normalize(const std::vector<double> & raw);

// Scores every candidate, normalizes each metric across the feasible ones,
// and picks the feasible candidate with the smallest weighted total.  Exact
// ties go to the previous lane first and then to the lowest candidate id.
SelectionResult select(
  const std::vector<CandidateTrajectory> & cands, const EvalWeights & ew, double Ts,
  int prev_lane, double prev_target_y);

}  // namespace pto

#endif  // PTO_EVALUATOR_HPP
