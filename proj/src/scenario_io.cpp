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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pto/harness.hpp"

namespace pto
{

namespace
{

[[noreturn]] void fail_at(int line, const std::string & what)
{
  throw ScenarioError("scenario line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void fail(const std::string & what)
{
  throw ScenarioError("scenario: " + what);
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string & text, int line)
{
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception &) {
    fail_at(line, "expected a number, got '" + text + "'");
  }
  if (used != text.size()) {
    fail_at(line, "trailing characters after number '" + text + "'");
  }
  return v;
}

int parse_int(const std::string & text, int line)
{
  size_t used = 0;
  long v = 0;
  try {
    v = std::stol(text, &used);
  } catch (const std::exception &) {
    fail_at(line, "expected an integer, got '" + text + "'");
  }
  if (used != text.size()) {
    fail_at(line, "trailing characters after integer '" + text + "'");
  }
  return static_cast<int>(v);
}

// one parsed section: key -> (raw text, line number)
struct Section
{
  std::string name;
  std::map<std::string, std::pair<std::string, int>> values;
  bool seen{false};

  bool has(const std::string & key) const { return values.count(key) != 0; }

  const std::pair<std::string, int> & require(const std::string & key) const
  {
    const auto it = values.find(key);
    if (it == values.end()) {
      fail("missing key '" + key + "' in [" + name + "]");
    }
    return it->second;
  }

  double number(const std::string & key) const
  {
    const auto & [text, line] = require(key);
    return parse_double(text, line);
  }

  double number_or(const std::string & key, double fallback) const
  {
    return has(key) ? number(key) : fallback;
  }

  int integer(const std::string & key) const
  {
    const auto & [text, line] = require(key);
    return parse_int(text, line);
  }

  int integer_or(const std::string & key, int fallback) const
  {
    return has(key) ? integer(key) : fallback;
  }
};

const std::set<std::string> kLaneKeys = {"centers", "width"};
const std::set<std::string> kEvKeys = {"px", "py", "theta", "v", "omega", "a", "omega_dot"};
const std::set<std::string> kPlannerKeys = {"duration", "period", "N", "M", "v_g"};
const std::set<std::string> kWeightKeys = {
  "sv_weight", "discount_time", "eta",     "epsilon", "c",   "ellipse_a", "ellipse_b",
  "w_g",       "w_l",           "w_c",     "w_m",     "N_c", "gamma_g",   "gamma_l",
  "gamma_c"};
const std::set<std::string> kSvKeys = {
  "id", "x", "y", "v", "vy", "v0", "lane", "a_idm", "b_idm", "s0", "t_hw", "delta_exp",
  "brake_min"};

const std::set<std::string> & allowed_keys(const std::string & section)
{
  if (section == "lanes") {
    return kLaneKeys;
  }
  if (section == "ev") {
    return kEvKeys;
  }
  if (section == "planner") {
    return kPlannerKeys;
  }
  if (section == "weights") {
    return kWeightKeys;
  }
  return kSvKeys;
}

bool finite_state(const EvState & x)
{
  return std::isfinite(x.px) && std::isfinite(x.py) && std::isfinite(x.theta) &&
         std::isfinite(x.v) && std::isfinite(x.omega);
}

}  // namespace

void Scenario::validate() const
{
  try {
    lanes.validate();
    weights.validate();
    eval.validate();
    vehicle.validate();
  } catch (const std::exception & e) {
    fail(e.what());
  }
  if (!(duration > 0.0)) {
    fail("duration must be positive");
  }
  if (!(period > 0.0)) {
    fail("period must be positive");
  }
  if (N < 1) {
    fail("N must be at least 1");
  }
  if (M < 0) {
    fail("M must be non-negative");
  }
  if (!finite_state(ev0) || !std::isfinite(u0.a) || !std::isfinite(u0.omega_dot)) {
    fail("the ego initial state and control must be finite");
  }
  for (size_t i = 0; i < agents.size(); ++i) {
    const auto & ag = agents[i];
    const std::string tag = "sv " + std::to_string(i) + ": ";
    if (ag.lane < 0 || ag.lane >= static_cast<int>(lanes.centers.size())) {
      fail(tag + "lane index out of range");
    }
    if (!(ag.v0 > 0.0)) {
      fail(tag + "target speed v0 must be positive");
    }
    if (!(ag.state.ovx >= 0.0)) {
      fail(tag + "initial speed must be non-negative");
    }
    if (
      !std::isfinite(ag.state.ox) || !std::isfinite(ag.state.oy) ||
      !std::isfinite(ag.state.ovx) || !std::isfinite(ag.state.ovy)) {
      fail(tag + "initial state must be finite");
    }
    if (
      !(ag.idm.a_idm > 0.0) || !(ag.idm.b_idm > 0.0) || !(ag.idm.s0 > 0.0) ||
      !(ag.idm.T_hw > 0.0) || !(ag.idm.delta_exp > 0.0)) {
      fail(tag + "driver-model parameters must be positive");
    }
    if (!(ag.idm.brake_min < 0.0)) {
      fail(tag + "the braking floor must be negative");
    }
  }
}

Scenario load_scenario(const std::filesystem::path & path)
{
  std::ifstream is(path);
  if (!is) {
    fail("cannot open file '" + path.string() + "'");
  }

  Section lanes{"lanes", {}, false};
  Section ev{"ev", {}, false};
  Section planner{"planner", {}, false};
  Section weights{"weights", {}, false};
  std::vector<Section> svs;
  Section * current = nullptr;

  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) {
      raw.erase(hash);
    }
    const std::string text = trim(raw);
    if (text.empty()) {
      continue;
    }

    if (text.front() == '[') {
      if (text == "[[sv]]") {
        svs.push_back(Section{"sv", {}, true});
        current = &svs.back();
        continue;
      }
      Section * named = nullptr;
      if (text == "[lanes]") {
        named = &lanes;
      } else if (text == "[ev]") {
        named = &ev;
      } else if (text == "[planner]") {
        named = &planner;
      } else if (text == "[weights]") {
        named = &weights;
      } else {
        fail_at(line, "unknown section '" + text + "'");
      }
      if (named->seen) {
        fail_at(line, "duplicate section '" + text + "'");
      }
      named->seen = true;
      current = named;
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      fail_at(line, "expected 'key = value', got '" + text + "'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail_at(line, "expected 'key = value', got '" + text + "'");
    }
    if (current == nullptr) {
      fail_at(line, "key '" + key + "' appears before any section");
    }
    if (allowed_keys(current->name).count(key) == 0) {
      fail_at(line, "unknown key '" + key + "' in [" + current->name + "]");
    }
    if (current->has(key)) {
      fail_at(line, "duplicate key '" + key + "' in [" + current->name + "]");
    }
    // every value in this schema is a number or a list of numbers; checking
    // here reports syntax problems in file order, before structural checks
    std::istringstream tokens(value);
    std::string token;
    while (tokens >> token) {
      (void)parse_double(token, line);
    }
    current->values[key] = {value, line};
  }

  if (!lanes.seen) {
    fail("missing required section [lanes]");
  }
  if (!ev.seen) {
    fail("missing required section [ev]");
  }

  Scenario sc;

  {
    const auto & [text, centers_line] = lanes.require("centers");
    std::istringstream ss(text);
    std::string token;
    sc.lanes.centers.clear();
    while (ss >> token) {
      sc.lanes.centers.push_back(parse_double(token, centers_line));
    }
    if (sc.lanes.centers.empty()) {
      fail_at(centers_line, "centers must list at least one lane");
    }
    sc.lanes.width = lanes.number_or("width", 4.0);
  }

  sc.ev0.px = ev.number("px");
  sc.ev0.py = ev.number("py");
  sc.ev0.theta = ev.number("theta");
  sc.ev0.v = ev.number("v");
  sc.ev0.omega = ev.number("omega");
  sc.u0.a = ev.number_or("a", 0.0);
  sc.u0.omega_dot = ev.number_or("omega_dot", 0.0);

  sc.duration = planner.number_or("duration", 20.0);
  sc.period = planner.number_or("period", 0.1);
  sc.N = planner.integer_or("N", 50);
  sc.M = planner.integer_or("M", 3);
  sc.eval.v_g = planner.number_or("v_g", 15.0);

  sc.weights.sv_weight = weights.number_or("sv_weight", sc.weights.sv_weight);
  sc.weights.discount_time = weights.number_or("discount_time", sc.weights.discount_time);
  sc.weights.eta = weights.number_or("eta", sc.weights.eta);
  sc.weights.epsilon = weights.number_or("epsilon", sc.weights.epsilon);
  sc.weights.c = weights.number_or("c", sc.weights.c);
  sc.weights.ellipse_a = weights.number_or("ellipse_a", sc.weights.ellipse_a);
  sc.weights.ellipse_b = weights.number_or("ellipse_b", sc.weights.ellipse_b);
  sc.eval.w_g = weights.number_or("w_g", sc.eval.w_g);
  sc.eval.w_l = weights.number_or("w_l", sc.eval.w_l);
  sc.eval.w_c = weights.number_or("w_c", sc.eval.w_c);
  sc.eval.w_m = weights.number_or("w_m", sc.eval.w_m);
  sc.eval.N_c = weights.integer_or("N_c", sc.eval.N_c);
  sc.eval.gamma_g = weights.number_or("gamma_g", sc.eval.gamma_g);
  sc.eval.gamma_l = weights.number_or("gamma_l", sc.eval.gamma_l);
  sc.eval.gamma_c = weights.number_or("gamma_c", sc.eval.gamma_c);

  std::vector<std::pair<int, SvAgent>> agents;
  std::set<int> ids;
  for (const Section & sv : svs) {
    const int id = sv.integer("id");
    if (!ids.insert(id).second) {
      fail("duplicate sv id " + std::to_string(id));
    }
    SvAgent ag;
    ag.state.ox = sv.number("x");
    ag.state.oy = sv.number("y");
    ag.state.ovx = sv.number("v");
    ag.state.ovy = sv.number_or("vy", 0.0);
    ag.v0 = sv.number("v0");
    ag.lane = sv.integer("lane");
    ag.idm.a_idm = sv.number_or("a_idm", ag.idm.a_idm);
    ag.idm.b_idm = sv.number_or("b_idm", ag.idm.b_idm);
    ag.idm.s0 = sv.number_or("s0", ag.idm.s0);
    ag.idm.T_hw = sv.number_or("t_hw", ag.idm.T_hw);
    ag.idm.delta_exp = sv.number_or("delta_exp", ag.idm.delta_exp);
    ag.idm.brake_min = sv.number_or("brake_min", ag.idm.brake_min);
    agents.emplace_back(id, ag);
  }
  std::sort(agents.begin(), agents.end(), [](const auto & a, const auto & b) {
    return a.first < b.first;
  });
  for (auto & [id, ag] : agents) {
    sc.agents.push_back(ag);
  }

  sc.validate();
  return sc;
}

}  // namespace pto
