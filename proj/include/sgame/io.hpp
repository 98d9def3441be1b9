#pragma once

// Scenario files (JSON), trajectory files (CSV) and report serialization.
//
// Scenario layout:
//
//   {
//     "states": ["x_n", "x_a"], "actions": [...], "reactions": [...],
//     "kernel": {
//       "reaction_independent": true,
//       "rows": { "<action>": { "<state>": [p(x'_0), p(x'_1), ...] } }
//     },
//     "utilities": {
//       "sender":   { "benign": T, "malicious": T },
//       "receiver": { "benign": T, "malicious": T }
//     },
//     "prior": 0.1, "initial_state": "x_n", "true_type": "malicious",
//     "horizon": 2, "steps": 300, "seed": 0, "solution_concept": "signaling"
//   }
//
// Without the shorthand, kernel rows nest action -> reaction -> state. A
// utility table T nests state -> action -> reaction -> number; at any level a
// number broadcasts over the remaining dimensions and a "*" key supplies the
// value for labels that are not listed.

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgame/core_model.hpp"
#include "sgame/diagnostics.hpp"
#include "sgame/trajectory.hpp"

namespace sgame {

using json = nlohmann::json;

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedScenario {
  Scenario scenario;
  std::vector<std::string> warnings;
};

namespace detail {

inline const json& require(const json& obj, const std::string& key,
                           const std::string& path) {
  if (!obj.is_object())
    throw ScenarioError("field '" + path + "': expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ScenarioError("missing field '" + (path.empty() ? key : path + "." + key) + "'");
  return *it;
}

inline std::vector<std::string> label_array(const json& j,
                                            const std::string& path) {
  if (!j.is_array()) throw ScenarioError("field '" + path + "': expected an array");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string())
      throw ScenarioError("field '" + path + "': labels must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError("field '" + path + "': expected a number");
  return j.get<double>();
}

/// Looks up `label` under `node`, falling back to "*". Returns nullptr when
/// `node` is a number (broadcast).
inline const json* descend(const json& node, const std::string& label,
                           const std::string& path) {
  if (node.is_number()) return nullptr;
  if (!node.is_object())
    throw ScenarioError("field '" + path + "': expected an object or number");
  if (auto it = node.find(label); it != node.end()) return &*it;
  if (auto it = node.find("*"); it != node.end()) return &*it;
  throw ScenarioError("missing field '" + path + "." + label + "'");
}

inline double utility_entry(const json& table, const Alphabets& ab,
                            StateIndex x, ActionIndex a, ReactionIndex r,
                            std::string path) {
  const json* node = &table;
  const std::string* labels[] = {&ab.states[x], &ab.actions[a],
                                 &ab.reactions[r]};
  for (const auto* label : labels) {
    const json* child = descend(*node, *label, path);
    if (child == nullptr) break;
    path += "." + *label;
    node = child;
  }
  return number(*node, path);
}

/// Length mismatches are left for validate_kernel to report.
inline std::vector<double> kernel_row(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError("field '" + path + "': expected an array");
  std::vector<double> row;
  for (std::size_t i = 0; i < j.size(); ++i)
    row.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return row;
}

inline std::string row_name(const Alphabets& ab, const KernelViolation& v) {
  return "(" + ab.states[v.state] + ", " + ab.actions[v.action] + ", " +
         ab.reactions[v.reaction] + ")";
}

}  // namespace detail

/// Parses and validates a scenario document. Throws ScenarioError naming the
/// offending line (syntax) or field/entry (content).
inline LoadedScenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("parse error: ") + e.what());
  }
  using detail::require;
  LoadedScenario out;
  Scenario& s = out.scenario;
  try {
    s.alphabets.states =
        LabelSet("state", detail::label_array(require(doc, "states", ""), "states"));
    s.alphabets.actions = LabelSet(
        "action", detail::label_array(require(doc, "actions", ""), "actions"));
    s.alphabets.reactions = LabelSet(
        "reaction",
        detail::label_array(require(doc, "reactions", ""), "reactions"));
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  const Alphabets& ab = s.alphabets;
  const auto nx = ab.states.size(), na = ab.actions.size(),
             nr = ab.reactions.size();

  // Kernel
  const json& kj = require(doc, "kernel", "");
  const bool shorthand = kj.value("reaction_independent", false);
  const json& rows = require(kj, "rows", "kernel");
  s.kernel = TransitionKernel(nx, na, nr);
  for (ActionIndex a = 0; a < na; ++a) {
    const std::string pa = "kernel.rows." + ab.actions[a];
    auto ait = rows.find(ab.actions[a]);
    if (ait == rows.end()) continue;  // reported as missing rows below
    for (ReactionIndex r = 0; r < nr; ++r) {
      const json* by_state = &*ait;
      std::string path = pa;
      if (!shorthand) {
        auto rit = ait->find(ab.reactions[r]);
        if (rit == ait->end()) continue;
        by_state = &*rit;
        path += "." + ab.reactions[r];
      }
      for (StateIndex x = 0; x < nx; ++x) {
        auto xit = by_state->find(ab.states[x]);
        if (xit == by_state->end()) continue;
        s.kernel.set_row(x, a, r,
                         detail::kernel_row(*xit, path + "." + ab.states[x]));
      }
    }
  }
  const auto report = validate_kernel(s.kernel);
  if (!report.ok()) {
    std::string msg = "invalid kernel:";
    for (const auto& v : report.violations)
      msg += " row " + detail::row_name(ab, v) + ": " + v.message + ";";
    throw ScenarioError(msg);
  }
  const auto dist = check_distinguishability(s.kernel);
  for (const auto& w : dist.witnesses)
    out.warnings.push_back("actions " + ab.actions[w.first] + " and " +
                           ab.actions[w.second] +
                           " are indistinguishable at state " +
                           ab.states[w.state] + ", reaction " +
                           ab.reactions[w.reaction]);

  // Utilities
  const json& uj = require(doc, "utilities", "");
  s.utilities = UtilityTables(nx, na, nr);
  for (const char* who : {"sender", "receiver"}) {
    const json& side = require(uj, who, "utilities");
    for (SenderType t : {SenderType::kBenign, SenderType::kMalicious}) {
      const std::string name(to_string(t));
      const std::string path = std::string("utilities.") + who + "." + name;
      const json& table = require(side, name, std::string("utilities.") + who);
      for (StateIndex x = 0; x < nx; ++x)
        for (ActionIndex a = 0; a < na; ++a)
          for (ReactionIndex r = 0; r < nr; ++r) {
            const double v = detail::utility_entry(table, ab, x, a, r, path);
            if (std::string(who) == "sender")
              s.utilities.set_sender(t, x, a, r, v);
            else
              s.utilities.set_receiver(t, x, a, r, v);
          }
    }
  }

  try {
    s.prior_m = detail::number(require(doc, "prior", ""), "prior");
    const json& init = require(doc, "initial_state", "");
    if (!init.is_string() || !ab.states.contains(init.get<std::string>()))
      throw ScenarioError("field 'initial_state': unknown state");
    s.initial_state = ab.states.index_of(init.get<std::string>());
    const json& tt = require(doc, "true_type", "");
    if (!tt.is_string()) throw ScenarioError("field 'true_type': expected a string");
    s.true_type = parse_sender_type(tt.get<std::string>());
    const json& h = require(doc, "horizon", "");
    if (!h.is_number_integer()) throw ScenarioError("field 'horizon': expected an integer");
    s.horizon = h.get<int>();
    const json& st = require(doc, "steps", "");
    if (!st.is_number_integer()) throw ScenarioError("field 'steps': expected an integer");
    s.episode_length = st.get<int>();
    const json& seed = require(doc, "seed", "");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
      throw ScenarioError("field 'seed': expected an unsigned integer");
    s.base_seed = seed.get<std::uint64_t>();
    if (auto it = doc.find("solution_concept"); it != doc.end()) {
      if (!it->is_string())
        throw ScenarioError("field 'solution_concept': expected a string");
      s.solution_concept = parse_solution_concept(it->get<std::string>());
    }
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  return out;
}

inline LoadedScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

/// Fully explicit form (no shorthand); parses back to an identical Scenario.
inline json scenario_to_json(const Scenario& s) {
  const Alphabets& ab = s.alphabets;
  json doc;
  doc["states"] = ab.states.labels();
  doc["actions"] = ab.actions.labels();
  doc["reactions"] = ab.reactions.labels();
  json rows = json::object();
  for (ActionIndex a = 0; a < s.num_actions(); ++a)
    for (ReactionIndex r = 0; r < s.num_reactions(); ++r)
      for (StateIndex x = 0; x < s.num_states(); ++x) {
        const auto row = s.kernel.row(x, a, r);
        rows[ab.actions[a]][ab.reactions[r]][ab.states[x]] =
            std::vector<double>(row.begin(), row.end());
      }
  doc["kernel"] = {{"reaction_independent", false}, {"rows", rows}};
  for (const char* who : {"sender", "receiver"}) {
    for (SenderType t : {SenderType::kBenign, SenderType::kMalicious}) {
      json table = json::object();
      for (StateIndex x = 0; x < s.num_states(); ++x)
        for (ActionIndex a = 0; a < s.num_actions(); ++a)
          for (ReactionIndex r = 0; r < s.num_reactions(); ++r)
            table[ab.states[x]][ab.actions[a]][ab.reactions[r]] =
                std::string(who) == "sender" ? s.utilities.sender(t, x, a, r)
                                             : s.utilities.receiver(t, x, a, r);
      doc["utilities"][who][std::string(to_string(t))] = table;
    }
  }
  doc["prior"] = s.prior_m;
  doc["initial_state"] = ab.states[s.initial_state];
  doc["true_type"] = std::string(to_string(s.true_type));
  doc["horizon"] = s.horizon;
  doc["steps"] = s.episode_length;
  doc["seed"] = s.base_seed;
  doc["solution_concept"] = std::string(to_string(s.solution_concept));
  return doc;
}

// ---------------------------------------------------------------------------
// Trajectory CSV

inline constexpr const char* kTrajectoryHeader =
    "k,state,action_b,action_m,applied_action,reaction,belief_m,bayes_coeff,"
    "agreement";

/// %.12g, the fixed precision of exported beliefs and coefficients.
inline std::string format12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const Alphabets& ab) {
  os << kTrajectoryHeader << '\n';
  for (const auto& s : traj.steps) {
    os << s.k << ',' << ab.states[s.state] << ','
       << ab.actions[s.action_benign] << ',' << ab.actions[s.action_malicious]
       << ',' << ab.actions[s.applied_action] << ','
       << ab.reactions[s.reaction] << ',' << format12(s.belief_m) << ','
       << format12(s.bayes_coeff) << ',' << s.agreement << '\n';
  }
}

inline std::string trajectory_csv(const Trajectory& traj, const Alphabets& ab) {
  std::ostringstream os;
  write_trajectory_csv(os, traj, ab);
  return os.str();
}

/// A trajectory read back from CSV. Labels are interned in order of first
/// appearance, so indices are only meaningful against these tables.
struct ImportedTrajectory {
  Trajectory trajectory;
  std::vector<std::string> states, actions, reactions;
  bool true_type_inferred = false;
};

namespace detail {

inline std::size_t intern(std::vector<std::string>& table,
                          const std::string& label) {
  for (std::size_t i = 0; i < table.size(); ++i)
    if (table[i] == label) return i;
  table.push_back(label);
  return table.size() - 1;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Reads a trajectory CSV. The true type is inferred from applied_action
/// whenever the two types' actions ever differ; otherwise `fallback` is used.
inline ImportedTrajectory read_trajectory_csv(
    std::istream& is, SenderType fallback = SenderType::kMalicious) {
  ImportedTrajectory out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader)
    throw std::runtime_error("unexpected trajectory header: " + line);
  std::optional<SenderType> inferred;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 9)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected 9 columns");
    StepRecord s;
    try {
      s.k = std::stoull(cells[0]);
      s.state = detail::intern(out.states, cells[1]);
      s.action_benign = detail::intern(out.actions, cells[2]);
      s.action_malicious = detail::intern(out.actions, cells[3]);
      s.applied_action = detail::intern(out.actions, cells[4]);
      s.reaction = detail::intern(out.reactions, cells[5]);
      s.belief_m = std::stod(cells[6]);
      s.bayes_coeff = std::stod(cells[7]);
      s.agreement = std::stoi(cells[8]);
    } catch (const std::logic_error&) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": malformed value");
    }
    if (s.action_benign != s.action_malicious && !inferred)
      inferred = s.applied_action == s.action_malicious ? SenderType::kMalicious
                                                        : SenderType::kBenign;
    out.trajectory.steps.push_back(s);
  }
  if (out.trajectory.steps.empty())
    throw std::runtime_error("trajectory file has no rows");
  out.true_type_inferred = inferred.has_value();
  out.trajectory.true_type = inferred.value_or(fallback);
  const auto& last = out.trajectory.steps.back();
  out.trajectory.final_belief_m =
      out.trajectory.true_type == SenderType::kMalicious
          ? last.bayes_coeff * last.belief_m
          : 1.0 - last.bayes_coeff * (1.0 - last.belief_m);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const EpisodeDiagnostics& e) {
  json j;
  j["episode"] = e.episode;
  j["seed"] = e.seed;
  j["ok"] = e.ok;
  if (!e.error.empty()) j["error"] = e.error;
  j["terminal_belief_m"] = e.terminal_belief_m;
  j["limit_estimate"] = e.limit_estimate;
  j["oscillation"] = e.oscillation;
  j["mean_abs_f_minus_one"] = e.mean_abs_f_minus_one;
  j["f_to_one"] = e.f_to_one;
  j["pi_to_zero"] = e.pi_to_zero;
  j["classification"] = to_string(e.classification);
  if (e.sustained_agreement)
    j["sustained_agreement_step"] = *e.sustained_agreement;
  else
    j["sustained_agreement_step"] = "none";
  return j;
}

inline json to_json(const Tallies& t) {
  return {{"F_TO_ONE", t.f_to_one},
          {"PI_TO_ZERO", t.pi_to_zero},
          {"UNDECIDED", t.undecided},
          {"FAILED", t.failed}};
}

inline json to_json(const BatchSummary& s) {
  json j;
  j["n_episodes"] = s.n_episodes;
  j["true_type"] = std::string(to_string(s.true_type));
  j["window"] = s.window;
  j["tol"] = s.tol;
  j["tallies"] = to_json(s.tallies);
  j["episodes"] = json::array();
  for (const auto& e : s.episodes) j["episodes"].push_back(to_json(e));
  return j;
}

inline json to_json(const ConvergenceReport& r) {
  return {{"limit_estimate", r.limit_estimate},
          {"oscillation", r.oscillation},
          {"mean_abs_f_minus_one", r.mean_abs_f_minus_one},
          {"f_to_one", r.f_to_one},
          {"pi_to_zero", r.pi_to_zero},
          {"classification", to_string(r.classification)},
          {"window", r.window}};
}

}  // namespace sgame
