#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sgame/core_model.hpp"

namespace sgame {

/// One closed-loop step. Row k holds the state x_k, both types' prescribed
/// root actions, the reaction, the belief pi_k(theta_m) held while deciding,
/// and the true type's Bayes coefficient for the transition k -> k+1.
struct StepRecord {
  std::size_t k = 0;
  StateIndex state = 0;
  ActionIndex action_benign = 0;
  ActionIndex action_malicious = 0;
  ActionIndex applied_action = 0;
  ReactionIndex reaction = 0;
  double belief_m = 0.0;
  double bayes_coeff = 1.0;
  int agreement = 0;  // discrete distance: 0 iff both types agree

  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  SenderType true_type = SenderType::kMalicious;
  std::vector<StepRecord> steps;
  /// pi_N(theta_m), the belief after the last recorded transition.
  double final_belief_m = 0.0;

  std::size_t size() const { return steps.size(); }

  /// Belief on the true type for k = 0..N (N + 1 values).
  std::vector<double> true_type_beliefs() const {
    std::vector<double> out;
    out.reserve(steps.size() + 1);
    auto on_true = [&](double m) {
      return true_type == SenderType::kMalicious ? m : 1.0 - m;
    };
    for (const auto& s : steps) out.push_back(on_true(s.belief_m));
    out.push_back(on_true(final_belief_m));
    return out;
  }

  bool operator==(const Trajectory&) const = default;
};

enum class Classification { kFToOne, kPiToZero, kUndecided };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::kFToOne: return "F_TO_ONE";
    case Classification::kPiToZero: return "PI_TO_ZERO";
    case Classification::kUndecided: return "UNDECIDED";
  }
  return "?";
}

struct EpisodeDiagnostics {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double terminal_belief_m = 0.0;
  double limit_estimate = 0.0;
  double oscillation = 0.0;
  double mean_abs_f_minus_one = 0.0;
  bool f_to_one = false;
  bool pi_to_zero = false;
  Classification classification = Classification::kUndecided;
  std::optional<std::size_t> sustained_agreement;

  bool operator==(const EpisodeDiagnostics&) const = default;
};

struct Tallies {
  std::size_t f_to_one = 0;
  std::size_t pi_to_zero = 0;
  std::size_t undecided = 0;
  std::size_t failed = 0;

  std::size_t total() const { return f_to_one + pi_to_zero + undecided + failed; }
  bool operator==(const Tallies&) const = default;
};

struct BatchSummary {
  std::size_t n_episodes = 0;
  SenderType true_type = SenderType::kMalicious;
  std::size_t window = 20;
  double tol = 0.01;
  std::vector<EpisodeDiagnostics> episodes;
  Tallies tallies;

  bool operator==(const BatchSummary&) const = default;
};

}  // namespace sgame
