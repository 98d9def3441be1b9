#pragma once

// Closed-loop episodes under the receding-horizon policy, plus seeded batch
// Monte Carlo with per-episode diagnostics.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sgame/belief.hpp"
#include "sgame/core_model.hpp"
#include "sgame/diagnostics.hpp"
#include "sgame/equilibrium.hpp"
#include "sgame/trajectory.hpp"

namespace sgame {

class EpisodeError : public std::runtime_error {
 public:
  EpisodeError(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of episode `index` in a batch: mix64(base + golden * (index + 1)).
inline std::uint64_t episode_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix64(base_seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

inline Trajectory run_episode(const RecedingHorizonPolicy& policy,
                              std::uint64_t seed,
                              std::optional<int> steps = std::nullopt) {
  const Scenario& s = policy.scenario();
  const int n = steps.value_or(s.episode_length);
  if (n < 1) throw std::invalid_argument("episode length must be >= 1");

  Rng rng(seed);
  Trajectory traj;
  traj.true_type = s.true_type;
  traj.steps.reserve(static_cast<std::size_t>(n));

  BeliefState belief(s.prior_m);
  StateIndex x = s.initial_state;
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    try {
      const auto eq = policy.solve(belief, x);
      const StrategyTree& profile = eq->profile;
      StepRecord rec;
      rec.k = k;
      rec.state = x;
      rec.action_benign = eq->root_action(SenderType::kBenign);
      rec.action_malicious = eq->root_action(SenderType::kMalicious);
      rec.applied_action = eq->root_action(s.true_type);
      rec.reaction = eq->root_reaction();
      rec.belief_m = belief.pi_m;
      rec.agreement = rec.action_benign == rec.action_malicious ? 0 : 1;

      const StateIndex next =
          sample_transition(s.kernel, x, rec.applied_action, rec.reaction, rng);
      const StateIndex root[] = {x};
      const auto lik = type_conditional_likelihood(s, profile, root, next);
      rec.bayes_coeff = bayes_coefficient(belief, lik, s.true_type);
      belief = bayes_update(belief, lik);
      x = next;
      traj.steps.push_back(rec);
    } catch (const EpisodeError&) {
      throw;
    } catch (const std::exception& e) {
      throw EpisodeError(k, e.what());
    }
  }
  traj.final_belief_m = belief.pi_m;
  return traj;
}

inline Trajectory run_episode(const Scenario& scenario, std::uint64_t seed) {
  return run_episode(RecedingHorizonPolicy(scenario), seed);
}

/// Convergence and agreement diagnostics of one finished episode.
inline EpisodeDiagnostics diagnose_episode(const Trajectory& traj,
                                           std::size_t window, double tol) {
  EpisodeDiagnostics d;
  d.terminal_belief_m = traj.final_belief_m;
  try {
    const auto rep = convergence_report(traj, window, tol);
    d.ok = true;
    d.limit_estimate = rep.limit_estimate;
    d.oscillation = rep.oscillation;
    d.mean_abs_f_minus_one = rep.mean_abs_f_minus_one;
    d.f_to_one = rep.f_to_one;
    d.pi_to_zero = rep.pi_to_zero;
    d.classification = rep.classification;
  } catch (const std::exception& e) {
    d.error = e.what();
  }
  d.sustained_agreement = agreement_series(traj).sustained_from;
  return d;
}

struct BatchOptions {
  unsigned threads = 1;
  std::size_t window = 20;
  double tol = 0.01;
  std::optional<int> steps;  // overrides the scenario's episode length
  bool keep_trajectories = true;
};

struct BatchResult {
  BatchSummary summary;
  /// Empty where an episode failed or trajectories were not kept.
  std::vector<std::optional<Trajectory>> trajectories;
};

inline Tallies tally(const std::vector<EpisodeDiagnostics>& episodes) {
  Tallies t;
  for (const auto& e : episodes) {
    if (!e.ok) {
      ++t.failed;
      continue;
    }
    switch (e.classification) {
      case Classification::kFToOne: ++t.f_to_one; break;
      case Classification::kPiToZero: ++t.pi_to_zero; break;
      case Classification::kUndecided: ++t.undecided; break;
    }
  }
  return t;
}

/// Runs `n_episodes` independent episodes. Episode i is seeded with
/// episode_seed(base_seed, i); results do not depend on the thread count.
/// Per-episode errors are recorded in the summary instead of aborting.
inline BatchResult run_batch(const Scenario& scenario, std::size_t n_episodes,
                             std::uint64_t base_seed, BatchOptions opts = {}) {
  if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
  const RecedingHorizonPolicy policy(scenario);

  BatchResult out;
  out.summary.n_episodes = n_episodes;
  out.summary.true_type = scenario.true_type;
  out.summary.window = opts.window;
  out.summary.tol = opts.tol;
  out.summary.episodes.resize(n_episodes);
  out.trajectories.resize(n_episodes);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_episodes; i = next++) {
      auto& diag = out.summary.episodes[i];
      const auto seed = episode_seed(base_seed, i);
      try {
        auto traj = run_episode(policy, seed, opts.steps);
        diag = diagnose_episode(traj, opts.window, opts.tol);
        if (opts.keep_trajectories) out.trajectories[i] = std::move(traj);
      } catch (const std::exception& e) {
        diag = EpisodeDiagnostics{};
        diag.error = e.what();
      }
      diag.episode = i;
      diag.seed = seed;
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(opts.threads,
                                      static_cast<unsigned>(n_episodes)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  out.summary.tallies = tally(out.summary.episodes);
  return out;
}

}  // namespace sgame
