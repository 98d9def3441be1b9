#pragma once

// Exact and empirical checks of the belief-convergence results: the
// submartingale margin of the true-type belief, trailing-window convergence
// statistics, action agreement, the KL decay heuristic and the closed-form
// random-walk belief.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sgame/belief.hpp"
#include "sgame/core_model.hpp"
#include "sgame/strategy_tree.hpp"
#include "sgame/trajectory.hpp"

namespace sgame {

/// E[pi_{k+1}(theta) | history] - pi_k(theta) for the true type theta, by
/// enumerating successor states. Successors the true type cannot reach carry
/// zero weight and are skipped, as are zero-mixed-likelihood successors.
inline double submartingale_margin(const Scenario& scenario,
                                   const StrategyTree& profile,
                                   std::span<const StateIndex> path,
                                   BeliefState belief, SenderType true_type) {
  const double current = belief.on(true_type);
  double expected = 0.0;
  for (StateIndex next = 0; next < scenario.num_states(); ++next) {
    const auto lik =
        type_conditional_likelihood(scenario, profile, path, next);
    const double p_true = lik.of(true_type);
    if (p_true == 0.0) continue;
    if (mixed_likelihood(belief, lik) <= kMinDenominator) continue;
    expected += p_true * bayes_update(belief, lik).on(true_type);
  }
  return expected - current;
}

struct ConvergenceReport {
  double limit_estimate = 0.0;
  double oscillation = 0.0;
  double mean_abs_f_minus_one = 0.0;
  bool f_to_one = false;
  bool pi_to_zero = false;
  Classification classification = Classification::kUndecided;
  std::size_t window = 0;
};

/// Trailing-window statistics of the true-type belief pi_0..pi_N:
///   limit_estimate = mean of the last `window` beliefs,
///   oscillation    = sum of |pi_{k+1} - pi_k| over the last `window` steps,
/// and the mean |f_k - 1| of the true-type Bayes coefficients over the same
/// steps. F_TO_ONE takes precedence over PI_TO_ZERO when both hold.
inline ConvergenceReport convergence_report(const Trajectory& traj,
                                            std::size_t window, double tol) {
  const std::size_t n = traj.size();
  if (window == 0) throw std::invalid_argument("window must be positive");
  if (n <= window)
    throw std::invalid_argument("trajectory of length " + std::to_string(n) +
                                " is not longer than window " +
                                std::to_string(window));
  const auto pi = traj.true_type_beliefs();  // n + 1 values
  ConvergenceReport rep;
  rep.window = window;
  for (std::size_t k = n - window; k < n; ++k) {
    rep.oscillation += std::abs(pi[k + 1] - pi[k]);
    rep.limit_estimate += pi[k + 1];
    rep.mean_abs_f_minus_one += std::abs(traj.steps[k].bayes_coeff - 1.0);
  }
  rep.limit_estimate /= static_cast<double>(window);
  rep.mean_abs_f_minus_one /= static_cast<double>(window);
  rep.f_to_one = rep.mean_abs_f_minus_one < tol;
  rep.pi_to_zero = rep.limit_estimate < tol;
  rep.classification = rep.f_to_one     ? Classification::kFToOne
                       : rep.pi_to_zero ? Classification::kPiToZero
                                        : Classification::kUndecided;
  return rep;
}

struct AgreementSeries {
  std::vector<int> distance;
  /// Smallest k with distance[j] == 0 for every j >= k, if any.
  std::optional<std::size_t> sustained_from;
};

inline AgreementSeries agreement_series(const Trajectory& traj) {
  AgreementSeries out;
  out.distance.reserve(traj.size());
  for (const auto& s : traj.steps)
    out.distance.push_back(s.action_benign == s.action_malicious ? 0 : 1);
  std::size_t k = out.distance.size();
  while (k > 0 && out.distance[k - 1] == 0) --k;
  if (k < out.distance.size()) out.sustained_from = traj.steps[k].k;
  return out;
}

/// D_KL(p_m || p_b) with 0 ln(0/.) = 0. Returns +infinity when p_m puts mass
/// where p_b has none.
inline double kl_decay_estimate(std::span<const double> p_b,
                                std::span<const double> p_m) {
  if (p_b.size() != p_m.size())
    throw std::invalid_argument("distributions differ in length");
  double d = 0.0;
  for (std::size_t i = 0; i < p_m.size(); ++i) {
    if (p_m[i] == 0.0) continue;
    if (p_b[i] == 0.0) return std::numeric_limits<double>::infinity();
    d += p_m[i] * std::log(p_m[i] / p_b[i]);
  }
  // Rounding can leave a tiny negative value for identical inputs.
  return d < 0.0 ? 0.0 : d;
}

/// Belief after 2k steps of the symmetric random walk that returned to its
/// start: pi_0 / (alpha (1 - pi_0) + pi_0), alpha = p^k (1-p)^k 4^k.
inline double random_walk_belief(double p, int k, double pi0) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must be in [0,1]");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (!(pi0 > 0.0 && pi0 < 1.0))
    throw std::invalid_argument("prior must be in (0,1)");
  const double alpha = std::pow(4.0 * p * (1.0 - p), k);
  if (alpha == 1.0) return pi0;
  return pi0 / (alpha * (1.0 - pi0) + pi0);
}

struct DetectionAverseVerdict {
  bool detection_averse = true;
  std::vector<std::size_t> violating_episodes;
};

/// Every episode's limiting malicious belief must stay at or below 1 - tol.
/// Failed episodes cannot be certified and count as violations.
inline DetectionAverseVerdict detection_averse_check(const BatchSummary& batch,
                                                     double tol) {
  if (batch.true_type != SenderType::kMalicious)
    throw std::invalid_argument(
        "detection-averse check needs a batch with the malicious true type");
  DetectionAverseVerdict v;
  for (const auto& e : batch.episodes) {
    if (!e.ok || e.limit_estimate > 1.0 - tol)
      v.violating_episodes.push_back(e.episode);
  }
  v.detection_averse = v.violating_episodes.empty();
  return v;
}

}  // namespace sgame
