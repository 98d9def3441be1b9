#pragma once

// Consistent belief systems over the binary type space: Bayes' rule, the
// Bayes coefficient f, and the type-conditional one-step likelihoods implied
// by a joint profile.

#include <span>
#include <stdexcept>
#include <string>

#include "sgame/core_model.hpp"
#include "sgame/strategy_tree.hpp"

namespace sgame {

/// Mixed likelihoods at or below this are treated as zero.
inline constexpr double kMinDenominator = 1e-300;

/// pi(theta_m); pi(theta_b) = 1 - pi_m.
struct BeliefState {
  double pi_m = 0.0;

  BeliefState() = default;
  explicit BeliefState(double m) : pi_m(m) {
    if (!(m >= 0.0 && m <= 1.0))
      throw std::invalid_argument("belief must lie in [0, 1], got " +
                                  std::to_string(m));
  }

  double on(SenderType t) const {
    return t == SenderType::kMalicious ? pi_m : 1.0 - pi_m;
  }

  bool operator==(const BeliefState&) const = default;
};

/// One-step predictive likelihoods of the observed next state, per type.
struct LikelihoodPair {
  double benign = 0.0;
  double malicious = 0.0;

  double of(SenderType t) const {
    return t == SenderType::kMalicious ? malicious : benign;
  }

  bool operator==(const LikelihoodPair&) const = default;
};

class InconsistentObservation : public std::runtime_error {
 public:
  InconsistentObservation()
      : std::runtime_error(
            "inconsistent observation: zero probability under the current "
            "belief") {}
};

inline double mixed_likelihood(BeliefState b, LikelihoodPair lik) {
  return lik.benign * (1.0 - b.pi_m) + lik.malicious * b.pi_m;
}

inline void check_likelihood(LikelihoodPair lik) {
  if (!(lik.benign >= 0.0 && lik.benign <= 1.0 && lik.malicious >= 0.0 &&
        lik.malicious <= 1.0))
    throw std::invalid_argument("likelihoods must lie in [0, 1]");
}

/// f(theta_hat) = p_{theta_hat} / (p_b (1 - pi) + p_m pi).
inline double bayes_coefficient(BeliefState b, LikelihoodPair lik,
                                SenderType theta_hat) {
  check_likelihood(lik);
  const double den = mixed_likelihood(b, lik);
  if (den <= kMinDenominator) throw InconsistentObservation();
  // Equal likelihoods carry no information; keep f exactly 1 rather than
  // p / (p (1 - pi) + p pi), which can round away from it.
  if (lik.benign == lik.malicious) return 1.0;
  return lik.of(theta_hat) / den;
}

inline BeliefState bayes_update(BeliefState b, LikelihoodPair lik) {
  check_likelihood(lik);
  const double den = mixed_likelihood(b, lik);
  if (den <= kMinDenominator) throw InconsistentObservation();
  if (lik.benign == lik.malicious) return b;
  double next = lik.malicious * b.pi_m / den;
  // Guard the last ulp so the invariant pi in [0, 1] holds after rounding.
  if (next > 1.0) next = 1.0;
  BeliefState out;
  out.pi_m = next;
  return out;
}

/// Likelihood of `x_next` under each type, given the joint profile and the
/// state path observed from the window root. `path.front()` is the root state;
/// the remaining entries select the tree node.
inline LikelihoodPair type_conditional_likelihood(
    const Scenario& scenario, const StrategyTree& profile,
    std::span<const StateIndex> path, StateIndex x_next) {
  if (path.empty()) throw std::invalid_argument("empty state path");
  if (path.size() > static_cast<std::size_t>(profile.depth))
    throw std::out_of_range("history of length " + std::to_string(path.size()) +
                            " exceeds profile depth " +
                            std::to_string(profile.depth));
  if (x_next >= scenario.num_states())
    throw std::out_of_range("next state out of range");
  const auto node = profile.shape().node_index(path.subspan(1));
  const StateIndex x = path.back();
  const ReactionIndex r = profile.receiver.at(node);
  return {scenario.kernel.prob(x_next, x, profile.benign.at(node), r),
          scenario.kernel.prob(x_next, x, profile.malicious.at(node), r)};
}

}  // namespace sgame
