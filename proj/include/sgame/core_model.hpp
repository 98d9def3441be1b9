#pragma once

// Finite-alphabet Markov decision process underlying the signaling game:
// label sets, the transition kernel p(x'|x,a,r), utility tables and the
// scenario that bundles them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sgame {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;
using ReactionIndex = std::size_t;

/// Hidden sender type. The type space is binary.
enum class SenderType : std::uint8_t { kBenign = 0, kMalicious = 1 };

inline constexpr std::size_t kNumTypes = 2;

inline constexpr std::size_t type_index(SenderType t) {
  return static_cast<std::size_t>(t);
}

inline constexpr SenderType other_type(SenderType t) {
  return t == SenderType::kBenign ? SenderType::kMalicious : SenderType::kBenign;
}

inline std::string_view to_string(SenderType t) {
  return t == SenderType::kBenign ? "benign" : "malicious";
}

inline SenderType parse_sender_type(std::string_view s) {
  if (s == "benign" || s == "theta_b") return SenderType::kBenign;
  if (s == "malicious" || s == "theta_m") return SenderType::kMalicious;
  throw std::invalid_argument("unknown sender type '" + std::string(s) + "'");
}

inline constexpr double kRowSumTolerance = 1e-9;
inline constexpr double kRowEqualityTolerance = 1e-12;

/// An ordered, duplicate-free, non-empty set of labels.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::string_view what, std::vector<std::string> labels)
      : labels_(std::move(labels)) {
    if (labels_.empty())
      throw std::invalid_argument(std::string(what) + " label set is empty");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_) {
      if (!seen.insert(l).second)
        throw std::invalid_argument(std::string(what) + " label '" + l +
                                    "' is duplicated");
    }
  }

  std::size_t size() const { return labels_.size(); }
  const std::string& operator[](std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::size_t index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    throw std::out_of_range("unknown label '" + std::string(label) + "'");
  }

  bool contains(std::string_view label) const {
    for (const auto& l : labels_)
      if (l == label) return true;
    return false;
  }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct Alphabets {
  LabelSet states;
  LabelSet actions;
  LabelSet reactions;

  bool operator==(const Alphabets&) const = default;
};

/// p(x'|x,a,r) stored over the full (x,a,r) product. A row may be absent
/// (empty) while a kernel is being assembled; validate_kernel reports that as
/// a structural defect.
class TransitionKernel {
 public:
  TransitionKernel() = default;
  TransitionKernel(std::size_t num_states, std::size_t num_actions,
                   std::size_t num_reactions)
      : nx_(num_states),
        na_(num_actions),
        nr_(num_reactions),
        rows_(num_states * num_actions * num_reactions) {}

  /// Builds a kernel whose rows do not depend on the reaction.
  /// `by_action[a][x]` is the row for (x, a).
  static TransitionKernel reaction_independent(
      std::size_t num_reactions,
      const std::vector<std::vector<std::vector<double>>>& by_action) {
    const std::size_t na = by_action.size();
    const std::size_t nx = na == 0 ? 0 : by_action.front().size();
    TransitionKernel k(nx, na, num_reactions);
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t x = 0; x < nx && x < by_action[a].size(); ++x)
        for (std::size_t r = 0; r < num_reactions; ++r)
          k.set_row(x, a, r, by_action[a][x]);
    return k;
  }

  std::size_t num_states() const { return nx_; }
  std::size_t num_actions() const { return na_; }
  std::size_t num_reactions() const { return nr_; }

  void set_row(StateIndex x, ActionIndex a, ReactionIndex r,
               std::vector<double> row) {
    rows_.at(offset(x, a, r)) = std::move(row);
  }

  bool has_row(StateIndex x, ActionIndex a, ReactionIndex r) const {
    return !rows_.at(offset(x, a, r)).empty();
  }

  std::span<const double> row(StateIndex x, ActionIndex a,
                              ReactionIndex r) const {
    return rows_[offset(x, a, r)];
  }

  double prob(StateIndex next, StateIndex x, ActionIndex a,
              ReactionIndex r) const {
    return rows_[offset(x, a, r)][next];
  }

  bool operator==(const TransitionKernel&) const = default;

 private:
  std::size_t offset(StateIndex x, ActionIndex a, ReactionIndex r) const {
    if (x >= nx_ || a >= na_ || r >= nr_)
      throw std::out_of_range("kernel index out of range");
    return (x * na_ + a) * nr_ + r;
  }

  std::size_t nx_ = 0, na_ = 0, nr_ = 0;
  std::vector<std::vector<double>> rows_;
};

/// Sender utility U^s(theta, x, a, r) and receiver utility
/// U^r(theta_hat, x, a, r), dense over the full product.
class UtilityTables {
 public:
  UtilityTables() = default;
  UtilityTables(std::size_t num_states, std::size_t num_actions,
                std::size_t num_reactions)
      : nx_(num_states),
        na_(num_actions),
        nr_(num_reactions),
        sender_(kNumTypes * num_states * num_actions * num_reactions, 0.0),
        receiver_(sender_.size(), 0.0) {}

  double sender(SenderType t, StateIndex x, ActionIndex a,
                ReactionIndex r) const {
    return sender_[offset(t, x, a, r)];
  }
  double receiver(SenderType t, StateIndex x, ActionIndex a,
                  ReactionIndex r) const {
    return receiver_[offset(t, x, a, r)];
  }
  void set_sender(SenderType t, StateIndex x, ActionIndex a, ReactionIndex r,
                  double v) {
    sender_[offset(t, x, a, r)] = v;
  }
  void set_receiver(SenderType t, StateIndex x, ActionIndex a, ReactionIndex r,
                    double v) {
    receiver_[offset(t, x, a, r)] = v;
  }

  std::size_t num_states() const { return nx_; }
  std::size_t num_actions() const { return na_; }
  std::size_t num_reactions() const { return nr_; }

  bool all_finite() const {
    for (double v : sender_)
      if (!std::isfinite(v)) return false;
    for (double v : receiver_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const UtilityTables&) const = default;

 private:
  std::size_t offset(SenderType t, StateIndex x, ActionIndex a,
                     ReactionIndex r) const {
    if (x >= nx_ || a >= na_ || r >= nr_)
      throw std::out_of_range("utility index out of range");
    return ((type_index(t) * nx_ + x) * na_ + a) * nr_ + r;
  }

  std::size_t nx_ = 0, na_ = 0, nr_ = 0;
  std::vector<double> sender_;
  std::vector<double> receiver_;
};

// ---------------------------------------------------------------------------
// Kernel validation

enum class ViolationKind {
  kMissingRow,     // structural
  kWrongLength,    // structural
  kNegativeEntry,  // probabilistic
  kNonFinite,      // probabilistic
  kRowSum,         // probabilistic
};

inline bool is_structural(ViolationKind k) {
  return k == ViolationKind::kMissingRow || k == ViolationKind::kWrongLength;
}

struct KernelViolation {
  ViolationKind kind;
  StateIndex state;
  ActionIndex action;
  ReactionIndex reaction;
  std::string message;
};

struct KernelReport {
  std::vector<KernelViolation> violations;

  bool ok() const { return violations.empty(); }
  bool structurally_complete() const {
    for (const auto& v : violations)
      if (is_structural(v.kind)) return false;
    return true;
  }
};

inline KernelReport validate_kernel(const TransitionKernel& kernel) {
  KernelReport report;
  const std::size_t nx = kernel.num_states();
  for (StateIndex x = 0; x < nx; ++x) {
    for (ActionIndex a = 0; a < kernel.num_actions(); ++a) {
      for (ReactionIndex r = 0; r < kernel.num_reactions(); ++r) {
        auto add = [&](ViolationKind kind, std::string msg) {
          report.violations.push_back({kind, x, a, r, std::move(msg)});
        };
        if (!kernel.has_row(x, a, r)) {
          add(ViolationKind::kMissingRow, "missing row");
          continue;
        }
        const auto row = kernel.row(x, a, r);
        if (row.size() != nx) {
          add(ViolationKind::kWrongLength,
              "row has " + std::to_string(row.size()) + " entries, expected " +
                  std::to_string(nx));
          continue;
        }
        double sum = 0.0;
        bool finite = true;
        for (double p : row) {
          if (!std::isfinite(p)) finite = false;
          sum += p;
        }
        if (!finite) {
          add(ViolationKind::kNonFinite, "non-finite entry");
          continue;
        }
        for (double p : row) {
          if (p < 0.0) {
            std::ostringstream os;
            os << "negative entry " << p;
            add(ViolationKind::kNegativeEntry, os.str());
            break;
          }
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          std::ostringstream os;
          os << "row sum " << sum << " != 1";
          add(ViolationKind::kRowSum, os.str());
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Action distinguishability: for every (x, r) and a != a', some x' separates
// the two rows.

struct IndistinguishablePair {
  StateIndex state;
  ReactionIndex reaction;
  ActionIndex first;
  ActionIndex second;
};

struct DistinguishabilityResult {
  bool distinguishable = true;
  std::vector<IndistinguishablePair> witnesses;
};

inline DistinguishabilityResult check_distinguishability(
    const TransitionKernel& kernel) {
  if (!validate_kernel(kernel).ok())
    throw std::invalid_argument(
        "check_distinguishability requires a valid kernel");
  DistinguishabilityResult out;
  for (StateIndex x = 0; x < kernel.num_states(); ++x) {
    for (ReactionIndex r = 0; r < kernel.num_reactions(); ++r) {
      for (ActionIndex a = 0; a < kernel.num_actions(); ++a) {
        for (ActionIndex b = a + 1; b < kernel.num_actions(); ++b) {
          const auto ra = kernel.row(x, a, r);
          const auto rb = kernel.row(x, b, r);
          bool differ = false;
          for (std::size_t i = 0; i < ra.size(); ++i) {
            if (std::abs(ra[i] - rb[i]) > kRowEqualityTolerance) {
              differ = true;
              break;
            }
          }
          if (!differ) out.witnesses.push_back({x, r, a, b});
        }
      }
    }
  }
  out.distinguishable = out.witnesses.empty();
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw. Avoids
/// std::uniform_real_distribution, whose output is implementation-defined.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Draws x' ~ p(.|x,a,r) and advances `rng` by exactly one draw.
inline StateIndex sample_transition(const TransitionKernel& kernel,
                                    StateIndex x, ActionIndex a,
                                    ReactionIndex r, Rng& rng) {
  const auto row = kernel.row(x, a, r);
  const double u = uniform01(rng);
  double acc = 0.0;
  StateIndex last_positive = 0;
  for (StateIndex next = 0; next < row.size(); ++next) {
    if (row[next] <= 0.0) continue;
    acc += row[next];
    last_positive = next;
    if (u < acc) return next;
  }
  // Rounding left u above the accumulated mass.
  return last_positive;
}

// ---------------------------------------------------------------------------
// Scenario

enum class SolutionConcept {
  /// Receiver best-responds, with consistent beliefs, to every candidate
  /// sender profile; each sender type best-responds anticipating that.
  kSignaling,
  /// Simultaneous Bayesian-Nash: sender deviations are evaluated against a
  /// fixed receiver tree.
  kNash,
};

inline std::string_view to_string(SolutionConcept c) {
  return c == SolutionConcept::kSignaling ? "signaling" : "nash";
}

inline SolutionConcept parse_solution_concept(std::string_view s) {
  if (s == "signaling") return SolutionConcept::kSignaling;
  if (s == "nash") return SolutionConcept::kNash;
  throw std::invalid_argument("unknown solution concept '" + std::string(s) +
                              "' (expected signaling or nash)");
}

struct Scenario {
  Alphabets alphabets;
  TransitionKernel kernel;
  UtilityTables utilities;
  StateIndex initial_state = 0;
  double prior_m = 0.1;  // pi_0(theta_m)
  int horizon = 2;
  SenderType true_type = SenderType::kMalicious;
  int episode_length = 300;
  std::uint64_t base_seed = 0;
  SolutionConcept solution_concept = SolutionConcept::kSignaling;

  std::size_t num_states() const { return alphabets.states.size(); }
  std::size_t num_actions() const { return alphabets.actions.size(); }
  std::size_t num_reactions() const { return alphabets.reactions.size(); }

  /// Throws std::invalid_argument naming the first defect found.
  void validate() const {
    const auto nx = num_states(), na = num_actions(), nr = num_reactions();
    if (nx == 0 || na == 0 || nr == 0)
      throw std::invalid_argument("scenario alphabets must be non-empty");
    if (kernel.num_states() != nx || kernel.num_actions() != na ||
        kernel.num_reactions() != nr)
      throw std::invalid_argument("kernel dimensions do not match alphabets");
    if (utilities.num_states() != nx || utilities.num_actions() != na ||
        utilities.num_reactions() != nr)
      throw std::invalid_argument(
          "utility dimensions do not match alphabets");
    const auto report = validate_kernel(kernel);
    if (!report.ok()) {
      const auto& v = report.violations.front();
      throw std::invalid_argument(
          "invalid kernel row (" + alphabets.states[v.state] + ", " +
          alphabets.actions[v.action] + ", " + alphabets.reactions[v.reaction] +
          "): " + v.message);
    }
    if (!utilities.all_finite())
      throw std::invalid_argument("utility tables contain non-finite values");
    if (initial_state >= nx)
      throw std::invalid_argument("initial state out of range");
    if (!(prior_m >= 0.0 && prior_m <= 1.0))
      throw std::invalid_argument("prior must lie in [0, 1]");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (episode_length < 1)
      throw std::invalid_argument("episode length must be >= 1");
  }

  bool operator==(const Scenario&) const = default;
};

}  // namespace sgame
