#pragma once

// Finite-horizon pure-strategy equilibrium search, re-solved at every step in
// a receding-horizon fashion.
//
// A window of horizon T starts at the current state x_now and covers the
// state sequences x_now, X_1, ..., X_{T-1}. Each utility term is averaged over
// T. The receiver term for type theta_hat is weighted by that type's path
// probability and by the belief pi_i(theta_hat) propagated along the path with
// Bayes' rule under the candidate profile.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sgame/belief.hpp"
#include "sgame/core_model.hpp"
#include "sgame/strategy_tree.hpp"

namespace sgame {

inline constexpr double kArgmaxTolerance = 1e-12;

struct WindowValues {
  double sender_benign = 0.0;
  double sender_malicious = 0.0;
  double receiver = 0.0;

  double sender(SenderType t) const {
    return t == SenderType::kBenign ? sender_benign : sender_malicious;
  }
};

namespace detail {

class WindowEvaluator {
 public:
  WindowEvaluator(const Scenario& s, const TreeShape& shape, const Branch& b,
                  const Branch& m, const Branch& r)
      : s_(s), shape_(shape), benign_(b), malicious_(m), receiver_(r) {}

  WindowValues run(BeliefState belief, StateIndex x_now) {
    out_ = {};
    visit(0, 0, x_now, 1.0, 1.0, belief.pi_m);
    const double t = shape_.depth();
    out_.sender_benign /= t;
    out_.sender_malicious /= t;
    out_.receiver /= t;
    return out_;
  }

 private:
  void visit(std::size_t node, int depth, StateIndex x, double w_b, double w_m,
             double pi_m) {
    const ActionIndex a_b = benign_[node];
    const ActionIndex a_m = malicious_[node];
    const ReactionIndex r = receiver_[node];
    const auto& u = s_.utilities;
    out_.sender_benign += w_b * u.sender(SenderType::kBenign, x, a_b, r);
    out_.sender_malicious += w_m * u.sender(SenderType::kMalicious, x, a_m, r);
    out_.receiver +=
        w_b * (1.0 - pi_m) * u.receiver(SenderType::kBenign, x, a_b, r) +
        w_m * pi_m * u.receiver(SenderType::kMalicious, x, a_m, r);
    if (depth + 1 >= shape_.depth()) return;

    const auto row_b = s_.kernel.row(x, a_b, r);
    const auto row_m = s_.kernel.row(x, a_m, r);
    for (StateIndex next = 0; next < row_b.size(); ++next) {
      const double q_b = row_b[next], q_m = row_m[next];
      const double nw_b = w_b * q_b, nw_m = w_m * q_m;
      if (nw_b == 0.0 && nw_m == 0.0) continue;
      const double den = q_b * (1.0 - pi_m) + q_m * pi_m;
      // A zero mixed likelihood only happens when the belief on every type
      // that can reach `next` is zero; those terms carry no receiver weight,
      // so the belief is held (it is absorbing there).
      const double next_pi =
          den > kMinDenominator ? std::min(1.0, q_m * pi_m / den) : pi_m;
      visit(shape_.child(node, depth, next), depth + 1, next, nw_b, nw_m,
            next_pi);
    }
  }

  const Scenario& s_;
  const TreeShape& shape_;
  const Branch& benign_;
  const Branch& malicious_;
  const Branch& receiver_;
  WindowValues out_;
};

}  // namespace detail

/// Exact window expectations (Ubar^s for each type, Ubar^r) by exhaustive
/// summation over all state paths of the window.
inline WindowValues expected_utilities(const Scenario& scenario,
                                       const StrategyTree& profile,
                                       BeliefState belief, StateIndex x_now) {
  if (profile.depth != scenario.horizon)
    throw std::invalid_argument("profile depth " +
                                std::to_string(profile.depth) +
                                " does not match horizon " +
                                std::to_string(scenario.horizon));
  profile.validate(scenario.alphabets);
  if (x_now >= scenario.num_states())
    throw std::out_of_range("state out of range");
  const auto shape = profile.shape();
  return detail::WindowEvaluator(scenario, shape, profile.benign,
                                 profile.malicious, profile.receiver)
      .run(belief, x_now);
}

/// Position of a joint profile in enumeration order.
struct JointIndex {
  std::uint64_t benign = 0;
  std::uint64_t malicious = 0;
  std::uint64_t receiver = 0;

  auto operator<=>(const JointIndex&) const = default;
};

struct EquilibriumResult {
  StrategyTree profile;
  JointIndex index;
  double sender_value_b = 0.0;
  double sender_value_m = 0.0;
  double receiver_value = 0.0;
  std::size_t multiplicity = 0;
  bool tie_broken = false;
  SolutionConcept solution_concept = SolutionConcept::kSignaling;

  double sender_value(SenderType t) const {
    return t == SenderType::kBenign ? sender_value_b : sender_value_m;
  }
  ActionIndex root_action(SenderType t) const { return profile.sender(t)[0]; }
  ReactionIndex root_reaction() const { return profile.receiver[0]; }
};

class NoPureEquilibrium : public std::runtime_error {
 public:
  explicit NoPureEquilibrium(std::vector<JointIndex> cycle)
      : std::runtime_error(describe(cycle)), cycle_(std::move(cycle)) {}

  /// Best-response cycle found by iterated best responses from the first
  /// profile in enumeration order.
  const std::vector<JointIndex>& cycle() const { return cycle_; }

 private:
  static std::string describe(const std::vector<JointIndex>& c) {
    std::ostringstream os;
    os << "no pure BNE; best-response cycle:";
    for (const auto& j : c)
      os << " (" << j.benign << "," << j.malicious << "," << j.receiver << ")";
    return os.str();
  }
  std::vector<JointIndex> cycle_;
};

struct SolveOptions {
  unsigned threads = 1;
};

namespace detail {

/// All window values, indexed ((benign * nS) + malicious) * nR + receiver.
class ValueTable {
 public:
  ValueTable(const Scenario& s, const StrategySets& sets, BeliefState belief,
             StateIndex x_now, unsigned threads)
      : ns_(sets.sender.size()), nr_(sets.receiver.size()),
        values_(ns_ * ns_ * nr_) {
    const std::size_t rows = ns_ * ns_;
    auto fill = [&](std::size_t begin, std::size_t end) {
      for (std::size_t pair = begin; pair < end; ++pair) {
        const auto& b = sets.sender[pair / ns_];
        const auto& m = sets.sender[pair % ns_];
        for (std::size_t ir = 0; ir < nr_; ++ir)
          values_[pair * nr_ + ir] =
              WindowEvaluator(s, sets.shape, b, m, sets.receiver[ir])
                  .run(belief, x_now);
      }
    };
    threads = std::max(1u, std::min<unsigned>(threads, rows));
    if (threads == 1) {
      fill(0, rows);
      return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (rows + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(rows, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(fill, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  const WindowValues& at(std::size_t b, std::size_t m, std::size_t r) const {
    return values_[(b * ns_ + m) * nr_ + r];
  }
  std::size_t senders() const { return ns_; }
  std::size_t receivers() const { return nr_; }

 private:
  std::size_t ns_, nr_;
  std::vector<WindowValues> values_;
};

inline bool near_max(double v, double max) {
  return v >= max - kArgmaxTolerance;
}

struct Selection {
  JointIndex index;
  std::size_t multiplicity = 0;
  bool receiver_tie = false;
};

inline Selection select_nash(const ValueTable& t) {
  const std::size_t ns = t.senders(), nr = t.receivers();
  std::vector<double> max_r(ns * ns, -INFINITY), max_b(ns * nr, -INFINITY),
      max_m(ns * nr, -INFINITY);
  for (std::size_t b = 0; b < ns; ++b)
    for (std::size_t m = 0; m < ns; ++m)
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& v = t.at(b, m, r);
        max_r[b * ns + m] = std::max(max_r[b * ns + m], v.receiver);
        max_b[m * nr + r] = std::max(max_b[m * nr + r], v.sender_benign);
        max_m[b * nr + r] = std::max(max_m[b * nr + r], v.sender_malicious);
      }

  Selection sel;
  auto is_eq = [&](std::size_t b, std::size_t m, std::size_t r) {
    const auto& v = t.at(b, m, r);
    return near_max(v.receiver, max_r[b * ns + m]) &&
           near_max(v.sender_benign, max_b[m * nr + r]) &&
           near_max(v.sender_malicious, max_m[b * nr + r]);
  };
  for (std::size_t b = 0; b < ns; ++b)
    for (std::size_t m = 0; m < ns; ++m)
      for (std::size_t r = 0; r < nr; ++r)
        if (is_eq(b, m, r)) {
          if (sel.multiplicity == 0) sel.index = {b, m, r};
          ++sel.multiplicity;
        }
  if (sel.multiplicity > 0) return sel;

  // Iterated best responses (receiver, then benign, then malicious) until a
  // profile repeats.
  auto first_argmax = [](std::size_t n, auto value) {
    std::size_t best = 0;
    double best_v = value(0);
    for (std::size_t i = 1; i < n; ++i)
      if (value(i) > best_v + kArgmaxTolerance) best_v = value(i), best = i;
    return best;
  };
  std::vector<JointIndex> path;
  JointIndex cur{0, 0, 0};
  while (std::find(path.begin(), path.end(), cur) == path.end()) {
    path.push_back(cur);
    const auto& v = t.at(cur.benign, cur.malicious, cur.receiver);
    if (!near_max(v.receiver, max_r[cur.benign * ns + cur.malicious])) {
      cur.receiver = first_argmax(nr, [&](std::size_t r) {
        return t.at(cur.benign, cur.malicious, r).receiver;
      });
    } else if (!near_max(v.sender_benign,
                         max_b[cur.malicious * nr + cur.receiver])) {
      cur.benign = first_argmax(ns, [&](std::size_t b) {
        return t.at(b, cur.malicious, cur.receiver).sender_benign;
      });
    } else {
      cur.malicious = first_argmax(ns, [&](std::size_t m) {
        return t.at(cur.benign, m, cur.receiver).sender_malicious;
      });
    }
  }
  const auto start = std::find(path.begin(), path.end(), cur);
  throw NoPureEquilibrium(std::vector<JointIndex>(start, path.end()));
}

inline Selection select_signaling(const ValueTable& t) {
  const std::size_t ns = t.senders(), nr = t.receivers();
  // Receiver best response to every sender pair; first near-argmax wins.
  std::vector<std::size_t> br(ns * ns);
  std::vector<std::size_t> br_ties(ns * ns);
  for (std::size_t b = 0; b < ns; ++b)
    for (std::size_t m = 0; m < ns; ++m) {
      double best = -INFINITY;
      for (std::size_t r = 0; r < nr; ++r)
        best = std::max(best, t.at(b, m, r).receiver);
      std::size_t first = nr, ties = 0;
      for (std::size_t r = 0; r < nr; ++r)
        if (near_max(t.at(b, m, r).receiver, best)) {
          if (first == nr) first = r;
          ++ties;
        }
      br[b * ns + m] = first;
      br_ties[b * ns + m] = ties;
    }
  auto value = [&](std::size_t b, std::size_t m) -> const WindowValues& {
    return t.at(b, m, br[b * ns + m]);
  };
  std::vector<double> max_b(ns, -INFINITY), max_m(ns, -INFINITY);
  for (std::size_t b = 0; b < ns; ++b)
    for (std::size_t m = 0; m < ns; ++m) {
      max_b[m] = std::max(max_b[m], value(b, m).sender_benign);
      max_m[b] = std::max(max_m[b], value(b, m).sender_malicious);
    }

  Selection sel;
  for (std::size_t b = 0; b < ns; ++b)
    for (std::size_t m = 0; m < ns; ++m) {
      const auto& v = value(b, m);
      if (near_max(v.sender_benign, max_b[m]) &&
          near_max(v.sender_malicious, max_m[b])) {
        if (sel.multiplicity == 0) {
          sel.index = {b, m, br[b * ns + m]};
          sel.receiver_tie = br_ties[b * ns + m] > 1;
        }
        ++sel.multiplicity;
      }
    }
  if (sel.multiplicity > 0) return sel;

  auto first_argmax = [](std::size_t n, auto f) {
    std::size_t best = 0;
    double best_v = f(0);
    for (std::size_t i = 1; i < n; ++i)
      if (f(i) > best_v + kArgmaxTolerance) best_v = f(i), best = i;
    return best;
  };
  std::vector<JointIndex> path;
  JointIndex cur{0, 0, br[0]};
  while (std::find(path.begin(), path.end(), cur) == path.end()) {
    path.push_back(cur);
    if (!near_max(value(cur.benign, cur.malicious).sender_benign,
                  max_b[cur.malicious])) {
      cur.benign = first_argmax(ns, [&](std::size_t b) {
        return value(b, cur.malicious).sender_benign;
      });
    } else {
      cur.malicious = first_argmax(ns, [&](std::size_t m) {
        return value(cur.benign, m).sender_malicious;
      });
    }
    cur.receiver = br[cur.benign * ns + cur.malicious];
  }
  const auto start = std::find(path.begin(), path.end(), cur);
  throw NoPureEquilibrium(std::vector<JointIndex>(start, path.end()));
}

}  // namespace detail

/// Scans every joint pure profile of the window rooted at (belief, x_now) and
/// returns the first equilibrium in enumeration order (benign branch, then
/// malicious branch, then receiver branch; each lexicographic by node with
/// labels in declaration order). Throws NoPureEquilibrium when none exists
/// and CombinatorialLimitError when the profile space is too large.
inline EquilibriumResult solve_bne(const Scenario& scenario, BeliefState belief,
                                   StateIndex x_now,
                                   SolveOptions options = {}) {
  if (x_now >= scenario.num_states())
    throw std::out_of_range("state out of range");
  const auto sets = enumerate_strategy_trees(scenario.alphabets,
                                             scenario.horizon);
  const detail::ValueTable table(scenario, sets, belief, x_now,
                                 options.threads);
  const auto sel = scenario.solution_concept == SolutionConcept::kNash
                       ? detail::select_nash(table)
                       : detail::select_signaling(table);

  EquilibriumResult out;
  out.index = sel.index;
  out.profile = StrategyTree{scenario.horizon, scenario.num_states(),
                             sets.sender[sel.index.benign],
                             sets.sender[sel.index.malicious],
                             sets.receiver[sel.index.receiver]};
  const auto& v =
      table.at(sel.index.benign, sel.index.malicious, sel.index.receiver);
  out.sender_value_b = v.sender_benign;
  out.sender_value_m = v.sender_malicious;
  out.receiver_value = v.receiver;
  out.multiplicity = sel.multiplicity;
  out.tie_broken = sel.multiplicity > 1 || sel.receiver_tie;
  out.solution_concept = scenario.solution_concept;
  return out;
}

/// Root prescriptions of a window equilibrium.
struct RootDecision {
  ActionIndex action_benign = 0;
  ActionIndex action_malicious = 0;
  ReactionIndex reaction = 0;

  ActionIndex action(SenderType t) const {
    return t == SenderType::kBenign ? action_benign : action_malicious;
  }
  bool operator==(const RootDecision&) const = default;
};

/// Re-solves the window equilibrium at each queried (belief, state) and
/// applies only the root prescriptions. Results are memoized on the exact
/// belief bit pattern; the cache is safe for concurrent use.
class RecedingHorizonPolicy {
 public:
  explicit RecedingHorizonPolicy(Scenario scenario)
      : scenario_(std::move(scenario)) {
    scenario_.validate();
  }

  const Scenario& scenario() const { return scenario_; }

  std::shared_ptr<const EquilibriumResult> solve(BeliefState belief,
                                                 StateIndex x) const {
    const Key key{std::bit_cast<std::uint64_t>(belief.pi_m), x};
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto result = std::make_shared<const EquilibriumResult>(
        solve_bne(scenario_, belief, x));
    std::unique_lock lock(mutex_);
    return cache_.try_emplace(key, std::move(result)).first->second;
  }

  RootDecision decide(BeliefState belief, StateIndex x) const {
    const auto eq = solve(belief, x);
    return {eq->root_action(SenderType::kBenign),
            eq->root_action(SenderType::kMalicious), eq->root_reaction()};
  }

  std::size_t cache_size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

 private:
  using Key = std::pair<std::uint64_t, StateIndex>;
  Scenario scenario_;
  mutable std::shared_mutex mutex_;
  mutable std::map<Key, std::shared_ptr<const EquilibriumResult>> cache_;
};

}  // namespace sgame
