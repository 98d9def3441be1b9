#pragma once

// Depth-T strategy trees. Inside a horizon window the past actions and
// reactions are fixed by the tree itself, so an information set reduces to
// the sequence of states observed below the window root.
//
// Node order: the root first, then depth-1 nodes in state-label order, then
// depth-2 nodes in lexicographic path order, and so on.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgame/core_model.hpp"

namespace sgame {

/// Geometry of a tree of depth `depth` over `num_states` successor labels.
class TreeShape {
 public:
  TreeShape(std::size_t num_states, int depth)
      : num_states_(num_states), depth_(depth) {
    if (depth < 1) throw std::invalid_argument("horizon must be >= 1");
    if (num_states == 0) throw std::invalid_argument("no states");
    offsets_.reserve(static_cast<std::size_t>(depth) + 1);
    std::size_t level = 1, total = 0;
    for (int d = 0; d <= depth; ++d) {
      offsets_.push_back(total);
      if (d == depth) break;
      total += level;
      level *= num_states;
    }
  }

  std::size_t num_states() const { return num_states_; }
  int depth() const { return depth_; }

  /// Sum_{d=0}^{T-1} |X|^d.
  std::size_t node_count() const { return offsets_.back(); }

  /// First node index at the given depth.
  std::size_t level_offset(int d) const { return offsets_.at(d); }

  /// Index of the node reached by `path` (states observed after the root).
  std::size_t node_index(std::span<const StateIndex> path) const {
    if (path.size() >= static_cast<std::size_t>(depth_))
      throw std::out_of_range("path of length " + std::to_string(path.size()) +
                              " exceeds tree depth " + std::to_string(depth_));
    std::size_t local = 0;
    for (StateIndex s : path) {
      if (s >= num_states_) throw std::out_of_range("state out of range");
      local = local * num_states_ + s;
    }
    return offsets_[path.size()] + local;
  }

  /// Child of node `node` at depth `d` after observing state `next`.
  std::size_t child(std::size_t node, int d, StateIndex next) const {
    const std::size_t local = node - offsets_[d];
    return offsets_[d + 1] + local * num_states_ + next;
  }

  bool operator==(const TreeShape&) const = default;

 private:
  std::size_t num_states_;
  int depth_;
  std::vector<std::size_t> offsets_;
};

/// One player's (or one sender type's) choices, indexed by node.
using Branch = std::vector<std::uint32_t>;

/// A joint pure profile over one horizon window.
struct StrategyTree {
  int depth = 1;
  std::size_t num_states = 0;
  Branch benign;    // sender actions for theta_b
  Branch malicious; // sender actions for theta_m
  Branch receiver;  // reactions

  const Branch& sender(SenderType t) const {
    return t == SenderType::kBenign ? benign : malicious;
  }
  Branch& sender(SenderType t) {
    return t == SenderType::kBenign ? benign : malicious;
  }

  TreeShape shape() const { return TreeShape(num_states, depth); }

  /// Checks completeness against the alphabets.
  void validate(const Alphabets& ab) const {
    const auto n = shape().node_count();
    if (num_states != ab.states.size())
      throw std::invalid_argument("strategy tree state count mismatch");
    if (benign.size() != n || malicious.size() != n || receiver.size() != n)
      throw std::invalid_argument("strategy tree is incomplete");
    for (std::size_t i = 0; i < n; ++i) {
      if (benign[i] >= ab.actions.size() || malicious[i] >= ab.actions.size() ||
          receiver[i] >= ab.reactions.size())
        throw std::invalid_argument("strategy tree choice out of range");
    }
  }

  bool operator==(const StrategyTree&) const = default;
};

/// Joint profiles beyond this count are refused.
inline constexpr std::uint64_t kMaxJointProfiles = 10'000'000;

class CombinatorialLimitError : public std::runtime_error {
 public:
  explicit CombinatorialLimitError(long double count)
      : std::runtime_error(
            "joint profile count " + std::to_string(count) +
            " exceeds the enumeration limit of " +
            std::to_string(kMaxJointProfiles)),
        count_(count) {}
  long double count() const { return count_; }

 private:
  long double count_;
};

/// base^exp as long double; exact for the sizes that pass the guard.
inline long double power_count(std::size_t base, std::size_t exp) {
  long double v = 1.0L;
  for (std::size_t i = 0; i < exp; ++i) {
    v *= static_cast<long double>(base);
    if (v > 1e30L) return v;
  }
  return v;
}

/// Decodes the `index`-th branch in enumeration order: the root is the most
/// significant digit, so branches are ordered lexicographically by node.
inline Branch decode_branch(std::uint64_t index, std::size_t radix,
                            std::size_t nodes) {
  Branch b(nodes, 0);
  for (std::size_t i = nodes; i-- > 0;) {
    b[i] = static_cast<std::uint32_t>(index % radix);
    index /= radix;
  }
  return b;
}

struct StrategySets {
  TreeShape shape;
  std::vector<Branch> sender;    // the same set serves both types
  std::vector<Branch> receiver;

  std::uint64_t joint_count() const {
    return static_cast<std::uint64_t>(sender.size()) * sender.size() *
           receiver.size();
  }
};

/// Every pure sender branch (|A|^nodes of them, per type) and receiver branch
/// (|R|^nodes), duplicate-free and in lexicographic order.
inline StrategySets enumerate_strategy_trees(const Alphabets& ab, int horizon) {
  TreeShape shape(ab.states.size(), horizon);
  const auto nodes = shape.node_count();
  const long double n_sender = power_count(ab.actions.size(), nodes);
  const long double n_receiver = power_count(ab.reactions.size(), nodes);
  const long double joint = n_sender * n_sender * n_receiver;
  if (joint > static_cast<long double>(kMaxJointProfiles))
    throw CombinatorialLimitError(joint);

  StrategySets sets{shape, {}, {}};
  const auto ns = static_cast<std::uint64_t>(n_sender);
  const auto nr = static_cast<std::uint64_t>(n_receiver);
  sets.sender.reserve(ns);
  for (std::uint64_t i = 0; i < ns; ++i)
    sets.sender.push_back(decode_branch(i, ab.actions.size(), nodes));
  sets.receiver.reserve(nr);
  for (std::uint64_t i = 0; i < nr; ++i)
    sets.receiver.push_back(decode_branch(i, ab.reactions.size(), nodes));
  return sets;
}

/// Profile that repeats one root prescription at every node.
inline StrategyTree uniform_profile(std::size_t num_states, int depth,
                                    ActionIndex benign, ActionIndex malicious,
                                    ReactionIndex reaction) {
  TreeShape shape(num_states, depth);
  const auto n = shape.node_count();
  return StrategyTree{depth, num_states,
                      Branch(n, static_cast<std::uint32_t>(benign)),
                      Branch(n, static_cast<std::uint32_t>(malicious)),
                      Branch(n, static_cast<std::uint32_t>(reaction))};
}

}  // namespace sgame
