#ifndef NAMOPLAN_SEARCH_HPP
#define NAMOPLAN_SEARCH_HPP

#include <chrono>
#include <cstdint>
#include <limits>
#include <string>

#include "namoplan/pddl.hpp"

namespace namoplan::search {

/// Wall-clock budget for one planner call, polled at expansion granularity.
class Deadline {
 public:
  static Deadline after(double budget_sec);
  static Deadline unlimited() { return after(std::numeric_limits<double>::infinity()); }

  bool expired() const;
  double elapsed() const;       // seconds since construction
  double remaining() const;     // may be +inf
  double budget() const { return budget_sec_; }

 private:
  std::chrono::steady_clock::time_point start_;
  double budget_sec_ = 0;
};

enum class Verdict { Solved, ProvedUnsolvable, TimedOut, NodeLimitExceeded };

std::string verdict_name(Verdict v);

struct SearchStats {
  uint64_t expansions = 0;
  uint64_t generated = 0;
  double elapsed = 0;
};

struct SearchOutcome {
  Verdict verdict = Verdict::TimedOut;
  pddl::Plan plan;  // meaningful only when Solved
  SearchStats stats;
};

constexpr int64_t kInfiniteCost = std::numeric_limits<int64_t>::max();

/// Ground actions whose preconditions are reachable in the delete relaxation
/// of init. Actions outside this set can never become applicable and are
/// skipped by the searches and heuristics. Ascending index order.
std::vector<uint32_t> relaxed_reachable_actions(const pddl::GroundedProblem& problem);

/// Delete-relaxation cost estimates shared by the two planners. A heuristic
/// instance owns scratch buffers and is reused across evaluations of one
/// search; it is not thread-safe. Estimates assume states reachable from the
/// problem's initial state.
class RelaxationHeuristic {
 public:
  enum class Mode { Add, Max };

  RelaxationHeuristic(const pddl::GroundedProblem& problem, Mode mode);

  /// Fixpoint of cost propagation over delete-relaxed actions. Returns
  /// kInfiniteCost iff the goal is unreachable in the relaxation.
  int64_t evaluate(const pddl::State& s);

 private:
  const pddl::GroundedProblem& problem_;
  Mode mode_;
  std::vector<std::vector<uint32_t>> consumers_;  // atom id -> actions with it in pre
  std::vector<uint32_t> no_pre_actions_;
  std::vector<int64_t> atom_cost_;
  std::vector<uint32_t> unsat_;
  std::vector<int64_t> acc_;
  std::vector<uint32_t> action_epoch_;
  std::vector<char> is_goal_;
  uint32_t epoch_ = 0;
};

/// Greedy best-first search ordered by h_add with FIFO tie-breaking.
/// Successors are queued under their parent's estimate and evaluated when
/// popped (deferred evaluation, as in mainstream satisficing planners).
/// ProvedUnsolvable iff the open list exhausts; timeouts are a verdict.
SearchOutcome solve_satisficing(const pddl::GroundedProblem& problem, const Deadline& deadline);

/// A* with the admissible h_max estimate; returned plans have minimum length
/// under unit action costs. Ties break on lower g, then insertion order.
SearchOutcome solve_optimal(const pddl::GroundedProblem& problem, const Deadline& deadline);

/// Uninformed breadth-first search used as a test oracle. Requires
/// |atoms| <= 4096 and stops with NodeLimitExceeded past node_limit.
SearchOutcome bfs_oracle(const pddl::GroundedProblem& problem, uint64_t node_limit);

}  // namespace namoplan::search

#endif  // NAMOPLAN_SEARCH_HPP
