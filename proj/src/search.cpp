#include "namoplan/search.hpp"

#include <algorithm>
#include <bit>
#include <queue>
#include <unordered_map>

namespace namoplan::search {

Deadline Deadline::after(double budget_sec) {
  Deadline d;
  d.start_ = std::chrono::steady_clock::now();
  d.budget_sec_ = budget_sec;
  return d;
}

double Deadline::elapsed() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

bool Deadline::expired() const {
  if (budget_sec_ == std::numeric_limits<double>::infinity()) return false;
  return elapsed() >= budget_sec_;
}

double Deadline::remaining() const {
  if (budget_sec_ == std::numeric_limits<double>::infinity()) return budget_sec_;
  return std::max(0.0, budget_sec_ - elapsed());
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Solved: return "solved";
    case Verdict::ProvedUnsolvable: return "unsolvable";
    case Verdict::TimedOut: return "timeout";
    case Verdict::NodeLimitExceeded: return "node-limit";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Relaxed reachability
// ---------------------------------------------------------------------------

std::vector<uint32_t> relaxed_reachable_actions(const pddl::GroundedProblem& problem) {
  const auto& actions = problem.actions;
  std::vector<char> reached(problem.num_atoms(), 0);
  std::vector<uint32_t> unsat(actions.size());
  std::vector<std::vector<uint32_t>> consumers(problem.num_atoms());
  std::vector<uint32_t> queue;

  for (uint32_t ai = 0; ai < actions.size(); ++ai) {
    unsat[ai] = static_cast<uint32_t>(actions[ai].pre.size());
    for (uint32_t atom : actions[ai].pre) consumers[atom].push_back(ai);
  }

  std::vector<char> alive(actions.size(), 0);
  auto trigger = [&](uint32_t ai) {
    alive[ai] = 1;
    for (uint32_t atom : actions[ai].add) {
      if (!reached[atom]) {
        reached[atom] = 1;
        queue.push_back(atom);
      }
    }
  };

  for (uint32_t i = 0; i < problem.num_atoms(); ++i) {
    if (problem.init.test(i)) {
      reached[i] = 1;
      queue.push_back(i);
    }
  }
  for (uint32_t ai = 0; ai < actions.size(); ++ai)
    if (unsat[ai] == 0) trigger(ai);

  while (!queue.empty()) {
    uint32_t atom = queue.back();
    queue.pop_back();
    for (uint32_t ai : consumers[atom])
      if (--unsat[ai] == 0) trigger(ai);
  }

  std::vector<uint32_t> out;
  for (uint32_t ai = 0; ai < actions.size(); ++ai)
    if (alive[ai]) out.push_back(ai);
  return out;
}

// ---------------------------------------------------------------------------
// Relaxation heuristic (h_add / h_max)
// ---------------------------------------------------------------------------

RelaxationHeuristic::RelaxationHeuristic(const pddl::GroundedProblem& problem, Mode mode)
    : problem_(problem), mode_(mode) {
  consumers_.resize(problem.num_atoms());
  for (uint32_t ai : relaxed_reachable_actions(problem)) {
    const auto& pre = problem.actions[ai].pre;
    if (pre.empty()) {
      no_pre_actions_.push_back(ai);
      continue;
    }
    for (uint32_t atom : pre) consumers_[atom].push_back(ai);
  }
  atom_cost_.resize(problem.num_atoms());
  unsat_.resize(problem.actions.size());
  acc_.resize(problem.actions.size());
  action_epoch_.assign(problem.actions.size(), 0);
  is_goal_.assign(problem.num_atoms(), 0);
  for (uint32_t g : problem.goal) is_goal_[g] = 1;
}

int64_t RelaxationHeuristic::evaluate(const pddl::State& s) {
  if (problem_.goal_statically_unsat) return kInfiniteCost;
  if (problem_.goal.empty()) return 0;

  if (++epoch_ == 0) {  // stamp wrap-around
    std::fill(action_epoch_.begin(), action_epoch_.end(), 0);
    epoch_ = 1;
  }

  using Entry = std::pair<int64_t, uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

  const uint32_t n = problem_.num_atoms();
  for (uint32_t i = 0; i < n; ++i) {
    bool in_s = s.test(i);
    atom_cost_[i] = in_s ? 0 : kInfiniteCost;
    if (in_s) queue.emplace(0, i);
  }

  auto relax_effects = [&](const pddl::GroundAction& action, int64_t action_cost) {
    for (uint32_t atom : action.add) {
      if (action_cost < atom_cost_[atom]) {
        atom_cost_[atom] = action_cost;
        queue.emplace(action_cost, atom);
      }
    }
  };
  for (uint32_t ai : no_pre_actions_) relax_effects(problem_.actions[ai], 1);

  // Dijkstra pops finalize atom costs; stop once every goal atom is final.
  uint32_t goal_pending = static_cast<uint32_t>(problem_.goal.size());
  while (!queue.empty()) {
    auto [cost, atom] = queue.top();
    queue.pop();
    if (cost > atom_cost_[atom]) continue;
    if (is_goal_[atom] && --goal_pending == 0) break;
    for (uint32_t ai : consumers_[atom]) {
      if (action_epoch_[ai] != epoch_) {
        action_epoch_[ai] = epoch_;
        unsat_[ai] = static_cast<uint32_t>(problem_.actions[ai].pre.size());
        acc_[ai] = 0;
      }
      acc_[ai] += cost;
      if (--unsat_[ai] == 0) {
        int64_t base = mode_ == Mode::Add ? acc_[ai] : cost;
        relax_effects(problem_.actions[ai], base + 1);
      }
    }
  }

  int64_t h = 0;
  for (uint32_t g : problem_.goal) {
    int64_t c = atom_cost_[g];
    if (c == kInfiniteCost) return kInfiniteCost;
    h = mode_ == Mode::Add ? h + c : std::max(h, c);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Search machinery
// ---------------------------------------------------------------------------

namespace {

struct Node {
  const pddl::State* state;
  uint32_t parent;      // node index; self for root
  uint32_t via_action;  // producing action index
  int64_t g = 0;
  bool closed = false;
};

/// Enumerates applicable actions by watching each action's first (rarest)
/// precondition atom; results come back in ascending action-index order,
/// identical to a full scan.
class SuccessorGen {
 public:
  explicit SuccessorGen(const pddl::GroundedProblem& problem)
      : problem_(problem), watch_(problem.num_atoms()) {
    for (uint32_t ai : relaxed_reachable_actions(problem)) {
      const auto& pre = problem.actions[ai].pre;
      if (pre.empty())
        no_pre_.push_back(ai);
      else
        watch_[pre[0]].push_back(ai);
    }
  }

  void applicable(const pddl::State& s, std::vector<uint32_t>& out) const {
    out.assign(no_pre_.begin(), no_pre_.end());
    const auto& words = s.words();
    for (size_t w = 0; w < words.size(); ++w) {
      uint64_t bits = words[w];
      while (bits) {
        const uint32_t atom = static_cast<uint32_t>(w * 64 + std::countr_zero(bits));
        bits &= bits - 1;
        for (uint32_t ai : watch_[atom]) {
          const auto& pre = problem_.actions[ai].pre;
          bool ok = true;
          for (size_t k = 1; k < pre.size(); ++k) {
            if (!s.test(pre[k])) {
              ok = false;
              break;
            }
          }
          if (ok) out.push_back(ai);
        }
      }
    }
    std::sort(out.begin(), out.end());
  }

 private:
  const pddl::GroundedProblem& problem_;
  std::vector<std::vector<uint32_t>> watch_;
  std::vector<uint32_t> no_pre_;
};

pddl::State successor(const pddl::State& s, const pddl::GroundAction& a) {
  pddl::State next = s;
  for (uint32_t id : a.del) next.reset(id);
  for (uint32_t id : a.add) next.set(id);
  return next;
}

pddl::Plan extract_plan(const pddl::GroundedProblem& problem, const std::vector<Node>& nodes,
                        uint32_t goal_node) {
  std::vector<uint32_t> actions;
  for (uint32_t i = goal_node; nodes[i].parent != i; i = nodes[i].parent)
    actions.push_back(nodes[i].via_action);
  std::reverse(actions.begin(), actions.end());
  pddl::Plan plan;
  plan.steps.reserve(actions.size());
  for (uint32_t ai : actions) plan.steps.push_back(problem.step_for(problem.actions[ai]));
  return plan;
}

using SeenMap = std::unordered_map<pddl::State, uint32_t, pddl::StateHash>;

}  // namespace

SearchOutcome solve_satisficing(const pddl::GroundedProblem& problem, const Deadline& deadline) {
  SearchOutcome out;
  if (problem.goal_statically_unsat) {
    out.verdict = Verdict::ProvedUnsolvable;
    out.stats.elapsed = deadline.elapsed();
    return out;
  }

  RelaxationHeuristic heuristic(problem, RelaxationHeuristic::Mode::Add);
  SuccessorGen gen(problem);
  std::vector<Node> nodes;
  SeenMap seen;
  std::vector<uint32_t> apps;

  auto intern = [&](pddl::State&& s, uint32_t parent, uint32_t via) -> uint32_t {
    auto [it, fresh] = seen.emplace(std::move(s), 0);
    if (!fresh) return UINT32_MAX;
    uint32_t idx = static_cast<uint32_t>(nodes.size());
    it->second = idx;
    nodes.push_back({&it->first, parent, via});
    return idx;
  };

  // Priority: (parent h, insertion order); the popped node is then evaluated.
  using Entry = std::pair<int64_t, uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  {
    pddl::State root = problem.init;
    uint32_t idx = intern(std::move(root), 0, 0);
    out.stats.generated = 1;
    open.emplace(0, idx);
  }

  while (!open.empty()) {
    if (deadline.expired()) {
      out.verdict = Verdict::TimedOut;
      out.stats.elapsed = deadline.elapsed();
      return out;
    }
    uint32_t idx = open.top().second;
    open.pop();
    const pddl::State& s = *nodes[idx].state;
    if (s.contains_all(problem.goal)) {
      out.verdict = Verdict::Solved;
      out.plan = extract_plan(problem, nodes, idx);
      out.stats.elapsed = deadline.elapsed();
      return out;
    }
    const int64_t h = heuristic.evaluate(s);
    if (h == kInfiniteCost) continue;  // dead end in the relaxation
    ++out.stats.expansions;
    gen.applicable(s, apps);
    for (uint32_t ai : apps) {
      uint32_t sidx = intern(successor(s, problem.actions[ai]), idx, ai);
      if (sidx == UINT32_MAX) continue;  // duplicate
      ++out.stats.generated;
      open.emplace(h, sidx);
    }
  }

  out.verdict = Verdict::ProvedUnsolvable;
  out.stats.elapsed = deadline.elapsed();
  return out;
}

SearchOutcome solve_optimal(const pddl::GroundedProblem& problem, const Deadline& deadline) {
  SearchOutcome out;
  if (problem.goal_statically_unsat) {
    out.verdict = Verdict::ProvedUnsolvable;
    out.stats.elapsed = deadline.elapsed();
    return out;
  }

  RelaxationHeuristic heuristic(problem, RelaxationHeuristic::Mode::Max);
  SuccessorGen gen(problem);
  std::vector<Node> nodes;
  SeenMap seen;
  std::vector<uint32_t> apps;

  // Priority: (f, g, insertion order); stale entries skipped on pop.
  struct Entry {
    int64_t f, g;
    uint32_t seq, node;
    bool operator>(const Entry& o) const {
      return std::tie(f, g, seq) > std::tie(o.f, o.g, o.seq);
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  uint32_t seq = 0;

  {
    pddl::State root = problem.init;
    int64_t h = heuristic.evaluate(root);
    auto [it, fresh] = seen.emplace(std::move(root), 0);
    (void)fresh;
    nodes.push_back({&it->first, 0, 0, 0, false});
    out.stats.generated = 1;
    if (h != kInfiniteCost) open.push({h, 0, seq++, 0});
  }

  while (!open.empty()) {
    if (deadline.expired()) {
      out.verdict = Verdict::TimedOut;
      out.stats.elapsed = deadline.elapsed();
      return out;
    }
    Entry top = open.top();
    open.pop();
    {
      Node& node = nodes[top.node];
      if (node.closed || node.g != top.g) continue;  // stale entry
      node.closed = true;
    }
    const pddl::State& s = *nodes[top.node].state;
    if (s.contains_all(problem.goal)) {
      out.verdict = Verdict::Solved;
      out.plan = extract_plan(problem, nodes, top.node);
      out.stats.elapsed = deadline.elapsed();
      return out;
    }
    ++out.stats.expansions;
    const int64_t succ_g = nodes[top.node].g + 1;
    gen.applicable(s, apps);
    for (uint32_t ai : apps) {
      pddl::State succ = successor(s, problem.actions[ai]);
      auto it = seen.find(succ);
      if (it == seen.end()) {
        int64_t h = heuristic.evaluate(succ);
        auto [sit, fresh] = seen.emplace(std::move(succ), 0);
        (void)fresh;
        uint32_t sidx = static_cast<uint32_t>(nodes.size());
        sit->second = sidx;
        nodes.push_back({&sit->first, top.node, ai, succ_g, false});
        ++out.stats.generated;
        if (h != kInfiniteCost) open.push({succ_g + h, succ_g, seq++, sidx});
      } else {
        Node& known = nodes[it->second];
        if (!known.closed && succ_g < known.g) {
          int64_t h = heuristic.evaluate(*known.state);
          known.g = succ_g;
          known.parent = top.node;
          known.via_action = ai;
          if (h != kInfiniteCost) open.push({succ_g + h, succ_g, seq++, it->second});
        }
      }
    }
  }

  out.verdict = Verdict::ProvedUnsolvable;
  out.stats.elapsed = deadline.elapsed();
  return out;
}

SearchOutcome bfs_oracle(const pddl::GroundedProblem& problem, uint64_t node_limit) {
  if (problem.num_atoms() > 4096)
    throw std::invalid_argument("bfs_oracle: problem too large (" +
                                std::to_string(problem.num_atoms()) + " atoms, limit 4096)");
  SearchOutcome out;
  Deadline clock = Deadline::unlimited();
  if (problem.goal_statically_unsat) {
    out.verdict = Verdict::ProvedUnsolvable;
    return out;
  }

  SuccessorGen gen(problem);
  std::vector<Node> nodes;
  SeenMap seen;
  std::queue<uint32_t> open;
  std::vector<uint32_t> apps;

  auto intern = [&](pddl::State&& s, uint32_t parent, uint32_t via) -> uint32_t {
    auto [it, fresh] = seen.emplace(std::move(s), 0);
    if (!fresh) return UINT32_MAX;
    uint32_t idx = static_cast<uint32_t>(nodes.size());
    it->second = idx;
    nodes.push_back({&it->first, parent, via});
    return idx;
  };

  {
    pddl::State root = problem.init;
    if (root.contains_all(problem.goal)) {
      out.verdict = Verdict::Solved;
      out.stats.elapsed = clock.elapsed();
      return out;  // empty plan
    }
    open.push(intern(std::move(root), 0, 0));
    out.stats.generated = 1;
  }

  while (!open.empty()) {
    if (nodes.size() > node_limit) {
      out.verdict = Verdict::NodeLimitExceeded;
      out.stats.elapsed = clock.elapsed();
      return out;
    }
    uint32_t idx = open.front();
    open.pop();
    ++out.stats.expansions;
    gen.applicable(*nodes[idx].state, apps);
    for (uint32_t ai : apps) {
      pddl::State succ = successor(*nodes[idx].state, problem.actions[ai]);
      bool is_goal = succ.contains_all(problem.goal);
      uint32_t sidx = intern(std::move(succ), idx, ai);
      if (sidx == UINT32_MAX) continue;
      ++out.stats.generated;
      if (is_goal) {
        out.verdict = Verdict::Solved;
        out.plan = extract_plan(problem, nodes, sidx);
        out.stats.elapsed = clock.elapsed();
        return out;
      }
      open.push(sidx);
    }
  }

  out.verdict = Verdict::ProvedUnsolvable;
  out.stats.elapsed = clock.elapsed();
  return out;
}

}  // namespace namoplan::search
