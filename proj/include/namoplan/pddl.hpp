#ifndef NAMOPLAN_PDDL_HPP
#define NAMOPLAN_PDDL_HPP

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace namoplan::pddl {

// ---------------------------------------------------------------------------
// Lifted representation
// ---------------------------------------------------------------------------

struct PredicateSchema {
  std::string name;
  std::vector<std::string> param_types;  // arity 0..2

  size_t arity() const { return param_types.size(); }
  auto operator<=>(const PredicateSchema&) const = default;
};

struct TypedVar {
  std::string name;  // "?r"
  std::string type;
  auto operator<=>(const TypedVar&) const = default;
};

struct LiftedAtom {
  std::string predicate;
  std::vector<std::string> args;  // variable names from the schema's parameters
  auto operator<=>(const LiftedAtom&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedVar> params;
  std::vector<LiftedAtom> pre;
  std::vector<LiftedAtom> add;
  std::vector<LiftedAtom> del;
  auto operator<=>(const ActionSchema&) const = default;
};

struct Domain {
  std::string name;
  std::vector<std::string> types;           // sorted
  std::vector<PredicateSchema> predicates;  // sorted by name
  std::vector<ActionSchema> actions;        // sorted by name

  const PredicateSchema* find_predicate(std::string_view name) const;
  const ActionSchema* find_action(std::string_view name) const;
  /// A predicate is static iff it appears in no schema's add or del list.
  bool is_static(std::string_view predicate) const;

  bool operator==(const Domain&) const = default;
};

// ---------------------------------------------------------------------------
// Ground representation
// ---------------------------------------------------------------------------

struct Entity {
  std::string name;
  std::string type;
  auto operator<=>(const Entity&) const = default;
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;  // entity names

  std::string str() const;
  auto operator<=>(const GroundAtom&) const = default;
};

struct Task {
  std::string name;
  std::string domain_name;
  std::vector<Entity> entities;    // sorted by name
  std::vector<GroundAtom> init;    // sorted
  std::vector<GroundAtom> goal;    // sorted

  const Entity* find_entity(std::string_view name) const;
  bool operator==(const Task&) const = default;
};

struct PlanStep {
  std::string action;
  std::vector<std::string> args;

  std::string str() const;  // "(move_up robot p13 p7)"
  auto operator<=>(const PlanStep&) const = default;
};

struct Plan {
  std::vector<PlanStep> steps;

  size_t length() const { return steps.size(); }
  bool operator==(const Plan&) const = default;
};

/// Fixed-width bitset over a grounded problem's fluent atom universe.
class State {
 public:
  State() = default;
  explicit State(uint32_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

  void set(uint32_t i) { words_[i >> 6] |= uint64_t{1} << (i & 63); }
  void reset(uint32_t i) { words_[i >> 6] &= ~(uint64_t{1} << (i & 63)); }
  bool test(uint32_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  uint32_t size_bits() const { return nbits_; }

  bool contains_all(std::span<const uint32_t> ids) const {
    for (uint32_t id : ids)
      if (!test(id)) return false;
    return true;
  }

  size_t hash() const {
    uint64_t h = 0x9E3779B97F4A7C15ull;
    for (uint64_t w : words_) {
      h ^= w;
      h *= 0x100000001B3ull;
      h ^= h >> 29;
    }
    return static_cast<size_t>(h);
  }

  const std::vector<uint64_t>& words() const { return words_; }
  bool operator==(const State&) const = default;

 private:
  uint32_t nbits_ = 0;
  std::vector<uint64_t> words_;
};

struct StateHash {
  size_t operator()(const State& s) const { return s.hash(); }
};

struct GroundAction {
  uint32_t schema_index;           // into GroundedProblem::schema order (== Domain::actions)
  std::vector<uint32_t> binding;   // entity indices, aligned with schema params
  std::vector<uint32_t> pre;       // fluent atom ids, sorted by dynamic rarity then id
  std::vector<uint32_t> add;       // sorted ids
  std::vector<uint32_t> del;       // sorted ids
};

struct GroundedProblem {
  std::vector<std::string> entity_names;  // sorted, index = entity id
  std::vector<std::string> schema_names;  // aligned with Domain::actions
  std::vector<GroundAtom> atoms;          // fluent universe, index = atom id
  State init;
  std::vector<uint32_t> goal;             // fluent goal atom ids
  bool goal_statically_unsat = false;     // a static goal atom is absent from init
  std::vector<GroundAction> actions;

  uint32_t num_atoms() const { return static_cast<uint32_t>(atoms.size()); }
  PlanStep step_for(const GroundAction& a) const;
};

// ---------------------------------------------------------------------------
// Errors and validation verdicts
// ---------------------------------------------------------------------------

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int col);
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

class InapplicableError : public std::runtime_error {
 public:
  explicit InapplicableError(const std::string& missing_atom);
  const std::string& missing_atom() const { return missing_; }

 private:
  std::string missing_;
};

enum class PlanFailure { None, Inapplicable, GoalUnsatisfied };

struct Validation {
  bool valid = false;
  size_t fail_index = 0;  // step index for Inapplicable, plan length for GoalUnsatisfied
  PlanFailure reason = PlanFailure::None;
  std::string detail;     // missing precondition / unsatisfied goal atom
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Sorts components into canonical order and checks structural invariants.
/// Programmatically built domains/tasks go through these before use.
void canonicalize(Domain& d);
void canonicalize(Task& t, const Domain& d);

/// Parses a typed-STRIPS domain (requirements :strips and :typing only).
/// Identifiers are case-insensitive and normalized to lower case.
Domain parse_domain(std::string_view text);

/// Parses a problem file against an already-parsed domain.
Task parse_task(std::string_view text, const Domain& domain);

std::string emit_domain(const Domain& d);
std::string emit_task(const Task& t);

/// One "(action arg...)" step per line; ';' comments allowed.
Plan parse_plan(std::string_view text);
std::string emit_plan(const Plan& p);

/// Instantiates all type-correct ground actions, pruning instances whose
/// static preconditions (predicates in no add/del) are absent from init.
/// Static atoms are compiled out of the returned preconditions.
GroundedProblem ground(const Domain& d, const Task& t);

bool applicable(const State& s, const GroundAction& a);

/// Returns (s \ del) ∪ add. Throws InapplicableError naming a missing
/// precondition atom when !applicable(s, a).
State apply(const State& s, const GroundAction& a, const GroundedProblem& problem);

/// Replays the plan from init, instantiating each step directly from its
/// schema (independent of the grounder's action enumeration).
Validation validate_plan(const Domain& d, const Task& t, const Plan& plan);

}  // namespace namoplan::pddl

#endif  // NAMOPLAN_PDDL_HPP
