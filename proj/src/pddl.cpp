#include "namoplan/pddl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace namoplan::pddl {

namespace {

std::string atom_text(std::string_view predicate, std::span<const std::string> args) {
  std::string out = "(";
  out += predicate;
  for (const auto& a : args) {
    out += ' ';
    out += a;
  }
  out += ')';
  return out;
}

}  // namespace

ParseError::ParseError(const std::string& message, int line, int col)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
      line_(line),
      col_(col) {}

InapplicableError::InapplicableError(const std::string& missing_atom)
    : std::runtime_error("action not applicable: missing precondition " + missing_atom),
      missing_(missing_atom) {}

std::string GroundAtom::str() const { return atom_text(predicate, args); }
std::string PlanStep::str() const { return atom_text(action, args); }

const PredicateSchema* Domain::find_predicate(std::string_view name) const {
  for (const auto& p : predicates)
    if (p.name == name) return &p;
  return nullptr;
}

const ActionSchema* Domain::find_action(std::string_view name) const {
  for (const auto& a : actions)
    if (a.name == name) return &a;
  return nullptr;
}

bool Domain::is_static(std::string_view predicate) const {
  for (const auto& a : actions) {
    for (const auto& atom : a.add)
      if (atom.predicate == predicate) return false;
    for (const auto& atom : a.del)
      if (atom.predicate == predicate) return false;
  }
  return true;
}

const Entity* Task::find_entity(std::string_view name) const {
  auto it = std::lower_bound(entities.begin(), entities.end(), name,
                             [](const Entity& e, std::string_view n) { return e.name < n; });
  if (it != entities.end() && it->name == name) return &*it;
  return nullptr;
}

PlanStep GroundedProblem::step_for(const GroundAction& a) const {
  PlanStep step;
  step.action = schema_names[a.schema_index];
  step.args.reserve(a.binding.size());
  for (uint32_t e : a.binding) step.args.push_back(entity_names[e]);
  return step;
}

// ---------------------------------------------------------------------------
// S-expression reader
// ---------------------------------------------------------------------------

namespace {

struct Sexpr {
  bool is_list = false;
  std::string atom;  // lowercased
  std::vector<Sexpr> items;
  int line = 1, col = 1;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  Sexpr read() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (text_[pos_] == ')') fail("unexpected ')'");
    if (text_[pos_] == '(') {
      Sexpr list;
      list.is_list = true;
      list.line = line_;
      list.col = col_;
      advance();
      for (;;) {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unclosed '('", list.line, list.col);
        if (text_[pos_] == ')') {
          advance();
          return list;
        }
        list.items.push_back(read());
      }
    }
    Sexpr sym;
    sym.line = line_;
    sym.col = col_;
    while (pos_ < text_.size() && !is_delim(text_[pos_])) {
      sym.atom += static_cast<char>(std::tolower(static_cast<unsigned char>(text_[pos_])));
      advance();
    }
    return sym;
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line_, col_); }

 private:
  static bool is_delim(char c) {
    return c == '(' || c == ')' || c == ';' || std::isspace(static_cast<unsigned char>(c));
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

[[noreturn]] void fail_at(const Sexpr& s, const std::string& msg) {
  throw ParseError(msg, s.line, s.col);
}

const Sexpr& expect_list(const Sexpr& s, const std::string& what) {
  if (!s.is_list) fail_at(s, "expected " + what);
  return s;
}

const std::string& expect_atom(const Sexpr& s, const std::string& what) {
  if (s.is_list) fail_at(s, "expected " + what);
  return s.atom;
}

bool head_is(const Sexpr& s, std::string_view kw) {
  return s.is_list && !s.items.empty() && !s.items[0].is_list && s.items[0].atom == kw;
}

/// Parses "n1 n2 - t1 n3 - t2 ...": every name must carry a type.
std::vector<std::pair<std::string, std::string>> parse_typed_list(const Sexpr& list,
                                                                  size_t start) {
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<std::string> pending;
  for (size_t i = start; i < list.items.size(); ++i) {
    const std::string& tok = expect_atom(list.items[i], "name or '-'");
    if (tok == "-") {
      if (pending.empty()) fail_at(list.items[i], "dangling '-' in typed list");
      if (i + 1 >= list.items.size()) fail_at(list.items[i], "missing type after '-'");
      const std::string& type = expect_atom(list.items[i + 1], "type name");
      for (auto& n : pending) out.emplace_back(std::move(n), type);
      pending.clear();
      ++i;
    } else {
      pending.push_back(tok);
    }
  }
  if (!pending.empty())
    fail_at(list, "untyped name '" + pending.front() + "' (every name needs '- <type>')");
  return out;
}

LiftedAtom parse_lifted_atom(const Sexpr& s) {
  const Sexpr& list = expect_list(s, "atom");
  if (list.items.empty()) fail_at(s, "empty atom");
  LiftedAtom atom;
  atom.predicate = expect_atom(list.items[0], "predicate name");
  for (size_t i = 1; i < list.items.size(); ++i) {
    const std::string& arg = expect_atom(list.items[i], "argument");
    if (arg.empty() || arg[0] != '?')
      fail_at(list.items[i], "constants in action bodies are not supported");
    atom.args.push_back(arg);
  }
  return atom;
}

void reject_unsupported_formula(const Sexpr& s, bool in_effect) {
  if (!s.is_list || s.items.empty() || s.items[0].is_list) return;
  const std::string& head = s.items[0].atom;
  if (head == "when") fail_at(s, "conditional effects are not supported");
  if (head == "forall" || head == "exists") fail_at(s, "quantified formulas are not supported");
  if (head == "or" || head == "imply") fail_at(s, "disjunctive formulas are not supported");
  if (head == "=") fail_at(s, "equality is not supported");
  if (head == "increase" || head == "decrease" || head == "assign")
    fail_at(s, "numeric effects are not supported");
  if (head == "not" && !in_effect) fail_at(s, "negative preconditions are not supported");
}

std::vector<LiftedAtom> parse_precondition(const Sexpr& s) {
  std::vector<LiftedAtom> out;
  reject_unsupported_formula(s, false);
  if (head_is(s, "and")) {
    for (size_t i = 1; i < s.items.size(); ++i) {
      reject_unsupported_formula(s.items[i], false);
      out.push_back(parse_lifted_atom(s.items[i]));
    }
  } else {
    out.push_back(parse_lifted_atom(s));
  }
  return out;
}

void parse_effect(const Sexpr& s, std::vector<LiftedAtom>& add, std::vector<LiftedAtom>& del) {
  reject_unsupported_formula(s, true);
  if (head_is(s, "and")) {
    for (size_t i = 1; i < s.items.size(); ++i) parse_effect(s.items[i], add, del);
  } else if (head_is(s, "not")) {
    if (s.items.size() != 2) fail_at(s, "'not' takes one atom");
    del.push_back(parse_lifted_atom(s.items[1]));
  } else {
    add.push_back(parse_lifted_atom(s));
  }
}

GroundAtom parse_ground_atom(const Sexpr& s) {
  const Sexpr& list = expect_list(s, "atom");
  if (list.items.empty()) fail_at(s, "empty atom");
  GroundAtom atom;
  atom.predicate = expect_atom(list.items[0], "predicate name");
  if (atom.predicate == "=") fail_at(s, "numeric fluents are not supported");
  for (size_t i = 1; i < list.items.size(); ++i)
    atom.args.push_back(expect_atom(list.items[i], "entity name"));
  return atom;
}

void sort_unique(std::vector<GroundAtom>& atoms) {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
}

}  // namespace

// ---------------------------------------------------------------------------
// Canonicalization / invariant checks
// ---------------------------------------------------------------------------

namespace {

void check_lifted_atoms(const Domain& d, const ActionSchema& a,
                        const std::vector<LiftedAtom>& atoms, const char* where) {
  std::map<std::string, std::string> var_type;
  for (const auto& p : a.params) var_type[p.name] = p.type;
  for (const auto& atom : atoms) {
    const PredicateSchema* schema = d.find_predicate(atom.predicate);
    if (!schema)
      throw std::invalid_argument("action " + a.name + ": unknown predicate '" + atom.predicate +
                                  "' in " + where);
    if (schema->arity() != atom.args.size())
      throw std::invalid_argument("action " + a.name + ": predicate '" + atom.predicate +
                                  "' expects " + std::to_string(schema->arity()) + " args, got " +
                                  std::to_string(atom.args.size()));
    for (size_t i = 0; i < atom.args.size(); ++i) {
      auto it = var_type.find(atom.args[i]);
      if (it == var_type.end())
        throw std::invalid_argument("action " + a.name + ": variable '" + atom.args[i] +
                                    "' in " + where + " is not a parameter");
      if (it->second != schema->param_types[i])
        throw std::invalid_argument("action " + a.name + ": variable '" + atom.args[i] +
                                    "' has type " + it->second + ", predicate '" +
                                    atom.predicate + "' expects " + schema->param_types[i]);
    }
  }
}

void canonicalize_domain(Domain& d) {
  std::sort(d.types.begin(), d.types.end());
  d.types.erase(std::unique(d.types.begin(), d.types.end()), d.types.end());
  std::set<std::string> types(d.types.begin(), d.types.end());

  std::sort(d.predicates.begin(), d.predicates.end());
  for (size_t i = 0; i + 1 < d.predicates.size(); ++i)
    if (d.predicates[i].name == d.predicates[i + 1].name)
      throw std::invalid_argument("duplicate predicate '" + d.predicates[i].name + "'");
  for (const auto& p : d.predicates) {
    if (p.arity() > 2)
      throw std::invalid_argument("predicate '" + p.name + "' has arity " +
                                  std::to_string(p.arity()) + " (max 2)");
    for (const auto& t : p.param_types)
      if (!types.count(t))
        throw std::invalid_argument("predicate '" + p.name + "' references undeclared type '" +
                                    t + "'");
  }

  std::sort(d.actions.begin(), d.actions.end(),
            [](const ActionSchema& a, const ActionSchema& b) { return a.name < b.name; });
  for (size_t i = 0; i + 1 < d.actions.size(); ++i)
    if (d.actions[i].name == d.actions[i + 1].name)
      throw std::invalid_argument("duplicate action '" + d.actions[i].name + "'");

  for (auto& a : d.actions) {
    std::set<std::string> seen;
    for (const auto& p : a.params) {
      if (!seen.insert(p.name).second)
        throw std::invalid_argument("action " + a.name + ": duplicate parameter " + p.name);
      if (!types.count(p.type))
        throw std::invalid_argument("action " + a.name + ": undeclared type '" + p.type + "'");
    }
    check_lifted_atoms(d, a, a.pre, "precondition");
    check_lifted_atoms(d, a, a.add, "add effect");
    check_lifted_atoms(d, a, a.del, "delete effect");
    std::sort(a.pre.begin(), a.pre.end());
    a.pre.erase(std::unique(a.pre.begin(), a.pre.end()), a.pre.end());
    std::sort(a.add.begin(), a.add.end());
    a.add.erase(std::unique(a.add.begin(), a.add.end()), a.add.end());
    std::sort(a.del.begin(), a.del.end());
    a.del.erase(std::unique(a.del.begin(), a.del.end()), a.del.end());
    for (const auto& atom : a.add)
      if (std::binary_search(a.del.begin(), a.del.end(), atom))
        throw std::invalid_argument("action " + a.name + ": atom " + atom.predicate +
                                    " appears in both add and delete lists");
  }
}

void canonicalize_task(Task& t, const Domain& d) {
  std::set<std::string> types(d.types.begin(), d.types.end());
  std::sort(t.entities.begin(), t.entities.end());
  for (size_t i = 0; i + 1 < t.entities.size(); ++i)
    if (t.entities[i].name == t.entities[i + 1].name)
      throw std::invalid_argument("duplicate entity '" + t.entities[i].name + "'");
  for (const auto& e : t.entities)
    if (!types.count(e.type))
      throw std::invalid_argument("entity '" + e.name + "' has undeclared type '" + e.type + "'");

  auto check_atoms = [&](std::vector<GroundAtom>& atoms, const char* where) {
    for (const auto& atom : atoms) {
      const PredicateSchema* schema = d.find_predicate(atom.predicate);
      if (!schema)
        throw std::invalid_argument(std::string(where) + ": unknown predicate '" +
                                    atom.predicate + "'");
      if (schema->arity() != atom.args.size())
        throw std::invalid_argument(std::string(where) + ": predicate '" + atom.predicate +
                                    "' expects " + std::to_string(schema->arity()) +
                                    " args, got " + std::to_string(atom.args.size()) + " in " +
                                    atom.str());
      for (size_t i = 0; i < atom.args.size(); ++i) {
        const Entity* e = t.find_entity(atom.args[i]);
        if (!e)
          throw std::invalid_argument(std::string(where) + ": unknown entity '" + atom.args[i] +
                                      "' in " + atom.str());
        if (e->type != schema->param_types[i])
          throw std::invalid_argument(std::string(where) + ": entity '" + e->name +
                                      "' has type " + e->type + ", predicate '" +
                                      atom.predicate + "' expects " + schema->param_types[i]);
      }
    }
    sort_unique(atoms);
  };
  check_atoms(t.init, "init");
  check_atoms(t.goal, "goal");
}

}  // namespace

void canonicalize(Domain& d) { canonicalize_domain(d); }
void canonicalize(Task& t, const Domain& d) { canonicalize_task(t, d); }

// ---------------------------------------------------------------------------
// parse_domain / parse_task
// ---------------------------------------------------------------------------

Domain parse_domain(std::string_view text) {
  Reader reader(text);
  Sexpr root = reader.read();
  if (!reader.at_end()) reader.fail("trailing content after domain definition");
  if (!head_is(root, "define")) fail_at(root, "expected (define (domain ...) ...)");
  if (root.items.size() < 2 || !head_is(root.items[1], "domain") ||
      root.items[1].items.size() != 2)
    fail_at(root, "expected (domain <name>) after define");

  Domain d;
  d.name = expect_atom(root.items[1].items[1], "domain name");

  for (size_t i = 2; i < root.items.size(); ++i) {
    const Sexpr& section = expect_list(root.items[i], "domain section");
    if (section.items.empty()) fail_at(section, "empty domain section");
    const std::string& kw = expect_atom(section.items[0], "section keyword");
    if (kw == ":requirements") {
      for (size_t j = 1; j < section.items.size(); ++j) {
        const std::string& req = expect_atom(section.items[j], "requirement");
        if (req != ":strips" && req != ":typing")
          fail_at(section.items[j], "unsupported requirement " + req);
      }
    } else if (kw == ":types") {
      for (size_t j = 1; j < section.items.size(); ++j) {
        const std::string& name = expect_atom(section.items[j], "type name");
        if (name == "-") fail_at(section.items[j], "type hierarchies are not supported");
        d.types.push_back(name);
      }
    } else if (kw == ":predicates") {
      for (size_t j = 1; j < section.items.size(); ++j) {
        const Sexpr& p = expect_list(section.items[j], "predicate declaration");
        if (p.items.empty()) fail_at(p, "empty predicate declaration");
        PredicateSchema schema;
        schema.name = expect_atom(p.items[0], "predicate name");
        for (auto& [var, type] : parse_typed_list(p, 1)) {
          if (var.empty() || var[0] != '?')
            fail_at(p, "predicate parameter '" + var + "' must be a ?variable");
          schema.param_types.push_back(type);
        }
        d.predicates.push_back(std::move(schema));
      }
    } else if (kw == ":action") {
      if (section.items.size() < 2) fail_at(section, "missing action name");
      ActionSchema a;
      a.name = expect_atom(section.items[1], "action name");
      size_t j = 2;
      while (j < section.items.size()) {
        const std::string& field = expect_atom(section.items[j], "action field");
        if (j + 1 >= section.items.size()) fail_at(section.items[j], "missing value for " + field);
        const Sexpr& value = section.items[j + 1];
        if (field == ":parameters") {
          for (auto& [var, type] : parse_typed_list(expect_list(value, "parameter list"), 0)) {
            if (var.empty() || var[0] != '?')
              fail_at(value, "action parameter '" + var + "' must be a ?variable");
            a.params.push_back({var, type});
          }
        } else if (field == ":precondition") {
          a.pre = parse_precondition(value);
        } else if (field == ":effect") {
          parse_effect(value, a.add, a.del);
        } else {
          fail_at(section.items[j], "unsupported action field " + field);
        }
        j += 2;
      }
      d.actions.push_back(std::move(a));
    } else if (kw == ":constants") {
      fail_at(section, "domain constants are not supported");
    } else if (kw == ":functions") {
      fail_at(section, "numeric fluents are not supported");
    } else {
      fail_at(section, "unsupported section " + kw);
    }
  }

  canonicalize_domain(d);
  return d;
}

Task parse_task(std::string_view text, const Domain& domain) {
  Reader reader(text);
  Sexpr root = reader.read();
  if (!reader.at_end()) reader.fail("trailing content after problem definition");
  if (!head_is(root, "define")) fail_at(root, "expected (define (problem ...) ...)");
  if (root.items.size() < 2 || !head_is(root.items[1], "problem") ||
      root.items[1].items.size() != 2)
    fail_at(root, "expected (problem <name>) after define");

  Task t;
  t.name = expect_atom(root.items[1].items[1], "problem name");
  bool saw_goal = false;

  for (size_t i = 2; i < root.items.size(); ++i) {
    const Sexpr& section = expect_list(root.items[i], "problem section");
    if (section.items.empty()) fail_at(section, "empty problem section");
    const std::string& kw = expect_atom(section.items[0], "section keyword");
    if (kw == ":domain") {
      if (section.items.size() != 2) fail_at(section, "expected (:domain <name>)");
      t.domain_name = expect_atom(section.items[1], "domain name");
      if (t.domain_name != domain.name)
        fail_at(section, "problem references domain '" + t.domain_name + "', expected '" +
                             domain.name + "'");
    } else if (kw == ":objects") {
      for (auto& [name, type] : parse_typed_list(section, 1)) {
        if (!name.empty() && name[0] == '?')
          fail_at(section, "entity name '" + name + "' must not be a variable");
        t.entities.push_back({name, type});
      }
    } else if (kw == ":init") {
      for (size_t j = 1; j < section.items.size(); ++j)
        t.init.push_back(parse_ground_atom(section.items[j]));
    } else if (kw == ":goal") {
      saw_goal = true;
      const Sexpr& gd = section.items.size() == 2 ? section.items[1] : section;
      if (section.items.size() != 2) fail_at(section, "expected (:goal <formula>)");
      reject_unsupported_formula(gd, false);
      if (head_is(gd, "and")) {
        for (size_t j = 1; j < gd.items.size(); ++j) {
          reject_unsupported_formula(gd.items[j], false);
          t.goal.push_back(parse_ground_atom(gd.items[j]));
        }
      } else {
        t.goal.push_back(parse_ground_atom(gd));
      }
    } else {
      fail_at(section, "unsupported section " + kw);
    }
  }

  if (t.domain_name.empty()) fail_at(root, "missing (:domain ...) section");
  if (!saw_goal) fail_at(root, "missing (:goal ...) section");
  canonicalize_task(t, domain);
  return t;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace {

void emit_typed_vars(std::ostringstream& out, std::span<const TypedVar> vars) {
  for (size_t i = 0; i < vars.size(); ++i) {
    if (i) out << ' ';
    out << vars[i].name << " - " << vars[i].type;
  }
}

void emit_lifted(std::ostringstream& out, const LiftedAtom& atom) {
  out << '(' << atom.predicate;
  for (const auto& a : atom.args) out << ' ' << a;
  out << ')';
}

}  // namespace

std::string emit_domain(const Domain& d) {
  std::ostringstream out;
  out << "(define (domain " << d.name << ")\n";
  out << "  (:requirements :strips :typing)\n";
  out << "  (:types";
  for (const auto& t : d.types) out << ' ' << t;
  out << ")\n";
  out << "  (:predicates\n";
  for (const auto& p : d.predicates) {
    out << "    (" << p.name;
    for (size_t i = 0; i < p.param_types.size(); ++i)
      out << " ?x" << i << " - " << p.param_types[i];
    out << ")\n";
  }
  out << "  )\n";
  for (const auto& a : d.actions) {
    out << "  (:action " << a.name << "\n    :parameters (";
    emit_typed_vars(out, a.params);
    out << ")\n    :precondition (and";
    for (const auto& atom : a.pre) {
      out << ' ';
      emit_lifted(out, atom);
    }
    out << ")\n    :effect (and";
    for (const auto& atom : a.add) {
      out << ' ';
      emit_lifted(out, atom);
    }
    for (const auto& atom : a.del) {
      out << " (not ";
      emit_lifted(out, atom);
      out << ')';
    }
    out << ")\n  )\n";
  }
  out << ")\n";
  return out.str();
}

std::string emit_task(const Task& t) {
  std::ostringstream out;
  out << "(define (problem " << t.name << ")\n";
  out << "  (:domain " << t.domain_name << ")\n";
  out << "  (:objects";
  for (const auto& e : t.entities) out << "\n    " << e.name << " - " << e.type;
  out << ")\n";
  out << "  (:init";
  for (const auto& atom : t.init) out << "\n    " << atom.str();
  out << ")\n";
  out << "  (:goal (and";
  for (const auto& atom : t.goal) out << ' ' << atom.str();
  out << "))\n)\n";
  return out.str();
}

Plan parse_plan(std::string_view text) {
  Reader reader(text);
  Plan plan;
  while (!reader.at_end()) {
    Sexpr s = reader.read();
    const Sexpr& list = expect_list(s, "plan step");
    if (list.items.empty()) fail_at(s, "empty plan step");
    PlanStep step;
    step.action = expect_atom(list.items[0], "action name");
    for (size_t i = 1; i < list.items.size(); ++i)
      step.args.push_back(expect_atom(list.items[i], "entity name"));
    plan.steps.push_back(std::move(step));
  }
  return plan;
}

std::string emit_plan(const Plan& p) {
  std::string out;
  for (const auto& step : p.steps) {
    out += step.str();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

namespace {

// Packed key for a ground atom: predicate index and up to two entity ids.
uint64_t pack_atom(uint32_t pred, uint32_t a0_plus1, uint32_t a1_plus1) {
  return (uint64_t{pred} << 42) | (uint64_t{a0_plus1} << 21) | uint64_t{a1_plus1};
}

struct AtomRef {
  uint32_t pred = 0;              // domain predicate index
  bool is_static = false;
  std::array<int, 2> arg_pos{};   // parameter positions
  int max_pos = -1;               // deepest parameter used
  size_t arity = 0;
};

AtomRef resolve_atom(const Domain& d, const ActionSchema& schema, const LiftedAtom& atom,
                     const std::vector<bool>& pred_static) {
  AtomRef ref;
  ref.arity = atom.args.size();
  for (uint32_t pi = 0; pi < d.predicates.size(); ++pi)
    if (d.predicates[pi].name == atom.predicate) ref.pred = pi;
  ref.is_static = pred_static[ref.pred];
  for (size_t i = 0; i < atom.args.size(); ++i) {
    int pos = -1;
    for (size_t k = 0; k < schema.params.size(); ++k)
      if (schema.params[k].name == atom.args[i]) pos = static_cast<int>(k);
    ref.arg_pos[i] = pos;
    ref.max_pos = std::max(ref.max_pos, pos);
  }
  return ref;
}

}  // namespace

GroundedProblem ground(const Domain& d, const Task& t) {
  GroundedProblem p;
  p.entity_names.reserve(t.entities.size());
  for (const auto& e : t.entities) p.entity_names.push_back(e.name);
  p.schema_names.reserve(d.actions.size());
  for (const auto& a : d.actions) p.schema_names.push_back(a.name);

  std::unordered_map<std::string, uint32_t> entity_id;
  for (uint32_t i = 0; i < t.entities.size(); ++i) entity_id[t.entities[i].name] = i;
  std::map<std::string, std::vector<uint32_t>> by_type;
  for (uint32_t i = 0; i < t.entities.size(); ++i) by_type[t.entities[i].type].push_back(i);

  std::unordered_map<std::string, uint32_t> pred_id;
  std::vector<bool> pred_static(d.predicates.size());
  for (uint32_t i = 0; i < d.predicates.size(); ++i) {
    pred_id[d.predicates[i].name] = i;
    pred_static[i] = d.is_static(d.predicates[i].name);
  }

  // Fluent atom universe, enumerated in (predicate, entity, entity) order.
  std::unordered_map<uint64_t, uint32_t> atom_ids;
  for (uint32_t pi = 0; pi < d.predicates.size(); ++pi) {
    if (pred_static[pi]) continue;
    const PredicateSchema& schema = d.predicates[pi];
    auto add_atom = [&](uint32_t a0, uint32_t a1, size_t arity) {
      GroundAtom atom;
      atom.predicate = schema.name;
      if (arity >= 1) atom.args.push_back(p.entity_names[a0]);
      if (arity >= 2) atom.args.push_back(p.entity_names[a1]);
      atom_ids.emplace(pack_atom(pi, arity >= 1 ? a0 + 1 : 0, arity >= 2 ? a1 + 1 : 0),
                       static_cast<uint32_t>(p.atoms.size()));
      p.atoms.push_back(std::move(atom));
    };
    if (schema.arity() == 0) {
      add_atom(0, 0, 0);
    } else if (schema.arity() == 1) {
      for (uint32_t a : by_type[schema.param_types[0]]) add_atom(a, 0, 1);
    } else {
      for (uint32_t a : by_type[schema.param_types[0]])
        for (uint32_t b : by_type[schema.param_types[1]]) add_atom(a, b, 2);
    }
  }

  // Truth of static atoms and the initial fluent state.
  std::unordered_set<uint64_t> static_truth;
  p.init = State(p.num_atoms());
  for (const auto& atom : t.init) {
    uint32_t pi = pred_id.at(atom.predicate);
    uint32_t a0 = atom.args.size() >= 1 ? entity_id.at(atom.args[0]) + 1 : 0;
    uint32_t a1 = atom.args.size() >= 2 ? entity_id.at(atom.args[1]) + 1 : 0;
    uint64_t key = pack_atom(pi, a0, a1);
    if (pred_static[pi])
      static_truth.insert(key);
    else
      p.init.set(atom_ids.at(key));
  }

  // Goal over the fluent universe; static goal atoms must hold in init.
  for (const auto& atom : t.goal) {
    uint32_t pi = pred_id.at(atom.predicate);
    uint32_t a0 = atom.args.size() >= 1 ? entity_id.at(atom.args[0]) + 1 : 0;
    uint32_t a1 = atom.args.size() >= 2 ? entity_id.at(atom.args[1]) + 1 : 0;
    uint64_t key = pack_atom(pi, a0, a1);
    if (pred_static[pi]) {
      if (!static_truth.count(key)) p.goal_statically_unsat = true;
    } else {
      p.goal.push_back(atom_ids.at(key));
    }
  }
  std::sort(p.goal.begin(), p.goal.end());
  p.goal.erase(std::unique(p.goal.begin(), p.goal.end()), p.goal.end());

  // Instantiate schemas depth-first, checking static preconditions as soon as
  // their arguments are bound; adjacency predicates prune most of the space.
  for (uint32_t si = 0; si < d.actions.size(); ++si) {
    const ActionSchema& schema = d.actions[si];
    const size_t nparams = schema.params.size();

    std::vector<AtomRef> static_pre, fluent_pre, add_ref, del_ref;
    for (const auto& atom : schema.pre) {
      AtomRef ref = resolve_atom(d, schema, atom, pred_static);
      (ref.is_static ? static_pre : fluent_pre).push_back(ref);
    }
    for (const auto& atom : schema.add) add_ref.push_back(resolve_atom(d, schema, atom, pred_static));
    for (const auto& atom : schema.del) del_ref.push_back(resolve_atom(d, schema, atom, pred_static));

    std::vector<std::vector<const AtomRef*>> checks_at(nparams + 1);
    for (const auto& ref : static_pre)
      checks_at[static_cast<size_t>(ref.max_pos + 1)].push_back(&ref);

    std::vector<const std::vector<uint32_t>*> cand(nparams);
    bool empty_domain = false;
    for (size_t k = 0; k < nparams; ++k) {
      cand[k] = &by_type[schema.params[k].type];
      if (cand[k]->empty()) empty_domain = true;
    }
    if (empty_domain) continue;

    std::vector<uint32_t> binding(nparams);
    auto atom_key = [&](const AtomRef& ref) {
      uint32_t a0 = ref.arity >= 1 ? binding[ref.arg_pos[0]] + 1 : 0;
      uint32_t a1 = ref.arity >= 2 ? binding[ref.arg_pos[1]] + 1 : 0;
      return pack_atom(ref.pred, a0, a1);
    };
    auto checks_pass = [&](size_t depth) {
      for (const AtomRef* ref : checks_at[depth])
        if (!static_truth.count(atom_key(*ref))) return false;
      return true;
    };

    auto emit = [&]() {
      GroundAction ga;
      ga.schema_index = si;
      ga.binding = binding;
      for (const auto& ref : fluent_pre) ga.pre.push_back(atom_ids.at(atom_key(ref)));
      for (const auto& ref : add_ref) ga.add.push_back(atom_ids.at(atom_key(ref)));
      for (const auto& ref : del_ref) ga.del.push_back(atom_ids.at(atom_key(ref)));
      std::sort(ga.add.begin(), ga.add.end());
      ga.add.erase(std::unique(ga.add.begin(), ga.add.end()), ga.add.end());
      std::sort(ga.del.begin(), ga.del.end());
      ga.del.erase(std::unique(ga.del.begin(), ga.del.end()), ga.del.end());
      std::sort(ga.pre.begin(), ga.pre.end());
      ga.pre.erase(std::unique(ga.pre.begin(), ga.pre.end()), ga.pre.end());
      // First-fail ordering: atoms false in init (holding, upon, ...) are the
      // cheapest rejectors during search.
      std::stable_sort(ga.pre.begin(), ga.pre.end(), [&](uint32_t a, uint32_t b) {
        return p.init.test(a) < p.init.test(b);
      });
      p.actions.push_back(std::move(ga));
    };

    auto descend = [&](auto&& self, size_t depth) -> void {
      if (depth == nparams) {
        emit();
        return;
      }
      for (uint32_t e : *cand[depth]) {
        binding[depth] = e;
        if (checks_pass(depth + 1)) self(self, depth + 1);
      }
    };
    if (checks_pass(0)) descend(descend, 0);
  }

  return p;
}

bool applicable(const State& s, const GroundAction& a) { return s.contains_all(a.pre); }

State apply(const State& s, const GroundAction& a, const GroundedProblem& problem) {
  for (uint32_t id : a.pre)
    if (!s.test(id)) throw InapplicableError(problem.atoms[id].str());
  State next = s;
  for (uint32_t id : a.del) next.reset(id);
  for (uint32_t id : a.add) next.set(id);
  return next;
}

// ---------------------------------------------------------------------------
// Plan validation
// ---------------------------------------------------------------------------

Validation validate_plan(const Domain& d, const Task& t, const Plan& plan) {
  std::unordered_map<std::string, uint32_t> entity_id;
  for (uint32_t i = 0; i < t.entities.size(); ++i) entity_id[t.entities[i].name] = i;

  std::unordered_map<std::string, uint32_t> pred_id;
  std::vector<bool> pred_static(d.predicates.size());
  for (uint32_t i = 0; i < d.predicates.size(); ++i) {
    pred_id[d.predicates[i].name] = i;
    pred_static[i] = d.is_static(d.predicates[i].name);
  }

  auto key_of = [&](const GroundAtom& atom) {
    uint32_t pi = pred_id.at(atom.predicate);
    uint32_t a0 = atom.args.size() >= 1 ? entity_id.at(atom.args[0]) + 1 : 0;
    uint32_t a1 = atom.args.size() >= 2 ? entity_id.at(atom.args[1]) + 1 : 0;
    return pack_atom(pi, a0, a1);
  };

  std::unordered_set<uint64_t> static_truth;
  std::unordered_set<uint64_t> fluents;  // current state as a set of packed atoms
  for (const auto& atom : t.init) {
    if (pred_static[pred_id.at(atom.predicate)])
      static_truth.insert(key_of(atom));
    else
      fluents.insert(key_of(atom));
  }

  for (size_t k = 0; k < plan.steps.size(); ++k) {
    const PlanStep& step = plan.steps[k];
    const ActionSchema* schema = d.find_action(step.action);
    if (!schema) throw std::invalid_argument("unknown action '" + step.action + "' at step " +
                                             std::to_string(k));
    if (schema->params.size() != step.args.size())
      throw std::invalid_argument("action '" + step.action + "' expects " +
                                  std::to_string(schema->params.size()) + " args, got " +
                                  std::to_string(step.args.size()) + " at step " +
                                  std::to_string(k));
    std::map<std::string, std::string> var_binding;
    for (size_t i = 0; i < step.args.size(); ++i) {
      const Entity* e = t.find_entity(step.args[i]);
      if (!e)
        throw std::invalid_argument("unknown entity '" + step.args[i] + "' at step " +
                                    std::to_string(k));
      if (e->type != schema->params[i].type)
        throw std::invalid_argument("entity '" + e->name + "' has type " + e->type +
                                    ", parameter " + schema->params[i].name + " of '" +
                                    step.action + "' expects " + schema->params[i].type);
      var_binding[schema->params[i].name] = e->name;
    }

    auto instantiate = [&](const LiftedAtom& atom) {
      GroundAtom g;
      g.predicate = atom.predicate;
      for (const auto& v : atom.args) g.args.push_back(var_binding.at(v));
      return g;
    };

    for (const auto& atom : schema->pre) {
      GroundAtom g = instantiate(atom);
      bool holds = pred_static[pred_id.at(g.predicate)] ? static_truth.count(key_of(g)) > 0
                                                        : fluents.count(key_of(g)) > 0;
      if (!holds) return {false, k, PlanFailure::Inapplicable, g.str()};
    }
    for (const auto& atom : schema->del) fluents.erase(key_of(instantiate(atom)));
    for (const auto& atom : schema->add) fluents.insert(key_of(instantiate(atom)));
  }

  for (const auto& atom : t.goal) {
    bool holds = pred_static[pred_id.at(atom.predicate)] ? static_truth.count(key_of(atom)) > 0
                                                         : fluents.count(key_of(atom)) > 0;
    if (!holds) return {false, plan.steps.size(), PlanFailure::GoalUnsatisfied, atom.str()};
  }
  return {true, 0, PlanFailure::None, ""};
}

}  // namespace namoplan::pddl
