#ifndef NAMOPLAN_RELAX_HPP
#define NAMOPLAN_RELAX_HPP

#include <functional>
#include <set>
#include <string>

#include "namoplan/pddl.hpp"

namespace namoplan::relax {

/// A subset of a task's entities retained when building simplified tasks.
struct ImportanceSet {
  std::set<std::string> names;

  bool contains(const std::string& name) const { return names.count(name) > 0; }
  void insert(const std::string& name) { names.insert(name); }
  size_t size() const { return names.size(); }
  bool operator==(const ImportanceSet&) const = default;
};

/// Keeps the entities of `keep` plus, always, the goal entities and every
/// robot-typed entity; init atoms whose arguments all survive are retained,
/// the goal is unchanged. Unknown entity names are rejected.
pddl::Task restrict_task(const pddl::Task& task, const ImportanceSet& keep);

/// Removes every light box standing at a position in init, together with all
/// atoms that mention it. Its cell becomes isempty unless another object
/// still occupies it; a heavy base below a removed box becomes clear.
/// Rejects tasks whose goal mentions a removed box.
pddl::Task relax_light_boxes(const pddl::Task& task);

/// Union of all parameter bindings over the plan steps.
ImportanceSet entities_of_plan(const pddl::Plan& plan);

/// Least fixpoint of mutual inclusion over the oat atoms of init: an object
/// pulls in its initial position and vice versa.
ImportanceSet complementary_closure(const pddl::Task& task, const ImportanceSet& seed);

/// Per-domain relaxation and complementation, so other domains can plug in
/// their own rules. The mazenamo pair is registered at startup.
struct DomainRules {
  std::function<pddl::Task(const pddl::Task&)> relax;
  std::function<ImportanceSet(const pddl::Task&, const ImportanceSet&)> complement;
};

const DomainRules* rules_for(const std::string& domain_name);
void register_rules(const std::string& domain_name, DomainRules rules);

}  // namespace namoplan::relax

#endif  // NAMOPLAN_RELAX_HPP
