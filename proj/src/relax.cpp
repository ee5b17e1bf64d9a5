#include "namoplan/relax.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace namoplan::relax {

pddl::Task restrict_task(const pddl::Task& task, const ImportanceSet& keep) {
  for (const auto& name : keep.names)
    if (!task.find_entity(name))
      throw std::invalid_argument("restrict_task: unknown entity '" + name + "'");

  std::set<std::string> kept = keep.names;
  for (const auto& atom : task.goal)
    for (const auto& arg : atom.args) kept.insert(arg);
  for (const auto& e : task.entities)
    if (e.type == "robot") kept.insert(e.name);

  pddl::Task out;
  out.name = task.name;
  out.domain_name = task.domain_name;
  for (const auto& e : task.entities)
    if (kept.count(e.name)) out.entities.push_back(e);
  for (const auto& atom : task.init) {
    bool survives = true;
    for (const auto& arg : atom.args)
      if (!kept.count(arg)) {
        survives = false;
        break;
      }
    if (survives) out.init.push_back(atom);
  }
  out.goal = task.goal;
  return out;
}

pddl::Task relax_light_boxes(const pddl::Task& task) {
  std::set<std::string> light;
  std::map<std::string, std::string> position_of;  // from oat atoms
  std::map<std::string, std::string> base_of;      // upon(top, base)
  for (const auto& atom : task.init) {
    if (atom.predicate == "islight") light.insert(atom.args[0]);
    if (atom.predicate == "oat") position_of[atom.args[0]] = atom.args[1];
    if (atom.predicate == "upon") base_of[atom.args[0]] = atom.args[1];
  }

  std::set<std::string> removed;
  for (const auto& o : light)
    if (position_of.count(o)) removed.insert(o);
  if (removed.empty()) return task;

  for (const auto& atom : task.goal)
    for (const auto& arg : atom.args)
      if (removed.count(arg))
        throw std::invalid_argument("relax_light_boxes: goal mentions removed box '" + arg +
                                    "'");

  pddl::Task out;
  out.name = task.name;
  out.domain_name = task.domain_name;
  for (const auto& e : task.entities)
    if (!removed.count(e.name)) out.entities.push_back(e);
  for (const auto& atom : task.init) {
    bool survives = true;
    for (const auto& arg : atom.args)
      if (removed.count(arg)) {
        survives = false;
        break;
      }
    if (survives) out.init.push_back(atom);
  }
  out.goal = task.goal;

  // freed bases become clear; fully vacated cells become empty
  std::set<std::string> still_occupied;
  for (const auto& atom : out.init)
    if (atom.predicate == "oat") still_occupied.insert(atom.args[1]);
  for (const auto& o : removed) {
    if (auto it = base_of.find(o); it != base_of.end() && !removed.count(it->second))
      out.init.push_back({"clear", {it->second}});
    const std::string& p = position_of.at(o);
    if (!still_occupied.count(p)) out.init.push_back({"isempty", {p}});
  }

  std::sort(out.init.begin(), out.init.end());
  out.init.erase(std::unique(out.init.begin(), out.init.end()), out.init.end());
  return out;
}

ImportanceSet entities_of_plan(const pddl::Plan& plan) {
  ImportanceSet out;
  for (const auto& step : plan.steps)
    for (const auto& arg : step.args) out.insert(arg);
  return out;
}

ImportanceSet complementary_closure(const pddl::Task& task, const ImportanceSet& seed) {
  for (const auto& name : seed.names)
    if (!task.find_entity(name))
      throw std::invalid_argument("complementary_closure: unknown entity '" + name + "'");

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& atom : task.init)
    if (atom.predicate == "oat") pairs.emplace_back(atom.args[0], atom.args[1]);

  ImportanceSet out = seed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [object, position] : pairs) {
      const bool has_object = out.contains(object);
      const bool has_position = out.contains(position);
      if (has_object != has_position) {
        out.insert(has_object ? position : object);
        changed = true;
      }
    }
  }
  return out;
}

namespace {

std::map<std::string, DomainRules>& registry() {
  static std::map<std::string, DomainRules> rules = {
      {"mazenamo",
       {&relax_light_boxes,
        [](const pddl::Task& t, const ImportanceSet& s) { return complementary_closure(t, s); }}},
  };
  return rules;
}

}  // namespace

const DomainRules* rules_for(const std::string& domain_name) {
  auto it = registry().find(domain_name);
  return it == registry().end() ? nullptr : &it->second;
}

void register_rules(const std::string& domain_name, DomainRules rules) {
  registry()[domain_name] = std::move(rules);
}

}  // namespace namoplan::relax
