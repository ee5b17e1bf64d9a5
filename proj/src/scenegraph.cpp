#include "namoplan/scenegraph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace namoplan::scenegraph {

using nlohmann::json;

const std::array<const char*, kNumTypes>& FeatureSpec::types() {
  static const std::array<const char*, kNumTypes> kTypes = {"robot", "object", "pos"};
  return kTypes;
}

const std::array<const char*, kNumUnary>& FeatureSpec::unary_predicates() {
  static const std::array<const char*, kNumUnary> kUnary = {
      "isheavy", "islight", "onground", "clear", "handempty",
      "dirisleft", "dirisright", "dirisup", "dirisdown"};
  return kUnary;
}

const std::array<const char*, kNumBinary>& FeatureSpec::binary_predicates() {
  static const std::array<const char*, kNumBinary> kBinary = {
      "rat", "oat", "upto", "downto", "leftto", "rightto", "upon", "holding"};
  return kBinary;
}

namespace {

template <size_t N>
int index_of(const std::array<const char*, N>& names, const std::string& name) {
  for (size_t i = 0; i < N; ++i)
    if (name == names[i]) return static_cast<int>(i);
  return -1;
}

}  // namespace

int FeatureSpec::type_index(const std::string& type) { return index_of(types(), type); }
int FeatureSpec::unary_index(const std::string& p) { return index_of(unary_predicates(), p); }
int FeatureSpec::binary_index(const std::string& p) { return index_of(binary_predicates(), p); }

bool FeatureSpec::ignored(const std::string& predicate) { return predicate == "isempty"; }

std::string FeatureSpec::fingerprint() {
  std::string out = "types:";
  for (const char* t : types()) out += std::string(t) + ",";
  out += "|unary:";
  for (const char* p : unary_predicates()) out += std::string(p) + ",";
  out += "|binary:";
  for (const char* p : binary_predicates()) out += std::string(p) + ",";
  return out;
}

SceneGraph encode(const pddl::Task& task, const pddl::Domain& domain) {
  (void)domain;
  SceneGraph g;
  g.entities.reserve(task.entities.size());
  std::unordered_map<std::string, uint32_t> node_of;
  for (const auto& e : task.entities) {
    const int ti = FeatureSpec::type_index(e.type);
    if (ti < 0) throw std::invalid_argument("entity type outside feature spec: " + e.type);
    node_of[e.name] = static_cast<uint32_t>(g.entities.size());
    g.entities.push_back(e.name);
    std::array<double, kNodeDim> features{};
    features[ti] = 1.0;
    g.nodes.push_back(features);
  }

  std::map<std::pair<uint32_t, uint32_t>, std::array<double, kEdgeDim>> edges;
  auto process = [&](const std::vector<pddl::GroundAtom>& atoms, bool goal) {
    for (const auto& atom : atoms) {
      if (FeatureSpec::ignored(atom.predicate)) continue;
      if (atom.args.size() <= 1) {
        const int ui = FeatureSpec::unary_index(atom.predicate);
        if (ui < 0)
          throw std::invalid_argument("predicate outside feature spec: " + atom.predicate);
        // nullary predicates have no node to annotate; arity 1 only
        if (atom.args.size() == 1)
          g.nodes[node_of.at(atom.args[0])][kNumTypes + (goal ? kNumUnary : 0) + ui] = 1.0;
      } else {
        const int bi = FeatureSpec::binary_index(atom.predicate);
        if (bi < 0)
          throw std::invalid_argument("predicate outside feature spec: " + atom.predicate);
        const auto key = std::make_pair(node_of.at(atom.args[0]), node_of.at(atom.args[1]));
        edges[key][(goal ? kNumBinary : 0) + bi] = 1.0;
      }
    }
  };
  process(task.init, false);
  process(task.goal, true);

  g.edges.reserve(edges.size());
  for (const auto& [key, features] : edges) g.edges.push_back({key.first, key.second, features});
  return g;
}

LabelVector label(const pddl::Task& task, const pddl::Domain& domain, const pddl::Plan& plan) {
  const pddl::Validation v = pddl::validate_plan(domain, task, plan);
  if (!v.valid)
    throw std::invalid_argument("label: plan fails validation at step " +
                                std::to_string(v.fail_index) + " (" + v.detail + ")");

  std::set<std::string> important;
  for (const auto& step : plan.steps)
    for (const auto& arg : step.args) important.insert(arg);
  for (const auto& atom : task.goal)
    for (const auto& arg : atom.args) important.insert(arg);

  LabelVector labels;
  labels.reserve(task.entities.size());
  for (const auto& e : task.entities) labels.push_back(important.count(e.name) ? 1 : 0);
  return labels;
}

// ---------------------------------------------------------------------------
// Training-set file
// ---------------------------------------------------------------------------

void save_training_set(const std::vector<TrainingExample>& examples, const std::string& path) {
  json out;
  out["featureSpec"] = FeatureSpec::fingerprint();
  out["nodeDim"] = kNodeDim;
  out["edgeDim"] = kEdgeDim;
  json items = json::array();
  for (const auto& ex : examples) {
    json nodes = json::array();
    for (const auto& n : ex.graph.nodes) nodes.push_back(n);
    json edges = json::array();
    for (const auto& e : ex.graph.edges)
      edges.push_back({{"src", e.src}, {"dst", e.dst}, {"features", e.features}});
    items.push_back({{"id", ex.id},
                     {"entities", ex.graph.entities},
                     {"nodes", nodes},
                     {"edges", edges},
                     {"labels", ex.labels}});
  }
  out["graphs"] = items;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out.dump() << "\n";
}

std::vector<TrainingExample> load_training_set(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  json in = json::parse(f);
  if (in.at("featureSpec").get<std::string>() != FeatureSpec::fingerprint())
    throw std::runtime_error(path + ": feature spec mismatch");

  std::vector<TrainingExample> out;
  for (const auto& item : in.at("graphs")) {
    TrainingExample ex;
    ex.id = item.at("id").get<std::string>();
    ex.graph.entities = item.at("entities").get<std::vector<std::string>>();
    for (const auto& n : item.at("nodes"))
      ex.graph.nodes.push_back(n.get<std::array<double, kNodeDim>>());
    for (const auto& e : item.at("edges"))
      ex.graph.edges.push_back({e.at("src").get<uint32_t>(), e.at("dst").get<uint32_t>(),
                                e.at("features").get<std::array<double, kEdgeDim>>()});
    ex.labels = item.at("labels").get<LabelVector>();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace namoplan::scenegraph
