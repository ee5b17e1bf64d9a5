#ifndef NAMOPLAN_SCENEGRAPH_HPP
#define NAMOPLAN_SCENEGRAPH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "namoplan/pddl.hpp"

namespace namoplan::scenegraph {

constexpr int kNumTypes = 3;
constexpr int kNumUnary = 9;
constexpr int kNumBinary = 8;
constexpr int kNodeDim = kNumTypes + 2 * kNumUnary;  // 21: type ∥ unary-in-init ∥ unary-in-goal
constexpr int kEdgeDim = 2 * kNumBinary;             // 16: binary-in-init ∥ binary-in-goal

/// Fixed feature vocabulary. `isempty` is deliberately absent: box occupancy
/// is the complement of the oat edges and would add no information.
struct FeatureSpec {
  static const std::array<const char*, kNumTypes>& types();
  static const std::array<const char*, kNumUnary>& unary_predicates();
  static const std::array<const char*, kNumBinary>& binary_predicates();

  static int type_index(const std::string& type);           // -1 when unknown
  static int unary_index(const std::string& predicate);     // -1 when unknown
  static int binary_index(const std::string& predicate);    // -1 when unknown
  static bool ignored(const std::string& predicate);

  /// Stable identifier of the vocabulary, embedded in weight files.
  static std::string fingerprint();
};

struct SceneGraph {
  struct Edge {
    uint32_t src = 0;
    uint32_t dst = 0;
    std::array<double, kEdgeDim> features{};
  };

  std::vector<std::string> entities;  // node order = task entity order
  std::vector<std::array<double, kNodeDim>> nodes;
  std::vector<Edge> edges;  // sorted by (src, dst); only pairs with a set bit
};

using LabelVector = std::vector<uint8_t>;

/// Compiles a task into its scene-graph encoding. Edges exist only for
/// ordered pairs related by at least one binary atom in init or goal.
/// Throws on predicates outside the feature vocabulary.
SceneGraph encode(const pddl::Task& task, const pddl::Domain& domain);

/// 1 for entities bound by any plan step parameter or mentioned in the goal,
/// 0 otherwise. Throws when the plan fails validation on the task.
LabelVector label(const pddl::Task& task, const pddl::Domain& domain, const pddl::Plan& plan);

struct TrainingExample {
  std::string id;
  SceneGraph graph;
  LabelVector labels;
};

void save_training_set(const std::vector<TrainingExample>& examples, const std::string& path);
std::vector<TrainingExample> load_training_set(const std::string& path);

}  // namespace namoplan::scenegraph

#endif  // NAMOPLAN_SCENEGRAPH_HPP
