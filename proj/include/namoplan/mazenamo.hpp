#ifndef NAMOPLAN_MAZENAMO_HPP
#define NAMOPLAN_MAZENAMO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "namoplan/pddl.hpp"
#include "namoplan/search.hpp"

namespace namoplan::mazenamo {

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

enum class Cell : uint8_t { Wall, Heavy, Light, Free, LightOnHeavy };
enum class Direction : uint8_t { Left, Right, Up, Down };

const char* direction_name(Direction d);
Direction direction_from_name(const std::string& name);

struct MazeGrid {
  int n = 0;
  std::vector<Cell> cells;  // row-major, size n*n; border cells are walls
  int robot_cell = -1;      // a Free cell
  Direction robot_dir = Direction::Right;
  int goal_cell = -1;       // a Free cell, distinct from robot_cell

  Cell at(int row, int col) const { return cells[row * n + col]; }
  int index(int row, int col) const { return row * n + col; }
};

struct GenConfig {
  int n = 10;
  uint64_t seed = 0;
  double p_wall = 0.20;
  double p_heavy = 0.10;
  double p_light = 0.15;
  double p_free = 0.55;
  double p_stack_on_heavy = 0.0;  // chance a heavy cell carries a light box on top
};

/// Border walls, interior cells drawn i.i.d. from the configured
/// probabilities, robot and goal placed uniformly on distinct free cells.
/// Fully deterministic given the seed. Throws when fewer than two free
/// cells exist ("no free cell").
MazeGrid generate(const GenConfig& cfg);

/// Reads a glyph picture: '#' wall, 'H' heavy, 'L' light, 'l' light-on-heavy,
/// '.' free, 'G' goal, and one of '<' '>' '^' 'v' for the robot.
MazeGrid parse_grid(const std::vector<std::string>& rows);

std::string render_ascii(const MazeGrid& grid);

/// Renders a task state. Box categories come from the static atoms in
/// task.init; positions, orientation and stacking come from `state`.
std::string render_ascii(const pddl::Task& task, const std::vector<pddl::GroundAtom>& state,
                         int n);

// ---------------------------------------------------------------------------
// Domain and task encoding
// ---------------------------------------------------------------------------

/// The fixed authored domain: 18 predicates and 32 action schemas
/// (8 turn + 4 move + 4 push + 8 pickup + 8 place).
const pddl::Domain& domain();

/// Entities: one robot, one pos per non-wall cell (p<index>), one object per
/// box (o<index>, plus o<index>_top for a stacked light box). The goal is the
/// single atom (rat robot p<goal>).
pddl::Task to_task(const MazeGrid& grid, const std::string& name = "mazenamo_task");

// ---------------------------------------------------------------------------
// Difficulty classification
// ---------------------------------------------------------------------------

enum class Level : uint8_t { Easy, Medium, Hard, Expert, Discarded };
enum class DiscardReason : uint8_t { None, Unsolvable, Trivial, TooHard };

const char* level_name(Level level);
Level level_from_name(const std::string& name);

struct DifficultyThresholds {
  double trivial_sec = 0.1;  // absolute cutoff below which instances are discarded
  double easy_frac = 0.10;   // of the evaluation budget
  double medium_frac = 0.25;
  double hard_frac = 0.60;   // inclusive upper bound for hard
};

struct DifficultyLevel {
  Level level = Level::Discarded;
  DiscardReason reason = DiscardReason::None;
  double solve_time_sec = 0;
};

/// Pure mapping from a reference-planner outcome to a level.
DifficultyLevel level_for_time(search::Verdict verdict, double solve_time_sec, double budget,
                               const DifficultyThresholds& thresholds);

/// Grounds and runs the reference satisficing planner under `budget`
/// (grounding time included), then maps the outcome through level_for_time.
DifficultyLevel classify_difficulty(const pddl::Task& task, double budget,
                                    const DifficultyThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Dataset building
// ---------------------------------------------------------------------------

struct Instance {
  std::string id;
  uint64_t seed = 0;
  MazeGrid grid;
  std::string level;  // "easy" | "medium" | "hard" | "expert"
  double ref_solve_time_sec = 0;
};

void save_instance(const Instance& inst, const std::string& path);
Instance load_instance(const std::string& path);

struct DatasetQuotas {
  int easy = 0, medium = 0, hard = 0, expert = 0;
};

struct DatasetConfig {
  int n = 10;
  DatasetQuotas quotas;
  double budget = 5.0;
  DifficultyThresholds thresholds;
  GenConfig gen;            // probability knobs; n and seed are overridden
  uint64_t base_seed = 0;   // attempt k uses seed base_seed + k
  int max_attempts = 100000;
  std::string out_dir;
};

struct InstanceRecord {
  std::string id;
  int n = 0;
  uint64_t seed = 0;
  std::string level;
  double ref_solve_time_sec = 0;
  std::string instance_path;  // relative to the manifest directory
  std::string problem_path;
};

struct DatasetManifest {
  int n = 0;
  double budget = 0;
  uint64_t base_seed = 0;
  std::vector<InstanceRecord> instances;  // ordered by (n, level, seed)
};

/// Generates, classifies and retains instances until the quotas are met,
/// writing instance JSON + PDDL problem files and a manifest. Throws when
/// the attempt cap is reached with quotas still open.
DatasetManifest build_dataset(const DatasetConfig& cfg);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

}  // namespace namoplan::mazenamo

#endif  // NAMOPLAN_MAZENAMO_HPP
