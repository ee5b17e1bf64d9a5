#include "namoplan/mazenamo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "namoplan/rng.hpp"

namespace namoplan::mazenamo {

namespace fs = std::filesystem;
using nlohmann::json;
using pddl::GroundAtom;
using pddl::LiftedAtom;

// ---------------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------------

namespace {

struct DirSpec {
  Direction dir;
  const char* name;  // "up"
  const char* adj;   // adjacency predicate: adj(a, b) <=> a is the <name>-neighbor of b
  int dr, dc;
};

constexpr DirSpec kDirs[] = {
    {Direction::Left, "left", "leftto", 0, -1},
    {Direction::Right, "right", "rightto", 0, 1},
    {Direction::Up, "up", "upto", -1, 0},
    {Direction::Down, "down", "downto", 1, 0},
};

Direction turn_left_of(Direction d) {
  switch (d) {
    case Direction::Up: return Direction::Left;
    case Direction::Left: return Direction::Down;
    case Direction::Down: return Direction::Right;
    case Direction::Right: return Direction::Up;
  }
  return d;
}

Direction turn_right_of(Direction d) {
  switch (d) {
    case Direction::Up: return Direction::Right;
    case Direction::Right: return Direction::Down;
    case Direction::Down: return Direction::Left;
    case Direction::Left: return Direction::Up;
  }
  return d;
}

std::string diris(Direction d) { return std::string("diris") + direction_name(d); }

char robot_glyph(Direction d) {
  switch (d) {
    case Direction::Left: return '<';
    case Direction::Right: return '>';
    case Direction::Up: return '^';
    case Direction::Down: return 'v';
  }
  return '?';
}

}  // namespace

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Up: return "up";
    case Direction::Down: return "down";
  }
  return "?";
}

Direction direction_from_name(const std::string& name) {
  for (const auto& spec : kDirs)
    if (name == spec.name) return spec.dir;
  throw std::invalid_argument("unknown direction '" + name + "'");
}

// ---------------------------------------------------------------------------
// Domain authoring
// ---------------------------------------------------------------------------

namespace {

LiftedAtom atom(std::string pred, std::vector<std::string> args = {}) {
  return {std::move(pred), std::move(args)};
}

pddl::Domain build_domain() {
  pddl::Domain d;
  d.name = "mazenamo";
  d.types = {"robot", "object", "pos"};

  auto pred = [&](std::string name, std::vector<std::string> types) {
    d.predicates.push_back({std::move(name), std::move(types)});
  };
  pred("rat", {"robot", "pos"});
  pred("oat", {"object", "pos"});
  for (const auto& spec : kDirs) pred(diris(spec.dir), {"robot"});
  for (const auto& spec : kDirs) pred(spec.adj, {"pos", "pos"});
  pred("isheavy", {"object"});
  pred("islight", {"object"});
  pred("onground", {"object"});
  pred("upon", {"object", "object"});
  pred("clear", {"object"});
  pred("handempty", {"robot"});
  pred("holding", {"robot", "object"});
  pred("isempty", {"pos"});

  const pddl::TypedVar r{"?r", "robot"};
  const pddl::TypedVar p1{"?p1", "pos"}, p2{"?p2", "pos"}, p3{"?p3", "pos"};
  const pddl::TypedVar o{"?o", "object"}, b{"?b", "object"};

  for (const auto& spec : kDirs) {
    const std::string dn = spec.name;
    const std::string adj = spec.adj;
    const std::string facing = diris(spec.dir);

    // turn_left_from_<dir> / turn_right_from_<dir>
    for (bool left : {true, false}) {
      pddl::ActionSchema a;
      a.name = std::string("turn_") + (left ? "left" : "right") + "_from_" + dn;
      a.params = {r};
      a.pre = {atom(facing, {"?r"})};
      a.add = {atom(diris(left ? turn_left_of(spec.dir) : turn_right_of(spec.dir)), {"?r"})};
      a.del = {atom(facing, {"?r"})};
      d.actions.push_back(std::move(a));
    }

    // move_<dir>: step into the box-free facing cell
    {
      pddl::ActionSchema a;
      a.name = "move_" + dn;
      a.params = {r, p1, p2};
      a.pre = {atom("rat", {"?r", "?p1"}), atom(facing, {"?r"}), atom(adj, {"?p2", "?p1"}),
               atom("isempty", {"?p2"})};
      a.add = {atom("rat", {"?r", "?p2"})};
      a.del = {atom("rat", {"?r", "?p1"})};
      d.actions.push_back(std::move(a));
    }

    // push_<dir>: shove the facing box one cell, robot follows
    {
      pddl::ActionSchema a;
      a.name = "push_" + dn;
      a.params = {r, p1, p2, p3, o};
      a.pre = {atom("rat", {"?r", "?p1"}),  atom(facing, {"?r"}),
               atom(adj, {"?p2", "?p1"}),   atom(adj, {"?p3", "?p2"}),
               atom("oat", {"?o", "?p2"}),  atom("onground", {"?o"}),
               atom("clear", {"?o"}),       atom("isempty", {"?p3"}),
               atom("handempty", {"?r"})};
      a.add = {atom("rat", {"?r", "?p2"}), atom("oat", {"?o", "?p3"}),
               atom("isempty", {"?p2"})};
      a.del = {atom("rat", {"?r", "?p1"}), atom("oat", {"?o", "?p2"}),
               atom("isempty", {"?p3"})};
      d.actions.push_back(std::move(a));
    }

    // pickup_ground_<dir>: lift a light box off the floor
    {
      pddl::ActionSchema a;
      a.name = "pickup_ground_" + dn;
      a.params = {r, p1, p2, o};
      a.pre = {atom("rat", {"?r", "?p1"}), atom(facing, {"?r"}), atom(adj, {"?p2", "?p1"}),
               atom("handempty", {"?r"}),  atom("oat", {"?o", "?p2"}),
               atom("islight", {"?o"}),    atom("onground", {"?o"}), atom("clear", {"?o"})};
      a.add = {atom("holding", {"?r", "?o"}), atom("isempty", {"?p2"})};
      a.del = {atom("handempty", {"?r"}), atom("oat", {"?o", "?p2"}),
               atom("onground", {"?o"}), atom("clear", {"?o"})};
      d.actions.push_back(std::move(a));
    }

    // pickup_stacked_<dir>: lift a light box off its base; the cell stays
    // occupied by the base
    {
      pddl::ActionSchema a;
      a.name = "pickup_stacked_" + dn;
      a.params = {r, p1, p2, o, b};
      a.pre = {atom("rat", {"?r", "?p1"}), atom(facing, {"?r"}), atom(adj, {"?p2", "?p1"}),
               atom("handempty", {"?r"}),  atom("upon", {"?o", "?b"}),
               atom("oat", {"?o", "?p2"}), atom("oat", {"?b", "?p2"}),
               atom("islight", {"?o"}),    atom("clear", {"?o"})};
      a.add = {atom("holding", {"?r", "?o"}), atom("clear", {"?b"})};
      a.del = {atom("handempty", {"?r"}), atom("upon", {"?o", "?b"}),
               atom("oat", {"?o", "?p2"}), atom("clear", {"?o"})};
      d.actions.push_back(std::move(a));
    }

    // place_ground_<dir>: put the held box on a box-free cell
    {
      pddl::ActionSchema a;
      a.name = "place_ground_" + dn;
      a.params = {r, p1, p2, o};
      a.pre = {atom("rat", {"?r", "?p1"}), atom(facing, {"?r"}), atom(adj, {"?p2", "?p1"}),
               atom("holding", {"?r", "?o"}), atom("isempty", {"?p2"})};
      a.add = {atom("oat", {"?o", "?p2"}), atom("onground", {"?o"}), atom("clear", {"?o"}),
               atom("handempty", {"?r"})};
      a.del = {atom("holding", {"?r", "?o"}), atom("isempty", {"?p2"})};
      d.actions.push_back(std::move(a));
    }

    // place_on_object_<dir>: stack the held box on a clear heavy base
    {
      pddl::ActionSchema a;
      a.name = "place_on_object_" + dn;
      a.params = {r, p1, p2, o, b};
      a.pre = {atom("rat", {"?r", "?p1"}),    atom(facing, {"?r"}),
               atom(adj, {"?p2", "?p1"}),     atom("holding", {"?r", "?o"}),
               atom("oat", {"?b", "?p2"}),    atom("isheavy", {"?b"}),
               atom("clear", {"?b"}),         atom("onground", {"?b"})};
      a.add = {atom("upon", {"?o", "?b"}), atom("oat", {"?o", "?p2"}), atom("clear", {"?o"}),
               atom("handempty", {"?r"})};
      a.del = {atom("holding", {"?r", "?o"}), atom("clear", {"?b"})};
      d.actions.push_back(std::move(a));
    }
  }

  pddl::canonicalize(d);
  return d;
}

}  // namespace

const pddl::Domain& domain() {
  static const pddl::Domain d = build_domain();
  return d;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

MazeGrid generate(const GenConfig& cfg) {
  if (cfg.n < 4) throw std::invalid_argument("grid side must be >= 4");
  const double sum = cfg.p_wall + cfg.p_heavy + cfg.p_light + cfg.p_free;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("cell probabilities must sum to 1");

  MazeGrid g;
  g.n = cfg.n;
  g.cells.assign(static_cast<size_t>(cfg.n) * cfg.n, Cell::Wall);
  Rng rng(cfg.seed);

  for (int r = 1; r < cfg.n - 1; ++r) {
    for (int c = 1; c < cfg.n - 1; ++c) {
      const double u = rng.next_double();
      Cell cell = Cell::Free;
      if (u < cfg.p_wall)
        cell = Cell::Wall;
      else if (u < cfg.p_wall + cfg.p_heavy)
        cell = Cell::Heavy;
      else if (u < cfg.p_wall + cfg.p_heavy + cfg.p_light)
        cell = Cell::Light;
      g.cells[g.index(r, c)] = cell;
    }
  }

  std::vector<int> free_cells;
  for (int i = 0; i < cfg.n * cfg.n; ++i)
    if (g.cells[i] == Cell::Free) free_cells.push_back(i);
  if (free_cells.size() < 2)
    throw std::runtime_error("no free cell: grid has fewer than 2 free cells");

  const size_t robot_pick = rng.next_below(free_cells.size());
  g.robot_cell = free_cells[robot_pick];
  free_cells.erase(free_cells.begin() + static_cast<ptrdiff_t>(robot_pick));
  g.goal_cell = free_cells[rng.next_below(free_cells.size())];
  g.robot_dir = kDirs[rng.next_below(4)].dir;

  if (cfg.p_stack_on_heavy > 0) {
    for (int i = 0; i < cfg.n * cfg.n; ++i)
      if (g.cells[i] == Cell::Heavy && rng.next_double() < cfg.p_stack_on_heavy)
        g.cells[i] = Cell::LightOnHeavy;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Rendering and parsing of glyph pictures
// ---------------------------------------------------------------------------

namespace {

char cell_glyph(Cell c) {
  switch (c) {
    case Cell::Wall: return '#';
    case Cell::Heavy: return 'H';
    case Cell::Light: return 'L';
    case Cell::Free: return '.';
    case Cell::LightOnHeavy: return 'l';
  }
  return '?';
}

void validate_grid(const MazeGrid& g) {
  if (g.n < 4 || g.cells.size() != static_cast<size_t>(g.n) * g.n)
    throw std::invalid_argument("malformed grid");
  for (int i = 0; i < g.n; ++i) {
    if (g.at(0, i) != Cell::Wall || g.at(g.n - 1, i) != Cell::Wall ||
        g.at(i, 0) != Cell::Wall || g.at(i, g.n - 1) != Cell::Wall)
      throw std::invalid_argument("grid border must be walls");
  }
  if (g.robot_cell < 0 || g.robot_cell >= g.n * g.n || g.cells[g.robot_cell] != Cell::Free)
    throw std::invalid_argument("robot must stand on a free cell");
  if (g.goal_cell < 0 || g.goal_cell >= g.n * g.n || g.cells[g.goal_cell] != Cell::Free)
    throw std::invalid_argument("goal must be a free cell");
  if (g.goal_cell == g.robot_cell)
    throw std::invalid_argument("goal must differ from the robot cell");
}

}  // namespace

MazeGrid parse_grid(const std::vector<std::string>& rows) {
  MazeGrid g;
  g.n = static_cast<int>(rows.size());
  g.cells.assign(static_cast<size_t>(g.n) * g.n, Cell::Wall);
  for (int r = 0; r < g.n; ++r) {
    if (static_cast<int>(rows[r].size()) != g.n)
      throw std::invalid_argument("grid rows must all have length n");
    for (int c = 0; c < g.n; ++c) {
      const char ch = rows[r][c];
      const int idx = g.index(r, c);
      switch (ch) {
        case '#': g.cells[idx] = Cell::Wall; break;
        case 'H': g.cells[idx] = Cell::Heavy; break;
        case 'L': g.cells[idx] = Cell::Light; break;
        case 'l': g.cells[idx] = Cell::LightOnHeavy; break;
        case '.': g.cells[idx] = Cell::Free; break;
        case 'G':
          g.cells[idx] = Cell::Free;
          g.goal_cell = idx;
          break;
        case '<': case '>': case '^': case 'v':
          g.cells[idx] = Cell::Free;
          g.robot_cell = idx;
          g.robot_dir = ch == '<'   ? Direction::Left
                        : ch == '>' ? Direction::Right
                        : ch == '^' ? Direction::Up
                                    : Direction::Down;
          break;
        default:
          throw std::invalid_argument(std::string("unknown glyph '") + ch + "'");
      }
    }
  }
  validate_grid(g);
  return g;
}

std::string render_ascii(const MazeGrid& g) {
  std::string out;
  for (int r = 0; r < g.n; ++r) {
    for (int c = 0; c < g.n; ++c) {
      const int idx = g.index(r, c);
      if (idx == g.robot_cell)
        out += robot_glyph(g.robot_dir);
      else if (idx == g.goal_cell)
        out += 'G';
      else
        out += cell_glyph(g.cells[idx]);
    }
    out += '\n';
  }
  return out;
}

std::string render_ascii(const pddl::Task& task, const std::vector<GroundAtom>& state, int n) {
  std::set<int> pos_cells;
  for (const auto& e : task.entities)
    if (e.type == "pos") pos_cells.insert(std::stoi(e.name.substr(1)));

  std::set<std::string> heavy;
  for (const auto& a : task.init)
    if (a.predicate == "isheavy") heavy.insert(a.args[0]);

  int robot_cell = -1;
  Direction dir = Direction::Right;
  std::map<int, std::vector<std::string>> boxes_at;
  for (const auto& a : state) {
    if (a.predicate == "rat") robot_cell = std::stoi(a.args[1].substr(1));
    else if (a.predicate.rfind("diris", 0) == 0) dir = direction_from_name(a.predicate.substr(5));
    else if (a.predicate == "oat") boxes_at[std::stoi(a.args[1].substr(1))].push_back(a.args[0]);
  }

  int goal_cell = -1;
  for (const auto& a : task.goal)
    if (a.predicate == "rat") goal_cell = std::stoi(a.args[1].substr(1));

  std::string out;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int idx = r * n + c;
      if (!pos_cells.count(idx)) {
        out += '#';
      } else if (idx == robot_cell) {
        out += robot_glyph(dir);
      } else if (auto it = boxes_at.find(idx); it != boxes_at.end()) {
        if (it->second.size() >= 2)
          out += 'l';
        else
          out += heavy.count(it->second[0]) ? 'H' : 'L';
      } else if (idx == goal_cell) {
        out += 'G';
      } else {
        out += '.';
      }
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task encoding
// ---------------------------------------------------------------------------

pddl::Task to_task(const MazeGrid& g, const std::string& name) {
  validate_grid(g);
  pddl::Task t;
  t.name = name;
  t.domain_name = "mazenamo";

  auto pos_name = [](int idx) { return "p" + std::to_string(idx); };
  auto box_name = [](int idx) { return "o" + std::to_string(idx); };

  t.entities.push_back({"robot", "robot"});
  for (int i = 0; i < g.n * g.n; ++i) {
    if (g.cells[i] == Cell::Wall) continue;
    t.entities.push_back({pos_name(i), "pos"});
    if (g.cells[i] == Cell::Heavy || g.cells[i] == Cell::Light)
      t.entities.push_back({box_name(i), "object"});
    if (g.cells[i] == Cell::LightOnHeavy) {
      t.entities.push_back({box_name(i), "object"});
      t.entities.push_back({box_name(i) + "_top", "object"});
    }
  }

  auto add = [&](std::string pred, std::vector<std::string> args) {
    t.init.push_back({std::move(pred), std::move(args)});
  };

  add("rat", {"robot", pos_name(g.robot_cell)});
  add(diris(g.robot_dir), {"robot"});
  add("handempty", {"robot"});

  for (int i = 0; i < g.n * g.n; ++i) {
    const Cell cell = g.cells[i];
    if (cell == Cell::Wall) continue;
    const std::string p = pos_name(i);
    if (cell == Cell::Free) {
      add("isempty", {p});
    } else if (cell == Cell::Heavy || cell == Cell::Light) {
      const std::string o = box_name(i);
      add("oat", {o, p});
      add(cell == Cell::Heavy ? "isheavy" : "islight", {o});
      add("onground", {o});
      add("clear", {o});
    } else {  // LightOnHeavy
      const std::string base = box_name(i);
      const std::string top = base + "_top";
      add("oat", {base, p});
      add("isheavy", {base});
      add("onground", {base});
      add("oat", {top, p});
      add("islight", {top});
      add("upon", {top, base});
      add("clear", {top});
    }

    // adjacency atoms toward each non-wall neighbor
    const int r = i / g.n, c = i % g.n;
    for (const auto& spec : kDirs) {
      const int nr = r + spec.dr, nc = c + spec.dc;
      if (nr < 0 || nr >= g.n || nc < 0 || nc >= g.n) continue;
      const int nidx = g.index(nr, nc);
      if (g.cells[nidx] == Cell::Wall) continue;
      // adj(a, b): a is the <dir>-neighbor of b
      add(spec.adj, {pos_name(nidx), pos_name(i)});
    }
  }

  t.goal.push_back({"rat", {"robot", pos_name(g.goal_cell)}});
  pddl::canonicalize(t, domain());
  return t;
}

// ---------------------------------------------------------------------------
// Difficulty
// ---------------------------------------------------------------------------

const char* level_name(Level level) {
  switch (level) {
    case Level::Easy: return "easy";
    case Level::Medium: return "medium";
    case Level::Hard: return "hard";
    case Level::Expert: return "expert";
    case Level::Discarded: return "discarded";
  }
  return "?";
}

Level level_from_name(const std::string& name) {
  for (Level l : {Level::Easy, Level::Medium, Level::Hard, Level::Expert, Level::Discarded})
    if (name == level_name(l)) return l;
  throw std::invalid_argument("unknown level '" + name + "'");
}

DifficultyLevel level_for_time(search::Verdict verdict, double t, double budget,
                               const DifficultyThresholds& thr) {
  DifficultyLevel out;
  out.solve_time_sec = t;
  if (verdict == search::Verdict::ProvedUnsolvable) {
    out.level = Level::Discarded;
    out.reason = DiscardReason::Unsolvable;
  } else if (verdict != search::Verdict::Solved) {
    out.level = Level::Discarded;
    out.reason = DiscardReason::TooHard;
  } else if (t < thr.trivial_sec) {
    out.level = Level::Discarded;
    out.reason = DiscardReason::Trivial;
  } else if (t < thr.easy_frac * budget) {
    out.level = Level::Easy;
  } else if (t < thr.medium_frac * budget) {
    out.level = Level::Medium;
  } else if (t <= thr.hard_frac * budget) {
    out.level = Level::Hard;
  } else {
    out.level = Level::Expert;
  }
  return out;
}

DifficultyLevel classify_difficulty(const pddl::Task& task, double budget,
                                    const DifficultyThresholds& thresholds) {
  const auto deadline = search::Deadline::after(budget);
  const pddl::GroundedProblem problem = pddl::ground(domain(), task);
  const search::SearchOutcome outcome = search::solve_satisficing(problem, deadline);
  return level_for_time(outcome.verdict, deadline.elapsed(), budget, thresholds);
}

// ---------------------------------------------------------------------------
// Instance and manifest files
// ---------------------------------------------------------------------------

namespace {

double round_ms(double t) { return std::round(t * 1000.0) / 1000.0; }

std::string cells_string(const MazeGrid& g) {
  std::string s;
  s.reserve(g.cells.size());
  for (Cell c : g.cells) s += cell_glyph(c);
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

json instance_to_json(const Instance& inst) {
  return json{{"id", inst.id},
              {"n", inst.grid.n},
              {"seed", inst.seed},
              {"cells", cells_string(inst.grid)},
              {"robot", {{"cell", inst.grid.robot_cell},
                         {"dir", direction_name(inst.grid.robot_dir)}}},
              {"goal", inst.grid.goal_cell},
              {"level", inst.level},
              {"refSolveTimeSec", inst.ref_solve_time_sec}};
}

}  // namespace

void save_instance(const Instance& inst, const std::string& path) {
  write_file(path, instance_to_json(inst).dump(2) + "\n");
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in);

  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.seed = j.at("seed").get<uint64_t>();
  inst.level = j.at("level").get<std::string>();
  inst.ref_solve_time_sec = j.at("refSolveTimeSec").get<double>();

  MazeGrid& g = inst.grid;
  g.n = j.at("n").get<int>();
  const std::string cells = j.at("cells").get<std::string>();
  if (cells.size() != static_cast<size_t>(g.n) * g.n)
    throw std::runtime_error(path + ": cells string has wrong length");
  g.cells.resize(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) {
    switch (cells[i]) {
      case '#': g.cells[i] = Cell::Wall; break;
      case 'H': g.cells[i] = Cell::Heavy; break;
      case 'L': g.cells[i] = Cell::Light; break;
      case 'l': g.cells[i] = Cell::LightOnHeavy; break;
      case '.': g.cells[i] = Cell::Free; break;
      default: throw std::runtime_error(path + ": unknown cell glyph");
    }
  }
  g.robot_cell = j.at("robot").at("cell").get<int>();
  g.robot_dir = direction_from_name(j.at("robot").at("dir").get<std::string>());
  g.goal_cell = j.at("goal").get<int>();
  validate_grid(g);
  return inst;
}

namespace {

int level_rank(const std::string& level) {
  return static_cast<int>(level_from_name(level));
}

}  // namespace

DatasetManifest build_dataset(const DatasetConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "domain.pddl").string(), pddl::emit_domain(domain()));

  std::map<Level, int> need = {{Level::Easy, cfg.quotas.easy},
                               {Level::Medium, cfg.quotas.medium},
                               {Level::Hard, cfg.quotas.hard},
                               {Level::Expert, cfg.quotas.expert}};
  auto open_quota = [&] {
    for (const auto& [level, k] : need)
      if (k > 0) return true;
    return false;
  };

  DatasetManifest manifest;
  manifest.n = cfg.n;
  manifest.budget = cfg.budget;
  manifest.base_seed = cfg.base_seed;

  for (int attempt = 0; attempt < cfg.max_attempts && open_quota(); ++attempt) {
    const uint64_t seed = cfg.base_seed + static_cast<uint64_t>(attempt);
    GenConfig gen = cfg.gen;
    gen.n = cfg.n;
    gen.seed = seed;

    MazeGrid grid;
    try {
      grid = generate(gen);
    } catch (const std::runtime_error&) {
      continue;  // fewer than 2 free cells
    }

    const std::string id = "n" + std::to_string(cfg.n) + "_s" + std::to_string(seed);
    const pddl::Task task = to_task(grid, id);
    const DifficultyLevel level = classify_difficulty(task, cfg.budget, cfg.thresholds);
    if (level.level == Level::Discarded || need[level.level] == 0) continue;
    --need[level.level];

    Instance inst{id, seed, grid, level_name(level.level), round_ms(level.solve_time_sec)};
    const std::string instance_file = id + ".json";
    const std::string problem_file = id + ".pddl";
    save_instance(inst, (fs::path(cfg.out_dir) / instance_file).string());
    write_file((fs::path(cfg.out_dir) / problem_file).string(), pddl::emit_task(task));

    manifest.instances.push_back({id, cfg.n, seed, inst.level, inst.ref_solve_time_sec,
                                  instance_file, problem_file});
  }

  if (open_quota()) {
    std::string missing;
    for (const auto& [level, k] : need)
      if (k > 0) missing += std::string(" ") + level_name(level) + ":" + std::to_string(k);
    throw std::runtime_error("dataset quota unreachable after " +
                             std::to_string(cfg.max_attempts) + " attempts; missing" + missing);
  }

  std::sort(manifest.instances.begin(), manifest.instances.end(),
            [](const InstanceRecord& a, const InstanceRecord& b) {
              return std::tuple(a.n, level_rank(a.level), a.seed) <
                     std::tuple(b.n, level_rank(b.level), b.seed);
            });
  save_manifest(manifest, (fs::path(cfg.out_dir) / "manifest.json").string());
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  json instances = json::array();
  for (const auto& r : manifest.instances) {
    instances.push_back({{"id", r.id},
                         {"n", r.n},
                         {"seed", r.seed},
                         {"level", r.level},
                         {"refSolveTimeSec", r.ref_solve_time_sec},
                         {"instancePath", r.instance_path},
                         {"problemPath", r.problem_path}});
  }
  json j{{"n", manifest.n},
         {"budget", manifest.budget},
         {"baseSeed", manifest.base_seed},
         {"instances", instances}};
  write_file(path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in);
  DatasetManifest m;
  m.n = j.at("n").get<int>();
  m.budget = j.at("budget").get<double>();
  m.base_seed = j.at("baseSeed").get<uint64_t>();
  for (const auto& r : j.at("instances")) {
    m.instances.push_back({r.at("id").get<std::string>(), r.at("n").get<int>(),
                           r.at("seed").get<uint64_t>(), r.at("level").get<std::string>(),
                           r.at("refSolveTimeSec").get<double>(),
                           r.at("instancePath").get<std::string>(),
                           r.at("problemPath").get<std::string>()});
  }
  return m;
}

}  // namespace namoplan::mazenamo
