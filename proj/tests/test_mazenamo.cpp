#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "namoplan/mazenamo.hpp"
#include "namoplan/pddl.hpp"
#include "namoplan/search.hpp"

using namespace namoplan;
using mazenamo::Cell;
using mazenamo::Direction;

namespace {

std::vector<pddl::GroundAtom> state_atoms(const pddl::GroundedProblem& p, const pddl::State& s) {
  std::vector<pddl::GroundAtom> atoms;
  for (uint32_t i = 0; i < p.num_atoms(); ++i)
    if (s.test(i)) atoms.push_back(p.atoms[i]);
  return atoms;
}

bool has_atom(const pddl::Task& t, const std::string& text) {
  for (const auto& a : t.init)
    if (a.str() == text) return true;
  return false;
}

}  // namespace

TEST_CASE("authored domain has 32 schemas over 18 predicates and round-trips") {
  const pddl::Domain& d = mazenamo::domain();
  CHECK(d.name == "mazenamo");
  CHECK(d.actions.size() == 32);
  CHECK(d.predicates.size() == 18);

  int turns = 0, moves = 0, pushes = 0, pickups = 0, places = 0;
  for (const auto& a : d.actions) {
    if (a.name.rfind("turn_", 0) == 0) ++turns;
    if (a.name.rfind("move_", 0) == 0) ++moves;
    if (a.name.rfind("push_", 0) == 0) ++pushes;
    if (a.name.rfind("pickup_", 0) == 0) ++pickups;
    if (a.name.rfind("place_", 0) == 0) ++places;
  }
  CHECK(turns == 8);
  CHECK(moves == 4);
  CHECK(pushes == 4);
  CHECK(pickups == 8);
  CHECK(places == 8);

  // adjacency and box categories never change; everything else does
  for (const char* s : {"upto", "downto", "leftto", "rightto", "isheavy", "islight"})
    CHECK(d.is_static(s));
  for (const char* f : {"rat", "oat", "isempty", "holding", "handempty", "clear", "upon"})
    CHECK_FALSE(d.is_static(f));

  pddl::Domain reparsed = pddl::parse_domain(pddl::emit_domain(d));
  CHECK(reparsed == d);
}

TEST_CASE("generate is deterministic and respects the boundary rule") {
  mazenamo::GenConfig cfg;
  cfg.n = 10;
  cfg.seed = 7;
  mazenamo::MazeGrid a = mazenamo::generate(cfg);
  mazenamo::MazeGrid b = mazenamo::generate(cfg);
  CHECK(a.cells == b.cells);
  CHECK(a.robot_cell == b.robot_cell);
  CHECK(a.goal_cell == b.goal_cell);
  CHECK(a.robot_dir == b.robot_dir);

  cfg.seed = 8;
  mazenamo::MazeGrid c = mazenamo::generate(cfg);
  CHECK(a.cells != c.cells);

  SUBCASE("n=4 has only 4 interior cells") {
    mazenamo::GenConfig tiny;
    tiny.n = 4;
    tiny.p_wall = 0;
    tiny.p_heavy = 0;
    tiny.p_light = 0;
    tiny.p_free = 1;
    tiny.seed = 3;
    mazenamo::MazeGrid g = mazenamo::generate(tiny);
    int interior_free = 0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        bool border = r == 0 || c == 0 || r == 3 || c == 3;
        if (border) CHECK(g.at(r, c) == Cell::Wall);
        if (!border) {
          CHECK(g.at(r, c) == Cell::Free);
          ++interior_free;
        }
      }
    CHECK(interior_free == 4);
  }
  SUBCASE("interior cell frequencies track the configured probabilities") {
    int counts[4] = {0, 0, 0, 0};
    int total = 0;
    for (uint64_t seed = 0; seed < 40; ++seed) {
      mazenamo::GenConfig c10;
      c10.n = 25;
      c10.seed = 900 + seed;
      mazenamo::MazeGrid g = mazenamo::generate(c10);
      for (int r = 1; r < c10.n - 1; ++r)
        for (int c = 1; c < c10.n - 1; ++c) {
          ++counts[static_cast<int>(g.at(r, c))];
          ++total;
        }
    }
    CHECK(std::abs(counts[0] / double(total) - 0.20) < 0.02);
    CHECK(std::abs(counts[1] / double(total) - 0.10) < 0.02);
    CHECK(std::abs(counts[2] / double(total) - 0.15) < 0.02);
    CHECK(std::abs(counts[3] / double(total) - 0.55) < 0.02);
  }
  SUBCASE("a boxed-solid config reports the missing free cells") {
    mazenamo::GenConfig solid;
    solid.n = 4;
    solid.p_wall = 1;
    solid.p_heavy = 0;
    solid.p_light = 0;
    solid.p_free = 0;
    CHECK_THROWS_WITH_AS(mazenamo::generate(solid), doctest::Contains("free cell"),
                         std::runtime_error);
  }
}

TEST_CASE("to_task encodes cells, occupancy and adjacency") {
  SUBCASE("empty 5x5 interior") {
    mazenamo::GenConfig cfg;
    cfg.n = 5;
    cfg.p_wall = 0;
    cfg.p_heavy = 0;
    cfg.p_light = 0;
    cfg.p_free = 1;
    cfg.seed = 1;
    pddl::Task t = mazenamo::to_task(mazenamo::generate(cfg));
    int pos = 0, obj = 0;
    for (const auto& e : t.entities) {
      if (e.type == "pos") ++pos;
      if (e.type == "object") ++obj;
    }
    CHECK(pos == 9);
    CHECK(obj == 0);
    REQUIRE(t.goal.size() == 1);
    CHECK(t.goal[0].predicate == "rat");
  }

  mazenamo::MazeGrid g = mazenamo::parse_grid({
      "#####",
      "#>H.#",
      "#.L.#",
      "#..G#",
      "#####",
  });
  pddl::Task t = mazenamo::to_task(g);

  SUBCASE("heavy box encoding") {
    // heavy box at (1,2) = cell 7
    CHECK(has_atom(t, "(oat o7 p7)"));
    CHECK(has_atom(t, "(isheavy o7)"));
    CHECK(has_atom(t, "(onground o7)"));
    CHECK(has_atom(t, "(clear o7)"));
    CHECK_FALSE(has_atom(t, "(isempty p7)"));
  }
  SUBCASE("exactly one of isempty/oat per pos; robot cell box-free") {
    for (const auto& e : t.entities) {
      if (e.type != "pos") continue;
      bool empty = false, occupied = false;
      for (const auto& a : t.init) {
        if (a.predicate == "isempty" && a.args[0] == e.name) empty = true;
        if (a.predicate == "oat" && a.args[1] == e.name) occupied = true;
      }
      CHECK(empty != occupied);
    }
    CHECK(has_atom(t, "(isempty p6)"));  // robot cell
  }
  SUBCASE("wall cells produce no entity and no adjacency") {
    CHECK(t.find_entity("p0") == nullptr);
    for (const auto& a : t.init)
      if (a.predicate.size() > 2 && a.predicate.substr(a.predicate.size() - 2) == "to")
        for (const auto& arg : a.args) CHECK(arg != "p0");
  }
  SUBCASE("adjacency atoms come in symmetric directed pairs") {
    auto has = [&](const std::string& s) { return has_atom(t, s); };
    for (const auto& a : t.init) {
      if (a.predicate == "leftto")
        CHECK(has("(rightto " + a.args[1] + " " + a.args[0] + ")"));
      if (a.predicate == "upto")
        CHECK(has("(downto " + a.args[1] + " " + a.args[0] + ")"));
    }
  }
  SUBCASE("task emission round-trips") {
    pddl::Task t2 = pddl::parse_task(pddl::emit_task(t), mazenamo::domain());
    CHECK(t2 == t);
  }
}

TEST_CASE("stacked light boxes encode upon and keep the cell occupied") {
  mazenamo::MazeGrid g = mazenamo::parse_grid({
      "#####",
      "#>l.#",
      "#...#",
      "#..G#",
      "#####",
  });
  pddl::Task t = mazenamo::to_task(g);
  CHECK(has_atom(t, "(oat o7 p7)"));
  CHECK(has_atom(t, "(oat o7_top p7)"));
  CHECK(has_atom(t, "(isheavy o7)"));
  CHECK(has_atom(t, "(islight o7_top)"));
  CHECK(has_atom(t, "(upon o7_top o7)"));
  CHECK(has_atom(t, "(clear o7_top)"));
  CHECK_FALSE(has_atom(t, "(clear o7)"));
  CHECK_FALSE(has_atom(t, "(isempty p7)"));
  CHECK_FALSE(has_atom(t, "(onground o7_top)"));

  SUBCASE("generator can be asked to stack") {
    mazenamo::GenConfig cfg;
    cfg.n = 8;
    cfg.seed = 11;
    cfg.p_stack_on_heavy = 1.0;
    mazenamo::MazeGrid s = mazenamo::generate(cfg);
    bool any = false;
    for (Cell c : s.cells) {
      if (c == Cell::Heavy) FAIL("heavies should all carry a light box");
      any = any || c == Cell::LightOnHeavy;
    }
    CHECK(any);
  }
}

TEST_CASE("render_ascii matches grids and tracks applied actions") {
  mazenamo::MazeGrid g = mazenamo::parse_grid({
      "#####",
      "#.G.#",
      "#.^.#",
      "#.H.#",
      "#####",
  });
  std::string pic = mazenamo::render_ascii(g);
  CHECK(pic == "#####\n#.G.#\n#.^.#\n#.H.#\n#####\n");
  CHECK(mazenamo::render_ascii(mazenamo::parse_grid({"#####", "#.G.#", "#.^.#", "#.H.#",
                                                     "#####"})) == pic);

  pddl::Task t = mazenamo::to_task(g);
  CHECK(mazenamo::render_ascii(t, t.init, g.n) == pic);

  SUBCASE("after a move_up the robot glyph is one row higher") {
    pddl::GroundedProblem p = pddl::ground(mazenamo::domain(), t);
    const pddl::GroundAction* up = nullptr;
    for (const auto& a : p.actions)
      if (p.step_for(a).action == "move_up" && pddl::applicable(p.init, a)) up = &a;
    REQUIRE(up != nullptr);
    pddl::State s = pddl::apply(p.init, *up, p);
    std::string moved = mazenamo::render_ascii(t, state_atoms(p, s), g.n);
    CHECK(moved == "#####\n#.^.#\n#...#\n#.H.#\n#####\n");
  }
}

TEST_CASE("level_for_time maps planner outcomes onto the difficulty bands") {
  mazenamo::DifficultyThresholds thr;  // trivial 0.1s; 10% / 25% / 60% of budget
  const double budget = 10.0;
  using search::Verdict;
  using mazenamo::DiscardReason;
  using mazenamo::Level;

  auto level = [&](Verdict v, double t) { return mazenamo::level_for_time(v, t, budget, thr); };

  CHECK(level(Verdict::Solved, 0.01).reason == DiscardReason::Trivial);
  CHECK(level(Verdict::ProvedUnsolvable, 0.2).reason == DiscardReason::Unsolvable);
  CHECK(level(Verdict::TimedOut, budget).reason == DiscardReason::TooHard);
  CHECK(level(Verdict::Solved, 0.5).level == Level::Easy);
  CHECK(level(Verdict::Solved, 1.2).level == Level::Medium);
  CHECK(level(Verdict::Solved, 6.0).level == Level::Hard);  // exactly 60% of budget
  CHECK(level(Verdict::Solved, 6.7).level == Level::Expert);

  SUBCASE("a goal-satisfied-at-init instance classifies as trivial") {
    mazenamo::MazeGrid g = mazenamo::parse_grid({"####", "#>G#", "####", "####"});
    pddl::Task t = mazenamo::to_task(g);
    mazenamo::DifficultyLevel d = mazenamo::classify_difficulty(t, budget, thr);
    // not actually goal-at-init (robot != goal), but solvable in one move: trivial
    CHECK(d.level == Level::Discarded);
    CHECK(d.reason == DiscardReason::Trivial);
  }
  SUBCASE("a walled-in robot classifies as unsolvable") {
    mazenamo::MazeGrid g = mazenamo::parse_grid({
        "######",
        "#>#..#",
        "###.G#",
        "#....#",
        "#....#",
        "######",
    });
    mazenamo::DifficultyLevel d = mazenamo::classify_difficulty(mazenamo::to_task(g), budget, thr);
    CHECK(d.reason == DiscardReason::Unsolvable);
  }
}

TEST_CASE("build_dataset fills quotas deterministically") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "namoplan_test_dataset";
  fs::remove_all(dir);

  mazenamo::DatasetConfig cfg;
  cfg.n = 6;
  cfg.quotas.easy = 2;
  cfg.budget = 60.0;
  cfg.thresholds.trivial_sec = 0.0;  // keep millisecond solves
  cfg.base_seed = 100;
  cfg.out_dir = (dir / "a").string();
  mazenamo::DatasetManifest m1 = mazenamo::build_dataset(cfg);
  REQUIRE(m1.instances.size() == 2);
  for (const auto& r : m1.instances) CHECK(r.level == "easy");

  SUBCASE("retained instances re-classify to their recorded level") {
    for (const auto& r : m1.instances) {
      mazenamo::Instance inst =
          mazenamo::load_instance((fs::path(cfg.out_dir) / r.instance_path).string());
      CHECK(inst.id == r.id);
      mazenamo::DifficultyLevel d =
          mazenamo::classify_difficulty(mazenamo::to_task(inst.grid), cfg.budget, cfg.thresholds);
      CHECK(mazenamo::level_name(d.level) == r.level);
    }
  }
  SUBCASE("emitted problem files parse against the domain") {
    for (const auto& r : m1.instances) {
      std::ifstream in(fs::path(cfg.out_dir) / r.problem_path);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      pddl::Task t = pddl::parse_task(text, mazenamo::domain());
      mazenamo::Instance inst =
          mazenamo::load_instance((fs::path(cfg.out_dir) / r.instance_path).string());
      CHECK(t == mazenamo::to_task(inst.grid, inst.id));
    }
  }
  SUBCASE("re-running the same config reproduces the dataset modulo wall-clock") {
    cfg.out_dir = (dir / "b").string();
    mazenamo::DatasetManifest m2 = mazenamo::build_dataset(cfg);
    REQUIRE(m2.instances.size() == m1.instances.size());
    for (size_t i = 0; i < m1.instances.size(); ++i) {
      CHECK(m1.instances[i].id == m2.instances[i].id);
      CHECK(m1.instances[i].seed == m2.instances[i].seed);
      CHECK(m1.instances[i].level == m2.instances[i].level);
    }
  }
  SUBCASE("zero quotas produce an empty manifest") {
    mazenamo::DatasetConfig empty = cfg;
    empty.quotas = {};
    empty.out_dir = (dir / "c").string();
    CHECK(mazenamo::build_dataset(empty).instances.empty());
  }
  SUBCASE("unreachable quotas report what is missing") {
    mazenamo::DatasetConfig bad = cfg;
    bad.quotas = {};
    bad.quotas.expert = 1;  // n=6 never takes >60% of a 60s budget
    bad.max_attempts = 5;
    bad.out_dir = (dir / "d").string();
    CHECK_THROWS_WITH_AS(mazenamo::build_dataset(bad), doctest::Contains("expert"),
                         std::runtime_error);
  }
  SUBCASE("manifest save/load round-trips") {
    mazenamo::DatasetManifest loaded =
        mazenamo::load_manifest((fs::path(cfg.out_dir) / "manifest.json").string());
    REQUIRE(loaded.instances.size() == m1.instances.size());
    CHECK(loaded.n == m1.n);
    CHECK(loaded.instances[0].id == m1.instances[0].id);
    CHECK(loaded.instances[0].instance_path == m1.instances[0].instance_path);
  }
}

