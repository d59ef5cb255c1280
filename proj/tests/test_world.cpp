#include <doctest.h>

#include "oracles.hpp"
#include "sat/errors.hpp"
#include "sat/rng.hpp"
#include "sat/world.hpp"

#include <cmath>
#include <set>

using namespace sat;

TEST_CASE("parse_map reads header and rows") {
  const GridMap m = parse_map("2 2 1.0\n..\n.#\n");
  CHECK(m.width() == 2);
  CHECK(m.height() == 2);
  CHECK(m.free_count() == 3);
  CHECK(m.obstacle(m.index({1, 1})));
  CHECK(format_map(m) == "2 2 1\n..\n.#\n");
}

TEST_CASE("50x50 open arena has 2500 free cells") {
  std::string text = "50 50 1.0\n";
  for (int r = 0; r < 50; ++r) text += std::string(50, '.') + "\n";
  const GridMap m = parse_map(text);
  CHECK(m.free_count() == 2500);
  CHECK_FALSE(m.has_obstacles());
}

TEST_CASE("malformed maps are rejected") {
  CHECK_THROWS_AS(parse_map("4 1 1.0\n...\n"), ParseError);
  CHECK_THROWS_AS(parse_map("2 2 1.0\n..\n"), ParseError);
  CHECK_THROWS_AS(parse_map("2 1\n..\n"), ParseError);
  CHECK_THROWS_AS(parse_map("2 1 1.0\n.x\n"), ParseError);
  CHECK_THROWS_AS(parse_map("2 1 -1.0\n..\n"), ParseError);
}

TEST_CASE("is_free") {
  const GridMap m = parse_map("2 2 1.0\n..\n.#\n");
  CHECK(is_free(m, Pose{0.5, 0.5, 0.0}));
  CHECK_FALSE(is_free(m, Pose{1.5, 0.5, 0.0}));
  CHECK_FALSE(is_free(m, Pose{-1.0, -1.0, 0.0}));
  CHECK_FALSE(is_free(m, Pose{2.0, 0.5, 0.0}));
}

TEST_CASE("line_of_sight basics") {
  const GridMap wall = parse_map(
      "5 5 1.0\n"
      "..#..\n"
      "..#..\n"
      "..#..\n"
      "..#..\n"
      "..#..\n");
  CHECK(line_of_sight(wall, Vec2(0.5, 0.5), Vec2(0.5, 0.5)));
  CHECK_FALSE(line_of_sight(wall, Vec2(0.5, 2.5), Vec2(4.5, 2.5)));
  CHECK_FALSE(line_of_sight(wall, Vec2(0.5, 0.2), Vec2(4.5, 4.8)));

  const GridMap corridor = parse_map(
      "5 3 1.0\n"
      "#####\n"
      ".....\n"
      "#####\n");
  CHECK(line_of_sight(corridor, Vec2(0.2, 1.5), Vec2(4.8, 1.5)));
  CHECK_FALSE(line_of_sight(corridor, Vec2(0.2, 1.5), Vec2(4.8, 2.5)));
}

TEST_CASE("traversal matches exact clipping oracle") {
  Rng rng(7);
  const GridMap m = GridMap::open(20, 20, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec2 a(rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0));
    const Vec2 b(rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0));
    std::set<std::pair<int, int>> got;
    for (const Cell& c : traverse(m, a, b)) got.insert({c.row, c.col});
    CHECK(got == oracle::segment_cells(m, a, b));
  }
}

TEST_CASE("line_of_sight agrees with the oracle and is symmetric on random maps") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const GridMap m = oracle::random_map(rng, 20, 20, 0.25);
    for (int k = 0; k < 20; ++k) {
      const Vec2 a(rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0));
      const Vec2 b(rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0));
      const bool los = line_of_sight(m, a, b);
      CHECK(los == line_of_sight(m, b, a));
      bool clear = true;
      for (const auto& [r, c] : oracle::segment_cells(m, a, b)) clear = clear && m.free({r, c});
      CHECK(los == clear);
    }
  }
}

TEST_CASE("plan_path trivial cases") {
  const GridMap open = GridMap::open(10, 10);
  const Path same = plan_path(open, Pose{3.5, 3.5, 0.0}, Pose{3.5, 3.5, 0.0});
  CHECK(same.waypoints.size() == 1);
  CHECK(same.length == 0.0);

  const Path diag = plan_path(open, Pose{0.5, 0.5, 0.0}, Pose{9.5, 9.5, 0.0});
  CHECK(diag.length == doctest::Approx(9.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(diag.waypoints.size() == 2);

  const GridMap boxed = parse_map(
      "5 5 1.0\n"
      ".....\n"
      ".###.\n"
      ".#.#.\n"
      ".###.\n"
      ".....\n");
  CHECK_THROWS_AS(plan_path(boxed, Pose{0.5, 0.5, 0.0}, Pose{2.5, 2.5, 0.0}), NoPathError);
}

TEST_CASE("plan_path equals the relaxation oracle on random maps") {
  Rng rng(3);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const GridMap m = oracle::random_map(rng, 20, 20, 0.3);
    std::size_t s = 0;
    while (m.obstacle(s)) ++s;
    const auto from = oracle::grid_costs(m, s);
    for (int k = 0; k < 5; ++k) {
      const std::size_t g = rng.index(m.size());
      if (m.obstacle(g)) continue;
      const Pose start = Pose::at(m.center(s));
      const Pose goal = Pose::at(m.center(g));
      if (!std::isfinite(from[g])) {
        CHECK_THROWS_AS(plan_path(m, start, goal), NoPathError);
        continue;
      }
      const Path p = plan_path(m, start, goal);
      CHECK(std::abs(p.length - from[g]) <= 1e-9);
      for (std::size_t i = 0; i < p.waypoints.size(); ++i) {
        CHECK(is_free(m, p.waypoints[i]));
        if (i > 0) CHECK(line_of_sight(m, p.waypoints[i - 1], p.waypoints[i]));
      }
      const DistanceField field(m, m.cell(s));
      CHECK(std::abs(field.cost(m.cell(g)) - from[g]) <= 1e-9);
      ++compared;
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("follow_route steers straight when the goal is visible") {
  const GridMap m = GridMap::open(20, 5);
  Pose pose{0.0, 0.0, 0.0};
  const Pose goal{10.0, 0.0, 0.0};
  Route route = route_from_path(plan_path(m, pose, goal), goal, 1.0);
  const double moved = follow_route(m, pose, route, 0.4);
  CHECK(moved == doctest::Approx(0.4));
  CHECK(pose.x == doctest::Approx(0.4));
  CHECK(pose.y == doctest::Approx(0.0));
}

TEST_CASE("follow_route never enters obstacles") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const GridMap m = oracle::random_map(rng, 20, 20, 0.25);
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m.obstacle(i)) free.push_back(i);
    }
    Pose pose = Pose::at(m.center(free[rng.index(free.size())]));
    const Pose goal = Pose::at(m.center(free[rng.index(free.size())]));
    Route route;
    try {
      route = route_from_path(plan_path(m, pose, goal), goal, 1.0);
    } catch (const NoPathError&) {
      continue;
    }
    for (int step = 0; step < 400 && !route.done(); ++step) {
      follow_route(m, pose, route, 0.4);
      CHECK(is_free(m, pose));
    }
    CHECK(route.done());
  }
}
