#include <doctest.h>

#include "oracles.hpp"
#include "sat/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

using namespace sat;

namespace {

CandidateTrajectory still_at(const Pose& p, int n = 15) {
  CandidateTrajectory c;
  for (int k = 1; k <= n; ++k) c.poses.push_back({0.2 * k, p});
  c.terminal = p;
  c.goal = p;
  return c;
}

}  // namespace

TEST_CASE("frontier examples") {
  const GridMap m = GridMap::open(3, 3);
  std::vector<double> p(9, 0.5);
  CHECK(extract_frontiers(p, m).empty());
  p[4] = 0.1;
  const auto f = extract_frontiers(p, m, 0.1);
  REQUIRE(f.size() == 1);
  CHECK(f[0].cluster_size == 1);
  CHECK(f[0].centroid.x == doctest::Approx(1.5));
  CHECK(f[0].centroid.y == doctest::Approx(1.5));
  std::fill(p.begin(), p.end(), 0.01);
  CHECK(extract_frontiers(p, m).empty());
  CHECK_THROWS(extract_frontiers(p, m, 0.5));
}

TEST_CASE("frontiers match a predicate scan on random maps") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const GridMap m = oracle::random_map(rng, 20, 20, 0.2);
    std::vector<double> p(m.size());
    for (double& v : p) {
      const double u = rng.uniform();
      v = u < 0.4 ? 0.5 : (u < 0.8 ? rng.uniform(0.0, 0.35) : rng.uniform());
    }
    const auto scan = oracle::frontier_scan(p, m, 0.1);
    const auto got = extract_frontiers(p, m, 0.1, 12);

    std::set<std::size_t> members;
    std::vector<std::size_t> parent(m.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t i : scan) {
      const Cell c = m.cell(i);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const Cell n{c.row + dr, c.col + dc};
          if (m.in_bounds(n) && scan.count(m.index(n))) parent[oracle::find_root(parent, i)] = oracle::find_root(parent, m.index(n));
        }
      }
    }
    for (const auto& f : got) {
      CHECK(f.cluster_size == f.member_cells.size());
      CHECK(f.cluster_size <= 12);
      CHECK(is_free(m, f.centroid));
      const std::size_t root = oracle::find_root(parent, f.member_cells.front());
      for (std::size_t i : f.member_cells) {
        CHECK(members.insert(i).second);
        CHECK(oracle::find_root(parent, i) == root);
      }
    }
    CHECK(members == scan);
  }
}

TEST_CASE("large frontier rings are split into chunks") {
  const GridMap m = GridMap::open(30, 30);
  std::vector<double> p(m.size(), 0.5);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if ((m.center(i) - Vec2(15.0, 15.0)).norm() <= 6.0) p[i] = 0.05;
  }
  const auto f = extract_frontiers(p, m, 0.1, 12);
  CHECK(f.size() > 1);
  const double spread = std::accumulate(f.begin(), f.end(), 0.0, [](double acc, const Frontier& fr) {
    return acc + (fr.centroid.xy() - Vec2(15.0, 15.0)).norm();
  });
  CHECK(spread / static_cast<double>(f.size()) > 3.0);
}

TEST_CASE("search candidates") {
  const GridMap m = GridMap::open(20, 20);
  AgentState a;
  a.pose = Pose{2.5, 2.5, 0.0};
  CHECK(gen_search_candidates(a, {}, m).empty());

  Frontier f;
  f.centroid = Pose{12.5, 2.5, 0.0};
  f.member_cells = {m.index(*m.cell_of(12.5, 2.5))};
  f.cluster_size = 1;
  const auto c = gen_search_candidates(a, {f}, m);
  REQUIRE(c.size() == 1);
  CHECK(c[0].poses.size() == 15);
  CHECK(c[0].terminal.x == doctest::Approx(2.5 + 15 * 0.2 * 0.4));
  CHECK(c[0].path_length == doctest::Approx(10.0));
  for (std::size_t k = 1; k < c[0].poses.size(); ++k) {
    CHECK(distance(c[0].poses[k - 1].pose, c[0].poses[k].pose) <= 0.4 * 0.2 + 1e-9);
  }

  const GridMap walled = parse_map(
      "7 5 1.0\n"
      "...#...\n"
      "...#...\n"
      "...#...\n"
      "...#...\n"
      "...#...\n");
  a.pose = Pose{0.5, 0.5, 0.0};
  Frontier behind;
  behind.centroid = Pose{5.5, 2.5, 0.0};
  Frontier near;
  near.centroid = Pose{2.5, 4.5, 0.0};
  const auto kept = gen_search_candidates(a, {behind, near}, walled);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].frontier == 1u);
}

TEST_CASE("track candidates") {
  const GridMap open = GridMap::open(20, 20);
  AgentState a;
  a.pose = Pose{10.5, 10.5, 0.0};
  const Window target(15, Vec2(14.0, 10.5));
  const auto c = gen_track_candidates(a, target, open, 8, 2);
  CHECK(c.size() == 17);
  CHECK(c[0].terminal.x == a.pose.x);
  for (const auto& cand : c) {
    for (std::size_t k = 1; k < cand.poses.size(); ++k) {
      CHECK(distance(cand.poses[k - 1].pose, cand.poses[k].pose) <= 0.4 * 0.2 + 1e-9);
    }
  }
  // First moving candidate points at the predicted target.
  CHECK(c[2].terminal.x > a.pose.x + 1.0);
  CHECK(c[2].terminal.y == doctest::Approx(a.pose.y));

  const GridMap dead_end = parse_map(
      "5 3 1.0\n"
      "#####\n"
      "....#\n"
      "#####\n");
  a.pose = Pose{3.9, 1.5, 0.0};
  const auto d = gen_track_candidates(a, Window(15, Vec2(10.0, 1.5)), dead_end, 8, 2);
  REQUIRE(!d.empty());
  CHECK(d[0].terminal.x == a.pose.x);
  for (const auto& cand : d) {
    for (const auto& tp : cand.poses) CHECK(is_free(dead_end, tp.pose));
    CHECK(cand.terminal.x <= a.pose.x + 1e-12);
  }
}

TEST_CASE("exploration gain") {
  const GridMap m = GridMap::open(11, 11);
  SensorModel s;
  s.alpha = 0.0;
  s.beta = 0.0;
  s.range = 0.5;
  std::vector<double> p(m.size(), 0.0);
  const auto tau = still_at(Pose{5.5, 5.5, 0.0});
  CHECK(j_explore(p, tau, s, m) == 0.0);
  p[m.index(*m.cell_of(5.5, 5.5))] = 0.5;
  CHECK(j_explore(p, tau, s, m) == doctest::Approx(1.0));

  // Disjoint footprints add up.
  SensorModel wide = s;
  wide.alpha = 0.1;
  wide.beta = 0.05;
  wide.range = 2.0;
  Rng rng(3);
  for (double& v : p) v = rng.uniform();
  auto both = still_at(Pose{2.5, 2.5, 0.0}, 7);
  const auto right = still_at(Pose{8.5, 8.5, 0.0}, 8);
  const double left_gain = j_explore(p, both, wide, m);
  const double right_gain = j_explore(p, right, wide, m);
  both.poses.insert(both.poses.end(), right.poses.begin(), right.poses.end());
  CHECK(j_explore(p, both, wide, m) == doctest::Approx(left_gain + right_gain).epsilon(1e-12));
  CHECK(left_gain > 0.0);
}

TEST_CASE("exploitation gain") {
  const GridMap m = GridMap::open(30, 30);
  SensorModel s;
  TargetForecast f;
  f.estimate.mean = Vec2(10.0, 10.0);
  f.estimate.covariance = Mat2::Identity() * 3.0;
  CHECK(j_exploit({}, {}, still_at(Pose{10.0, 10.0, 0.0}), s, m, 0.04, 0.0) == 0.0);
  const double close = j_exploit({f}, {}, still_at(Pose{10.0, 10.0, 0.0}), s, m, 0.04, 0.0);
  const double edge = j_exploit({f}, {}, still_at(Pose{16.0, 10.0, 0.0}), s, m, 0.04, 0.0);
  const double out = j_exploit({f}, {}, still_at(Pose{16.5, 10.0, 0.0}), s, m, 0.04, 0.0);
  CHECK(close > edge);
  CHECK(edge > 0.0);
  CHECK(out == 0.0);
  f.estimate.cleared = true;
  CHECK(j_exploit({f}, {}, still_at(Pose{10.0, 10.0, 0.0}), s, m, 0.04, 0.0) == 0.0);

  ReportEstimate r;
  r.mean = Vec2(10.0, 10.0);
  r.covariance = Mat2::Identity() * 0.25;
  const double fresh = j_exploit({}, {r}, still_at(Pose{12.0, 10.0, 0.0}), s, m, 0.04, 0.0);
  const double stale = j_exploit({}, {r}, still_at(Pose{12.0, 10.0, 0.0}), s, m, 0.04, 30.0);
  CHECK(fresh > 0.0);
  CHECK(stale > fresh);

  // Closed form for isotropic covariances: 0.5 ln(det prior / det post).
  const double p0 = 3.0 + 0.04 * 0.2;
  const double s2 = 0.49;
  CHECK(close == doctest::Approx(std::log(p0 / (p0 * s2 / (p0 + s2)))).epsilon(1e-9));
}

TEST_CASE("select_best examples") {
  CandidateTrajectory a = still_at(Pose{0.0, 0.0, 0.0});
  a.raw_explore = 1.0;
  CandidateTrajectory b = still_at(Pose{10.0, 0.0, 0.0});
  b.raw_exploit = 1.0;
  std::vector<CandidateTrajectory> c{a, b};
  const UtilityWeights w;
  CHECK(select_best(c, Mode::Search, w, {}) == 1);
  CHECK(utility(c[0], Mode::Search, w) == doctest::Approx(0.3));
  CHECK(utility(c[1], Mode::Search, w) == doctest::Approx(0.7));
  CHECK(select_best(c, Mode::Search, w, {Pose{11.0, 0.0, 0.0}}) == 0);
  // Every candidate crowded: the constraint is dropped.
  CHECK(select_best(c, Mode::Search, w, {Pose{11.0, 0.0, 0.0}, Pose{0.5, 0.0, 0.0}}) == 1);

  std::vector<CandidateTrajectory> one{still_at(Pose{})};
  CHECK(select_best(one, Mode::Track, w, {}) == 0);
  std::vector<CandidateTrajectory> none;
  CHECK_THROWS(select_best(none, Mode::Track, w, {}));
}

TEST_CASE("selection is invariant to scaling raw scores") {
  Rng rng(8);
  const UtilityWeights w;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CandidateTrajectory> c(8);
    for (auto& cand : c) {
      cand.terminal = Pose{rng.uniform(0, 20), rng.uniform(0, 20), 0.0};
      cand.raw_explore = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0, 50);
      cand.raw_exploit = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0, 5);
    }
    const std::vector<Pose> mates{Pose{rng.uniform(0, 20), rng.uniform(0, 20), 0.0}};
    auto scaled = c;
    const double k = rng.uniform(0.01, 100.0);
    for (auto& cand : scaled) cand.raw_explore *= k;
    const Mode mode = trial % 2 ? Mode::Search : Mode::Track;
    CHECK(select_best(c, mode, w, mates) == select_best(scaled, mode, w, mates));
  }
}

TEST_CASE("serial and parallel scoring agree exactly") {
  Rng rng(12);
  const GridMap m = oracle::random_map(rng, 30, 30, 0.15);
  std::vector<double> p(m.size());
  for (double& v : p) v = rng.uniform();
  SensorModel s;
  AgentState a;
  a.pose = Pose::at(sample_free_position(m, rng));
  const auto frontiers = extract_frontiers(p, m);
  auto serial = gen_search_candidates(a, frontiers, m);
  const auto tracks = gen_track_candidates(a, Window(15, a.pose.xy() + Vec2(2.0, 0.0)), m, 8, 2);
  serial.insert(serial.end(), tracks.begin(), tracks.end());
  REQUIRE(serial.size() > 4);
  auto parallel = serial;
  const auto gains = explore_gain_map(p, s, m);
  std::vector<TargetForecast> fc(1);
  fc[0].estimate.mean = a.pose.xy() + Vec2(2.0, 1.0);
  fc[0].estimate.covariance = Mat2::Identity() * 2.5;
  std::vector<ReportEstimate> reports(1);
  reports[0].mean = a.pose.xy() + Vec2(-3.0, 0.0);
  const ScoreInputs in{gains, &fc, &reports, 0.04, 1.0};
  score_candidates(serial, in, s, m, Exec::Serial);
  score_candidates(parallel, in, s, m, Exec::Parallel);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].raw_explore == parallel[i].raw_explore);
    CHECK(serial[i].raw_exploit == parallel[i].raw_exploit);
    CHECK(serial[i].raw_explore >= 0.0);
    CHECK(serial[i].raw_exploit >= 0.0);
  }
}

TEST_CASE("track mode choice reduces expected covariance versus staying") {
  const GridMap m = GridMap::open(40, 40);
  SensorModel s;
  s.alpha = 0.0;
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    AgentState a;
    a.pose = Pose{rng.uniform(15, 25), rng.uniform(15, 25), 0.0};
    const double bearing = rng.uniform(0, 2 * std::numbers::pi);
    const double d = rng.uniform(1.5, 5.5);
    TargetForecast f;
    f.estimate.mean = a.pose.xy() + d * Vec2(std::cos(bearing), std::sin(bearing));
    f.estimate.covariance = Mat2::Identity() * rng.uniform(1.0, 3.0);
    auto c = gen_track_candidates(a, Window(15, f.estimate.mean), m, 8, 2);
    const std::vector<TargetForecast> fc{f};
    score_candidates(c, ScoreInputs{{}, &fc, nullptr, 0.04, 0.0}, s, m);
    const std::size_t pick = select_best(c, Mode::Track, UtilityWeights{}, {});

    // Expected posterior trace at the closest approach, isotropic closed form.
    auto post_trace = [&](const CandidateTrajectory& cand) {
      const TimedPose* at = &cand.poses.front();
      for (const auto& tp : cand.poses) {
        if ((tp.pose.xy() - f.estimate.mean).norm() < (at->pose.xy() - f.estimate.mean).norm()) at = &tp;
      }
      const double dist = (at->pose.xy() - f.estimate.mean).norm();
      const double prior = f.estimate.covariance(0, 0) + 0.04 * at->t;
      const double s2 = s.sigma_at(dist) * s.sigma_at(dist);
      return 2.0 * prior * s2 / (prior + s2);
    };
    CHECK(post_trace(c[pick]) < post_trace(c[0]));
  }
}
