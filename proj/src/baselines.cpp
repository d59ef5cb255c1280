#include "sat/baselines.hpp"

#include "sat/belief.hpp"
#include "sat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace sat {

namespace {

AgentAction stay(const AgentContext& ctx, Mode mode) {
  AgentAction a;
  a.command = ctx.state.pose;
  a.mode = mode;
  return a;
}

}  // namespace

Vec2 kf_follow_point(const AgentTrack& track) {
  Forecaster cv;
  return cv.forecast(track).front();
}

AgentAction random_walk_step(const AgentContext& ctx, const std::vector<Frontier>& frontiers, RandomWalkMemory& memory,
                             Rng& rng) {
  if (auto target = focus_target(ctx)) {
    AgentAction a = stay(ctx, Mode::Track);
    a.target = target;
    a.command = Pose::at(ctx.tracks.at(*target).last_measurement);
    return a;
  }
  constexpr double kReached = 0.5;
  if (memory.goal && distance(*memory.goal, ctx.state.pose) > kReached) {
    AgentAction a = stay(ctx, Mode::Search);
    a.command = *memory.goal;
    return a;
  }
  memory.goal.reset();
  if (frontiers.empty()) {
    AgentAction a = stay(ctx, Mode::Search);
    a.idle = true;
    return a;
  }
  memory.goal = frontiers[rng.index(frontiers.size())].centroid;
  AgentAction a = stay(ctx, Mode::Search);
  a.command = *memory.goal;
  a.n_candidates = frontiers.size();
  return a;
}

AgentAction independent_step(const AgentContext& ctx, const GridMap& map, const PlannerSettings& settings, double t) {
  AgentContext own = ctx;
  own.assignment.reset();
  return agent_independent_step(own, map, settings, Forecaster{}, t);
}

void configure_central_kf(HQState& hq) {
  hq.time_varying = false;
  hq.use_reports = false;
  hq.settings.weights.w_search = 1.0;
}

std::vector<int> voronoi_partition(const GridMap& map, const std::vector<Vec2>& starts) {
  if (starts.empty()) throw std::invalid_argument("voronoi_partition: no agents");
  std::vector<int> owner(map.size(), -1);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.obstacle(i)) continue;
    const Vec2 c = map.center(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < starts.size(); ++a) {
      const double d = (c - starts[a]).squaredNorm();
      if (d < best) {
        best = d;
        owner[i] = static_cast<int>(a);
      }
    }
  }
  return owner;
}

Path boustrophedon_path(const GridMap& map, const std::vector<std::size_t>& region, double range) {
  Path out;
  if (region.empty()) return out;
  const double res = map.resolution();
  const int band = std::max(1, static_cast<int>(std::floor(range / res + 1e-9)));

  std::map<int, std::vector<int>> cols_by_row;
  for (std::size_t idx : region) {
    const Cell c = map.cell(idx);
    cols_by_row[c.row].push_back(c.col);
  }
  const int rmin = cols_by_row.begin()->first;
  const int rmax = cols_by_row.rbegin()->first;

  // Sweep rows sit mid-band; each lists its region cells in alternating direction.
  std::vector<std::size_t> order;
  int lane = 0;
  for (int start = rmin; start <= rmax; start += band, ++lane) {
    const int row = std::min(start + band / 2, rmax);
    auto it = cols_by_row.find(row);
    if (it == cols_by_row.end()) {
      // Sweep row has no region cells; take the nearest populated row in the band.
      for (int r = start; r < start + band && r <= rmax; ++r) {
        if ((it = cols_by_row.find(r)) != cols_by_row.end()) break;
      }
      if (it == cols_by_row.end()) continue;
    }
    std::vector<int> cols = it->second;
    std::sort(cols.begin(), cols.end());
    if (lane % 2 == 1) std::reverse(cols.begin(), cols.end());
    for (int c : cols) order.push_back(map.index(Cell{it->first, c}));
  }

  std::vector<std::uint8_t> in_region(map.size(), 0);
  for (std::size_t idx : region) in_region[idx] = 1;
  std::vector<std::uint8_t> covered(map.size(), 0);
  std::size_t remaining = region.size();
  auto cover_from = [&](std::size_t idx) {
    for (std::size_t f : footprint(map, Pose::at(map.center(idx)), range)) {
      if (in_region[f] && !covered[f]) {
        covered[f] = 1;
        --remaining;
      }
    }
  };
  for (std::size_t idx : order) cover_from(idx);
  // Cells the sweep cannot see (behind walls, beyond range) get their own visit.
  while (remaining > 0) {
    const Vec2 from = map.center(order.back());
    std::optional<std::size_t> next;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t idx : region) {
      if (covered[idx]) continue;
      const double d = (map.center(idx) - from).squaredNorm();
      if (d < best) {
        best = d;
        next = idx;
      }
    }
    order.push_back(*next);
    const std::size_t before = remaining;
    cover_from(*next);
    if (remaining == before) {
      // Cell unseeable even from itself (range below half a cell).
      covered[*next] = 1;
      --remaining;
    }
  }

  for (std::size_t k = 0; k < order.size(); ++k) {
    const Pose p = Pose::at(map.center(order[k]));
    if (k > 0) {
      const Pose& prev = out.waypoints.back();
      if (!line_of_sight(map, prev, p)) {
        const Path bridge = plan_path(map, prev, p);
        for (std::size_t i = 1; i + 1 < bridge.waypoints.size(); ++i) out.waypoints.push_back(bridge.waypoints[i]);
      }
    }
    out.waypoints.push_back(p);
  }
  for (std::size_t k = 1; k < out.waypoints.size(); ++k) out.length += distance(out.waypoints[k - 1], out.waypoints[k]);
  return out;
}

AgentAction exhaustive_step(const AgentContext& ctx, CoverageState& coverage, double reach) {
  if (auto target = focus_target(ctx)) {
    AgentAction a = stay(ctx, Mode::Track);
    a.target = target;
    a.command = Pose::at(kf_follow_point(ctx.tracks.at(*target)));
    return a;
  }
  AgentAction a = stay(ctx, Mode::Search);
  if (coverage.path.waypoints.empty()) {
    a.idle = true;
    return a;
  }
  while (distance(coverage.path.waypoints[coverage.next], ctx.state.pose) <= reach) {
    if (++coverage.next == coverage.path.waypoints.size()) {
      coverage.next = 0;
      ++coverage.sweeps;
      if (coverage.path.waypoints.size() == 1) break;
    }
  }
  a.command = coverage.path.waypoints[coverage.next];
  return a;
}

std::vector<Vec2> swarm_velocities(const std::vector<Vec2>& positions, const std::optional<Vec2>& seen_target,
                                   double t, const SwarmGains& gains, double d_thre, double max_speed) {
  const std::size_t n = positions.size();
  std::vector<Vec2> out(n, Vec2::Zero());
  if (n == 0) return out;
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : positions) centroid += p;
  centroid /= static_cast<double>(n);
  const double heading = gains.drift_turn * t;
  const Vec2 drift = gains.drift * Vec2{std::cos(heading), std::sin(heading)};

  for (std::size_t i = 0; i < n; ++i) {
    Vec2 v = gains.cohesion * (centroid - positions[i]) + drift;
    // Separation vanishes at d_thre and grows without bound as agents close in.
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Vec2 away = positions[i] - positions[j];
      const double d = away.norm();
      if (d >= d_thre) continue;
      if (d < 1e-9) {
        v += gains.separation * Vec2{i < j ? -1.0 : 1.0, 0.0};
        continue;
      }
      v += gains.separation * (d_thre / d - 1.0) * away / d;
    }
    if (seen_target) {
      const Vec2 to = *seen_target - positions[i];
      const double d = to.norm();
      if (d > 1e-9) v += gains.attraction * to / d;
    }
    const double speed = v.norm();
    if (speed > max_speed) v *= max_speed / speed;
    out[i] = v;
  }
  return out;
}

Pose swarm_command(const GridMap& map, const Pose& pose, const Vec2& v, double horizon) {
  const double eps = 1e-6;
  const double w = map.width() * map.resolution();
  const double h = map.height() * map.resolution();
  Pose p = pose;
  p.x = std::clamp(pose.x + v.x() * horizon, eps, w - eps);
  p.y = std::clamp(pose.y + v.y() * horizon, eps, h - eps);
  if (v.squaredNorm() > 0.0) p.heading = std::atan2(v.y(), v.x());
  return p;
}

}  // namespace sat
