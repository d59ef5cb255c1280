#include "sat/planning.hpp"

#include "sat/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sat {

namespace {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

Frontier make_frontier(const GridMap& map, std::vector<std::size_t> members) {
  Vec2 mean = Vec2::Zero();
  for (std::size_t idx : members) mean += map.center(idx);
  mean /= static_cast<double>(members.size());
  if (!is_free(map, mean)) {
    // Snap to the closest member so the goal is always reachable free space.
    std::size_t best = members.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t idx : members) {
      const double d = (map.center(idx) - mean).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = idx;
      }
    }
    mean = map.center(best);
  }
  Frontier f;
  f.centroid = Pose::at(mean);
  f.cluster_size = members.size();
  f.member_cells = std::move(members);
  return f;
}

// Position of a forecast target at pose step k (k = 0 is the first pose).
Vec2 forecast_at(const TargetForecast& f, std::size_t k) {
  if (f.predicted.empty()) return f.estimate.mean;
  return f.predicted[std::min(k, f.predicted.size() - 1)];
}

}  // namespace

bool is_frontier_cell(std::span<const double> p, const GridMap& map, std::size_t idx, double band) {
  if (map.obstacle(idx) || !(p[idx] < 0.5 - band)) return false;
  const Cell c = map.cell(idx);
  for (int k = 0; k < 8; ++k) {
    const Cell n{c.row + kDr[k], c.col + kDc[k]};
    if (map.free(n) && std::abs(p[map.index(n)] - 0.5) <= band) return true;
  }
  return false;
}

std::vector<Frontier> extract_frontiers(std::span<const double> p, const GridMap& map, double unknown_band,
                                        std::size_t max_cluster_cells) {
  if (!(unknown_band > 0.0 && unknown_band < 0.5)) throw std::invalid_argument("frontiers: band must be in (0, 0.5)");
  if (p.size() != map.size()) throw std::invalid_argument("frontiers: belief size does not match map");
  if (max_cluster_cells == 0) max_cluster_cells = map.size();

  std::vector<std::uint8_t> frontier(map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) frontier[i] = is_frontier_cell(p, map, i, unknown_band) ? 1 : 0;

  std::vector<Frontier> out;
  std::vector<std::uint8_t> visited(map.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < map.size(); ++seed) {
    if (!frontier[seed] || visited[seed]) continue;
    std::vector<std::size_t> order;
    visited[seed] = 1;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      order.push_back(cur);
      const Cell c = map.cell(cur);
      for (int k = 0; k < 8; ++k) {
        const Cell n{c.row + kDr[k], c.col + kDc[k]};
        if (!map.in_bounds(n)) continue;
        const std::size_t ni = map.index(n);
        if (frontier[ni] && !visited[ni]) {
          visited[ni] = 1;
          queue.push_back(ni);
        }
      }
    }
    for (std::size_t at = 0; at < order.size(); at += max_cluster_cells) {
      const std::size_t end = std::min(order.size(), at + max_cluster_cells);
      out.push_back(make_frontier(map, {order.begin() + static_cast<std::ptrdiff_t>(at),
                                        order.begin() + static_cast<std::ptrdiff_t>(end)}));
    }
  }
  return out;
}

std::vector<CandidateTrajectory> gen_search_candidates(const AgentState& agent, const std::vector<Frontier>& frontiers,
                                                       const GridMap& map, const PlanParams& params) {
  std::vector<CandidateTrajectory> out;
  if (frontiers.empty()) return out;
  const auto start = map.cell_of(agent.pose.xy());
  if (!start || !map.free(*start)) return out;
  const DistanceField field(map, *start);
  const double budget = agent.max_speed * params.dt;

  for (std::size_t f = 0; f < frontiers.size(); ++f) {
    const Pose& goal = frontiers[f].centroid;
    const auto goal_cell = map.cell_of(goal.xy());
    if (!goal_cell || !field.reachable(*goal_cell)) continue;
    Route route = route_from_path(field.path_to(*goal_cell), goal, map.resolution());
    CandidateTrajectory c;
    c.goal = goal;
    c.frontier = f;
    c.path_length = field.cost(*goal_cell);
    Pose pose = agent.pose;
    for (int k = 1; k <= params.horizon; ++k) {
      follow_route(map, pose, route, budget);
      c.poses.push_back({k * params.dt, pose});
    }
    c.terminal = pose;
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const CandidateTrajectory& a, const CandidateTrajectory& b) {
    return a.path_length < b.path_length;
  });
  if (params.max_candidates && out.size() > *params.max_candidates) out.resize(*params.max_candidates);
  return out;
}

std::vector<CandidateTrajectory> gen_track_candidates(const AgentState& agent, const Window& predicted_target,
                                                      const GridMap& map, int n_headings, int n_speeds,
                                                      const PlanParams& params) {
  if (n_headings < 1 || n_speeds < 1) throw std::invalid_argument("track candidates: need headings and speeds");
  std::vector<CandidateTrajectory> out;

  CandidateTrajectory stay;
  for (int k = 1; k <= params.horizon; ++k) stay.poses.push_back({k * params.dt, agent.pose});
  stay.terminal = agent.pose;
  stay.goal = agent.pose;
  out.push_back(std::move(stay));

  double base = 0.0;
  if (!predicted_target.empty()) {
    const Vec2 to = predicted_target.back() - agent.pose.xy();
    if (to.norm() > 1e-12) base = std::atan2(to.y(), to.x());
  }
  for (int h = 0; h < n_headings; ++h) {
    const double theta = base + 2.0 * std::numbers::pi * h / n_headings;
    const Vec2 dir(std::cos(theta), std::sin(theta));
    for (int j = 0; j < n_speeds; ++j) {
      const double speed = agent.max_speed * (j + 1) / n_speeds;
      CandidateTrajectory c;
      Vec2 prev = agent.pose.xy();
      bool ok = true;
      for (int k = 1; k <= params.horizon && ok; ++k) {
        const Vec2 at = agent.pose.xy() + dir * (speed * k * params.dt);
        if (!is_free(map, at) || !line_of_sight(map, prev, at)) {
          ok = false;
          break;
        }
        c.poses.push_back({k * params.dt, Pose{at.x(), at.y(), theta}});
        prev = at;
      }
      if (!ok) continue;
      c.terminal = c.poses.back().pose;
      c.goal = c.terminal;
      c.path_length = speed * params.horizon * params.dt;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<double> explore_gain_map(std::span<const double> p, const SensorModel& sensor, const GridMap& map) {
  if (p.size() != map.size()) throw std::invalid_argument("explore gain: belief size does not match map");
  std::vector<double> gains(map.size(), 0.0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.obstacle(i)) continue;
    gains[i] = std::max(0.0, cell_entropy(p[i]) - expected_posterior_entropy(p[i], sensor.alpha, sensor.beta));
  }
  return gains;
}

double j_explore_with_gains(std::span<const double> gains, const CandidateTrajectory& tau, const SensorModel& sensor,
                            const GridMap& map) {
  if (gains.size() != map.size()) throw std::invalid_argument("explore gain: gain map size does not match map");
  std::vector<std::uint8_t> seen(map.size(), 0);
  double total = 0.0;
  const Pose* last = nullptr;
  for (const TimedPose& tp : tau.poses) {
    if (last && last->x == tp.pose.x && last->y == tp.pose.y) continue;
    last = &tp.pose;
    for (std::size_t idx : footprint(map, tp.pose, sensor.range)) {
      if (seen[idx]) continue;
      seen[idx] = 1;
      total += gains[idx];
    }
  }
  return total;
}

double j_explore(std::span<const double> p, const CandidateTrajectory& tau, const SensorModel& sensor,
                 const GridMap& map) {
  return j_explore_with_gains(explore_gain_map(p, sensor, map), tau, sensor, map);
}

double reading_gain(const Mat2& prior, const SensorModel& sensor, double d) {
  const double s2 = sensor.sigma_at(d) * sensor.sigma_at(d);
  const Mat2 info = prior.inverse() + Mat2::Identity() / s2;
  const Mat2 post = info.inverse();
  return std::max(0.0, 0.5 * std::log(prior.determinant() / post.determinant()));
}

double j_exploit(const std::vector<TargetForecast>& tracks, const std::vector<ReportEstimate>& reports,
                 const CandidateTrajectory& tau, const SensorModel& sensor, const GridMap& map, double q,
                 double now) {
  const bool check_los = map.has_obstacles();
  // Closest in-range, visible approach: (pose index, distance).
  auto closest = [&](auto&& position_at) -> std::pair<std::size_t, double> {
    std::size_t best = tau.poses.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < tau.poses.size(); ++k) {
      const Vec2 target = position_at(k);
      const double d = (tau.poses[k].pose.xy() - target).norm();
      if (d > sensor.range || d >= best_d) continue;
      if (check_los && !line_of_sight(map, tau.poses[k].pose.xy(), target)) continue;
      best = k;
      best_d = d;
    }
    return {best, best_d};
  };

  double total = 0.0;
  for (const TargetForecast& f : tracks) {
    if (f.estimate.cleared) continue;
    const auto [k, d] = closest([&](std::size_t i) { return forecast_at(f, i); });
    if (k == tau.poses.size()) continue;
    const double age = std::max(0.0, now - f.estimate.last_update);
    const Mat2 prior = f.estimate.covariance + Mat2::Identity() * (q * (tau.poses[k].t + age));
    total += reading_gain(prior, sensor, d);
  }
  for (const ReportEstimate& r : reports) {
    const auto [k, d] = closest([&](std::size_t) { return r.mean; });
    if (k == tau.poses.size()) continue;
    const double age = std::max(0.0, now - r.time);
    const Mat2 prior = r.covariance + Mat2::Identity() * (q * (tau.poses[k].t + age));
    total += reading_gain(prior, sensor, d);
  }
  return total;
}

void score_candidates(std::vector<CandidateTrajectory>& cands, const ScoreInputs& in, const SensorModel& sensor,
                      const GridMap& map, Exec exec) {
  static const std::vector<TargetForecast> kNoTracks;
  static const std::vector<ReportEstimate> kNoReports;
  const auto& tracks = in.tracks ? *in.tracks : kNoTracks;
  const auto& reports = in.reports ? *in.reports : kNoReports;
  const bool explore = !in.gains.empty();
  auto score = [&](CandidateTrajectory& c) {
    c.raw_explore = explore ? j_explore_with_gains(in.gains, c, sensor, map) : 0.0;
    c.raw_exploit = j_exploit(tracks, reports, c, sensor, map, in.q, in.now);
  };
  const auto n = static_cast<std::ptrdiff_t>(cands.size());
  if (exec == Exec::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) score(cands[static_cast<std::size_t>(i)]);
    return;
  }
#pragma omp parallel for schedule(dynamic, 1) if (n > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) score(cands[static_cast<std::size_t>(i)]);
}

void normalize_scores(std::vector<CandidateTrajectory>& cands) {
  double max_e = 0.0;
  double max_x = 0.0;
  for (const auto& c : cands) {
    max_e = std::max(max_e, c.raw_explore);
    max_x = std::max(max_x, c.raw_exploit);
  }
  for (auto& c : cands) {
    c.j_explore = max_e > 0.0 ? c.raw_explore / max_e : 0.0;
    c.j_exploit = max_x > 0.0 ? c.raw_exploit / max_x : 0.0;
  }
}

double utility(const CandidateTrajectory& c, Mode mode, const UtilityWeights& weights) {
  const double w = mode == Mode::Search ? weights.w_search : weights.w_track;
  return w * c.j_explore + (1.0 - w) * c.j_exploit;
}

std::size_t select_best(std::vector<CandidateTrajectory>& cands, Mode mode, const UtilityWeights& weights,
                        const std::vector<Pose>& teammate_terminals) {
  if (cands.empty()) throw std::invalid_argument("select_best: no candidates");
  normalize_scores(cands);
  auto spread_ok = [&](const CandidateTrajectory& c) {
    for (const Pose& t : teammate_terminals) {
      if (distance(c.terminal, t) < weights.d_thre) return false;
    }
    return true;
  };
  auto argmax = [&](bool constrained) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_u = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (constrained && !spread_ok(cands[i])) continue;
      const double u = utility(cands[i], mode, weights);
      if (u > best_u) {
        best_u = u;
        best = i;
      }
    }
    return best;
  };
  if (auto best = argmax(true)) return *best;
  return *argmax(false);
}

}  // namespace sat
