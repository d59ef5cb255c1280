#include "sat/entities.hpp"

#include "sat/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sat {

void SensorModel::validate() const {
  if (!(range > 0.0)) throw ConfigError("sensor range must be positive");
  if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) {
    throw ConfigError("sensor alpha/beta must lie in [0, 1]");
  }
  if (!(sigma_near > 0.0) || sigma_far < sigma_near) {
    throw ConfigError("sensor noise must satisfy 0 < sigma_near <= sigma_far");
  }
}

Vec2 sample_free_position(const GridMap& map, Rng& rng) {
  if (map.free_count() == 0) throw std::invalid_argument("map has no free cells");
  for (;;) {
    const std::size_t idx = rng.index(map.size());
    const double ox = rng.uniform();
    const double oy = rng.uniform();
    if (map.obstacle(idx)) continue;
    const Vec2 c = map.center(idx);
    const double res = map.resolution();
    return {c.x() + (ox - 0.5) * res, c.y() + (oy - 0.5) * res};
  }
}

namespace {

void step_random_waypoint(TargetState& t, RandomWaypoint& m, const GridMap& map, double dt, Rng& rng) {
  const double arrive = 0.5 * map.resolution();
  for (int attempt = 0; attempt < 16 && (!m.goal || m.route.points.empty()); ++attempt) {
    if (!m.goal) m.goal = sample_free_position(map, rng);
    try {
      m.route = route_from_path(plan_path(map, t.pose, Pose::at(*m.goal)), Pose::at(*m.goal),
                                map.resolution());
    } catch (const NoPathError&) {
      m.goal.reset();
      m.route = {};
    }
  }
  if (!m.goal) return;
  follow_route(map, t.pose, m.route, t.max_speed * dt);
  if ((t.pose.xy() - *m.goal).norm() <= arrive || m.route.done()) {
    m.goal.reset();
    m.route = {};
  }
}

void step_playback(TargetState& t, TracePlayback& m, const GridMap& map, double dt) {
  const auto& s = m.samples;
  if (s.empty()) throw TraceExhausted("playback trajectory is empty");
  const double duration = s.back().t - s.front().t;
  m.cursor += dt;
  if (m.cursor > duration + 1e-9) {
    if (!m.loop || duration <= 0.0) throw TraceExhausted("playback passed the last sample");
    m.cursor = std::fmod(m.cursor, duration);
  }
  const double now = s.front().t + m.cursor;
  auto hi = std::lower_bound(s.begin(), s.end(), now,
                             [](const TrajectorySample& a, double v) { return a.t < v; });
  Vec2 p;
  if (hi == s.begin()) {
    p = {hi->x, hi->y};
  } else if (hi == s.end()) {
    p = {s.back().x, s.back().y};
  } else {
    const auto lo = hi - 1;
    const double u = (now - lo->t) / (hi->t - lo->t);
    p = {lo->x + u * (hi->x - lo->x), lo->y + u * (hi->y - lo->y)};
  }
  if (is_free(map, p)) {
    t.pose.heading = std::atan2(p.y() - t.pose.y, p.x() - t.pose.x);
    t.pose.x = p.x();
    t.pose.y = p.y();
  }
}

}  // namespace

TargetState step_target(TargetState t, const GridMap& map, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_target: dt must be positive");
  if (t.cleared) return t;
  std::visit(
      [&](auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, RandomWaypoint>) {
          step_random_waypoint(t, m, map, dt, rng);
        } else {
          step_playback(t, m, map, dt);
        }
      },
      t.motion);
  return t;
}

AgentState step_agent(AgentState a, const Pose& command, const GridMap& map, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_agent: dt must be positive");
  Route route = route_from_path(plan_path(map, a.pose, command), command, map.resolution());
  a.traveled += follow_route(map, a.pose, route, a.max_speed * dt);
  return a;
}

bool target_visible(const SensorModel& s, const Pose& agent_pose, const Vec2& target, const GridMap& map) {
  if ((target - agent_pose.xy()).norm() > s.range) return false;
  return line_of_sight(map, agent_pose.xy(), target);
}

bool sense_detect(const SensorModel& s, const Pose& agent_pose, const TargetState& target,
                  const GridMap& map, Rng& rng) {
  const double u = rng.uniform();
  if (target_visible(s, agent_pose, target.pose.xy(), map)) return u < 1.0 - s.alpha;
  return u < s.beta;
}

Measurement locate_with_noise(const SensorModel& s, const Pose& agent_pose, const Vec2& target_pos,
                              int target_id, const Vec2& unit_noise, double t, int agent_id) {
  const double d = (target_pos - agent_pose.xy()).norm();
  const double sigma = s.sigma_at(d);
  Measurement m;
  m.target_id = target_id;
  m.position = Pose::at(target_pos + sigma * unit_noise);
  m.covariance = Mat2::Identity() * (sigma * sigma);
  m.time = t;
  m.source_kind = SourceKind::Agent;
  m.source_id = agent_id;
  return m;
}

Measurement sense_locate(const SensorModel& s, const Pose& agent_pose, const TargetState& target,
                         Rng& rng, double t, int agent_id) {
  const double nx = rng.normal();
  const double ny = rng.normal();
  return locate_with_noise(s, agent_pose, target.pose.xy(), target.id, {nx, ny}, t, agent_id);
}

Measurement sense_false_positive(const SensorModel& s, const Pose& agent_pose, const GridMap& map,
                                 Rng& rng, double t, int agent_id) {
  Vec2 p = agent_pose.xy();
  for (int attempt = 0; attempt < 32; ++attempt) {
    const double r = s.range * std::sqrt(rng.uniform());
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    const Vec2 q = agent_pose.xy() + r * Vec2(std::cos(th), std::sin(th));
    if (is_free(map, q)) {
      p = q;
      break;
    }
  }
  Measurement m;
  m.target_id = kFalsePositiveId;
  m.position = Pose::at(p);
  m.covariance = s.covariance_at((p - agent_pose.xy()).norm());
  m.time = t;
  m.source_kind = SourceKind::Agent;
  m.source_id = agent_id;
  return m;
}

bool report_due(const Reporter& r, double t, double dt) {
  const double k = std::round(t / r.report_period);
  return std::abs(t - k * r.report_period) < 0.5 * dt;
}

std::optional<Measurement> report_with_noise(const Reporter& r, const TargetState& target, double t,
                                             const Vec2& unit_noise) {
  if (std::find(r.observed_targets.begin(), r.observed_targets.end(), target.id) ==
      r.observed_targets.end()) {
    return std::nullopt;
  }
  Measurement m;
  m.target_id = target.id;
  m.position = Pose::at(target.pose.xy() + r.sigma_report * unit_noise);
  m.covariance = Mat2::Identity() * (r.sigma_report * r.sigma_report);
  m.time = t;
  m.source_kind = SourceKind::Reporter;
  m.source_id = r.id;
  return m;
}

std::optional<Measurement> emit_report(const Reporter& r, const TargetState& target, double t, Rng& rng) {
  if (std::find(r.observed_targets.begin(), r.observed_targets.end(), target.id) ==
      r.observed_targets.end()) {
    return std::nullopt;
  }
  const double nx = rng.normal();
  const double ny = rng.normal();
  return report_with_noise(r, target, t, {nx, ny});
}

std::vector<TrajectorySample> parse_trajectory(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trajectory: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("trajectory: expected a JSON array");
  std::vector<TrajectorySample> out;
  out.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("t") || !item.contains("x") || !item.contains("y")) {
      throw ParseError("trajectory: each sample needs t, x, y");
    }
    TrajectorySample s{item.at("t").get<double>(), item.at("x").get<double>(), item.at("y").get<double>()};
    if (!out.empty() && !(s.t > out.back().t)) throw ParseError("trajectory: t must strictly increase");
    out.push_back(s);
  }
  return out;
}

std::vector<TrajectorySample> load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("trajectory: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory(ss.str());
}

}  // namespace sat
