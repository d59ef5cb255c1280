#pragma once

#include "sat/rng.hpp"
#include "sat/world.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

namespace sat {

/// Omnidirectional detector with range, false-negative rate alpha,
/// false-positive rate beta and distance-dependent location noise.
struct SensorModel {
  double range = 6.0;
  double alpha = 0.1;
  double beta = 0.0;
  double sigma_near = 0.7;
  double sigma_far = 1.3;

  /// Linear interpolation from sigma_near at d=0 to sigma_far at d=range,
  /// clamped outside that interval.
  double sigma_at(double d) const {
    const double u = std::clamp(d / range, 0.0, 1.0);
    return sigma_near + (sigma_far - sigma_near) * u;
  }
  Mat2 covariance_at(double d) const {
    const double s = sigma_at(d);
    return Mat2::Identity() * (s * s);
  }
  void validate() const;
};

enum class Mode { Search, Track };

struct AgentState {
  int id = 0;
  Pose pose;
  double max_speed = 0.4;
  SensorModel sensor;
  Mode mode = Mode::Search;
  std::optional<int> assigned_target;
  double traveled = 0.0;
};

struct RandomWaypoint {
  std::optional<Vec2> goal;
  Route route;
};

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct TracePlayback {
  std::vector<TrajectorySample> samples;
  double cursor = 0.0;
  bool loop = false;
};

using TargetMotion = std::variant<RandomWaypoint, TracePlayback>;

struct TargetState {
  int id = 0;
  Pose pose;
  double max_speed = 0.2;
  TargetMotion motion = RandomWaypoint{};
  bool cleared = false;
};

struct Reporter {
  int id = 0;
  double sigma_report = 0.5;
  double report_period = 5.0;
  std::vector<int> observed_targets;
};

enum class SourceKind { Agent, Reporter };

/// Sentinel target id carried by false-positive detections.
inline constexpr int kFalsePositiveId = -1;

struct Measurement {
  int target_id = kFalsePositiveId;
  Pose position;
  Mat2 covariance = Mat2::Identity();
  double time = 0.0;
  SourceKind source_kind = SourceKind::Agent;
  int source_id = 0;
};

/// Uniformly random free position (cell chosen uniformly, then a uniform
/// offset inside it).
Vec2 sample_free_position(const GridMap& map, Rng& rng);

/// Advances a target by dt. Cleared targets are returned unchanged.
/// Throws TraceExhausted when non-looping playback runs past its last sample.
TargetState step_target(TargetState t, const GridMap& map, double dt, Rng& rng);

/// Plans to `command` and moves at most max_speed*dt along the plan.
/// Throws NoPathError when the waypoint is unreachable.
AgentState step_agent(AgentState a, const Pose& command, const GridMap& map, double dt);

bool target_visible(const SensorModel& s, const Pose& agent_pose, const Vec2& target, const GridMap& map);

/// Bernoulli detection draw: 1-alpha when the target is visible, beta otherwise.
bool sense_detect(const SensorModel& s, const Pose& agent_pose, const TargetState& target,
                  const GridMap& map, Rng& rng);

/// Location measurement of a detected target with isotropic noise sigma(d).
Measurement sense_locate(const SensorModel& s, const Pose& agent_pose, const TargetState& target,
                         Rng& rng, double t = 0.0, int agent_id = 0);

/// Deterministic core of sense_locate; `unit_noise` holds the standard-normal draws.
Measurement locate_with_noise(const SensorModel& s, const Pose& agent_pose, const Vec2& target_pos,
                              int target_id, const Vec2& unit_noise, double t, int agent_id);

/// Spurious detection at a uniform random free position within range.
Measurement sense_false_positive(const SensorModel& s, const Pose& agent_pose, const GridMap& map,
                                 Rng& rng, double t = 0.0, int agent_id = 0);

bool report_due(const Reporter& r, double t, double dt);

/// Noisy report of `target`, or nothing if the reporter does not observe it.
std::optional<Measurement> emit_report(const Reporter& r, const TargetState& target, double t, Rng& rng);
std::optional<Measurement> report_with_noise(const Reporter& r, const TargetState& target, double t,
                                             const Vec2& unit_noise);

/// Playback trajectory file: a JSON array of {t, x, y} with strictly increasing t.
std::vector<TrajectorySample> load_trajectory(const std::filesystem::path& path);
std::vector<TrajectorySample> parse_trajectory(std::string_view json_text);

}  // namespace sat
