#pragma once

#include "sat/entities.hpp"
#include "sat/planning.hpp"
#include "sat/prediction.hpp"
#include "sat/rng.hpp"
#include "sat/world.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sat {

/// Experiment parameter table. Ranges are sampled uniformly per agent.
struct Defaults {
  static constexpr double target_speed = 0.2;
  static constexpr double agent_speed = 0.4;
  static constexpr double range_min = 5.0;
  static constexpr double range_max = 8.0;
  static constexpr double alpha_min = 0.08;
  static constexpr double alpha_max = 0.2;
  static constexpr double beta = 0.0;
  static constexpr double sigma_min = 0.7;
  static constexpr double sigma_max = 1.3;
  static constexpr double sigma_report_min = 0.5;
  static constexpr double sigma_report_max = 1.0;
  static constexpr double decay_rate = 1.0 / 90.0;
  static constexpr double w_search = 0.3;
  static constexpr double w_track = 0.2;
  static constexpr double d_thre = 3.5;
  static constexpr double trace_thre = 2.0;

  // Engine choices with no value in the parameter table.
  static constexpr double dt = 0.2;
  static constexpr double plan_period = 1.0;
  static constexpr double hold_time = 5.0;
  static constexpr double track_timeout = 5.0;
  static constexpr double report_period = 10.0;
  static constexpr double time_cap = 300.0;
  static constexpr int min_spacing_cells = 2;
};

/// Per-agent sensors with range, alpha and both sigma endpoints drawn from
/// the table's ranges (the endpoints are two sorted draws). Beta stays 0.
std::vector<SensorModel> heterogeneous_sample(Rng& rng, int n_agents);
SensorModel default_sensor();

enum class PolicyKind { Hybrid, RandomWalk, Independent, CentralKF, Exhaustive, Swarm };

std::string policy_name(PolicyKind p);
/// Accepts hybrid, random, independent, central-kf, exhaustive, swarm.
PolicyKind parse_policy(const std::string& name);

struct AgentSpec {
  std::optional<Vec2> position;
  std::optional<double> max_speed;
  std::optional<SensorModel> sensor;
};

struct TargetSpec {
  std::optional<Vec2> position;
  std::optional<double> max_speed;
  /// Playback file; relative paths resolve against the config file.
  std::optional<std::string> trajectory;
  bool loop = true;
  bool stationary = false;
};

struct ReporterSpec {
  std::optional<double> sigma_report;
  std::optional<double> report_period;
  /// Target indices; default is every target whose index is congruent to
  /// this reporter's index modulo the reporter count.
  std::optional<std::vector<int>> observed_targets;
};

struct Toggles {
  bool tr = true;
  bool tv = true;
  bool lstm = true;
};

struct Failures {
  double p_cf = 0.0;
  double p_ef = 0.0;
  /// Perception false-positive rate, injected as every sensor's beta.
  double p_fp = 0.0;
  double p_hq = 0.0;
  int latency_ticks = 0;
};

struct SwarmGains {
  double separation = 1.0;
  double cohesion = 0.08;
  double drift = 1.0;
  double attraction = 2.0;
  /// Patrol drift heading turns at this rate (rad/s).
  double drift_turn = 0.05;
};

struct ScenarioConfig {
  std::string name = "scenario";
  /// Either a map file or "open:WxH".
  std::string map_spec = "open:50x50";
  std::shared_ptr<const GridMap> map;

  std::vector<AgentSpec> agents;
  std::vector<TargetSpec> targets;
  std::vector<ReporterSpec> reporters;

  PolicyKind policy = PolicyKind::Hybrid;
  UtilityWeights weights;
  Toggles toggles;
  Failures failures;
  SwarmGains swarm;
  bool heterogeneous = true;
  /// Agents know how many targets exist, so empty cells stop decaying once
  /// all have been detected.
  bool known_target_count = true;

  double time_cap = Defaults::time_cap;
  std::uint64_t seed = 0;
  double dt = Defaults::dt;
  double plan_period = Defaults::plan_period;
  double decay_rate = Defaults::decay_rate;
  double trace_thre = Defaults::trace_thre;
  double hold_time = Defaults::hold_time;
  double track_timeout = Defaults::track_timeout;
  double unknown_band = 0.1;
  int n_headings = 8;
  int n_speeds = 2;
  std::optional<std::size_t> max_search_candidates;

  std::string predictor_path;
  std::shared_ptr<const PredictorWeights> predictor;

  /// Belief snapshot cadence in the trace (seconds).
  double snapshot_period = 10.0;

  /// Throws ConfigError.
  void validate() const;
};

/// Scenario JSON. Counts may replace the agents/targets/reporters arrays.
/// Map and predictor paths resolve against `base_dir`.
ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& cfg);

/// Builds the map named by a map spec ("open:WxH[:res]" or a file path).
std::shared_ptr<const GridMap> resolve_map(const std::string& spec, const std::filesystem::path& base_dir);

}  // namespace sat
