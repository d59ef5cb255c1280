#pragma once

#include "sat/config.hpp"
#include "sat/planning.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sat {

inline constexpr const char* kTraceVersion = "sat-trace-1";

struct TraceEvent {
  double t = 0.0;
  std::uint64_t seq = 0;
  /// pose, detection, measurement, report, belief-snapshot, assignment,
  /// mode-switch, clear, message or plan.
  std::string kind;
  nlohmann::json payload;

  bool operator==(const TraceEvent&) const = default;
};

struct Trace {
  std::string version = kTraceVersion;
  std::uint64_t seed = 0;
  std::string policy;
  std::string config;
  std::vector<TraceEvent> events;

  void add(double t, std::string kind, nlohmann::json payload);
};

/// JSON Lines: a header line, then one event per line. A trace without
/// events serializes to nothing.
std::string trace_to_jsonl(const Trace& trace);
/// Throws ParseError on malformed input.
Trace trace_from_jsonl(std::string_view text);
void write_trace(const Trace& trace, const std::filesystem::path& path);
Trace read_trace(const std::filesystem::path& path);

struct RunMetrics {
  double mission_time = 0.0;
  /// Fraction of targets cleared.
  double tracked_ratio = 0.0;
  /// Mean over cleared targets of clear time minus first detection time.
  double mean_tracking_time = 0.0;
  /// Mean path length over agents.
  double mean_traveled = 0.0;
  std::vector<std::optional<double>> clear_times;
  std::vector<double> traveled;
  bool completed = false;
  /// Longest run of consecutive planning ticks an agent spent idle in search
  /// mode while its belief still had frontiers.
  int max_idle_planning_ticks = 0;
  std::uint64_t hq_operations = 0;
  std::size_t messages_sent = 0;
  std::size_t messages_dropped = 0;
};

struct EpisodeOptions {
  bool record_trace = true;
  Exec exec = Exec::Serial;
};

struct EpisodeResult {
  RunMetrics metrics;
  Trace trace;
};

/// Runs one episode of `cfg` with its own seed. Validates the config first.
EpisodeResult run_episode(const ScenarioConfig& cfg, const EpisodeOptions& options = {});

struct MonteCarloRow {
  std::string config;
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SummaryRow {
  std::string config;
  std::size_t episodes = 0;
  MetricSummary mission_time;
  MetricSummary tracked_ratio;
  MetricSummary mean_tracking_time;
  MetricSummary mean_traveled;
};

/// Every (cfg, seed) pair, rows ordered by config then seed regardless of
/// thread count. `threads` of 0 reads SAT_THREADS (default: all cores).
std::vector<MonteCarloRow> run_monte_carlo(const std::vector<ScenarioConfig>& cfgs,
                                           const std::vector<std::uint64_t>& seeds, int threads = 0);
/// One row per config in first-appearance order; sample standard deviation.
std::vector<SummaryRow> summarize(const std::vector<MonteCarloRow>& rows);

struct WelchResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
};

/// Two-sided Welch test. Throws std::invalid_argument with fewer than two
/// samples per side or zero variance on both sides.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr const char* kMetricsHeader = "config,seed,mission_time,tracked_ratio,mean_tracking_time,mean_traveled";
std::string metrics_to_csv(const std::vector<MonteCarloRow>& rows);
std::vector<MonteCarloRow> metrics_from_csv(std::string_view text);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

/// Writes trace.jsonl and metrics.csv into `out_dir`, creating it if needed.
void export_run(const Trace& trace, const std::vector<MonteCarloRow>& rows, const std::filesystem::path& out_dir);

/// Parses "1..20" or "3,5,8" into seeds.
std::vector<std::uint64_t> parse_seeds(const std::string& spec);

}  // namespace sat
