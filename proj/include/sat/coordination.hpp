#pragma once

#include "sat/belief.hpp"
#include "sat/entities.hpp"
#include "sat/planning.hpp"
#include "sat/prediction.hpp"
#include "sat/rng.hpp"
#include "sat/world.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace sat {

// ---------------------------------------------------------------------------
// Agent-side state

/// One agent's own estimate of a detected target.
struct AgentTrack {
  TrackEstimate estimate;
  /// Filtered positions at the sensing rate, newest last, at most kInputLen.
  Window history;
  double first_detected = 0.0;
  double last_measured = 0.0;
  Vec2 last_measurement = Vec2::Zero();
};

/// Turns a track history into a 15-step forecast at kPredictDt.
struct Forecaster {
  std::shared_ptr<const PredictorWeights> weights;
  bool use_lstm = false;

  Window forecast(const AgentTrack& track) const;
};

struct PlannerSettings {
  UtilityWeights weights;
  PlanParams params;
  double q = 0.04;
  Exec exec = Exec::Parallel;
};

enum class TaskKind { Search, Track };

struct Assignment {
  int agent_id = 0;
  TaskKind kind = TaskKind::Search;
  int target_id = -1;
  /// Index into the round's task list (search) or -1.
  int task = -1;
  CandidateTrajectory trajectory;
  double issued_at = 0.0;
  double utility = 0.0;
};

struct AgentContext {
  AgentState state;
  OccupancyBelief belief;
  std::map<int, AgentTrack> tracks;
  Pose command;
  /// Assignment delivered this planning tick, if any.
  std::optional<Assignment> assignment;
};

struct AgentAction {
  Pose command;
  Mode mode = Mode::Search;
  std::optional<int> target;
  std::optional<CandidateTrajectory> chosen;
  std::size_t n_candidates = 0;
  double score = 0.0;
  /// Search mode with nothing to do: no frontier reachable.
  bool idle = false;
  bool from_assignment = false;
};

/// The uncleared live track the agent should follow: its assigned target if
/// it still tracks it, otherwise the track with the smallest covariance trace.
std::optional<int> focus_target(const AgentContext& ctx);

/// Action without (or ignoring) HQ input: follow a delivered assignment if any,
/// otherwise plan on the agent's own belief. Tracking takes precedence over
/// search; with neither tracks nor frontiers the agent stays put.
AgentAction agent_independent_step(const AgentContext& ctx, const GridMap& map, const PlannerSettings& settings,
                                   const Forecaster& forecaster, double t);

// ---------------------------------------------------------------------------
// Messages

enum class Channel { AgentToHq, ReporterToHq, HqToAgent };
std::string channel_name(Channel c);

/// Periodic agent-to-HQ status carrying a belief snapshot and the agent's
/// forecasts of its detected targets.
struct AgentUpdate {
  int agent_id = 0;
  double time = 0.0;
  Pose pose;
  double max_speed = 0.4;
  SensorModel sensor;
  Mode mode = Mode::Search;
  std::shared_ptr<const OccupancyBelief> belief;
  /// Information trace used as the fusion trust weight.
  double info_trace = 0.0;
  std::vector<TargetForecast> forecasts;
  std::map<int, double> monitoring_time;
};

using Payload = std::variant<AgentUpdate, ReportEstimate, Assignment>;

struct Message {
  Channel channel = Channel::AgentToHq;
  int sender = 0;
  int receiver = 0;
  Payload payload;
  long sent_tick = 0;
  long due_tick = 0;
};

std::string payload_kind(const Payload& p);

struct MessageRecord {
  long tick = 0;
  Channel channel = Channel::AgentToHq;
  std::string kind;
  int sender = 0;
  int receiver = 0;
  bool dropped = false;
};

struct BusConfig {
  double p_cf = 0.0;
  double p_ef = 0.0;
  double p_hq = 0.0;
  int latency_ticks = 0;
};

/// Lossy fixed-latency bus. One FIFO queue, so per-channel send order is kept.
class MessageBus {
 public:
  explicit MessageBus(BusConfig cfg = {}) : cfg_(cfg) {}

  double failure_probability(Channel c) const;
  /// Draws exactly one uniform; drops with the channel's failure probability,
  /// otherwise enqueues for delivery latency_ticks later.
  bool deliver(Message msg, long tick, Rng& rng);
  /// Removes and returns due messages on `channel` (all receivers), in send order.
  std::vector<Message> collect(Channel channel, long tick);
  std::vector<Message> collect_for(Channel channel, int receiver, long tick);

  std::size_t pending() const { return queue_.size(); }
  const std::vector<MessageRecord>& records() const { return records_; }
  void clear_records() { records_.clear(); }

 private:
  BusConfig cfg_;
  std::deque<Message> queue_;
  std::vector<MessageRecord> records_;
};

// ---------------------------------------------------------------------------
// Headquarters

/// Per-detector information HQ ranks tracking work by.
struct DetectReport {
  int agent_id = 0;
  int target_id = 0;
  double trace = 0.0;
  double distance = 0.0;
  double monitoring_time = 0.0;
};

struct Bid {
  int agent_id = 0;
  TaskKind kind = TaskKind::Search;
  int task = -1;
  CandidateTrajectory trajectory;
  double utility = 0.0;
};

struct HQState {
  PlannerSettings settings;
  double hold_time = 5.0;
  double decay_rate = 1.0 / 90.0;
  bool time_varying = true;
  /// Whether third-party reports shape search priorities and bids.
  bool use_reports = true;
  /// Targets detected so far and the known total; decay of empty cells stops
  /// once both agree.
  int num_detected = 0;
  std::optional<int> num_total;

  std::map<int, AgentUpdate> agents;
  std::map<std::pair<int, int>, ReportEstimate> reports;
  std::set<int> cleared;
  /// Active assignment per agent.
  std::map<int, Assignment> ledger;
  /// Time and target of each agent's most recent tracking assignment.
  std::map<int, std::pair<double, int>> last_track_assignment;
  std::set<int> active;
  std::uint64_t operations = 0;
  /// Updates older than this (seconds) do not take part in a round.
  double freshness = 1.0;

  void receive(const AgentUpdate& u) { agents[u.agent_id] = u; }
  /// Keeps only the newest report per (reporter, target).
  void receive(const ReportEstimate& r);
  void mark_cleared(int target_id);

  /// Agents whose latest update is younger than `freshness`.
  std::vector<int> fresh_agents(double t) const;
  std::vector<DetectReport> detect_reports(double t) const;
  /// Fusion of every agent's latest belief, each first decayed to t.
  SharedOccupancyBelief shared_belief(double t) const;
  /// Newest reports of targets no fresh agent is tracking and HQ has not seen cleared.
  std::vector<ReportEstimate> open_reports(double t) const;
};

/// False while the agent holds a tracking assignment younger than hold_time
/// whose target is uncleared.
bool check_assign_available(const HQState& hq, int agent_id, double t);

/// Jointly normalizes the bids' raw scores, scores them with the mode's
/// weight, applies the terminal spread constraint (relaxed if it empties the
/// set) and returns the winner. Ties: utility, shorter path, lower agent id.
std::optional<std::size_t> get_best_bid(std::vector<Bid>& bids, Mode mode, const UtilityWeights& weights,
                                        const std::vector<Pose>& taken_terminals);

/// Expected covariance trace after one more second of prediction and a
/// simulated reading from `distance`.
double expected_post_trace(const Mat2& cov, const SensorModel& sensor, double distance, double q);

/// Greedy tracking auction. Targets go in ascending expected post-action
/// trace; each target's detectors bid; every agent wins at most one target.
std::vector<Assignment> hq_assign_tracking(HQState& hq, const GridMap& map, const SharedOccupancyBelief& shared,
                                           double t);

/// Search auction over `tasks` (frontiers plus report pseudo-tasks) for the
/// fresh agents not already in `hq.active`.
std::vector<Assignment> hq_assign_search(HQState& hq, const GridMap& map, const SharedOccupancyBelief& shared,
                                         const std::vector<Frontier>& tasks, double t,
                                         std::vector<Pose> taken_terminals);

/// Frontiers of the shared belief followed by one pseudo-task per open report.
std::vector<Frontier> search_tasks(const HQState& hq, const GridMap& map, const SharedOccupancyBelief& shared,
                                   double t);

/// A full planning round: tracking first, then search for the remaining agents.
std::vector<Assignment> hq_round(HQState& hq, const GridMap& map, double t);

}  // namespace sat
