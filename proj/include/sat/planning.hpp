#pragma once

#include "sat/belief.hpp"
#include "sat/entities.hpp"
#include "sat/prediction.hpp"
#include "sat/world.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sat {

struct Frontier {
  Pose centroid;
  std::vector<std::size_t> member_cells;
  std::size_t cluster_size = 0;
};

struct TimedPose {
  double t = 0.0;
  Pose pose;
};

struct CandidateTrajectory {
  /// Poses at dt, 2 dt, ..., horizon * dt after the planning instant.
  std::vector<TimedPose> poses;
  Pose terminal;
  /// Waypoint handed to step_agent when this candidate is chosen.
  Pose goal;
  double raw_explore = 0.0;
  double raw_exploit = 0.0;
  double j_explore = 0.0;
  double j_exploit = 0.0;
  bool feasible = true;
  /// Planned path length to `goal` (search) or rollout length (track).
  double path_length = 0.0;
  std::optional<std::size_t> frontier;
};

struct UtilityWeights {
  double w_search = 0.3;
  double w_track = 0.2;
  double d_thre = 3.5;
};

struct PlanParams {
  double dt = kPredictDt;
  int horizon = kOutputLen;
  int n_headings = 8;
  int n_speeds = 2;
  double unknown_band = 0.1;
  /// Frontier components larger than this are split into BFS-ordered chunks.
  std::size_t max_cluster_cells = 12;
  /// Keep only the nearest frontiers (by path length) as search candidates.
  std::optional<std::size_t> max_candidates;
};

/// Predicted positions of a tracked target at dt, 2 dt, ... (may be empty,
/// in which case the estimate mean is used for every step).
struct TargetForecast {
  TrackEstimate estimate;
  Window predicted;
};

/// A cell is a frontier iff it is free, p < 0.5 - band, and some free
/// 8-neighbour has |p - 0.5| <= band.
bool is_frontier_cell(std::span<const double> p, const GridMap& map, std::size_t idx, double band);

std::vector<Frontier> extract_frontiers(std::span<const double> p, const GridMap& map, double unknown_band = 0.1,
                                        std::size_t max_cluster_cells = 12);
inline std::vector<Frontier> extract_frontiers(const SharedOccupancyBelief& b, const GridMap& map,
                                               double unknown_band = 0.1, std::size_t max_cluster_cells = 12) {
  return extract_frontiers(b.p, map, unknown_band, max_cluster_cells);
}

/// One candidate per reachable frontier, ordered by path length then frontier index.
std::vector<CandidateTrajectory> gen_search_candidates(const AgentState& agent, const std::vector<Frontier>& frontiers,
                                                       const GridMap& map, const PlanParams& params = {});

/// Stay candidate first, then n_headings x n_speeds constant-velocity rollouts
/// with headings offset by the bearing to the predicted target. Rollouts that
/// hit an obstacle are discarded.
std::vector<CandidateTrajectory> gen_track_candidates(const AgentState& agent, const Window& predicted_target,
                                                      const GridMap& map, int n_headings, int n_speeds,
                                                      const PlanParams& params = {});

/// Per-cell expected entropy reduction of one reading; zero on obstacles.
std::vector<double> explore_gain_map(std::span<const double> p, const SensorModel& sensor, const GridMap& map);

/// Expected entropy reduction (bits) over the cells swept by the candidate's
/// footprint, each cell counted once.
double j_explore(std::span<const double> p, const CandidateTrajectory& tau, const SensorModel& sensor,
                 const GridMap& map);
double j_explore_with_gains(std::span<const double> gains, const CandidateTrajectory& tau, const SensorModel& sensor,
                            const GridMap& map);

/// Expected entropy reduction (nats) of target estimates at each target's
/// closest in-range approach. Reports are treated as static; q inflates their
/// covariance for their age plus the pose time. Cleared estimates add nothing.
double j_exploit(const std::vector<TargetForecast>& tracks, const std::vector<ReportEstimate>& reports,
                 const CandidateTrajectory& tau, const SensorModel& sensor, const GridMap& map, double q,
                 double now);

/// Gain of a single simulated reading at distance d from a target with
/// prior covariance `prior`.
double reading_gain(const Mat2& prior, const SensorModel& sensor, double d);

enum class Exec { Serial, Parallel };

struct ScoreInputs {
  std::span<const double> gains;
  const std::vector<TargetForecast>* tracks = nullptr;
  const std::vector<ReportEstimate>* reports = nullptr;
  double q = 0.04;
  double now = 0.0;
};

/// Fills raw_explore / raw_exploit on every candidate. The parallel variant
/// splits over candidates only and produces identical values.
void score_candidates(std::vector<CandidateTrajectory>& cands, const ScoreInputs& in, const SensorModel& sensor,
                      const GridMap& map, Exec exec = Exec::Parallel);

/// Divides raw scores by their per-set maxima (all zero when the max is zero).
void normalize_scores(std::vector<CandidateTrajectory>& cands);

/// Normalizes, drops candidates whose terminal is within d_thre of a teammate
/// terminal (unless that drops all), then returns the argmax of the weighted
/// utility with lowest-index ties.
std::size_t select_best(std::vector<CandidateTrajectory>& cands, Mode mode, const UtilityWeights& weights,
                        const std::vector<Pose>& teammate_terminals);

double utility(const CandidateTrajectory& c, Mode mode, const UtilityWeights& weights);

}  // namespace sat
