#pragma once

#include "sat/entities.hpp"
#include "sat/world.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sat {

/// Marker stored in last_seen for cells no sensor has covered yet.
inline constexpr double kNever = -1.0;

/// Per-source Bernoulli belief of target presence, one entry per map cell.
/// Obstacle cells stay at 0.5 and are never updated.
struct OccupancyBelief {
  int owner = 0;
  double decay_rate = 1.0 / 90.0;
  /// Optional floor/ceiling on updated probabilities (eps keeps p in
  /// [eps, 1-eps]); unset means exact Bayes.
  std::optional<double> clamp;
  std::vector<double> p;
  std::vector<double> p_last;
  std::vector<double> last_seen;

  OccupancyBelief() = default;
  OccupancyBelief(const GridMap& map, int owner, double decay_rate = 1.0 / 90.0);

  std::size_t size() const { return p.size(); }
  bool observed(std::size_t idx) const { return last_seen[idx] >= 0.0; }
  /// Overwrites one cell as if it had been observed with value `value` at `t`.
  void set_cell(std::size_t idx, double value, double t);
};

/// Fused belief handed to planners. `weights` follow source order.
struct SharedOccupancyBelief {
  std::vector<double> p;
  std::vector<double> weights;

  static SharedOccupancyBelief from(const OccupancyBelief& b);
};

struct TrackEstimate {
  int target_id = 0;
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
  double last_update = 0.0;
  double monitoring_time = 0.0;
  bool cleared = false;
};

struct ReportEstimate {
  int target_id = 0;
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
  int reporter_id = 0;
  double time = 0.0;
};

/// Posterior after a positive (detection) or negative reading of one cell.
double bayes_positive(double p, double alpha, double beta);
double bayes_negative(double p, double alpha, double beta);

/// Marks every free cell inside the sensor footprint as seen at `t` and
/// applies the Bayes update, positive where a detection falls.
OccupancyBelief observe_cells(OccupancyBelief b, const Pose& agent_pose, const SensorModel& sensor,
                              const std::vector<Measurement>& detections, const GridMap& map, double t);
/// In-place form used by the simulation loop.
void observe_cells_inplace(OccupancyBelief& b, const Pose& agent_pose, const SensorModel& sensor,
                           const std::vector<Measurement>& detections, const GridMap& map, double t);

/// Free cells within range and line of sight of `pose`, in index order.
std::vector<std::size_t> footprint(const GridMap& map, const Pose& pose, double range);

/// Relaxes every observed cell not seen at `t` toward 0.5. Cells below 0.5
/// relax only while some targets remain undetected (or the total is unknown).
OccupancyBelief apply_time_decay(OccupancyBelief b, double t, int num_detected,
                                 std::optional<int> num_total);
void apply_time_decay_inplace(OccupancyBelief& b, double t, int num_detected, std::optional<int> num_total);

/// Trust-weighted average. Weights are trace_i / sum(trace). Each cell is
/// averaged over the sources that have observed it; cells nobody has seen
/// stay at 0.5. Throws AllZeroTrust when every trace is zero.
SharedOccupancyBelief fuse_occupancy(const std::vector<std::pair<const OccupancyBelief*, double>>& beliefs);

TrackEstimate kf_predict(TrackEstimate e, double dt, double q);
TrackEstimate kf_update(TrackEstimate e, const Measurement& z);
TrackEstimate kf_update(TrackEstimate e, const Vec2& z, const Mat2& r);

/// Binary entropy in bits with 0 log 0 = 0.
double cell_entropy(double p);
/// Sum of cell_entropy over free cells.
double map_entropy(std::span<const double> p, const GridMap& map);
inline double map_entropy(const OccupancyBelief& b, const GridMap& map) { return map_entropy(b.p, map); }

/// Mean posterior entropy over both outcomes of one (alpha, beta) reading.
double expected_posterior_entropy(double p, double alpha, double beta);

/// Differential entropy (nats) of a 2-D Gaussian. Throws on non-SPD input.
double gaussian_entropy(const Mat2& cov);

bool is_tracked(const TrackEstimate& e, double sigma_thre_trace);

}  // namespace sat
