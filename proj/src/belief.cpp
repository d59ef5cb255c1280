#include "sat/belief.hpp"

#include "sat/errors.hpp"
#include "sat/kernels.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sat {

OccupancyBelief::OccupancyBelief(const GridMap& map, int owner_id, double rate)
    : owner(owner_id),
      decay_rate(rate),
      p(map.size(), 0.5),
      p_last(map.size(), 0.5),
      last_seen(map.size(), kNever) {}

void OccupancyBelief::set_cell(std::size_t idx, double value, double t) {
  p[idx] = value;
  p_last[idx] = value;
  last_seen[idx] = t;
}

SharedOccupancyBelief SharedOccupancyBelief::from(const OccupancyBelief& b) {
  return SharedOccupancyBelief{b.p, {1.0}};
}

double bayes_positive(double p, double alpha, double beta) {
  const double num = (1.0 - alpha) * p;
  const double den = num + beta * (1.0 - p);
  return den > 0.0 ? num / den : p;
}

double bayes_negative(double p, double alpha, double beta) {
  const double num = alpha * p;
  const double den = num + (1.0 - beta) * (1.0 - p);
  return den > 0.0 ? num / den : p;
}

std::vector<std::size_t> footprint(const GridMap& map, const Pose& pose, double range) {
  std::vector<std::size_t> out;
  const double res = map.resolution();
  const int span = static_cast<int>(std::ceil(range / res)) + 1;
  const auto center = map.cell_of(std::clamp(pose.x, 0.0, map.width() * res - 1e-9),
                                  std::clamp(pose.y, 0.0, map.height() * res - 1e-9));
  if (!center) return out;
  const bool check_los = map.has_obstacles();
  const Vec2 origin = pose.xy();
  for (int r = center->row - span; r <= center->row + span; ++r) {
    for (int c = center->col - span; c <= center->col + span; ++c) {
      const Cell cell{r, c};
      if (!map.free(cell)) continue;
      const Vec2 mid = map.center(cell);
      if ((mid - origin).norm() > range) continue;
      if (check_los && !line_of_sight(map, origin, mid)) continue;
      out.push_back(map.index(cell));
    }
  }
  return out;
}

void observe_cells_inplace(OccupancyBelief& b, const Pose& agent_pose, const SensorModel& sensor,
                           const std::vector<Measurement>& detections, const GridMap& map, double t) {
  auto finish = [&](std::size_t i, double value) {
    if (b.clamp) value = std::clamp(value, *b.clamp, 1.0 - *b.clamp);
    b.set_cell(i, value, t);
  };
  std::vector<std::size_t> positive;
  for (const auto& z : detections) {
    const auto cell = map.cell_of(z.position.xy());
    if (cell && map.free(*cell)) positive.push_back(map.index(*cell));
  }
  std::sort(positive.begin(), positive.end());
  positive.erase(std::unique(positive.begin(), positive.end()), positive.end());
  for (std::size_t i : footprint(map, agent_pose, sensor.range)) {
    if (std::binary_search(positive.begin(), positive.end(), i)) continue;
    finish(i, bayes_negative(b.p[i], sensor.alpha, sensor.beta));
  }
  for (std::size_t i : positive) finish(i, bayes_positive(b.p[i], sensor.alpha, sensor.beta));
}

OccupancyBelief observe_cells(OccupancyBelief b, const Pose& agent_pose, const SensorModel& sensor,
                              const std::vector<Measurement>& detections, const GridMap& map, double t) {
  observe_cells_inplace(b, agent_pose, sensor, detections, map, t);
  return b;
}

void apply_time_decay_inplace(OccupancyBelief& b, double t, int num_detected, std::optional<int> num_total) {
  kernels::DecayArgs args;
  args.t = t;
  args.rate = b.decay_rate;
  args.allow_low = !num_total || num_detected < *num_total;
  kernels::omp::decay(b.p, b.p_last, b.last_seen, args);
}

OccupancyBelief apply_time_decay(OccupancyBelief b, double t, int num_detected, std::optional<int> num_total) {
  apply_time_decay_inplace(b, t, num_detected, num_total);
  return b;
}

SharedOccupancyBelief fuse_occupancy(const std::vector<std::pair<const OccupancyBelief*, double>>& beliefs) {
  if (beliefs.empty()) throw std::invalid_argument("fuse_occupancy: no sources");
  double total = 0.0;
  for (const auto& [b, trace] : beliefs) {
    if (trace < 0.0) throw std::invalid_argument("fuse_occupancy: negative trace");
    total += trace;
  }
  if (!(total > 0.0)) throw AllZeroTrust("fuse_occupancy: every source has zero trust");
  const std::size_t n = beliefs.front().first->size();
  SharedOccupancyBelief out;
  out.p.assign(n, 0.5);
  std::vector<kernels::FuseSource> sources;
  for (const auto& [b, trace] : beliefs) {
    if (b->size() != n) throw std::invalid_argument("fuse_occupancy: size mismatch");
    out.weights.push_back(trace / total);
    sources.push_back({b->p, b->last_seen, trace / total});
  }
  kernels::omp::fuse(sources, out.p);
  return out;
}

TrackEstimate kf_predict(TrackEstimate e, double dt, double q) {
  if (dt < 0.0) throw std::invalid_argument("kf_predict: negative dt");
  e.covariance += Mat2::Identity() * (q * dt);
  return e;
}

TrackEstimate kf_update(TrackEstimate e, const Vec2& z, const Mat2& r) {
  const Mat2 s = e.covariance + r;
  const double det = s.determinant();
  if (!(std::abs(det) > 1e-300)) throw std::domain_error("kf_update: singular innovation covariance");
  const Mat2 k = e.covariance * s.inverse();
  e.mean += k * (z - e.mean);
  Mat2 p = (Mat2::Identity() - k) * e.covariance;
  e.covariance = 0.5 * (p + p.transpose());
  return e;
}

TrackEstimate kf_update(TrackEstimate e, const Measurement& z) {
  e = kf_update(std::move(e), z.position.xy(), z.covariance);
  e.last_update = z.time;
  return e;
}

double cell_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

double map_entropy(std::span<const double> p, const GridMap& map) { return kernels::omp::entropy(p, map); }

double expected_posterior_entropy(double p, double alpha, double beta) {
  const double pz1 = (1.0 - alpha) * p + beta * (1.0 - p);
  const double pz0 = 1.0 - pz1;
  double h = 0.0;
  if (pz1 > 0.0) h += pz1 * cell_entropy(bayes_positive(p, alpha, beta));
  if (pz0 > 0.0) h += pz0 * cell_entropy(bayes_negative(p, alpha, beta));
  return h;
}

double gaussian_entropy(const Mat2& cov) {
  const double det = cov.determinant();
  if (!(cov(0, 0) > 0.0) || !(det > 0.0) || std::abs(cov(0, 1) - cov(1, 0)) > 1e-12) {
    throw std::invalid_argument("gaussian_entropy: covariance is not SPD");
  }
  const double c = 2.0 * std::numbers::pi * std::numbers::e;
  return 0.5 * std::log(c * c * det);
}

bool is_tracked(const TrackEstimate& e, double sigma_thre_trace) {
  return e.covariance.trace() <= sigma_thre_trace;
}

}  // namespace sat
