#include "sat/kernels.hpp"

#include "sat/belief.hpp"

#include <cmath>

namespace sat::kernels {

namespace {

inline void decay_cell(double& p, double p_last, double seen, const DecayArgs& a) {
  if (seen < 0.0 || seen >= a.t) return;
  if (p_last < 0.5 && !a.allow_low) return;
  p = 0.5 + (p_last - 0.5) * std::exp(-a.rate * (a.t - seen));
}

inline double fuse_cell(std::span<const FuseSource> sources, std::size_t i) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : sources) {
    if (s.last_seen[i] < 0.0) continue;
    num += s.weight * s.p[i];
    den += s.weight;
  }
  return den > 0.0 ? num / den : 0.5;
}

inline double row_entropy(std::span<const double> p, const GridMap& map, int row) {
  double sum = 0.0;
  const std::size_t base = static_cast<std::size_t>(row) * static_cast<std::size_t>(map.width());
  for (int c = 0; c < map.width(); ++c) {
    const std::size_t i = base + static_cast<std::size_t>(c);
    if (!map.obstacle(i)) sum += cell_entropy(p[i]);
  }
  return sum;
}

}  // namespace

namespace serial {

void decay(std::span<double> p, std::span<const double> p_last, std::span<const double> last_seen,
           const DecayArgs& args) {
  for (std::size_t i = 0; i < p.size(); ++i) decay_cell(p[i], p_last[i], last_seen[i], args);
}

void fuse(std::span<const FuseSource> sources, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fuse_cell(sources, i);
}

double entropy(std::span<const double> p, const GridMap& map) {
  double total = 0.0;
  for (int r = 0; r < map.height(); ++r) total += row_entropy(p, map, r);
  return total;
}

}  // namespace serial

namespace omp {

void decay(std::span<double> p, std::span<const double> p_last, std::span<const double> last_seen,
           const DecayArgs& args) {
  const auto n = static_cast<std::ptrdiff_t>(p.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    decay_cell(p[k], p_last[k], last_seen[k], args);
  }
}

void fuse(std::span<const FuseSource> sources, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fuse_cell(sources, static_cast<std::size_t>(i));
}

double entropy(std::span<const double> p, const GridMap& map) {
  std::vector<double> rows(static_cast<std::size_t>(map.height()), 0.0);
  const int h = map.height();
#pragma omp parallel for schedule(static) if (map.size() > 4096)
  for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = row_entropy(p, map, r);
  double total = 0.0;
  for (double v : rows) total += v;
  return total;
}

}  // namespace omp

}  // namespace sat::kernels
