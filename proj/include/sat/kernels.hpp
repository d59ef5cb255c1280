#pragma once

#include "sat/world.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Grid-wide data-parallel kernels. Each has a serial reference and an OpenMP
// variant that parallelizes over cells only, so both produce identical bits.
namespace sat::kernels {

struct DecayArgs {
  double t = 0.0;
  double rate = 0.0;
  bool allow_low = true;
};

struct FuseSource {
  std::span<const double> p;
  std::span<const double> last_seen;
  double weight = 0.0;
};

namespace serial {
void decay(std::span<double> p, std::span<const double> p_last, std::span<const double> last_seen,
           const DecayArgs& args);
void fuse(std::span<const FuseSource> sources, std::span<double> out);
double entropy(std::span<const double> p, const GridMap& map);
}  // namespace serial

namespace omp {
void decay(std::span<double> p, std::span<const double> p_last, std::span<const double> last_seen,
           const DecayArgs& args);
void fuse(std::span<const FuseSource> sources, std::span<double> out);
/// Row partial sums are computed in parallel and added in row order.
double entropy(std::span<const double> p, const GridMap& map);
}  // namespace omp

}  // namespace sat::kernels
