#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sat {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 xy() const { return {x, y}; }
  static Pose at(const Vec2& p) { return Pose{p.x(), p.y(), 0.0}; }
};

inline double distance(const Pose& a, const Pose& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Row 0 is the top of the map (largest y).
struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

/// Static occupancy of a known environment. Immutable after construction.
/// Cell (row, col) spans x in [col*res, (col+1)*res) and
/// y in [(height-1-row)*res, (height-row)*res).
class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height, double resolution, std::vector<std::uint8_t> obstacle);

  static GridMap open(int width, int height, double resolution = 1.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  std::size_t size() const { return obstacle_.size(); }
  std::size_t free_count() const { return free_count_; }
  bool has_obstacles() const { return free_count_ != obstacle_.size(); }

  bool in_bounds(const Cell& c) const {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  std::size_t index(const Cell& c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }
  Cell cell(std::size_t idx) const {
    return {static_cast<int>(idx / static_cast<std::size_t>(width_)),
            static_cast<int>(idx % static_cast<std::size_t>(width_))};
  }
  bool obstacle(std::size_t idx) const { return obstacle_[idx] != 0; }
  bool free(const Cell& c) const { return in_bounds(c) && obstacle_[index(c)] == 0; }

  std::optional<Cell> cell_of(double x, double y) const;
  std::optional<Cell> cell_of(const Vec2& p) const { return cell_of(p.x(), p.y()); }
  Vec2 center(const Cell& c) const;
  Vec2 center(std::size_t idx) const { return center(cell(idx)); }

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  std::vector<std::uint8_t> obstacle_;
  std::size_t free_count_ = 0;
};

struct Path {
  std::vector<Pose> waypoints;
  double length = 0.0;
};

/// Parses the ASCII map format: a `width height resolution` header followed
/// by `height` rows of `width` characters from {'.', '#'}.
GridMap parse_map(std::string_view text);
GridMap load_map(const std::filesystem::path& path);
std::string format_map(const GridMap& map);

bool is_free(const GridMap& map, const Pose& p);
bool is_free(const GridMap& map, const Vec2& p);

/// Grid ray traversal; true iff every cell the segment touches is free.
/// Symmetric in its arguments.
bool line_of_sight(const GridMap& map, const Vec2& a, const Vec2& b);
inline bool line_of_sight(const GridMap& map, const Pose& a, const Pose& b) {
  return line_of_sight(map, a.xy(), b.xy());
}

/// Cells touched by the segment a->b in traversal order (out-of-bounds cells
/// are skipped).
std::vector<Cell> traverse(const GridMap& map, const Vec2& a, const Vec2& b);

/// 8-connected step cost in cells; diagonal moves may not cut obstacle corners.
inline constexpr double kDiagonalCost = 1.4142135623730951;

/// Minimum-cost 8-connected path (A*, octile heuristic, lowest-index
/// tie-breaking). Waypoints are cell centers with collinear runs merged.
/// Throws NoPathError when the goal is unreachable.
Path plan_path(const GridMap& map, const Pose& start, const Pose& goal);

/// Single-source Dijkstra over the whole grid. Used when one agent needs paths
/// to many goals within the same planning cycle.
class DistanceField {
 public:
  DistanceField(const GridMap& map, const Cell& source);

  bool reachable(const Cell& c) const;
  /// Grid-optimal cost in meters.
  double cost(const Cell& c) const;
  Path path_to(const Cell& goal) const;

 private:
  const GridMap* map_;
  Cell source_;
  std::vector<double> cost_;
  std::vector<std::int32_t> parent_;
};

/// Polyline the mover steers along. `next` indexes the first point not yet
/// reached.
struct Route {
  std::vector<Vec2> points;
  std::size_t next = 0;

  bool done() const { return next >= points.size(); }
};

/// Expands a planned path into per-cell steering points ending exactly at `goal`.
Route route_from_path(const Path& path, const Pose& goal, double resolution);

/// Moves `pose` along `route` by at most `budget` meters, cutting corners only
/// where the straight segment is obstacle-free. Returns the distance moved.
double follow_route(const GridMap& map, Pose& pose, Route& route, double budget);

}  // namespace sat
