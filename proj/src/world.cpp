#include "sat/world.hpp"

#include "sat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

namespace sat {

GridMap::GridMap(int width, int height, double resolution, std::vector<std::uint8_t> obstacle)
    : width_(width), height_(height), resolution_(resolution), obstacle_(std::move(obstacle)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("map dimensions must be positive");
  if (!(resolution > 0.0)) throw std::invalid_argument("map resolution must be positive");
  if (obstacle_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("obstacle vector does not match map dimensions");
  }
  free_count_ = static_cast<std::size_t>(std::count(obstacle_.begin(), obstacle_.end(), 0));
}

GridMap GridMap::open(int width, int height, double resolution) {
  return GridMap(width, height, resolution,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0));
}

std::optional<Cell> GridMap::cell_of(double x, double y) const {
  if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
  const double gx = std::floor(x / resolution_);
  const double gy = std::floor(y / resolution_);
  if (gx < 0 || gy < 0 || gx >= width_ || gy >= height_) return std::nullopt;
  return Cell{height_ - 1 - static_cast<int>(gy), static_cast<int>(gx)};
}

Vec2 GridMap::center(const Cell& c) const {
  return {(c.col + 0.5) * resolution_, (height_ - 1 - c.row + 0.5) * resolution_};
}

GridMap parse_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw ParseError("map: missing header");
  std::istringstream hs(header);
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  if (!(hs >> width >> height >> resolution) || width <= 0 || height <= 0 || !(resolution > 0.0)) {
    throw ParseError("map: malformed header '" + header + "'");
  }
  std::string extra;
  if (hs >> extra) throw ParseError("map: trailing tokens in header");

  std::vector<std::uint8_t> obstacle;
  obstacle.reserve(static_cast<std::size_t>(width) * height);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && rows == height) continue;
    if (rows == height) throw ParseError("map: more rows than header height");
    if (static_cast<int>(line.size()) != width) {
      throw ParseError("map: row " + std::to_string(rows) + " has length " +
                       std::to_string(line.size()) + ", expected " + std::to_string(width));
    }
    for (char ch : line) {
      if (ch == '.') {
        obstacle.push_back(0);
      } else if (ch == '#') {
        obstacle.push_back(1);
      } else {
        throw ParseError(std::string("map: invalid character '") + ch + "'");
      }
    }
    ++rows;
  }
  if (rows != height) {
    throw ParseError("map: found " + std::to_string(rows) + " rows, expected " + std::to_string(height));
  }
  return GridMap(width, height, resolution, std::move(obstacle));
}

GridMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("map: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_map(ss.str());
}

std::string format_map(const GridMap& map) {
  std::ostringstream out;
  out << map.width() << ' ' << map.height() << ' ' << map.resolution() << '\n';
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) out << (map.free({r, c}) ? '.' : '#');
    out << '\n';
  }
  return out.str();
}

bool is_free(const GridMap& map, const Vec2& p) {
  const auto c = map.cell_of(p);
  return c && map.free(*c);
}

bool is_free(const GridMap& map, const Pose& p) { return is_free(map, p.xy()); }

namespace {

// Amanatides-Woo traversal in grid units (x right, y up). `visit(col, row_from_bottom)`
// returns false to stop early. Exact corner crossings visit both side cells.
template <typename Visit>
void walk(const GridMap& map, Vec2 a, Vec2 b, Visit&& visit) {
  if (std::tie(b.x(), b.y()) < std::tie(a.x(), a.y())) std::swap(a, b);
  const double res = map.resolution();
  const double x0 = a.x() / res;
  const double y0 = a.y() / res;
  const double x1 = b.x() / res;
  const double y1 = b.y() / res;
  long ix = static_cast<long>(std::floor(x0));
  long iy = static_cast<long>(std::floor(y0));
  const long ex = static_cast<long>(std::floor(x1));
  const long ey = static_cast<long>(std::floor(y1));
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const long sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const long sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double t_dx = sx != 0 ? 1.0 / std::abs(dx) : inf;
  const double t_dy = sy != 0 ? 1.0 / std::abs(dy) : inf;
  double t_x = sx > 0 ? (ix + 1 - x0) / dx : (sx < 0 ? (x0 - ix) / -dx : inf);
  double t_y = sy > 0 ? (iy + 1 - y0) / dy : (sy < 0 ? (y0 - iy) / -dy : inf);

  const long max_steps = std::abs(ex - ix) + std::abs(ey - iy) + 4;
  for (long step = 0; step <= max_steps; ++step) {
    if (!visit(ix, iy)) return;
    if (ix == ex && iy == ey) return;
    const double t_next = std::min(t_x, t_y);
    if (t_next > 1.0) return;
    if (std::abs(t_x - t_y) < 1e-12) {
      if (!visit(ix + sx, iy)) return;
      if (!visit(ix, iy + sy)) return;
      ix += sx;
      iy += sy;
      t_x += t_dx;
      t_y += t_dy;
    } else if (t_x < t_y) {
      ix += sx;
      t_x += t_dx;
    } else {
      iy += sy;
      t_y += t_dy;
    }
  }
}

}  // namespace

bool line_of_sight(const GridMap& map, const Vec2& a, const Vec2& b) {
  bool clear = true;
  walk(map, a, b, [&](long col, long rowb) {
    if (col < 0 || rowb < 0 || col >= map.width() || rowb >= map.height()) {
      clear = false;
      return false;
    }
    const Cell c{map.height() - 1 - static_cast<int>(rowb), static_cast<int>(col)};
    if (!map.free(c)) {
      clear = false;
      return false;
    }
    return true;
  });
  return clear;
}

std::vector<Cell> traverse(const GridMap& map, const Vec2& a, const Vec2& b) {
  std::vector<Cell> cells;
  walk(map, a, b, [&](long col, long rowb) {
    if (col >= 0 && rowb >= 0 && col < map.width() && rowb < map.height()) {
      cells.push_back({map.height() - 1 - static_cast<int>(rowb), static_cast<int>(col)});
    }
    return true;
  });
  return cells;
}

namespace {

struct Step {
  int dr;
  int dc;
  double cost;
};

constexpr Step kSteps[8] = {{-1, 0, 1.0},          {0, -1, 1.0},          {0, 1, 1.0},
                            {1, 0, 1.0},           {-1, -1, kDiagonalCost}, {-1, 1, kDiagonalCost},
                            {1, -1, kDiagonalCost}, {1, 1, kDiagonalCost}};

template <typename Fn>
void for_each_neighbor(const GridMap& map, const Cell& c, Fn&& fn) {
  for (const auto& s : kSteps) {
    const Cell n{c.row + s.dr, c.col + s.dc};
    if (!map.free(n)) continue;
    if (s.dr != 0 && s.dc != 0) {
      if (!map.free({c.row + s.dr, c.col}) || !map.free({c.row, c.col + s.dc})) continue;
    }
    fn(n, s.cost * map.resolution());
  }
}

double octile(const Cell& a, const Cell& b, double res) {
  const double dr = std::abs(a.row - b.row);
  const double dc = std::abs(a.col - b.col);
  return res * (std::max(dr, dc) + (kDiagonalCost - 1.0) * std::min(dr, dc));
}

Path make_path(const GridMap& map, const std::vector<std::size_t>& cells, double length) {
  Path path;
  path.length = length;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0 && i + 1 < cells.size()) {
      const Cell p = map.cell(cells[i - 1]);
      const Cell c = map.cell(cells[i]);
      const Cell n = map.cell(cells[i + 1]);
      if (c.row - p.row == n.row - c.row && c.col - p.col == n.col - c.col) continue;
    }
    path.waypoints.push_back(Pose::at(map.center(cells[i])));
  }
  return path;
}

using QueueItem = std::pair<double, std::size_t>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

}  // namespace

Path plan_path(const GridMap& map, const Pose& start, const Pose& goal) {
  const auto sc = map.cell_of(start.x, start.y);
  const auto gc = map.cell_of(goal.x, goal.y);
  if (!sc || !gc || !map.free(*sc) || !map.free(*gc)) {
    throw NoPathError("plan_path: start or goal not in free space");
  }
  const std::size_t s = map.index(*sc);
  const std::size_t g = map.index(*gc);
  if (s == g) return Path{{Pose::at(map.center(s))}, 0.0};

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(map.size(), inf);
  std::vector<std::int32_t> parent(map.size(), -1);
  std::vector<std::uint8_t> closed(map.size(), 0);
  MinQueue open;
  cost[s] = 0.0;
  open.push({octile(*sc, *gc, map.resolution()), s});
  while (!open.empty()) {
    const auto [f, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (idx == g) break;
    for_each_neighbor(map, map.cell(idx), [&](const Cell& n, double step) {
      const std::size_t ni = map.index(n);
      if (closed[ni]) return;
      const double c = cost[idx] + step;
      if (c < cost[ni]) {
        cost[ni] = c;
        parent[ni] = static_cast<std::int32_t>(idx);
        open.push({c + octile(n, *gc, map.resolution()), ni});
      }
    });
  }
  if (!closed[g]) throw NoPathError("plan_path: goal unreachable");

  std::vector<std::size_t> cells;
  for (std::int64_t i = static_cast<std::int64_t>(g); i >= 0; i = parent[static_cast<std::size_t>(i)]) {
    cells.push_back(static_cast<std::size_t>(i));
  }
  std::reverse(cells.begin(), cells.end());
  return make_path(map, cells, cost[g]);
}

DistanceField::DistanceField(const GridMap& map, const Cell& source)
    : map_(&map),
      source_(source),
      cost_(map.size(), std::numeric_limits<double>::infinity()),
      parent_(map.size(), -1) {
  if (!map.free(source)) return;
  const std::size_t s = map.index(source);
  std::vector<std::uint8_t> closed(map.size(), 0);
  MinQueue open;
  cost_[s] = 0.0;
  open.push({0.0, s});
  while (!open.empty()) {
    const auto [c0, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    for_each_neighbor(map, map.cell(idx), [&](const Cell& n, double step) {
      const std::size_t ni = map.index(n);
      if (closed[ni]) return;
      const double c = cost_[idx] + step;
      if (c < cost_[ni]) {
        cost_[ni] = c;
        parent_[ni] = static_cast<std::int32_t>(idx);
        open.push({c, ni});
      }
    });
  }
}

bool DistanceField::reachable(const Cell& c) const {
  return map_->in_bounds(c) && std::isfinite(cost_[map_->index(c)]);
}

double DistanceField::cost(const Cell& c) const {
  return map_->in_bounds(c) ? cost_[map_->index(c)] : std::numeric_limits<double>::infinity();
}

Path DistanceField::path_to(const Cell& goal) const {
  if (!reachable(goal)) throw NoPathError("distance field: goal unreachable");
  std::vector<std::size_t> cells;
  for (std::int64_t i = static_cast<std::int64_t>(map_->index(goal)); i >= 0;
       i = parent_[static_cast<std::size_t>(i)]) {
    cells.push_back(static_cast<std::size_t>(i));
  }
  std::reverse(cells.begin(), cells.end());
  return make_path(*map_, cells, cost_[map_->index(goal)]);
}

Route route_from_path(const Path& path, const Pose& goal, double resolution) {
  Route route;
  const auto& wp = path.waypoints;
  for (std::size_t i = 1; i < wp.size(); ++i) {
    const Vec2 a = wp[i - 1].xy();
    const Vec2 b = wp[i].xy();
    // Merged runs move one grid step per cell; re-expand to cell centers.
    const double span = std::max(std::abs(b.x() - a.x()), std::abs(b.y() - a.y()));
    const int n = std::max(1, static_cast<int>(std::lround(span / resolution)));
    for (int k = 1; k <= n; ++k) route.points.push_back(a + (b - a) * (static_cast<double>(k) / n));
  }
  if (route.points.empty() || (route.points.back() - goal.xy()).norm() > 1e-12) {
    route.points.push_back(goal.xy());
  }
  return route;
}

double follow_route(const GridMap& map, Pose& pose, Route& route, double budget) {
  constexpr std::size_t kLookahead = 30;
  double moved = 0.0;
  while (budget - moved > 1e-12 && !route.done()) {
    std::size_t best = route.points.size();
    const std::size_t end = std::min(route.points.size(), route.next + kLookahead);
    for (std::size_t k = route.next; k < end; ++k) {
      if (!line_of_sight(map, pose.xy(), route.points[k])) break;
      best = k;
    }
    if (best == route.points.size()) break;
    route.next = best;
    const Vec2 here = pose.xy();
    const Vec2 delta = route.points[best] - here;
    const double d = delta.norm();
    const double step = std::min(d, budget - moved);
    if (d > 0.0) {
      const Vec2 p = here + delta * (step / d);
      pose.x = p.x();
      pose.y = p.y();
      pose.heading = std::atan2(delta.y(), delta.x());
    }
    moved += step;
    if (step >= d - 1e-12) {
      pose.x = route.points[best].x();
      pose.y = route.points[best].y();
      route.next = best + 1;
    }
  }
  return moved;
}

}  // namespace sat
