#pragma once

#include "sat/config.hpp"
#include "sat/coordination.hpp"
#include "sat/planning.hpp"
#include "sat/rng.hpp"
#include "sat/world.hpp"

#include <optional>
#include <vector>

namespace sat {

/// Goal a random walker keeps until it gets there.
struct RandomWalkMemory {
  std::optional<Pose> goal;
};

/// Tracks head for the last measurement of the focus target; otherwise a
/// uniformly random frontier centroid is kept until reached. No frontiers
/// and no tracks means staying put.
AgentAction random_walk_step(const AgentContext& ctx, const std::vector<Frontier>& frontiers, RandomWalkMemory& memory,
                             Rng& rng);

/// The full per-agent pipeline without HQ, reports or the learned predictor.
AgentAction independent_step(const AgentContext& ctx, const GridMap& map, const PlannerSettings& settings, double t);

/// Turns an HQ into the centralized baseline: no belief decay, no reports,
/// search scored by exploration only.
void configure_central_kf(HQState& hq);

/// Owner agent per cell (nearest start, ties to the lowest id); -1 on obstacles.
std::vector<int> voronoi_partition(const GridMap& map, const std::vector<Vec2>& starts);

/// Serpentine coverage of `region`: sweep rows spaced by the sensor range,
/// every region cell of a sweep row listed in travel order, then any cell the
/// sweep footprints missed appended greedily, with planned connectors wherever
/// consecutive points lack line of sight.
Path boustrophedon_path(const GridMap& map, const std::vector<std::size_t>& region, double range);

/// Cursor over a coverage path; wraps to the start once completed.
struct CoverageState {
  Path path;
  std::size_t next = 0;
  int sweeps = 0;
};

/// Coverage waypoint, or the first predicted position of the focus target.
AgentAction exhaustive_step(const AgentContext& ctx, CoverageState& coverage, double reach = 0.05);

/// Planar velocities for the swarm. `seen_target` is any member's current
/// target estimate.
std::vector<Vec2> swarm_velocities(const std::vector<Vec2>& positions, const std::optional<Vec2>& seen_target,
                                   double t, const SwarmGains& gains, double d_thre, double max_speed);

/// Next position of a swarm member after `horizon` seconds at velocity v,
/// kept inside the map.
Pose swarm_command(const GridMap& map, const Pose& pose, const Vec2& v, double horizon);

/// First point of the constant-velocity forecast of a track.
Vec2 kf_follow_point(const AgentTrack& track);

}  // namespace sat
