#include "sat/harness.hpp"

#include "sat/baselines.hpp"
#include "sat/belief.hpp"
#include "sat/coordination.hpp"
#include "sat/errors.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace sat {

using nlohmann::json;

void Trace::add(double t, std::string kind, json payload) {
  events.push_back(TraceEvent{t, events.size(), std::move(kind), std::move(payload)});
}

namespace {

constexpr double kEps = 1e-9;

json xy(const Vec2& v) { return json::array({v.x(), v.y()}); }

std::string mode_name(Mode m) { return m == Mode::Track ? "track" : "search"; }

struct MoveCache {
  std::optional<Pose> goal;
  Route route;
};

struct AgentRuntime {
  AgentContext ctx;
  MoveCache move;
  Rng sensing;
  Rng policy;
  RandomWalkMemory walk;
  CoverageState coverage;
  int idle_run = 0;
  bool replan = false;
};

class Episode {
 public:
  Episode(const ScenarioConfig& cfg, const EpisodeOptions& opt)
      : cfg_(cfg),
        opt_(opt),
        map_(*cfg.map),
        bus_(BusConfig{cfg.failures.p_cf, cfg.failures.p_ef, cfg.failures.p_hq, cfg.failures.latency_ticks}),
        bus_agent_rng_(Rng::derive(cfg.seed, Stream::BusAgent)),
        bus_reporter_rng_(Rng::derive(cfg.seed, Stream::BusReporter)),
        bus_hq_rng_(Rng::derive(cfg.seed, Stream::BusHq)) {
    trace_.seed = cfg.seed;
    trace_.policy = policy_name(cfg.policy);
    trace_.config = cfg.name;
    setup();
  }

  EpisodeResult run();

 private:
  bool uses_hq() const { return cfg_.policy == PolicyKind::Hybrid || cfg_.policy == PolicyKind::CentralKF; }
  bool decays() const { return cfg_.toggles.tv && cfg_.policy != PolicyKind::CentralKF; }

  void setup();
  void sense(double t);
  void check_clears(double t);
  void emit_reports(long tick, double t);
  void plan(long tick, double t, bool full_round);
  void act(AgentRuntime& rt, const AgentAction& action, double t);
  AgentAction policy_action(AgentRuntime& rt, double t, const std::vector<Vec2>& swarm_v, std::size_t index);
  void move_agents();
  void record_poses(double t);
  void record_messages(double t);
  void record_snapshot(double t);
  void set_mode(AgentRuntime& rt, Mode mode, double t);

  ScenarioConfig cfg_;
  EpisodeOptions opt_;
  const GridMap& map_;
  MessageBus bus_;
  Rng bus_agent_rng_;
  Rng bus_reporter_rng_;
  Rng bus_hq_rng_;

  std::vector<AgentRuntime> agents_;
  std::vector<TargetState> targets_;
  std::vector<Rng> target_rng_;
  std::vector<Reporter> reporters_;
  std::vector<Rng> reporter_rng_;
  HQState hq_;
  PlannerSettings settings_;
  Forecaster forecaster_;
  double q_ = 0.04;

  std::vector<std::optional<double>> first_seen_;
  std::optional<int> num_total_;
  std::vector<std::optional<double>> clear_time_;
  std::size_t n_cleared_ = 0;
  int max_idle_ = 0;
  std::size_t sent_ = 0;
  std::size_t dropped_ = 0;
  Trace trace_;
};

void Episode::setup() {
  const double res = map_.resolution();
  Rng layout = Rng::derive(cfg_.seed, Stream::Layout);
  std::vector<Vec2> placed;
  auto place = [&](const std::optional<Vec2>& given) {
    if (given) {
      placed.push_back(*given);
      return *given;
    }
    Vec2 p = sample_free_position(map_, layout);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const bool spaced = std::all_of(placed.begin(), placed.end(), [&](const Vec2& o) {
        return (o - p).norm() >= Defaults::min_spacing_cells * res;
      });
      if (spaced) break;
      p = sample_free_position(map_, layout);
    }
    placed.push_back(p);
    return p;
  };

  const int n_agents = static_cast<int>(cfg_.agents.size());
  Rng sensors_rng = Rng::derive(cfg_.seed, Stream::Sensors);
  const std::vector<SensorModel> sampled =
      cfg_.heterogeneous ? heterogeneous_sample(sensors_rng, n_agents) : std::vector<SensorModel>(n_agents, default_sensor());

  for (int i = 0; i < n_agents; ++i) {
    const AgentSpec& spec = cfg_.agents[static_cast<std::size_t>(i)];
    AgentRuntime rt{.ctx = {},
                    .move = {},
                    .sensing = Rng::derive(cfg_.seed, Stream::AgentSensing, static_cast<std::uint64_t>(i)),
                    .policy = Rng::derive(cfg_.seed, Stream::Policy, static_cast<std::uint64_t>(i)),
                    .walk = {},
                    .coverage = {},
                    .idle_run = 0,
                    .replan = false};
    AgentState& s = rt.ctx.state;
    s.id = i;
    s.pose = Pose::at(place(spec.position));
    s.max_speed = spec.max_speed.value_or(Defaults::agent_speed);
    s.sensor = spec.sensor.value_or(sampled[static_cast<std::size_t>(i)]);
    if (cfg_.failures.p_fp > 0.0) s.sensor.beta = cfg_.failures.p_fp;
    rt.ctx.belief = OccupancyBelief(map_, i, cfg_.decay_rate);
    rt.ctx.command = s.pose;
    agents_.push_back(std::move(rt));
  }

  double fastest = 0.0;
  for (std::size_t k = 0; k < cfg_.targets.size(); ++k) {
    const TargetSpec& spec = cfg_.targets[k];
    TargetState tg;
    tg.id = static_cast<int>(k);
    tg.max_speed = spec.stationary ? 0.0 : spec.max_speed.value_or(Defaults::target_speed);
    if (spec.trajectory) {
      TracePlayback pb;
      pb.samples = load_trajectory(*spec.trajectory);
      pb.loop = spec.loop;
      tg.pose = Pose{pb.samples.front().x, pb.samples.front().y, 0.0};
      placed.push_back(tg.pose.xy());
      tg.motion = std::move(pb);
    } else {
      tg.pose = Pose::at(place(spec.position));
    }
    fastest = std::max(fastest, tg.max_speed);
    targets_.push_back(std::move(tg));
    target_rng_.push_back(Rng::derive(cfg_.seed, Stream::Target, k));
  }
  first_seen_.assign(targets_.size(), std::nullopt);
  if (cfg_.known_target_count) num_total_ = static_cast<int>(targets_.size());
  clear_time_.assign(targets_.size(), std::nullopt);
  // Random-walk process noise matching the target speed bound.
  q_ = fastest * fastest;

  Rng reporter_setup = Rng::derive(cfg_.seed, Stream::Reporter, 1u << 20);
  std::vector<ReporterSpec> specs = cfg_.reporters;
  if (specs.empty()) specs.resize(2);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Reporter r;
    r.id = static_cast<int>(i);
    r.sigma_report = specs[i].sigma_report.value_or(
        reporter_setup.uniform(Defaults::sigma_report_min, Defaults::sigma_report_max));
    r.report_period = specs[i].report_period.value_or(Defaults::report_period);
    if (specs[i].observed_targets) {
      r.observed_targets = *specs[i].observed_targets;
    } else {
      for (std::size_t k = 0; k < targets_.size(); ++k) {
        if (k % specs.size() == i) r.observed_targets.push_back(static_cast<int>(k));
      }
    }
    reporters_.push_back(std::move(r));
    reporter_rng_.push_back(Rng::derive(cfg_.seed, Stream::Reporter, i));
  }

  settings_.weights = cfg_.weights;
  settings_.params.n_headings = cfg_.n_headings;
  settings_.params.n_speeds = cfg_.n_speeds;
  settings_.params.unknown_band = cfg_.unknown_band;
  settings_.params.max_candidates = cfg_.max_search_candidates;
  settings_.q = q_;
  settings_.exec = opt_.exec;

  hq_.settings = settings_;
  hq_.hold_time = cfg_.hold_time;
  hq_.decay_rate = cfg_.decay_rate;
  hq_.time_varying = cfg_.toggles.tv;
  hq_.num_total = num_total_;
  hq_.use_reports = cfg_.toggles.tr;
  hq_.freshness = cfg_.plan_period;
  if (cfg_.policy == PolicyKind::CentralKF) configure_central_kf(hq_);

  forecaster_.weights = cfg_.predictor;
  forecaster_.use_lstm = cfg_.policy == PolicyKind::Hybrid && cfg_.toggles.lstm && cfg_.predictor != nullptr;

  if (cfg_.policy == PolicyKind::Exhaustive) {
    std::vector<Vec2> starts;
    for (const auto& a : agents_) starts.push_back(a.ctx.state.pose.xy());
    const auto owner = voronoi_partition(map_, starts);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      std::vector<std::size_t> region;
      for (std::size_t c = 0; c < map_.size(); ++c) {
        if (owner[c] == static_cast<int>(i)) region.push_back(c);
      }
      agents_[i].coverage.path = boustrophedon_path(map_, region, agents_[i].ctx.state.sensor.range);
    }
  }
}

void Episode::set_mode(AgentRuntime& rt, Mode mode, double t) {
  AgentState& s = rt.ctx.state;
  if (s.mode == mode) return;
  s.mode = mode;
  if (opt_.record_trace) trace_.add(t, "mode-switch", {{"agent", s.id}, {"mode", mode_name(mode)}});
}

void Episode::sense(double t) {
  for (auto& rt : agents_) {
    AgentContext& ctx = rt.ctx;
    const AgentState& s = ctx.state;
    std::vector<Measurement> dets;
    for (const auto& tg : targets_) {
      if (tg.cleared) continue;
      if (!sense_detect(s.sensor, s.pose, tg, map_, rt.sensing)) continue;
      if (target_visible(s.sensor, s.pose, tg.pose.xy(), map_)) {
        dets.push_back(sense_locate(s.sensor, s.pose, tg, rt.sensing, t, s.id));
      } else {
        dets.push_back(sense_false_positive(s.sensor, s.pose, map_, rt.sensing, t, s.id));
      }
    }
    observe_cells_inplace(ctx.belief, s.pose, s.sensor, dets, map_, t);

    for (auto& [id, tr] : ctx.tracks) {
      if (tr.estimate.last_update < t - kEps) tr.estimate = kf_predict(tr.estimate, cfg_.dt, q_);
    }
    for (const auto& m : dets) {
      if (opt_.record_trace) {
        trace_.add(t, "detection", {{"agent", s.id}, {"target", m.target_id}, {"z", xy(m.position.xy())}});
      }
      // False positives only touch the occupancy belief.
      if (m.target_id == kFalsePositiveId) continue;
      const auto k = static_cast<std::size_t>(m.target_id);
      if (!first_seen_[k]) first_seen_[k] = t;
      auto it = ctx.tracks.find(m.target_id);
      if (it == ctx.tracks.end()) {
        AgentTrack tr;
        tr.estimate.target_id = m.target_id;
        tr.estimate.mean = m.position.xy();
        tr.estimate.covariance = 4.0 * m.covariance;
        tr.estimate.last_update = t;
        tr.first_detected = t;
        it = ctx.tracks.emplace(m.target_id, std::move(tr)).first;
        if (ctx.state.mode == Mode::Search) {
          set_mode(rt, Mode::Track, t);
          rt.replan = true;
        }
      } else {
        it->second.estimate = kf_update(it->second.estimate, m);
      }
      AgentTrack& tr = it->second;
      tr.last_measured = t;
      tr.last_measurement = m.position.xy();
      if (opt_.record_trace) {
        trace_.add(t, "measurement",
                   {{"agent", s.id}, {"target", m.target_id}, {"mean", xy(tr.estimate.mean)},
                    {"trace", tr.estimate.covariance.trace()}});
      }
    }
    for (auto it = ctx.tracks.begin(); it != ctx.tracks.end();) {
      AgentTrack& tr = it->second;
      if (t - tr.last_measured > cfg_.track_timeout + kEps) {
        if (ctx.state.assigned_target == it->first) ctx.state.assigned_target.reset();
        it = ctx.tracks.erase(it);
        continue;
      }
      tr.estimate.monitoring_time = t - tr.first_detected;
      tr.history.push_back(tr.estimate.mean);
      if (tr.history.size() > static_cast<std::size_t>(kInputLen)) tr.history.erase(tr.history.begin());
      ++it;
    }
    if (ctx.tracks.empty() && ctx.state.mode == Mode::Track) {
      set_mode(rt, Mode::Search, t);
      rt.replan = true;
    }
  }
}

void Episode::check_clears(double t) {
  for (auto& rt : agents_) {
    for (const auto& [id, tr] : rt.ctx.tracks) {
      const auto k = static_cast<std::size_t>(id);
      if (targets_[k].cleared || !is_tracked(tr.estimate, cfg_.trace_thre)) continue;
      targets_[k].cleared = true;
      clear_time_[k] = t;
      ++n_cleared_;
      hq_.mark_cleared(id);
      if (opt_.record_trace) {
        trace_.add(t, "clear", {{"target", id}, {"agent", rt.ctx.state.id}, {"trace", tr.estimate.covariance.trace()}});
      }
    }
  }
  // Cleared targets leave every agent's objectives.
  for (auto& rt : agents_) {
    auto& tracks = rt.ctx.tracks;
    for (auto it = tracks.begin(); it != tracks.end();) {
      if (targets_[static_cast<std::size_t>(it->first)].cleared) {
        if (rt.ctx.state.assigned_target == it->first) rt.ctx.state.assigned_target.reset();
        it = tracks.erase(it);
        rt.replan = true;
      } else {
        ++it;
      }
    }
    if (tracks.empty() && rt.ctx.state.mode == Mode::Track) set_mode(rt, Mode::Search, t);
  }
}

void Episode::emit_reports(long tick, double t) {
  for (std::size_t i = 0; i < reporters_.size(); ++i) {
    const Reporter& r = reporters_[i];
    if (!report_due(r, t, cfg_.dt)) continue;
    for (const auto& tg : targets_) {
      if (tg.cleared) continue;
      auto m = emit_report(r, tg, t, reporter_rng_[i]);
      if (!m) continue;
      ReportEstimate est{m->target_id, m->position.xy(), m->covariance, r.id, t};
      if (opt_.record_trace) {
        trace_.add(t, "report", {{"reporter", r.id}, {"target", est.target_id}, {"z", xy(est.mean)},
                                 {"sigma", r.sigma_report}});
      }
      if (uses_hq()) {
        Message msg;
        msg.channel = Channel::ReporterToHq;
        msg.sender = r.id;
        msg.receiver = -1;
        msg.payload = est;
        bus_.deliver(std::move(msg), tick, bus_reporter_rng_);
      }
    }
  }
}

AgentAction Episode::policy_action(AgentRuntime& rt, double t, const std::vector<Vec2>& swarm_v, std::size_t index) {
  AgentContext& ctx = rt.ctx;
  switch (cfg_.policy) {
    case PolicyKind::Hybrid:
    case PolicyKind::CentralKF:
      return agent_independent_step(ctx, map_, settings_, forecaster_, t);
    case PolicyKind::Independent:
      return independent_step(ctx, map_, settings_, t);
    case PolicyKind::RandomWalk: {
      const auto frontiers =
          extract_frontiers(ctx.belief.p, map_, settings_.params.unknown_band, settings_.params.max_cluster_cells);
      return random_walk_step(ctx, frontiers, rt.walk, rt.policy);
    }
    case PolicyKind::Exhaustive:
      return exhaustive_step(ctx, rt.coverage);
    case PolicyKind::Swarm: {
      AgentAction a;
      a.mode = focus_target(ctx) ? Mode::Track : Mode::Search;
      a.target = focus_target(ctx);
      a.command = swarm_command(map_, ctx.state.pose, swarm_v[index], cfg_.plan_period);
      return a;
    }
  }
  return {};
}

void Episode::act(AgentRuntime& rt, const AgentAction& action, double t) {
  AgentContext& ctx = rt.ctx;
  ctx.command = action.command;
  if (action.mode == Mode::Track && action.target) {
    ctx.state.assigned_target = action.target;
  } else if (action.mode == Mode::Search) {
    ctx.state.assigned_target.reset();
  }
  set_mode(rt, action.mode, t);

  const bool idle = action.mode == Mode::Search &&
                    (action.idle || distance(action.command, ctx.state.pose) < kEps);
  bool frontiers_exist = false;
  if (idle) {
    frontiers_exist = !extract_frontiers(ctx.belief.p, map_, settings_.params.unknown_band,
                                         settings_.params.max_cluster_cells)
                           .empty();
  }
  rt.idle_run = idle && frontiers_exist ? rt.idle_run + 1 : 0;
  max_idle_ = std::max(max_idle_, rt.idle_run);

  if (opt_.record_trace) {
    trace_.add(t, "plan", {{"agent", ctx.state.id},
                           {"mode", mode_name(action.mode)},
                           {"target", action.target ? *action.target : -1},
                           {"command", xy(action.command.xy())},
                           {"candidates", action.n_candidates},
                           {"score", action.score},
                           {"assigned", action.from_assignment},
                           {"idle", idle}});
  }
}

void Episode::plan(long tick, double t, bool full_round) {
  std::vector<std::optional<Assignment>> delivered(agents_.size());

  if (full_round && uses_hq()) {
    for (auto& rt : agents_) {
      const AgentContext& ctx = rt.ctx;
      AgentUpdate u;
      u.agent_id = ctx.state.id;
      u.time = t;
      u.pose = ctx.state.pose;
      u.max_speed = ctx.state.max_speed;
      u.sensor = ctx.state.sensor;
      u.mode = ctx.state.mode;
      u.belief = std::make_shared<const OccupancyBelief>(ctx.belief);
      u.info_trace = 2.0 / (ctx.state.sensor.sigma_near * ctx.state.sensor.sigma_near);
      for (const auto& [id, tr] : ctx.tracks) {
        u.forecasts.push_back(TargetForecast{tr.estimate, forecaster_.forecast(tr)});
        u.monitoring_time[id] = tr.estimate.monitoring_time;
      }
      Message msg;
      msg.channel = Channel::AgentToHq;
      msg.sender = u.agent_id;
      msg.receiver = -1;
      msg.payload = std::move(u);
      bus_.deliver(std::move(msg), tick, bus_agent_rng_);
    }
    for (auto& m : bus_.collect(Channel::AgentToHq, tick)) hq_.receive(std::get<AgentUpdate>(m.payload));
    for (auto& m : bus_.collect(Channel::ReporterToHq, tick)) hq_.receive(std::get<ReportEstimate>(m.payload));

    const auto assignments = hq_round(hq_, map_, t);
    for (const auto& a : assignments) {
      if (opt_.record_trace) {
        trace_.add(t, "assignment", {{"agent", a.agent_id},
                                     {"kind", a.kind == TaskKind::Track ? "track" : "search"},
                                     {"target", a.target_id},
                                     {"task", a.task},
                                     {"goal", xy(a.trajectory.goal.xy())},
                                     {"utility", a.utility},
                                     {"issued_at", a.issued_at}});
      }
      Message msg;
      msg.channel = Channel::HqToAgent;
      msg.sender = -1;
      msg.receiver = a.agent_id;
      msg.payload = a;
      bus_.deliver(std::move(msg), tick, bus_hq_rng_);
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      for (auto& m : bus_.collect_for(Channel::HqToAgent, static_cast<int>(i), tick)) {
        delivered[i] = std::get<Assignment>(m.payload);
      }
    }
  }

  std::optional<Vec2> swarm_target;
  std::vector<Vec2> swarm_v;
  if (cfg_.policy == PolicyKind::Swarm) {
    std::vector<Vec2> positions;
    for (const auto& rt : agents_) {
      positions.push_back(rt.ctx.state.pose.xy());
      if (!swarm_target) {
        if (auto f = focus_target(rt.ctx)) swarm_target = kf_follow_point(rt.ctx.tracks.at(*f));
      }
    }
    double slowest = std::numeric_limits<double>::infinity();
    for (const auto& rt : agents_) slowest = std::min(slowest, rt.ctx.state.max_speed);
    swarm_v = swarm_velocities(positions, swarm_target, t, cfg_.swarm, cfg_.weights.d_thre, slowest);
  }

  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentRuntime& rt = agents_[i];
    if (!full_round && !rt.replan) continue;
    rt.replan = false;
    rt.ctx.assignment = delivered[i];
    if (rt.ctx.assignment && rt.ctx.assignment->kind == TaskKind::Track) {
      // A track assignment for a target this agent no longer holds is stale.
      if (!rt.ctx.tracks.count(rt.ctx.assignment->target_id)) rt.ctx.assignment.reset();
    }
    const AgentAction action = policy_action(rt, t, swarm_v, i);
    rt.ctx.assignment.reset();
    act(rt, action, t);
  }
}

void Episode::move_agents() {
  for (auto& rt : agents_) {
    AgentState& s = rt.ctx.state;
    const Pose& cmd = rt.ctx.command;
    if (distance(cmd, s.pose) < kEps) continue;
    MoveCache& mv = rt.move;
    if (!mv.goal || distance(*mv.goal, cmd) > kEps || mv.route.done()) {
      mv.goal.reset();
      if (!is_free(map_, cmd)) continue;
      try {
        mv.route = route_from_path(plan_path(map_, s.pose, cmd), cmd, map_.resolution());
        mv.goal = cmd;
      } catch (const NoPathError&) {
        rt.walk.goal.reset();
        rt.ctx.command = s.pose;
        continue;
      }
    }
    const double moved = follow_route(map_, s.pose, mv.route, s.max_speed * cfg_.dt);
    s.traveled += moved;
  }
}

void Episode::record_poses(double t) {
  for (const auto& rt : agents_) {
    const AgentState& s = rt.ctx.state;
    trace_.add(t, "pose", {{"entity", "agent"}, {"id", s.id}, {"x", s.pose.x}, {"y", s.pose.y},
                           {"mode", mode_name(s.mode)}});
  }
  for (const auto& tg : targets_) {
    trace_.add(t, "pose", {{"entity", "target"}, {"id", tg.id}, {"x", tg.pose.x}, {"y", tg.pose.y},
                           {"cleared", tg.cleared}});
  }
}

void Episode::record_messages(double t) {
  for (const auto& r : bus_.records()) {
    ++sent_;
    if (r.dropped) ++dropped_;
    if (opt_.record_trace) {
      trace_.add(t, "message", {{"tick", r.tick},
                                {"channel", channel_name(r.channel)},
                                {"kind", r.kind},
                                {"sender", r.sender},
                                {"receiver", r.receiver},
                                {"dropped", r.dropped}});
    }
  }
  bus_.clear_records();
}

void Episode::record_snapshot(double t) {
  for (const auto& rt : agents_) {
    json cells = json::array();
    const auto& p = rt.ctx.belief.p;
    for (std::size_t i = 0; i < p.size(); ++i) {
      // Fixed-point in 1e-4 keeps snapshots compact and byte-stable.
      if (std::abs(p[i] - 0.5) > 0.01) cells.push_back({i, std::lround(p[i] * 1e4)});
    }
    trace_.add(t, "belief-snapshot", {{"agent", rt.ctx.state.id}, {"cells", std::move(cells)}});
  }
}

EpisodeResult Episode::run() {
  const long plan_ticks = std::max(1L, std::lround(cfg_.plan_period / cfg_.dt));
  const long snapshot_ticks = std::max(1L, std::lround(cfg_.snapshot_period / cfg_.dt));
  double mission_time = 0.0;
  bool completed = false;

  for (long tick = 0;; ++tick) {
    const double t = static_cast<double>(tick) * cfg_.dt;
    if (tick > 0) {
      for (std::size_t k = 0; k < targets_.size(); ++k) {
        targets_[k] = step_target(targets_[k], map_, cfg_.dt, target_rng_[k]);
      }
    }
    sense(t);
    check_clears(t);
    if (n_cleared_ == targets_.size()) {
      if (opt_.record_trace) record_poses(t);
      mission_time = t;
      completed = true;
      break;
    }
    const int detected = static_cast<int>(std::count_if(first_seen_.begin(), first_seen_.end(),
                                                        [](const auto& s) { return s.has_value(); }));
    hq_.num_detected = detected;
    if (tick > 0 && decays()) {
      for (auto& rt : agents_) apply_time_decay_inplace(rt.ctx.belief, t, detected, num_total_);
    }
    emit_reports(tick, t);
    plan(tick, t, tick % plan_ticks == 0);
    record_messages(t);
    if (opt_.record_trace) {
      if (tick % snapshot_ticks == 0) record_snapshot(t);
      record_poses(t);
    }
    if (cfg_.time_cap > 0.0 && t >= cfg_.time_cap - kEps) {
      mission_time = cfg_.time_cap;
      break;
    }
    move_agents();
  }

  EpisodeResult out;
  RunMetrics& m = out.metrics;
  m.mission_time = mission_time;
  m.completed = completed;
  m.tracked_ratio = static_cast<double>(n_cleared_) / static_cast<double>(targets_.size());
  m.clear_times = clear_time_;
  double tracking = 0.0;
  for (std::size_t k = 0; k < targets_.size(); ++k) {
    if (clear_time_[k]) tracking += *clear_time_[k] - first_seen_[k].value_or(*clear_time_[k]);
  }
  m.mean_tracking_time = n_cleared_ > 0 ? tracking / static_cast<double>(n_cleared_) : 0.0;
  for (const auto& rt : agents_) m.traveled.push_back(rt.ctx.state.traveled);
  m.mean_traveled = std::accumulate(m.traveled.begin(), m.traveled.end(), 0.0) / static_cast<double>(m.traveled.size());
  m.max_idle_planning_ticks = max_idle_;
  m.hq_operations = hq_.operations;
  m.messages_sent = sent_;
  m.messages_dropped = dropped_;
  out.trace = std::move(trace_);
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

EpisodeResult run_episode(const ScenarioConfig& cfg, const EpisodeOptions& options) {
  cfg.validate();
  Episode ep(cfg, options);
  return ep.run();
}

// ---------------------------------------------------------------------------
// Trace serialization

std::string trace_to_jsonl(const Trace& trace) {
  if (trace.events.empty()) return {};
  std::string out = json{{"version", trace.version}, {"seed", trace.seed}, {"policy", trace.policy},
                         {"config", trace.config}}
                        .dump();
  out += '\n';
  for (const auto& e : trace.events) {
    out += json{{"t", e.t}, {"seq", e.seq}, {"kind", e.kind}, {"data", e.payload}}.dump();
    out += '\n';
  }
  return out;
}

Trace trace_from_jsonl(std::string_view text) {
  Trace trace;
  trace.events.clear();
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (header) {
        trace.version = j.at("version").get<std::string>();
        trace.seed = j.at("seed").get<std::uint64_t>();
        trace.policy = j.at("policy").get<std::string>();
        trace.config = j.value("config", std::string());
        header = false;
        continue;
      }
      trace.events.push_back(TraceEvent{j.at("t").get<double>(), j.at("seq").get<std::uint64_t>(),
                                        j.at("kind").get<std::string>(), j.at("data")});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("trace: ") + e.what());
  }
  return trace;
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << trace_to_jsonl(trace);
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("trace: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return trace_from_jsonl(ss.str());
}

// ---------------------------------------------------------------------------
// Batches and statistics

std::vector<MonteCarloRow> run_monte_carlo(const std::vector<ScenarioConfig>& cfgs,
                                           const std::vector<std::uint64_t>& seeds, int threads) {
  if (cfgs.empty() || seeds.empty()) throw std::invalid_argument("run_monte_carlo: need configs and seeds");
  if (threads <= 0) {
    const char* env = std::getenv("SAT_THREADS");
    threads = env ? std::max(1, std::atoi(env)) : omp_get_max_threads();
  }
  const std::size_t n = cfgs.size() * seeds.size();
  std::vector<MonteCarloRow> rows(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      ScenarioConfig cfg = cfgs[idx / seeds.size()];
      cfg.seed = seeds[idx % seeds.size()];
      rows[idx] = MonteCarloRow{cfg.name, cfg.seed, run_episode(cfg, EpisodeOptions{false, Exec::Serial}).metrics};
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

namespace {

MetricSummary summary_of(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<MonteCarloRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.config) == order.end()) order.push_back(r.config);
  }
  std::vector<SummaryRow> out;
  for (const auto& name : order) {
    std::vector<double> mt, tr, tt, tv;
    for (const auto& r : rows) {
      if (r.config != name) continue;
      mt.push_back(r.metrics.mission_time);
      tr.push_back(r.metrics.tracked_ratio);
      tt.push_back(r.metrics.mean_tracking_time);
      tv.push_back(r.metrics.mean_traveled);
    }
    out.push_back(SummaryRow{name, mt.size(), summary_of(mt), summary_of(tr), summary_of(tt), summary_of(tv)});
  }
  return out;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test: need at least two samples per side");
  const auto sa = summary_of(a);
  const auto sb = summary_of(b);
  const double va = sa.stddev * sa.stddev / static_cast<double>(a.size());
  const double vb = sb.stddev * sb.stddev / static_cast<double>(b.size());
  if (va + vb <= 0.0) throw std::invalid_argument("welch_t_test: both samples have zero variance");
  WelchResult r;
  r.t = (sa.mean - sb.mean) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(1.0, r.p);
  return r;
}

std::string metrics_to_csv(const std::vector<MonteCarloRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.config + "," + std::to_string(r.seed) + "," + format_double(r.metrics.mission_time) + "," +
           format_double(r.metrics.tracked_ratio) + "," + format_double(r.metrics.mean_tracking_time) + "," +
           format_double(r.metrics.mean_traveled) + "\n";
  }
  return out;
}

std::vector<MonteCarloRow> metrics_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ParseError("metrics: missing or unexpected header");
  std::vector<MonteCarloRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ParseError("metrics: expected 6 fields in '" + line + "'");
    try {
      MonteCarloRow r;
      r.config = f[0];
      r.seed = std::stoull(f[1]);
      r.metrics.mission_time = std::stod(f[2]);
      r.metrics.tracked_ratio = std::stod(f[3]);
      r.metrics.mean_tracking_time = std::stod(f[4]);
      r.metrics.mean_traveled = std::stod(f[5]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError("metrics: bad number in '" + line + "'");
    }
  }
  return rows;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "config,episodes,mission_time_mean,mission_time_std,tracked_ratio_mean,tracked_ratio_std,"
      "mean_tracking_time_mean,mean_tracking_time_std,mean_traveled_mean,mean_traveled_std\n";
  for (const auto& r : rows) {
    out += r.config + "," + std::to_string(r.episodes);
    for (const auto* s : {&r.mission_time, &r.tracked_ratio, &r.mean_tracking_time, &r.mean_traveled}) {
      out += "," + format_double(s->mean) + "," + format_double(s->stddev);
    }
    out += "\n";
  }
  return out;
}

void export_run(const Trace& trace, const std::vector<MonteCarloRow>& rows, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_trace(trace, out_dir / "trace.jsonl");
  std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
  csv << metrics_to_csv(rows);
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> out;
  try {
    const auto dots = spec.find("..");
    if (dots != std::string::npos) {
      const auto lo = std::stoull(spec.substr(0, dots));
      const auto hi = std::stoull(spec.substr(dots + 2));
      if (hi < lo) throw ConfigError("seeds: empty range '" + spec + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
      return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(std::stoull(item));
    }
  } catch (const std::logic_error&) {
    throw ConfigError("seeds: cannot parse '" + spec + "'");
  }
  if (out.empty()) throw ConfigError("seeds: none given");
  return out;
}

}  // namespace sat
