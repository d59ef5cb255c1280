#include "sat/coordination.hpp"

#include "sat/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sat {

namespace {

constexpr double kTimeEps = 1e-9;

AgentState state_of(const AgentUpdate& u) {
  AgentState s;
  s.id = u.agent_id;
  s.pose = u.pose;
  s.max_speed = u.max_speed;
  s.sensor = u.sensor;
  s.mode = u.mode;
  return s;
}

AgentAction stay(const AgentContext& ctx, Mode mode) {
  AgentAction a;
  a.command = ctx.state.pose;
  a.mode = mode;
  return a;
}

// Nearest free cell center to p (p itself when already free).
Vec2 snap_free(const GridMap& map, const Vec2& p) {
  if (is_free(map, p)) return p;
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.obstacle(i)) continue;
    const double d = (map.center(i) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (!best) throw NoPathError("map has no free cell");
  return map.center(*best);
}

}  // namespace

// ---------------------------------------------------------------------------
// Agent side

Window Forecaster::forecast(const AgentTrack& track) const {
  if (track.history.empty()) return Window(kOutputLen, track.estimate.mean);
  // Short histories are padded at the front with their oldest point.
  const auto n = static_cast<long>(std::min<std::size_t>(track.history.size(), kInputLen));
  const auto first = track.history.end() - n;
  Window input(static_cast<std::size_t>(kInputLen - n), *first);
  input.insert(input.end(), first, track.history.end());
  if (use_lstm && weights) return lstm_predict(*weights, input);
  return cv_predict(input, kOutputLen);
}

std::optional<int> focus_target(const AgentContext& ctx) {
  if (ctx.state.assigned_target) {
    auto it = ctx.tracks.find(*ctx.state.assigned_target);
    if (it != ctx.tracks.end() && !it->second.estimate.cleared) return it->first;
  }
  std::optional<int> best;
  double best_trace = std::numeric_limits<double>::infinity();
  for (const auto& [id, tr] : ctx.tracks) {
    if (tr.estimate.cleared) continue;
    const double tr_cov = tr.estimate.covariance.trace();
    if (tr_cov < best_trace) {
      best_trace = tr_cov;
      best = id;
    }
  }
  return best;
}

AgentAction agent_independent_step(const AgentContext& ctx, const GridMap& map, const PlannerSettings& settings,
                                   const Forecaster& forecaster, double t) {
  if (ctx.assignment) {
    const Assignment& as = *ctx.assignment;
    AgentAction a;
    a.command = as.trajectory.goal;
    a.mode = as.kind == TaskKind::Track ? Mode::Track : Mode::Search;
    if (as.kind == TaskKind::Track) a.target = as.target_id;
    a.chosen = as.trajectory;
    a.score = as.utility;
    a.from_assignment = true;
    return a;
  }

  const SensorModel& sensor = ctx.state.sensor;
  const std::vector<double> gains = explore_gain_map(ctx.belief.p, sensor, map);

  if (auto target = focus_target(ctx)) {
    const AgentTrack& track = ctx.tracks.at(*target);
    const std::vector<TargetForecast> tracks{{track.estimate, forecaster.forecast(track)}};
    auto cands = gen_track_candidates(ctx.state, tracks.front().predicted, map, settings.params.n_headings,
                                      settings.params.n_speeds, settings.params);
    AgentAction a = stay(ctx, Mode::Track);
    a.target = target;
    if (cands.empty()) return a;
    const std::vector<ReportEstimate> none;
    score_candidates(cands, ScoreInputs{gains, &tracks, &none, settings.q, t}, sensor, map, settings.exec);
    const std::size_t k = select_best(cands, Mode::Track, settings.weights, {});
    a.command = cands[k].goal;
    a.score = utility(cands[k], Mode::Track, settings.weights);
    a.n_candidates = cands.size();
    a.chosen = std::move(cands[k]);
    return a;
  }

  const auto frontiers =
      extract_frontiers(ctx.belief.p, map, settings.params.unknown_band, settings.params.max_cluster_cells);
  auto cands = gen_search_candidates(ctx.state, frontiers, map, settings.params);
  AgentAction a = stay(ctx, Mode::Search);
  if (cands.empty()) {
    a.idle = true;
    return a;
  }
  const std::vector<TargetForecast> no_tracks;
  const std::vector<ReportEstimate> no_reports;
  score_candidates(cands, ScoreInputs{gains, &no_tracks, &no_reports, settings.q, t}, sensor, map, settings.exec);
  const std::size_t k = select_best(cands, Mode::Search, settings.weights, {});
  a.command = cands[k].goal;
  a.score = utility(cands[k], Mode::Search, settings.weights);
  a.n_candidates = cands.size();
  a.chosen = std::move(cands[k]);
  return a;
}

// ---------------------------------------------------------------------------
// Bus

std::string channel_name(Channel c) {
  switch (c) {
    case Channel::AgentToHq: return "agent-hq";
    case Channel::ReporterToHq: return "reporter-hq";
    case Channel::HqToAgent: return "hq-agent";
  }
  return "unknown";
}

std::string payload_kind(const Payload& p) {
  switch (p.index()) {
    case 0: return "agent-update";
    case 1: return "report";
    default: return "assignment";
  }
}

double MessageBus::failure_probability(Channel c) const {
  switch (c) {
    case Channel::AgentToHq: return cfg_.p_cf;
    case Channel::ReporterToHq: return cfg_.p_ef;
    case Channel::HqToAgent: return cfg_.p_hq;
  }
  return 0.0;
}

bool MessageBus::deliver(Message msg, long tick, Rng& rng) {
  const bool dropped = rng.uniform() < failure_probability(msg.channel);
  records_.push_back({tick, msg.channel, payload_kind(msg.payload), msg.sender, msg.receiver, dropped});
  if (dropped) return false;
  msg.sent_tick = tick;
  msg.due_tick = tick + cfg_.latency_ticks;
  queue_.push_back(std::move(msg));
  return true;
}

std::vector<Message> MessageBus::collect(Channel channel, long tick) {
  std::vector<Message> out;
  std::deque<Message> keep;
  for (auto& m : queue_) {
    if (m.channel == channel && m.due_tick <= tick) {
      out.push_back(std::move(m));
    } else {
      keep.push_back(std::move(m));
    }
  }
  queue_ = std::move(keep);
  return out;
}

std::vector<Message> MessageBus::collect_for(Channel channel, int receiver, long tick) {
  std::vector<Message> out;
  std::deque<Message> keep;
  for (auto& m : queue_) {
    if (m.channel == channel && m.receiver == receiver && m.due_tick <= tick) {
      out.push_back(std::move(m));
    } else {
      keep.push_back(std::move(m));
    }
  }
  queue_ = std::move(keep);
  return out;
}

// ---------------------------------------------------------------------------
// HQ state

void HQState::receive(const ReportEstimate& r) {
  auto key = std::make_pair(r.reporter_id, r.target_id);
  auto it = reports.find(key);
  if (it == reports.end() || it->second.time <= r.time) reports[key] = r;
}

void HQState::mark_cleared(int target_id) { cleared.insert(target_id); }

std::vector<int> HQState::fresh_agents(double t) const {
  std::vector<int> out;
  for (const auto& [id, u] : agents) {
    if (t - u.time < freshness - kTimeEps) out.push_back(id);
  }
  return out;
}

std::vector<DetectReport> HQState::detect_reports(double t) const {
  std::vector<DetectReport> out;
  for (int id : fresh_agents(t)) {
    const AgentUpdate& u = agents.at(id);
    for (const auto& f : u.forecasts) {
      if (cleared.count(f.estimate.target_id) || f.estimate.cleared) continue;
      DetectReport d;
      d.agent_id = id;
      d.target_id = f.estimate.target_id;
      d.trace = f.estimate.covariance.trace();
      d.distance = (u.pose.xy() - f.estimate.mean).norm();
      auto m = u.monitoring_time.find(d.target_id);
      d.monitoring_time = m == u.monitoring_time.end() ? 0.0 : m->second;
      out.push_back(d);
    }
  }
  return out;
}

SharedOccupancyBelief HQState::shared_belief(double t) const {
  std::vector<OccupancyBelief> decayed;
  std::vector<double> trust;
  for (const auto& [id, u] : agents) {
    if (!u.belief) continue;
    decayed.push_back(*u.belief);
    if (time_varying) apply_time_decay_inplace(decayed.back(), t, num_detected, num_total);
    trust.push_back(u.info_trace);
  }
  if (decayed.empty()) return {};
  std::vector<std::pair<const OccupancyBelief*, double>> in;
  for (std::size_t i = 0; i < decayed.size(); ++i) in.emplace_back(&decayed[i], trust[i]);
  return fuse_occupancy(in);
}

std::vector<ReportEstimate> HQState::open_reports(double t) const {
  std::set<int> detected;
  for (const auto& d : detect_reports(t)) detected.insert(d.target_id);
  std::map<int, ReportEstimate> newest;
  for (const auto& [key, r] : reports) {
    if (r.time > t + kTimeEps) continue;
    if (cleared.count(r.target_id) || detected.count(r.target_id)) continue;
    auto it = newest.find(r.target_id);
    if (it == newest.end() || it->second.time < r.time) newest[r.target_id] = r;
  }
  std::vector<ReportEstimate> out;
  for (auto& [id, r] : newest) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Auctions

bool check_assign_available(const HQState& hq, int agent_id, double t) {
  auto it = hq.last_track_assignment.find(agent_id);
  if (it == hq.last_track_assignment.end()) return true;
  const auto [issued, target] = it->second;
  if (hq.cleared.count(target)) return true;
  return t - issued >= hq.hold_time - kTimeEps;
}

std::optional<std::size_t> get_best_bid(std::vector<Bid>& bids, Mode mode, const UtilityWeights& weights,
                                        const std::vector<Pose>& taken_terminals) {
  if (bids.empty()) return std::nullopt;
  double max_e = 0.0;
  double max_x = 0.0;
  for (const auto& b : bids) {
    max_e = std::max(max_e, b.trajectory.raw_explore);
    max_x = std::max(max_x, b.trajectory.raw_exploit);
  }
  for (auto& b : bids) {
    auto& c = b.trajectory;
    c.j_explore = max_e > 0.0 ? c.raw_explore / max_e : 0.0;
    c.j_exploit = max_x > 0.0 ? c.raw_exploit / max_x : 0.0;
    b.utility = utility(c, mode, weights);
  }
  auto spread_ok = [&](const Bid& b) {
    for (const Pose& p : taken_terminals) {
      if (distance(b.trajectory.terminal, p) < weights.d_thre) return false;
    }
    return true;
  };
  auto better = [](const Bid& a, const Bid& b) {
    if (a.utility != b.utility) return a.utility > b.utility;
    if (a.trajectory.path_length != b.trajectory.path_length)
      return a.trajectory.path_length < b.trajectory.path_length;
    return a.agent_id < b.agent_id;
  };
  auto argmax = [&](bool constrained) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < bids.size(); ++i) {
      if (constrained && !spread_ok(bids[i])) continue;
      if (!best || better(bids[i], bids[*best])) best = i;
    }
    return best;
  };
  if (auto best = argmax(true)) return best;
  return argmax(false);
}

double expected_post_trace(const Mat2& cov, const SensorModel& sensor, double distance, double q) {
  const Mat2 prior = cov + q * 1.0 * Mat2::Identity();
  if (distance > sensor.range) return prior.trace();
  const Mat2 post = (prior.inverse() + sensor.covariance_at(distance).inverse()).inverse();
  return post.trace();
}

std::vector<Assignment> hq_assign_tracking(HQState& hq, const GridMap& map, const SharedOccupancyBelief& shared,
                                           double t) {
  const auto dets = hq.detect_reports(t);
  std::map<int, std::vector<DetectReport>> by_target;
  for (const auto& d : dets) by_target[d.target_id].push_back(d);

  auto forecast_of = [&](int agent, int target) -> const TargetForecast& {
    for (const auto& f : hq.agents.at(agent).forecasts) {
      if (f.estimate.target_id == target) return f;
    }
    throw std::logic_error("detect report without forecast");
  };

  // Targets whose best detector can shrink the estimate furthest go first.
  std::vector<std::pair<double, int>> order;
  for (const auto& [target, ds] : by_target) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& d : ds) {
      const auto& u = hq.agents.at(d.agent_id);
      best = std::min(best, expected_post_trace(forecast_of(d.agent_id, target).estimate.covariance, u.sensor,
                                                d.distance, hq.settings.q));
    }
    order.emplace_back(best, target);
  }
  std::sort(order.begin(), order.end());

  std::vector<Assignment> out;
  std::set<int> taken_agents;
  std::vector<Pose> terminals;
  std::map<int, std::vector<double>> gains_cache;
  const std::vector<ReportEstimate> no_reports;

  for (const auto& [expected, target] : order) {
    std::vector<Bid> bids;
    for (const auto& d : by_target[target]) {
      const int agent = d.agent_id;
      if (taken_agents.count(agent)) continue;
      auto last = hq.last_track_assignment.find(agent);
      const bool same_target = last != hq.last_track_assignment.end() && last->second.second == target;
      if (!same_target && !check_assign_available(hq, agent, t)) continue;
      ++hq.operations;

      const AgentUpdate& u = hq.agents.at(agent);
      const std::vector<TargetForecast> tracks{forecast_of(agent, target)};
      auto cands = gen_track_candidates(state_of(u), tracks.front().predicted, map, hq.settings.params.n_headings,
                                        hq.settings.params.n_speeds, hq.settings.params);
      auto g = gains_cache.find(agent);
      if (g == gains_cache.end()) g = gains_cache.emplace(agent, explore_gain_map(shared.p, u.sensor, map)).first;
      score_candidates(cands, ScoreInputs{g->second, &tracks, &no_reports, hq.settings.q, t}, u.sensor, map,
                       hq.settings.exec);
      for (auto& c : cands) bids.push_back(Bid{agent, TaskKind::Track, target, std::move(c), 0.0});
    }
    auto best = get_best_bid(bids, Mode::Track, hq.settings.weights, terminals);
    if (!best) continue;
    Bid& win = bids[*best];
    Assignment a;
    a.agent_id = win.agent_id;
    a.kind = TaskKind::Track;
    a.target_id = target;
    a.utility = win.utility;
    a.trajectory = std::move(win.trajectory);
    auto last = hq.last_track_assignment.find(a.agent_id);
    const bool continuing = last != hq.last_track_assignment.end() && last->second.second == target;
    a.issued_at = continuing ? last->second.first : t;
    hq.last_track_assignment[a.agent_id] = {a.issued_at, target};
    taken_agents.insert(a.agent_id);
    terminals.push_back(a.trajectory.terminal);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Frontier> search_tasks(const HQState& hq, const GridMap& map, const SharedOccupancyBelief& shared,
                                   double t) {
  auto tasks = extract_frontiers(shared, map, hq.settings.params.unknown_band, hq.settings.params.max_cluster_cells);
  if (!hq.use_reports) return tasks;
  for (const auto& r : hq.open_reports(t)) {
    const Vec2 p = snap_free(map, r.mean);
    Frontier f;
    f.centroid = Pose::at(p);
    f.member_cells = {map.index(*map.cell_of(p))};
    f.cluster_size = 1;
    tasks.push_back(std::move(f));
  }
  return tasks;
}

std::vector<Assignment> hq_assign_search(HQState& hq, const GridMap& map, const SharedOccupancyBelief& shared,
                                         const std::vector<Frontier>& tasks, double t,
                                         std::vector<Pose> taken_terminals) {
  std::vector<int> bidders;
  for (int id : hq.fresh_agents(t)) {
    if (!hq.active.count(id)) bidders.push_back(id);
  }
  if (bidders.empty() || tasks.empty()) return {};

  const std::vector<TargetForecast> no_tracks;
  const std::vector<ReportEstimate> reports = hq.use_reports ? hq.open_reports(t) : std::vector<ReportEstimate>{};

  // per_task[j] holds every bidder's candidate toward task j.
  std::vector<std::vector<Bid>> per_task(tasks.size());
  for (int agent : bidders) {
    const AgentUpdate& u = hq.agents.at(agent);
    auto cands = gen_search_candidates(state_of(u), tasks, map, hq.settings.params);
    const auto gains = explore_gain_map(shared.p, u.sensor, map);
    score_candidates(cands, ScoreInputs{gains, &no_tracks, &reports, hq.settings.q, t}, u.sensor, map,
                     hq.settings.exec);
    hq.operations += tasks.size();
    for (auto& c : cands) {
      const std::size_t j = *c.frontier;
      per_task[j].push_back(Bid{agent, TaskKind::Search, static_cast<int>(j), std::move(c), 0.0});
    }
  }

  // Task priority mixes the best exploration and report gains any bidder
  // offers. The report gain also counts a reading taken at the task itself,
  // since most reports lie beyond a single rollout's reach.
  std::vector<double> best_e(tasks.size(), 0.0);
  std::vector<double> best_x(tasks.size(), 0.0);
  double max_e = 0.0;
  double max_x = 0.0;
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    CandidateTrajectory at_task;
    at_task.poses = {TimedPose{0.0, tasks[j].centroid}};
    at_task.terminal = at_task.goal = tasks[j].centroid;
    for (const auto& b : per_task[j]) {
      best_e[j] = std::max(best_e[j], b.trajectory.raw_explore);
      best_x[j] = std::max(best_x[j], b.trajectory.raw_exploit);
      if (!reports.empty()) {
        const SensorModel& s = hq.agents.at(b.agent_id).sensor;
        best_x[j] = std::max(best_x[j], j_exploit(no_tracks, reports, at_task, s, map, hq.settings.q, t));
      }
    }
    max_e = std::max(max_e, best_e[j]);
    max_x = std::max(max_x, best_x[j]);
  }
  const double w = hq.settings.weights.w_search;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    if (per_task[j].empty()) continue;
    const double e = max_e > 0.0 ? best_e[j] / max_e : 0.0;
    const double x = max_x > 0.0 ? best_x[j] / max_x : 0.0;
    order.emplace_back(-(w * e + (1.0 - w) * x), j);
  }
  std::sort(order.begin(), order.end());

  std::vector<Assignment> out;
  std::set<int> taken_agents;
  for (const auto& [neg_priority, j] : order) {
    if (taken_agents.size() == bidders.size()) break;
    std::vector<Bid> bids;
    for (const auto& b : per_task[j]) {
      if (!taken_agents.count(b.agent_id)) bids.push_back(b);
    }
    auto best = get_best_bid(bids, Mode::Search, hq.settings.weights, taken_terminals);
    if (!best) continue;
    Bid& win = bids[*best];
    Assignment a;
    a.agent_id = win.agent_id;
    a.kind = TaskKind::Search;
    a.task = static_cast<int>(j);
    a.utility = win.utility;
    a.issued_at = t;
    a.trajectory = std::move(win.trajectory);
    taken_agents.insert(a.agent_id);
    taken_terminals.push_back(a.trajectory.terminal);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Assignment> hq_round(HQState& hq, const GridMap& map, double t) {
  hq.active.clear();
  const auto fresh = hq.fresh_agents(t);
  hq.ledger.clear();
  if (fresh.empty()) return {};
  const SharedOccupancyBelief shared = hq.shared_belief(t);

  std::vector<Assignment> out = hq_assign_tracking(hq, map, shared, t);
  std::vector<Pose> terminals;
  for (const auto& a : out) {
    hq.active.insert(a.agent_id);
    terminals.push_back(a.trajectory.terminal);
  }
  const auto tasks = search_tasks(hq, map, shared, t);
  auto search = hq_assign_search(hq, map, shared, tasks, t, terminals);
  for (auto& a : search) {
    hq.active.insert(a.agent_id);
    out.push_back(std::move(a));
  }
  for (const auto& a : out) hq.ledger[a.agent_id] = a;
  return out;
}

}  // namespace sat
