// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria (0 when everything holds).

#include "oracles.hpp"

#include "sat/belief.hpp"
#include "sat/config.hpp"
#include "sat/errors.hpp"
#include "sat/harness.hpp"
#include "sat/planning.hpp"
#include "sat/prediction.hpp"
#include "sat/trace_tools.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

using namespace sat;

namespace {

// Tolerances and limits.
constexpr double kKalmanTol = 1e-3;
constexpr double kKalmanSeconds = 10.0;
constexpr double kOracleSeconds = 30.0;
constexpr double kDecayTol = 1e-6;
constexpr double kEntropyTol = 1e-9;
constexpr double kFusionSumTol = 1e-12;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradSeconds = 60.0;
constexpr double kSkillAlpha = 0.05;
constexpr double kTrainSeconds = 15.0 * 60.0;
constexpr double kOrderingAlpha = 0.05;
constexpr double kOrderingSeconds = 30.0 * 60.0;
constexpr int kSeeds = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> mission_times(const std::vector<MonteCarloRow>& rows, const std::string& config) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.config == config) out.push_back(r.metrics.mission_time);
  }
  return out;
}

// 1
Outcome kalman_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double m = rng.uniform(-5.0, 5.0);
    const double p = rng.uniform(0.1, 5.0);
    const double r = rng.uniform(0.1, 5.0);
    const double z = m + rng.uniform(-4.0, 4.0);
    TrackEstimate e;
    e.mean = Vec2(m, -m);
    e.covariance = Mat2::Identity() * p;
    const auto post = kf_update(e, Vec2(z, -z), Mat2::Identity() * r);
    const auto [om, ov] = oracle::grid_bayes_1d(m, p, z, r);
    worst = std::max({worst, std::abs(post.mean.x() - om), std::abs(post.covariance(0, 0) - ov),
                      std::abs(post.mean.y() + om), std::abs(post.covariance(1, 1) - ov)});
  }
  const double secs = seconds_since(t0);
  return {worst < kKalmanTol && secs < kKalmanSeconds, fmt("max |err| %.2e over 50 pairs, %.2f s", worst, secs)};
}

// 2
Outcome frontier_and_path_oracles() {
  const auto t0 = Clock::now();
  Rng rng(77);
  int frontier_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const GridMap m = oracle::random_map(rng, 20, 20, 0.2);
    std::vector<double> p(m.size());
    for (double& v : p) {
      const double u = rng.uniform();
      v = u < 0.4 ? 0.5 : (u < 0.8 ? rng.uniform(0.0, 0.35) : rng.uniform());
    }
    const auto scan = oracle::frontier_scan(p, m, 0.1);
    const auto got = extract_frontiers(p, m, 0.1, 12);
    std::vector<std::size_t> parent(m.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t i : scan) {
      const Cell c = m.cell(i);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const Cell n{c.row + dr, c.col + dc};
          if (m.in_bounds(n) && scan.count(m.index(n))) {
            parent[oracle::find_root(parent, i)] = oracle::find_root(parent, m.index(n));
          }
        }
      }
    }
    std::set<std::size_t> members;
    bool ok = true;
    for (const auto& f : got) {
      const std::size_t root = oracle::find_root(parent, f.member_cells.front());
      for (std::size_t i : f.member_cells) ok &= members.insert(i).second && oracle::find_root(parent, i) == root;
      ok &= is_free(m, f.centroid);
    }
    ok &= members == scan;
    frontier_bad += !ok;
  }

  int path_bad = 0, compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const GridMap m = oracle::random_map(rng, 20, 20, 0.3);
    std::size_t s = 0;
    while (m.obstacle(s)) ++s;
    const auto cost = oracle::grid_costs(m, s);
    for (int k = 0; k < 5; ++k) {
      const std::size_t g = rng.index(m.size());
      if (m.obstacle(g)) continue;
      const Pose a = Pose::at(m.center(s));
      const Pose b = Pose::at(m.center(g));
      ++compared;
      if (!std::isfinite(cost[g])) {
        try {
          plan_path(m, a, b);
          ++path_bad;
        } catch (const NoPathError&) {
        }
        continue;
      }
      const Path p = plan_path(m, a, b);
      bool ok = std::abs(p.length - cost[g]) <= 1e-9;
      for (std::size_t i = 0; i < p.waypoints.size(); ++i) {
        ok &= is_free(m, p.waypoints[i]);
        if (i > 0) ok &= line_of_sight(m, p.waypoints[i - 1], p.waypoints[i]);
      }
      path_bad += !ok;
    }
  }
  const double secs = seconds_since(t0);
  return {frontier_bad == 0 && path_bad == 0 && secs < kOracleSeconds,
          fmt("frontier mismatches %d/100 maps, path mismatches %d/%d queries, %.2f s", frontier_bad, path_bad,
              compared, secs)};
}

// 3
Outcome belief_properties() {
  const GridMap one = GridMap::open(1, 1);
  double worst_decay = 0.0;
  for (double p0 : {0.0, 0.05, 0.1, 0.3, 0.49, 0.51, 0.7, 0.9, 1.0}) {
    OccupancyBelief b(one, 0, 1.0 / 90.0);
    b.set_cell(0, p0, 0.0);
    worst_decay = std::max(worst_decay, std::abs(apply_time_decay(b, 1e5, 0, std::nullopt).p[0] - 0.5));
  }

  double worst_entropy = -1.0;
  for (double beta : {0.0, 0.05, 0.2, 0.45}) {
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 50; ++j) {
        const double p = i / 49.0, alpha = j / 49.0;
        worst_entropy = std::max(worst_entropy, expected_posterior_entropy(p, alpha, beta) - cell_entropy(p));
      }
    }
  }

  Rng rng(5);
  double worst_sum = 0.0;
  bool monotone = true;
  std::vector<OccupancyBelief> bs(6, OccupancyBelief(one, 0));
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<const OccupancyBelief*, double>> in;
    for (auto& b : bs) in.push_back({&b, rng.uniform(0.0, 10.0)});
    const auto f = fuse_occupancy(in);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(f.weights.begin(), f.weights.end(), 0.0) - 1.0));
    for (std::size_t a = 0; a < in.size(); ++a) {
      for (std::size_t b = 0; b < in.size(); ++b) {
        if (in[a].second < in[b].second) monotone &= f.weights[a] <= f.weights[b];
      }
    }
  }
  return {worst_decay < kDecayTol && worst_entropy <= kEntropyTol && worst_sum < kFusionSumTol && monotone,
          fmt("decay |p-0.5| %.1e, max(H_post-H) %.1e, |sum w - 1| %.1e, trace-monotone %s", worst_decay,
              worst_entropy, worst_sum, monotone ? "yes" : "no")};
}

// 4
Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(11);
  const PredictorWeights w = PredictorWeights::random(8, 16, rng);
  auto batch = gen_synthetic_dataset(4, {TrajKind::Turning, TrajKind::Sinusoidal}, 13);
  batch.resize(4);
  std::vector<double> grad;
  loss_and_gradient(w, batch, &grad);
  std::vector<double> theta = w.flatten();
  PredictorWeights probe = w;
  double worst = 0.0;
  constexpr double h = 1e-5;
  constexpr double kTiny = 1e-7;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    probe.assign(theta);
    const double up = loss_and_gradient(probe, batch, nullptr);
    theta[i] = keep - h;
    probe.assign(theta);
    const double down = loss_and_gradient(probe, batch, nullptr);
    theta[i] = keep;
    const double fd = (up - down) / (2 * h);
    // Relative error with an absolute floor for weights whose gradient vanishes.
    const double err = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), kTiny});
    worst = std::max(worst, err);
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelTol && secs < kGradSeconds,
          fmt("%zu weights, max relative error %.2e, %.2f s", theta.size(), worst, secs)};
}

// 5
Outcome predictor_skill(std::shared_ptr<const PredictorWeights>& trained) {
  const auto t0 = Clock::now();
  const auto trajs = gen_trajectories(160, {TrajKind::Linear, TrajKind::Turning, TrajKind::Sinusoidal}, 7);
  const auto samples = make_windows(trajs, 2);
  TrainConfig tc;
  tc.epochs = 300;
  const auto result = train(samples, tc, 7, 32);
  const double train_secs = seconds_since(t0);
  trained = std::make_shared<const PredictorWeights>(result.weights);

  const auto held = gen_trajectories(200, {TrajKind::Turning, TrajKind::Sinusoidal}, 99991);
  std::vector<double> lstm, cv;
  for (const auto& tr : held) {
    const auto s = make_windows({tr}, 1 << 20).front();
    lstm.push_back(ade_fde(lstm_forward(result.weights, s.input), s.target).ade);
    cv.push_back(ade_fde(cv_predict(s.input), s.target).ade);
  }
  const auto w = welch_t_test(lstm, cv);
  const bool pass = mean_of(lstm) < mean_of(cv) && w.p < kSkillAlpha && train_secs < kTrainSeconds;
  return {pass, fmt("ADE lstm %.4f vs cv %.4f, Welch p %.2e, training %.0f s", mean_of(lstm), mean_of(cv), w.p,
                    train_secs)};
}

ScenarioConfig open_cfg(const std::string& name, PolicyKind policy, int agents, int targets,
                        std::shared_ptr<const PredictorWeights> predictor) {
  std::ostringstream js;
  js << R"({"map": "open:50x50", "toggles": {"lstm": false}, "agents": )" << agents << R"(, "targets": )"
     << targets << "}";
  ScenarioConfig c = parse_config(js.str());
  c.name = name;
  c.policy = policy;
  c.toggles.lstm = true;
  c.predictor = std::move(predictor);
  c.validate();
  return c;
}

struct OpenRuns {
  std::vector<MonteCarloRow> rows;
  double seconds = 0.0;
};

OpenRuns run_open_batch(std::shared_ptr<const PredictorWeights> predictor) {
  std::vector<ScenarioConfig> cfgs{open_cfg("hybrid", PolicyKind::Hybrid, 4, 5, predictor),
                                   open_cfg("random", PolicyKind::RandomWalk, 4, 5, predictor),
                                   open_cfg("independent", PolicyKind::Independent, 4, 5, predictor),
                                   open_cfg("no-tr", PolicyKind::Hybrid, 4, 5, predictor),
                                   open_cfg("no-tv", PolicyKind::Hybrid, 4, 5, predictor)};
  cfgs[3].toggles.tr = false;
  cfgs[4].toggles.tv = false;
  std::vector<std::uint64_t> seeds(kSeeds);
  std::iota(seeds.begin(), seeds.end(), 1);
  const auto t0 = Clock::now();
  OpenRuns out;
  out.rows = run_monte_carlo(cfgs, seeds);
  out.seconds = seconds_since(t0);
  return out;
}

// 6
Outcome comparative_ordering(const OpenRuns& runs) {
  const auto ours = mission_times(runs.rows, "hybrid");
  const auto rnd = mission_times(runs.rows, "random");
  const auto ind = mission_times(runs.rows, "independent");
  const auto vs_rnd = welch_t_test(ours, rnd);
  const auto vs_ind = welch_t_test(ours, ind);
  const bool pass = mean_of(ours) < mean_of(rnd) && vs_rnd.p < kOrderingAlpha && mean_of(ours) < mean_of(ind) &&
                    vs_ind.p < kOrderingAlpha && runs.seconds < kOrderingSeconds;
  return {pass, fmt("mean mission hybrid %.1f, random %.1f (p %.1e), independent %.1f (p %.1e); batch %.0f s",
                    mean_of(ours), mean_of(rnd), vs_rnd.p, mean_of(ind), vs_ind.p, runs.seconds)};
}

// 7
Outcome ablation_ordering(const OpenRuns& runs) {
  const auto full = mission_times(runs.rows, "hybrid");
  const auto no_tr = mission_times(runs.rows, "no-tr");
  const auto no_tv = mission_times(runs.rows, "no-tv");
  const auto p_tr = welch_t_test(full, no_tr).p;
  const auto p_tv = welch_t_test(full, no_tv).p;
  const bool tr_up = mean_of(no_tr) > mean_of(full);
  const bool tv_up = mean_of(no_tv) > mean_of(full);
  return {tr_up && tv_up, fmt("full %.1f; TR off %.1f (%s, p %.1e); TV off %.1f (%s, p %.1e)", mean_of(full),
                              mean_of(no_tr), tr_up ? "slower" : "NOT slower", p_tr, mean_of(no_tv),
                              tv_up ? "slower" : "NOT slower", p_tv)};
}

// 8
Outcome robustness_liveness(std::shared_ptr<const PredictorWeights> predictor) {
  ScenarioConfig cfg = open_cfg("open-2x10-pcf", PolicyKind::Hybrid, 2, 10, std::move(predictor));
  cfg.failures.p_cf = 0.8;
  std::vector<std::uint64_t> seeds(kSeeds);
  std::iota(seeds.begin(), seeds.end(), 1);
  int terminated = 0, positive = 0, worst_idle = 0;
  double min_ratio = 1.0;
  for (auto seed : seeds) {
    cfg.seed = seed;
    try {
      const auto m = run_episode(cfg, {false}).metrics;
      terminated += m.mission_time <= cfg.time_cap + 1e-9;
      positive += m.tracked_ratio > 0.0;
      min_ratio = std::min(min_ratio, m.tracked_ratio);
      worst_idle = std::max(worst_idle, m.max_idle_planning_ticks);
    } catch (const std::exception&) {
    }
  }
  const int n = static_cast<int>(seeds.size());
  return {terminated == n && positive == n && worst_idle <= 1,
          fmt("%d/%d terminated, tracked_ratio > 0 in %d/%d (min %.2f), longest idle %d planning ticks", terminated,
              n, positive, n, min_ratio, worst_idle)};
}

// 9
Outcome determinism(std::shared_ptr<const PredictorWeights> predictor) {
  std::vector<ScenarioConfig> cfgs;
  for (PolicyKind p : {PolicyKind::Hybrid, PolicyKind::RandomWalk, PolicyKind::Independent, PolicyKind::CentralKF,
                       PolicyKind::Exhaustive, PolicyKind::Swarm}) {
    ScenarioConfig c = open_cfg(policy_name(p), p, 3, 3, predictor);
    c.time_cap = 120.0;
    cfgs.push_back(c);
  }
  ScenarioConfig faulty = open_cfg("faulty", PolicyKind::Hybrid, 2, 4, predictor);
  faulty.failures = Failures{0.3, 0.2, 0.1, 0.2, 2};
  faulty.time_cap = 120.0;
  cfgs.push_back(faulty);

  int identical = 0, replayed = 0, total = 0;
  for (auto& c : cfgs) {
    for (std::uint64_t seed : {1u, 2u}) {
      c.seed = seed;
      const Trace a = run_episode(c).trace;
      const Trace b = run_episode(c).trace;
      ++total;
      identical += trace_to_jsonl(a) == trace_to_jsonl(b);
      replayed += replay_check(trace_from_jsonl(trace_to_jsonl(a)), c);
    }
  }
  return {identical == total && replayed == total,
          fmt("%d/%d byte-identical reruns, %d/%d replay checks", identical, total, replayed, total)};
}

// 10
Outcome tracking_completion() {
  ScenarioConfig cfg = parse_config(R"({
    "map": "open:30x30", "heterogeneous": false, "toggles": {"lstm": false, "tr": false}, "reporters": 0,
    "agents": [{"position": [5.5, 5.5],
                "sensor": {"range": 6, "alpha": 0, "beta": 0, "sigma_near": 0.7, "sigma_far": 1.3}}],
    "targets": [{"position": [5.5, 5.5], "stationary": true},
                {"position": [25.5, 25.5], "stationary": true}]
  })");
  cfg.seed = 1;
  const Trace tr = run_episode(cfg).trace;
  std::vector<double> traces;
  int clears = 0;
  double t_clear = -1.0;
  bool excluded = true;
  for (const auto& e : tr.events) {
    const bool about_first = e.payload.contains("target") && e.payload["target"].is_number_integer() &&
                             e.payload["target"].get<int>() == 0;
    if (t_clear >= 0.0 && e.t > t_clear && about_first &&
        (e.kind == "measurement" || e.kind == "detection" || e.kind == "plan" || e.kind == "assignment" ||
         e.kind == "clear")) {
      excluded = false;
    }
    if (e.kind == "measurement" && about_first && t_clear < 0.0) traces.push_back(e.payload["trace"].get<double>());
    if (e.kind == "clear" && about_first) {
      ++clears;
      t_clear = e.t;
    }
  }
  const double initial = 2 * 4 * 0.49;
  const bool start_ok = !traces.empty() && std::abs(traces.front() - initial) < 1e-12;
  const bool drops = !traces.empty() && traces.back() <= cfg.trace_thre &&
                     std::all_of(traces.begin(), traces.end() - 1, [&](double v) { return v > cfg.trace_thre; });
  return {start_ok && drops && clears == 1 && excluded,
          fmt("trace %.3f -> %.3f over %zu updates, %d clear event(s), excluded afterwards %s",
              traces.empty() ? 0.0 : traces.front(), traces.empty() ? 0.0 : traces.back(), traces.size(), clears,
              excluded ? "yes" : "no")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  std::shared_ptr<const PredictorWeights> trained;
  report(1, "kalman-grid-oracle", kalman_oracle);
  report(2, "frontier-path-oracles", frontier_and_path_oracles);
  report(3, "belief-properties", belief_properties);
  report(4, "predictor-gradient-check", gradient_check);
  report(5, "predictor-skill", [&] { return predictor_skill(trained); });
  OpenRuns runs;
  std::string batch_error;
  try {
    runs = run_open_batch(trained);
  } catch (const std::exception& e) {
    batch_error = e.what();
  }
  auto needs_batch = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!batch_error.empty()) return {false, "batch threw: " + batch_error};
      return fn(runs);
    };
  };
  report(6, "comparative-ordering", needs_batch(comparative_ordering));
  report(7, "ablation-ordering", needs_batch(ablation_ordering));
  report(8, "robustness-liveness", [&] { return robustness_liveness(trained); });
  report(9, "determinism-replay", [&] { return determinism(trained); });
  report(10, "tracking-completion", tracking_completion);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
