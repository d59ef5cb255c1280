#include "sat/config.hpp"

#include "sat/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace sat {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

Vec2 read_vec(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("config: positions are [x, y] arrays");
  return {j[0].get<double>(), j[1].get<double>()};
}

json write_vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

SensorModel read_sensor(const json& j) {
  SensorModel s = default_sensor();
  s.range = j.value("range", s.range);
  s.alpha = j.value("alpha", s.alpha);
  s.beta = j.value("beta", s.beta);
  s.sigma_near = j.value("sigma_near", s.sigma_near);
  s.sigma_far = j.value("sigma_far", s.sigma_far);
  return s;
}

json write_sensor(const SensorModel& s) {
  return {{"range", s.range}, {"alpha", s.alpha}, {"beta", s.beta}, {"sigma_near", s.sigma_near},
          {"sigma_far", s.sigma_far}};
}

// An entity list is either a count or an array of per-entity objects.
template <typename Spec, typename Read>
std::vector<Spec> read_list(const json& doc, const char* key, Read&& read) {
  std::vector<Spec> out;
  if (!doc.contains(key)) return out;
  const json& j = doc.at(key);
  if (j.is_number_integer()) {
    const int n = j.get<int>();
    require(n >= 0, std::string(key) + " count must be non-negative");
    out.resize(static_cast<std::size_t>(n));
  } else if (j.is_array()) {
    for (const json& e : j) out.push_back(read(e));
  } else {
    throw ConfigError(std::string("config: ") + key + " must be a count or an array");
  }
  return out;
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

SensorModel default_sensor() {
  SensorModel s;
  s.range = 6.0;
  s.alpha = 0.1;
  s.beta = Defaults::beta;
  s.sigma_near = Defaults::sigma_min;
  s.sigma_far = Defaults::sigma_max;
  return s;
}

std::vector<SensorModel> heterogeneous_sample(Rng& rng, int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("heterogeneous_sample: need at least one agent");
  std::vector<SensorModel> out;
  for (int i = 0; i < n_agents; ++i) {
    SensorModel s;
    s.range = rng.uniform(Defaults::range_min, Defaults::range_max);
    s.alpha = rng.uniform(Defaults::alpha_min, Defaults::alpha_max);
    s.beta = Defaults::beta;
    const double a = rng.uniform(Defaults::sigma_min, Defaults::sigma_max);
    const double b = rng.uniform(Defaults::sigma_min, Defaults::sigma_max);
    s.sigma_near = std::min(a, b);
    s.sigma_far = std::max(a, b);
    out.push_back(s);
  }
  return out;
}

std::string policy_name(PolicyKind p) {
  switch (p) {
    case PolicyKind::Hybrid: return "hybrid";
    case PolicyKind::RandomWalk: return "random";
    case PolicyKind::Independent: return "independent";
    case PolicyKind::CentralKF: return "central-kf";
    case PolicyKind::Exhaustive: return "exhaustive";
    case PolicyKind::Swarm: return "swarm";
  }
  return "hybrid";
}

PolicyKind parse_policy(const std::string& name) {
  for (PolicyKind p : {PolicyKind::Hybrid, PolicyKind::RandomWalk, PolicyKind::Independent, PolicyKind::CentralKF,
                       PolicyKind::Exhaustive, PolicyKind::Swarm}) {
    if (policy_name(p) == name) return p;
  }
  throw ConfigError("config: unknown policy '" + name + "'");
}

std::shared_ptr<const GridMap> resolve_map(const std::string& spec, const std::filesystem::path& base_dir) {
  if (spec.rfind("open:", 0) == 0) {
    int w = 0, h = 0;
    double res = 1.0;
    char x = 0, colon = 0;
    std::istringstream in(spec.substr(5));
    in >> w >> x >> h;
    if (in >> colon) in >> res;
    require(w > 0 && h > 0 && x == 'x' && res > 0.0, "bad open map spec '" + spec + "'");
    return std::make_shared<const GridMap>(GridMap::open(w, h, res));
  }
  try {
    return std::make_shared<const GridMap>(load_map(resolve_path(spec, base_dir)));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void ScenarioConfig::validate() const {
  require(map != nullptr, "map not loaded");
  require(!agents.empty(), "at least one agent is required");
  require(!targets.empty(), "at least one target is required");
  require(dt > 0.0 && plan_period >= dt, "need 0 < dt <= plan_period");
  require(time_cap >= 0.0, "time_cap must be non-negative");
  require(is_probability(failures.p_cf) && is_probability(failures.p_ef) && is_probability(failures.p_fp) &&
              is_probability(failures.p_hq),
          "failure probabilities must lie in [0, 1]");
  require(failures.latency_ticks >= 0, "latency must be non-negative");
  require(is_probability(weights.w_search) && is_probability(weights.w_track), "weights must lie in [0, 1]");
  require(weights.d_thre >= 0.0, "d_thre must be non-negative");
  require(decay_rate >= 0.0 && trace_thre > 0.0 && hold_time >= 0.0 && track_timeout > 0.0,
          "rates and thresholds must be positive");
  require(unknown_band > 0.0 && unknown_band < 0.5, "unknown_band must lie in (0, 0.5)");
  require(n_headings >= 4 && n_speeds >= 2, "track sampling needs at least 4 headings and 2 speeds");
  if (policy == PolicyKind::Swarm) require(!map->has_obstacles(), "the swarm policy needs an obstacle-free map");

  double slowest_agent = std::numeric_limits<double>::infinity();
  for (const AgentSpec& a : agents) {
    const double s = a.max_speed.value_or(Defaults::agent_speed);
    require(s > 0.0, "agent speed must be positive");
    slowest_agent = std::min(slowest_agent, s);
    if (a.sensor) {
      try {
        a.sensor->validate();
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    if (a.position) require(is_free(*map, *a.position), "agent start position is not free");
  }
  for (const TargetSpec& t : targets) {
    const double s = t.max_speed.value_or(Defaults::target_speed);
    require(s >= 0.0, "target speed must be non-negative");
    require(s < slowest_agent, "every target must be slower than every agent");
    if (t.position) require(is_free(*map, *t.position), "target start position is not free");
  }
  for (const ReporterSpec& r : reporters) {
    require(r.sigma_report.value_or(1.0) > 0.0, "sigma_report must be positive");
    require(r.report_period.value_or(1.0) > 0.0, "report_period must be positive");
    if (r.observed_targets) {
      for (int k : *r.observed_targets) {
        require(k >= 0 && k < static_cast<int>(targets.size()), "reporter observes an unknown target");
      }
    }
  }
  if (toggles.lstm && (policy == PolicyKind::Hybrid)) {
    require(predictor != nullptr, "the LSTM toggle needs predictor weights (set \"predictor\" or disable lstm)");
  }
}

ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require(doc.is_object(), "expected a JSON object");
  ScenarioConfig cfg;
  try {
    cfg.name = doc.value("name", cfg.name);
    cfg.map_spec = doc.value("map", cfg.map_spec);
    cfg.policy = parse_policy(doc.value("policy", policy_name(cfg.policy)));
    cfg.heterogeneous = doc.value("heterogeneous", cfg.heterogeneous);
    cfg.known_target_count = doc.value("known_target_count", cfg.known_target_count);
    cfg.time_cap = doc.value("time_cap", cfg.time_cap);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.dt = doc.value("dt", cfg.dt);
    cfg.plan_period = doc.value("plan_period", cfg.plan_period);
    cfg.decay_rate = doc.value("decay_rate", cfg.decay_rate);
    cfg.trace_thre = doc.value("trace_thre", cfg.trace_thre);
    cfg.hold_time = doc.value("hold_time", cfg.hold_time);
    cfg.track_timeout = doc.value("track_timeout", cfg.track_timeout);
    cfg.unknown_band = doc.value("unknown_band", cfg.unknown_band);
    cfg.n_headings = doc.value("n_headings", cfg.n_headings);
    cfg.n_speeds = doc.value("n_speeds", cfg.n_speeds);
    cfg.snapshot_period = doc.value("snapshot_period", cfg.snapshot_period);
    if (doc.contains("max_search_candidates")) cfg.max_search_candidates = doc["max_search_candidates"].get<std::size_t>();
    if (doc.contains("weights")) {
      const json& w = doc["weights"];
      cfg.weights.w_search = w.value("w_search", cfg.weights.w_search);
      cfg.weights.w_track = w.value("w_track", cfg.weights.w_track);
      cfg.weights.d_thre = w.value("d_thre", cfg.weights.d_thre);
    }
    if (doc.contains("toggles")) {
      const json& t = doc["toggles"];
      cfg.toggles.tr = t.value("tr", cfg.toggles.tr);
      cfg.toggles.tv = t.value("tv", cfg.toggles.tv);
      cfg.toggles.lstm = t.value("lstm", cfg.toggles.lstm);
    }
    if (doc.contains("failures")) {
      const json& f = doc["failures"];
      cfg.failures.p_cf = f.value("p_cf", cfg.failures.p_cf);
      cfg.failures.p_ef = f.value("p_ef", cfg.failures.p_ef);
      cfg.failures.p_fp = f.value("p_fp", cfg.failures.p_fp);
      cfg.failures.p_hq = f.value("p_hq", cfg.failures.p_hq);
      cfg.failures.latency_ticks = f.value("latency_ticks", cfg.failures.latency_ticks);
    }
    if (doc.contains("swarm")) {
      const json& s = doc["swarm"];
      cfg.swarm.separation = s.value("separation", cfg.swarm.separation);
      cfg.swarm.cohesion = s.value("cohesion", cfg.swarm.cohesion);
      cfg.swarm.drift = s.value("drift", cfg.swarm.drift);
      cfg.swarm.attraction = s.value("attraction", cfg.swarm.attraction);
      cfg.swarm.drift_turn = s.value("drift_turn", cfg.swarm.drift_turn);
    }
    cfg.agents = read_list<AgentSpec>(doc, "agents", [](const json& e) {
      AgentSpec a;
      if (e.contains("position")) a.position = read_vec(e["position"]);
      if (e.contains("max_speed")) a.max_speed = e["max_speed"].get<double>();
      if (e.contains("sensor")) a.sensor = read_sensor(e["sensor"]);
      return a;
    });
    cfg.targets = read_list<TargetSpec>(doc, "targets", [&](const json& e) {
      TargetSpec t;
      if (e.contains("position")) t.position = read_vec(e["position"]);
      if (e.contains("max_speed")) t.max_speed = e["max_speed"].get<double>();
      if (e.contains("trajectory")) t.trajectory = resolve_path(e["trajectory"].get<std::string>(), base_dir).string();
      t.loop = e.value("loop", t.loop);
      t.stationary = e.value("stationary", t.stationary);
      return t;
    });
    cfg.reporters = read_list<ReporterSpec>(doc, "reporters", [](const json& e) {
      ReporterSpec r;
      if (e.contains("sigma_report")) r.sigma_report = e["sigma_report"].get<double>();
      if (e.contains("report_period")) r.report_period = e["report_period"].get<double>();
      if (e.contains("observed_targets")) r.observed_targets = e["observed_targets"].get<std::vector<int>>();
      return r;
    });
    cfg.predictor_path = doc.value("predictor", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  cfg.map = resolve_map(cfg.map_spec, base_dir);
  if (!cfg.map_spec.starts_with("open:")) cfg.map_spec = resolve_path(cfg.map_spec, base_dir).string();
  if (!cfg.predictor_path.empty()) {
    cfg.predictor_path = resolve_path(cfg.predictor_path, base_dir).string();
    try {
      cfg.predictor = std::make_shared<const PredictorWeights>(load_weights(cfg.predictor_path));
    } catch (const ParseError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ScenarioConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  doc["map"] = cfg.map_spec;
  doc["policy"] = policy_name(cfg.policy);
  doc["heterogeneous"] = cfg.heterogeneous;
  doc["known_target_count"] = cfg.known_target_count;
  doc["time_cap"] = cfg.time_cap;
  doc["seed"] = cfg.seed;
  doc["dt"] = cfg.dt;
  doc["plan_period"] = cfg.plan_period;
  doc["decay_rate"] = cfg.decay_rate;
  doc["trace_thre"] = cfg.trace_thre;
  doc["hold_time"] = cfg.hold_time;
  doc["track_timeout"] = cfg.track_timeout;
  doc["unknown_band"] = cfg.unknown_band;
  doc["n_headings"] = cfg.n_headings;
  doc["n_speeds"] = cfg.n_speeds;
  doc["snapshot_period"] = cfg.snapshot_period;
  if (cfg.max_search_candidates) doc["max_search_candidates"] = *cfg.max_search_candidates;
  doc["weights"] = {{"w_search", cfg.weights.w_search}, {"w_track", cfg.weights.w_track}, {"d_thre", cfg.weights.d_thre}};
  doc["toggles"] = {{"tr", cfg.toggles.tr}, {"tv", cfg.toggles.tv}, {"lstm", cfg.toggles.lstm}};
  doc["failures"] = {{"p_cf", cfg.failures.p_cf},
                     {"p_ef", cfg.failures.p_ef},
                     {"p_fp", cfg.failures.p_fp},
                     {"p_hq", cfg.failures.p_hq},
                     {"latency_ticks", cfg.failures.latency_ticks}};
  doc["swarm"] = {{"separation", cfg.swarm.separation},
                  {"cohesion", cfg.swarm.cohesion},
                  {"drift", cfg.swarm.drift},
                  {"attraction", cfg.swarm.attraction},
                  {"drift_turn", cfg.swarm.drift_turn}};
  json agents = json::array();
  for (const AgentSpec& a : cfg.agents) {
    json e = json::object();
    if (a.position) e["position"] = write_vec(*a.position);
    if (a.max_speed) e["max_speed"] = *a.max_speed;
    if (a.sensor) e["sensor"] = write_sensor(*a.sensor);
    agents.push_back(e);
  }
  doc["agents"] = agents;
  json targets = json::array();
  for (const TargetSpec& t : cfg.targets) {
    json e = json::object();
    if (t.position) e["position"] = write_vec(*t.position);
    if (t.max_speed) e["max_speed"] = *t.max_speed;
    if (t.trajectory) e["trajectory"] = *t.trajectory;
    e["loop"] = t.loop;
    e["stationary"] = t.stationary;
    targets.push_back(e);
  }
  doc["targets"] = targets;
  json reporters = json::array();
  for (const ReporterSpec& r : cfg.reporters) {
    json e = json::object();
    if (r.sigma_report) e["sigma_report"] = *r.sigma_report;
    if (r.report_period) e["report_period"] = *r.report_period;
    if (r.observed_targets) e["observed_targets"] = *r.observed_targets;
    reporters.push_back(e);
  }
  doc["reporters"] = reporters;
  if (!cfg.predictor_path.empty()) doc["predictor"] = cfg.predictor_path;
  return doc.dump(2);
}

}  // namespace sat
