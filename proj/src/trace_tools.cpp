#include "sat/trace_tools.hpp"

#include "sat/errors.hpp"

#include <iomanip>
#include <sstream>

namespace sat {

std::vector<PathRow> extract_paths(const Trace& trace) {
  std::vector<PathRow> rows;
  for (const auto& e : trace.events) {
    if (e.kind != "pose") continue;
    const auto& d = e.payload;
    const std::string entity = d.at("entity").get<std::string>();
    PathRow r;
    r.entity = entity + ":" + std::to_string(d.at("id").get<int>());
    r.t = e.t;
    r.x = d.at("x").get<double>();
    r.y = d.at("y").get<double>();
    r.kind = entity == "target" && d.value("cleared", false) ? "cleared" : entity;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string paths_to_csv(const std::vector<PathRow>& rows) {
  std::ostringstream os;
  os << "entity,t,x,y,kind\n" << std::setprecision(10);
  for (const auto& r : rows) os << r.entity << ',' << r.t << ',' << r.x << ',' << r.y << ',' << r.kind << '\n';
  return os.str();
}

bool replay_check(const Trace& trace, const ScenarioConfig& cfg) {
  if (trace.version != kTraceVersion) {
    throw ParseError("trace: version '" + trace.version + "' does not match engine version '" + kTraceVersion + "'");
  }
  ScenarioConfig replay = cfg;
  replay.seed = trace.seed;
  if (!trace.policy.empty() && trace.policy != policy_name(cfg.policy)) return false;
  const auto again = run_episode(replay, EpisodeOptions{true, Exec::Serial});
  return trace_to_jsonl(again.trace) == trace_to_jsonl(trace);
}

}  // namespace sat
