#pragma once

#include "sat/config.hpp"
#include "sat/harness.hpp"

#include <string>
#include <vector>

namespace sat {

struct PathRow {
  /// "agent:<id>" or "target:<id>".
  std::string entity;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  /// agent, target, or cleared for a target after its clear event.
  std::string kind;
};

/// One row per pose event, in trace order.
std::vector<PathRow> extract_paths(const Trace& trace);
std::string paths_to_csv(const std::vector<PathRow>& rows);

/// Re-simulates `cfg` under the trace's seed and compares event by event.
/// Throws ParseError when the trace was written by another engine version.
bool replay_check(const Trace& trace, const ScenarioConfig& cfg);

}  // namespace sat
