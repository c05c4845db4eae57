// Run artifacts: log.csv, metrics.json and trajectory.svg.
//
// log.csv columns, one row per tick:
//   t, x, y, psi, u, v, omega                 ground truth
//   est_x, est_y, est_psi, est_u, est_v, est_omega
//   fx, fy, fyaw                              applied wrench
//   cmd_v, cmd_omega                          follower command
//   goal_x, goal_y, goal_psi                  empty when no goal is active
//   bt_status                                 IDLE, RUNNING, SUCCESS or FAILURE
//   objects                                   fused object count
//
// Doubles are written in shortest round-trip form, so values read back are
// bit-identical to the logged ones.
#pragma once

#include "usvnav/scenario.hpp"
#include "usvnav/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace usvnav::harness {

void write_log_csv(const std::vector<LogRow>& rows, std::ostream& os);
/// Throws std::runtime_error on I/O or format errors.
std::vector<LogRow> read_log_csv(const std::filesystem::path& path);
std::vector<LogRow> parse_log_csv(std::istream& is);

std::string metrics_json(const Metrics& m, const std::string& scenario_name, std::uint64_t seed);

/// Ground truth and estimate tracks plus one polyline per planned path.
/// world may be empty (replay).
void write_trajectory_svg(const std::vector<LogRow>& rows, const std::vector<PlannedPath>& paths,
                          const perception::World& world, std::ostream& os);

struct OutputFiles {
  std::filesystem::path log;
  std::filesystem::path metrics;
  std::filesystem::path svg;
};

/// Creates dir if needed. Throws std::runtime_error if it cannot be written.
OutputFiles emit_outputs(const RunResult& result, const Scenario& scenario, const std::filesystem::path& dir);

}  // namespace usvnav::harness
