// usvnav command line: run / validate / replay scenarios, and a mock TD server.
#include "usvnav/heartbeat.hpp"
#include "usvnav/outputs.hpp"
#include "usvnav/scenario.hpp"
#include "usvnav/simulation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

namespace {

namespace hb = usvnav::heartbeat;
namespace hs = usvnav::harness;

constexpr int kExitSuccess = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitError = 2;

volatile std::sig_atomic_t g_interrupted = 0;

struct RunOptions {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string td_host;
  std::optional<std::uint16_t> td_port;
  std::optional<std::string> team_id;
  std::optional<double> heartbeat_hz;
};

int cmd_run(const RunOptions& o) {
  hs::Scenario sc = hs::load_scenario(o.scenario);
  if (o.seed) sc.seed = *o.seed;
  if (o.duration) sc.sim.duration = *o.duration;
  if (!o.td_host.empty()) sc.heartbeat.client.host = o.td_host;
  if (o.td_port) sc.heartbeat.client.port = *o.td_port;
  if (o.team_id) sc.heartbeat.client.team_id = *o.team_id;
  if (o.heartbeat_hz) sc.heartbeat.client.rate_hz = *o.heartbeat_hz;
  if (o.td_port || !o.td_host.empty()) sc.heartbeat.enabled = true;
  hs::validate(sc);

  hb::SnapshotChannel<hb::VehicleSnapshot> channel;
  std::unique_ptr<hb::HeartbeatClient> client;
  hs::RunHooks hooks;
  if (sc.heartbeat.enabled) {
    client = std::make_unique<hb::HeartbeatClient>(sc.heartbeat.client, channel);
    client->start();
    hooks.publish = [&channel](const hb::VehicleSnapshot& s) { channel.publish(s); };
  }

  const hs::RunResult result = hs::run(sc, hooks);
  if (client) {
    // The sim outruns the wall clock; give the link a moment to report the final state.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (client->sent() == 0 && client->connect_failures() == 0 && std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    client->stop();
    std::cout << "heartbeat: sent " << client->sent() << ", connect failures " << client->connect_failures()
              << "\n";
  }

  const std::string out_dir = o.out.empty() ? "out/" + sc.name : o.out;
  const auto files = hs::emit_outputs(result, sc, out_dir);
  const auto& m = result.metrics;
  std::cout << "scenario " << sc.name << " seed " << sc.seed << ": " << hs::to_string(m.status) << "\n"
            << "  ticks " << m.ticks << ", replans " << m.replans << ", rmse_position " << m.rmse_position
            << " m, min_clearance " << m.min_clearance << " m\n";
  for (const auto& g : m.gates)
    std::cout << "  gate " << g.gate << ": " << (g.crossed ? "crossed at t=" + std::to_string(g.t) : "not crossed")
              << "\n";
  if (!m.error.empty()) std::cout << "  error: " << m.error << "\n";
  std::cout << "  wrote " << files.log.string() << ", " << files.metrics.string() << ", " << files.svg.string()
            << "\n";
  return m.status == hs::RunStatus::Success ? kExitSuccess : kExitTaskFailure;
}

int cmd_validate(const std::string& path) {
  const hs::Scenario sc = hs::load_scenario(path);
  std::cout << path << ": ok (" << sc.name << ", " << sc.world.buoys.size() << " buoys, "
            << sc.world.circles.size() + sc.world.polygons.size() << " obstacles)\n";
  return kExitSuccess;
}

int cmd_replay(const std::string& path, bool plot, const std::string& svg_out) {
  const auto rows = hs::read_log_csv(path);
  std::cout << path << ": " << rows.size() << " rows";
  if (!rows.empty())
    std::cout << ", t " << rows.front().t << ".." << rows.back().t << " s, final bt "
              << hs::to_string(rows.back().bt);
  std::cout << ", rmse_position " << hs::rmse_position(rows) << " m\n";
  if (plot) {
    std::filesystem::path out = svg_out;
    if (out.empty()) out = std::filesystem::path(path).replace_extension(".svg");
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write '" + out.string() + "'");
    hs::write_trajectory_svg(rows, {}, {}, f);
    std::cout << "wrote " << out.string() << "\n";
  }
  return kExitSuccess;
}

int cmd_td_server(std::uint16_t port, double seconds) {
  hb::MockServer server(port, &std::cout);
  std::cout << "mock TD server listening on port " << server.port() << std::endl;
  std::signal(SIGINT, [](int) { g_interrupted = 1; });
  std::signal(SIGTERM, [](int) { g_interrupted = 1; });
  const auto start = std::chrono::steady_clock::now();
  while (g_interrupted == 0) {
    if (seconds > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= seconds)
      break;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
  std::size_t valid = 0, bad = 0;
  for (const auto& r : server.records()) (r.sentence ? valid : bad)++;
  std::cout << "received " << valid << " valid, " << bad << " malformed\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"usvnav: planar USV navigation stack and simulator"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write log.csv, metrics.json, trajectory.svg");
  run_cmd->add_option("scenario", run.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory (default out/<scenario name>)");
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--duration", run.duration, "Override the simulated duration [s]");
  run_cmd->add_option("--td-host", run.td_host, "Technical Director server host");
  run_cmd->add_option("--td-port", run.td_port, "Technical Director server port");
  run_cmd->add_option("--team-id", run.team_id, "Team id in heartbeat sentences");
  run_cmd->add_option("--heartbeat-hz", run.heartbeat_hz, "Heartbeat rate");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate a scenario");
  validate_cmd->add_option("scenario", validate_path, "Scenario file")->required();

  std::string replay_path, replay_svg;
  bool replay_plot = false;
  auto* replay_cmd = app.add_subcommand("replay", "Summarize a log.csv and optionally plot it");
  replay_cmd->add_option("log", replay_path, "log.csv from a run")->required()->check(CLI::ExistingFile);
  replay_cmd->add_flag("--plot", replay_plot, "Write an SVG of the logged tracks");
  replay_cmd->add_option("--svg", replay_svg, "SVG output path (default next to the log)");

  std::uint16_t server_port = 9000;
  double server_seconds = 0.0;
  auto* server_cmd = app.add_subcommand("td-server", "Run a mock Technical Director server");
  server_cmd->add_option("--port", server_port, "Listen port (0 picks one)");
  server_cmd->add_option("--duration", server_seconds, "Stop after this many seconds (0 runs until Ctrl-C)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*replay_cmd) return cmd_replay(replay_path, replay_plot, replay_svg);
    if (*server_cmd) return cmd_td_server(server_port, server_seconds);
  } catch (const hs::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
