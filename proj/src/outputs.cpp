#include "usvnav/outputs.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace usvnav::harness {

namespace {

constexpr const char* kHeader =
    "t,x,y,psi,u,v,omega,est_x,est_y,est_psi,est_u,est_v,est_omega,fx,fy,fyaw,cmd_v,cmd_omega,"
    "goal_x,goal_y,goal_psi,bt_status,objects";
constexpr std::size_t kColumns = 23;

void put(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t row) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("log.csv row " + std::to_string(row) + ": bad number '" + std::string(s) + "'");
  return v;
}

BtStatus parse_bt(std::string_view s, std::size_t row) {
  for (BtStatus b : {BtStatus::Idle, BtStatus::Running, BtStatus::Success, BtStatus::Failure})
    if (to_string(b) == s) return b;
  throw std::runtime_error("log.csv row " + std::to_string(row) + ": bad bt_status '" + std::string(s) + "'");
}

std::string fmt(double v) {
  std::string s;
  put(s, v);
  return s;
}

}  // namespace

void write_log_csv(const std::vector<LogRow>& rows, std::ostream& os) {
  os << kHeader << '\n';
  std::string line;
  for (const auto& r : rows) {
    line.clear();
    for (double v : {r.t, r.x, r.y, r.psi, r.u, r.v, r.omega, r.est_x, r.est_y, r.est_psi, r.est_u, r.est_v,
                     r.est_omega, r.fx, r.fy, r.fyaw, r.cmd_v, r.cmd_omega}) {
      put(line, v);
      line += ',';
    }
    if (r.has_goal) {
      put(line, r.goal_x);
      line += ',';
      put(line, r.goal_y);
      line += ',';
      put(line, r.goal_psi);
      line += ',';
    } else {
      line += ",,,";
    }
    line += to_string(r.bt);
    line += ',';
    line += std::to_string(r.objects);
    os << line << '\n';
  }
}

std::vector<LogRow> parse_log_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw std::runtime_error("log.csv: missing or unexpected header");
  std::vector<LogRow> rows;
  std::size_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto pos = rest.find(',');
      f.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != kColumns)
      throw std::runtime_error("log.csv row " + std::to_string(row_no) + ": expected " +
                               std::to_string(kColumns) + " columns");
    LogRow r;
    double* nums[] = {&r.t, &r.x, &r.y, &r.psi, &r.u, &r.v, &r.omega, &r.est_x, &r.est_y, &r.est_psi,
                      &r.est_u, &r.est_v, &r.est_omega, &r.fx, &r.fy, &r.fyaw, &r.cmd_v, &r.cmd_omega};
    for (std::size_t i = 0; i < 18; ++i) *nums[i] = parse_double(f[i], row_no);
    if (!f[18].empty()) {
      r.has_goal = true;
      r.goal_x = parse_double(f[18], row_no);
      r.goal_y = parse_double(f[19], row_no);
      r.goal_psi = parse_double(f[20], row_no);
    }
    r.bt = parse_bt(f[21], row_no);
    r.objects = static_cast<std::size_t>(parse_double(f[22], row_no));
    rows.push_back(r);
  }
  return rows;
}

std::vector<LogRow> read_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return parse_log_csv(in);
}

std::string metrics_json(const Metrics& m, const std::string& scenario_name, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["scenario"] = scenario_name;
  j["seed"] = seed;
  j["status"] = std::string(to_string(m.status));
  j["completed"] = m.completed;
  j["completion_time"] = m.completion_time ? nlohmann::ordered_json(*m.completion_time) : nullptr;
  j["rmse_position"] = m.rmse_position;
  j["min_clearance"] = std::isfinite(m.min_clearance) ? nlohmann::ordered_json(m.min_clearance) : nullptr;
  j["sim_duration"] = m.sim_duration;
  j["ticks"] = m.ticks;
  j["replans"] = m.replans;
  auto gates = nlohmann::ordered_json::array();
  for (const auto& g : m.gates) {
    nlohmann::ordered_json e;
    e["gate"] = g.gate;
    e["crossed"] = g.crossed;
    e["time"] = g.crossed ? nlohmann::ordered_json(g.t) : nullptr;
    gates.push_back(e);
  }
  j["gates"] = gates;
  j["gates_in_order"] = m.gates_in_order;
  j["error"] = m.error.empty() ? nullptr : nlohmann::ordered_json(m.error);
  return j.dump(2) + "\n";
}

void write_trajectory_svg(const std::vector<LogRow>& rows, const std::vector<PlannedPath>& paths,
                          const perception::World& world, std::ostream& os) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  const auto grow = [&](double x, double y, double r = 0.0) {
    x0 = std::min(x0, x - r);
    y0 = std::min(y0, y - r);
    x1 = std::max(x1, x + r);
    y1 = std::max(y1, y + r);
  };
  for (const auto& r : rows) {
    grow(r.x, r.y);
    grow(r.est_x, r.est_y);
  }
  for (const auto& p : paths)
    for (const auto& q : p.points) grow(q.x(), q.y());
  for (const auto& c : world.circles) grow(c.center.x(), c.center.y(), c.radius);
  for (const auto& b : world.buoys) grow(b.shape.center.x(), b.shape.center.y(), b.shape.radius);
  for (const auto& poly : world.polygons)
    for (const auto& v : poly.vertices) grow(v.x(), v.y());
  if (!(x0 <= x1)) x0 = y0 = 0.0, x1 = y1 = 1.0;
  const double pad = 2.0;
  x0 -= pad, y0 -= pad, x1 += pad, y1 += pad;
  const double scale = 800.0 / std::max(x1 - x0, y1 - y0);
  const auto X = [&](double x) { return fmt((x - x0) * scale); };
  const auto Y = [&](double y) { return fmt((y1 - y) * scale); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt((x1 - x0) * scale) << "\" height=\""
     << fmt((y1 - y0) * scale) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& c : world.circles)
    os << "<circle class=\"obstacle\" cx=\"" << X(c.center.x()) << "\" cy=\"" << Y(c.center.y()) << "\" r=\""
       << fmt(c.radius * scale) << "\" fill=\"#888\"/>\n";
  for (const auto& poly : world.polygons) {
    os << "<polygon class=\"obstacle\" fill=\"#888\" points=\"";
    for (const auto& v : poly.vertices) os << X(v.x()) << ',' << Y(v.y()) << ' ';
    os << "\"/>\n";
  }
  for (const auto& b : world.buoys) {
    const std::string color = b.label == "red" ? "red" : b.label == "green" ? "green" : "#333";
    os << "<circle class=\"buoy\" cx=\"" << X(b.shape.center.x()) << "\" cy=\"" << Y(b.shape.center.y())
       << "\" r=\"" << fmt(std::max(b.shape.radius * scale, 3.0)) << "\" fill=\"" << color << "\"/>\n";
  }
  const auto polyline = [&](const char* cls, const char* color, const auto& pts) {
    os << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) os << X(x) << ',' << Y(y) << ' ';
    os << "\"/>\n";
  };
  for (const auto& p : paths) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& q : p.points) pts.emplace_back(q.x(), q.y());
    polyline("plan", "#f90", pts);
  }
  std::vector<std::pair<double, double>> truth, est;
  for (const auto& r : rows) {
    truth.emplace_back(r.x, r.y);
    est.emplace_back(r.est_x, r.est_y);
  }
  polyline("truth", "blue", truth);
  polyline("estimate", "#0aa", est);
  os << "</svg>\n";
}

OutputFiles emit_outputs(const RunResult& result, const Scenario& scenario, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  OutputFiles files{dir / "log.csv", dir / "metrics.json", dir / "trajectory.svg"};
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    return f;
  };
  {
    auto f = open(files.log);
    write_log_csv(result.rows, f);
    if (!f) throw std::runtime_error("write failed: " + files.log.string());
  }
  {
    auto f = open(files.metrics);
    f << metrics_json(result.metrics, scenario.name, scenario.seed);
    if (!f) throw std::runtime_error("write failed: " + files.metrics.string());
  }
  {
    auto f = open(files.svg);
    write_trajectory_svg(result.rows, result.paths, scenario.world, f);
    if (!f) throw std::runtime_error("write failed: " + files.svg.string());
  }
  return files;
}

}  // namespace usvnav::harness
