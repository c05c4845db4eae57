#include "usvnav/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace usvnav::harness {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw ScenarioError(ScenarioError::Kind::Validation, path, msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Object accessor that records which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) invalid(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return join(path_, key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = raw(key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) invalid(at(key), "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) invalid(at(key), "must be finite");
    return d;
  }

  double required_number(const std::string& key) {
    if (!j_.contains(key)) invalid(at(key), "required field missing");
    return number(key, 0.0);
  }

  std::uint64_t required_unsigned(const std::string& key) {
    const json* v = raw(key);
    if (v == nullptr) invalid(at(key), "required field missing");
    if (!v->is_number_unsigned()) invalid(at(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const json* v = raw(key);
    if (v == nullptr) return fallback;
    if (!v->is_number_unsigned()) invalid(at(key), "expected a non-negative integer");
    return v->get<std::size_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = raw(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) invalid(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = raw(key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) invalid(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::string required_text(const std::string& key) {
    if (!j_.contains(key)) invalid(at(key), "required field missing");
    return text(key, "");
  }

  std::optional<Reader> child(const std::string& key) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    return Reader(*v, at(key));
  }

  const json& array(const std::string& key) {
    const json* v = raw(key);
    if (v == nullptr) return empty_array();
    if (!v->is_array()) invalid(at(key), "expected an array");
    return *v;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.contains(k)) invalid(at(k), "unknown key");
  }

 private:
  static const json& empty_array() {
    static const json a = json::array();
    return a;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Vec2 read_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    invalid(path, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

perception::Circle read_circle(Reader& r) {
  return {Vec2(r.required_number("x"), r.required_number("y")), r.required_number("radius")};
}

void read_world(Reader& r, perception::World& world) {
  const json& obstacles = r.array("obstacles");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    Reader o(obstacles[i], r.at("obstacles") + "[" + std::to_string(i) + "]");
    const std::string type = o.required_text("type");
    if (type == "circle") {
      world.circles.push_back(read_circle(o));
    } else if (type == "polygon") {
      perception::Polygon poly;
      const json& verts = o.array("vertices");
      for (std::size_t k = 0; k < verts.size(); ++k)
        poly.vertices.push_back(read_point(verts[k], o.at("vertices") + "[" + std::to_string(k) + "]"));
      world.polygons.push_back(std::move(poly));
    } else {
      invalid(o.at("type"), "unknown obstacle type '" + type + "'");
    }
    o.finish();
  }
  const json& buoys = r.array("buoys");
  for (std::size_t i = 0; i < buoys.size(); ++i) {
    Reader b(buoys[i], r.at("buoys") + "[" + std::to_string(i) + "]");
    perception::Buoy buoy;
    buoy.label = b.required_text("label");
    buoy.shape = read_circle(b);
    b.finish();
    world.buoys.push_back(std::move(buoy));
  }
  r.finish();
}

void read_sensors(Reader& r, SensorSpecs& s) {
  if (auto g = r.child("gnss")) {
    s.gnss.rate_hz = g->number("rate_hz", s.gnss.rate_hz);
    s.gnss.sigma = g->number("sigma", s.gnss.sigma);
    g->finish();
  }
  if (auto i = r.child("imu")) {
    s.imu.rate_hz = i->number("rate_hz", s.imu.rate_hz);
    s.imu.sigma_psi = i->number("sigma_psi", s.imu.sigma_psi);
    s.imu.sigma_omega = i->number("sigma_omega", s.imu.sigma_omega);
    i->finish();
  }
  if (auto l = r.child("lidar")) {
    s.lidar.rate_hz = l->number("rate_hz", s.lidar.rate_hz);
    const std::size_t beams = l->count("beams", s.lidar.geometry.count);
    if (beams < 2) invalid(l->at("beams"), "must be >= 2");
    s.lidar.geometry.count = beams;
    s.lidar.geometry.angle_increment = 2.0 * std::numbers::pi / static_cast<double>(beams);
    s.lidar.geometry.range_max = l->number("range_max", s.lidar.geometry.range_max);
    s.lidar.noise_sigma = l->number("noise_sigma", s.lidar.noise_sigma);
    s.lidar.outlier_k = static_cast<int>(l->count("outlier_k", static_cast<std::size_t>(s.lidar.outlier_k)));
    s.lidar.outlier_thresh = l->number("outlier_thresh", s.lidar.outlier_thresh);
    l->finish();
  }
  bool mounts_given = false;
  if (auto c = r.child("camera")) {
    s.camera.rate_hz = c->number("rate_hz", s.camera.rate_hz);
    s.camera.sim.miss_rate = c->number("miss_rate", s.camera.sim.miss_rate);
    s.camera.sim.bbox_jitter_px = c->number("jitter_px", s.camera.sim.bbox_jitter_px);
    const json& mounts = c->array("mounts");
    for (std::size_t i = 0; i < mounts.size(); ++i) {
      Reader m(mounts[i], c->at("mounts") + "[" + std::to_string(i) + "]");
      const auto width = static_cast<int>(m.count("width", 1280));
      const auto height = static_cast<int>(m.count("height", 720));
      const double fov_deg = m.number("diagonal_fov_deg", 120.0);
      if (width <= 0 || height <= 0) invalid(m.path(), "image size must be > 0");
      if (!(fov_deg > 0.0 && fov_deg < 180.0)) invalid(m.at("diagonal_fov_deg"), "must be in (0, 180)");
      auto cam = perception::CameraModel::from_diagonal_fov(width, height, fov_deg * std::numbers::pi / 180.0);
      cam.mount_x = m.number("x", 0.0);
      cam.mount_y = m.number("y", 0.0);
      cam.mount_z = m.number("z", cam.mount_z);
      cam.mount_yaw = m.number("yaw_deg", 0.0) * std::numbers::pi / 180.0;
      m.finish();
      s.camera.mounts.push_back(cam);
    }
    mounts_given = c->raw("mounts") != nullptr;
    c->finish();
  }
  if (!mounts_given)
    s.camera.mounts.push_back(perception::CameraModel::from_diagonal_fov(1280, 720, 2.0 * std::numbers::pi / 3.0));
  r.finish();
}

behavior::NodeSpec read_tree(const json& j, const std::string& path) {
  Reader r(j, path);
  behavior::NodeSpec spec;
  spec.kind = r.required_text("type");
  spec.name = spec.kind == "sequence" ? r.text("name", "") : r.required_text("name");
  if (auto params = r.child("params")) {
    const json* raw = &j.at("params");
    for (const auto& [k, v] : raw->items()) {
      if (v.is_number()) spec.numbers[k] = v.get<double>();
      else if (v.is_string()) spec.strings[k] = v.get<std::string>();
      else invalid(params->at(k), "parameter must be a number or string");
      params->raw(k);
    }
    params->finish();
  }
  const json& children = r.array("children");
  for (std::size_t i = 0; i < children.size(); ++i)
    spec.children.push_back(read_tree(children[i], r.at("children") + "[" + std::to_string(i) + "]"));
  r.finish();
  return spec;
}

void read_heartbeat(Reader& r, HeartbeatSpec& h) {
  h.enabled = r.boolean("enabled", h.enabled);
  h.client.host = r.text("host", h.client.host);
  const double port = r.number("port", h.client.port);
  if (port < 1 || port > 65535 || port != std::floor(port)) invalid(r.at("port"), "must be an integer in [1, 65535]");
  h.client.port = static_cast<std::uint16_t>(port);
  h.client.rate_hz = r.number("rate_hz", h.client.rate_hz);
  h.client.team_id = r.text("team_id", h.client.team_id);
  h.client.clock.date = r.text("date", h.client.clock.date);
  const std::string start = r.text("start_time", "000000");
  if (start.size() != 6 || start.find_first_not_of("0123456789") != std::string::npos)
    invalid(r.at("start_time"), "expected hhmmss");
  h.client.clock.start_seconds_of_day =
      std::stoi(start.substr(0, 2)) * 3600 + std::stoi(start.substr(2, 2)) * 60 + std::stoi(start.substr(4, 2));
  if (auto d = r.child("datum")) {
    h.client.datum.lat0 = d->number("lat0", h.client.datum.lat0);
    h.client.datum.lon0 = d->number("lon0", h.client.datum.lon0);
    h.client.datum.m_per_deg = d->number("m_per_deg", h.client.datum.m_per_deg);
    d->finish();
  }
  r.finish();
}

Scenario from_json(const json& doc) {
  Reader root(doc, "");
  Scenario s;
  const json* version = root.raw("schema_version");
  if (version == nullptr) invalid("schema_version", "required field missing");
  if (!version->is_number_integer() || version->get<int>() != kSchemaVersion)
    invalid("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  s.name = root.required_text("name");
  s.seed = root.required_unsigned("seed");

  if (auto r = root.child("sim")) {
    s.sim.duration = r->number("duration", s.sim.duration);
    s.sim.dt = r->number("dt", s.sim.dt);
    r->finish();
  }
  if (auto r = root.child("vessel")) {
    auto& v = s.vessel;
    v.m = r->number("m", v.m);
    v.mx = r->number("mx", v.mx);
    v.my = r->number("my", v.my);
    v.Iz = r->number("Iz", v.Iz);
    v.Jz = r->number("Jz", v.Jz);
    v.w = r->number("thruster_separation", v.w);
    v.hull_width = r->number("hull_width", v.hull_width);
    v.max_thrust = r->number("max_thrust", v.max_thrust);
    if (const json* d = r->raw("linear_drag")) {
      if (!d->is_array() || d->size() != 3) invalid(r->at("linear_drag"), "expected [d_u, d_v, d_r]");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*d)[i].is_number()) invalid(r->at("linear_drag"), "expected numbers");
        v.lin_drag(static_cast<Eigen::Index>(i)) = (*d)[i].get<double>();
      }
    }
    const std::string mode = r->text("coriolis", "skew_corrected");
    if (mode == "skew_corrected") s.coriolis = dynamics::CoriolisMode::SkewCorrected;
    else if (mode == "paper_literal") s.coriolis = dynamics::CoriolisMode::PaperLiteral;
    else invalid(r->at("coriolis"), "expected skew_corrected or paper_literal");
    r->finish();
  }
  if (auto r = root.child("propeller")) {
    auto& p = s.propeller;
    p.rho = r->number("rho", p.rho);
    p.Dp = r->number("diameter", p.Dp);
    p.k0 = r->number("k0", p.k0);
    p.k1 = r->number("k1", p.k1);
    p.k2 = r->number("k2", p.k2);
    p.n_max = r->number("n_max", p.n_max);
    r->finish();
  }
  if (auto r = root.child("controller")) {
    s.controller.kp_surge = r->number("kp_surge", s.controller.kp_surge);
    s.controller.kp_yaw = r->number("kp_yaw", s.controller.kp_yaw);
    r->finish();
  }
  if (auto r = root.child("world")) read_world(*r, s.world);
  if (auto r = root.child("start")) {
    s.start = Pose2D{r->number("x", 0.0), r->number("y", 0.0),
                     r->number("psi_deg", 0.0) * std::numbers::pi / 180.0};
    r->finish();
  }
  if (auto r = root.child("sensors")) read_sensors(*r, s.sensors);
  else s.sensors.camera.mounts.push_back(
      perception::CameraModel::from_diagonal_fov(1280, 720, 2.0 * std::numbers::pi / 3.0));
  if (auto r = root.child("localization")) {
    auto& l = s.localization;
    if (auto q = r->child("process_noise")) {
      l.process_noise.pos = q->number("pos", l.process_noise.pos);
      l.process_noise.psi = q->number("psi", l.process_noise.psi);
      l.process_noise.u = q->number("u", l.process_noise.u);
      l.process_noise.v = q->number("v", l.process_noise.v);
      l.process_noise.omega = q->number("omega", l.process_noise.omega);
      q->finish();
    }
    l.initial_sigma_pos = r->number("initial_sigma_pos", l.initial_sigma_pos);
    l.initial_sigma_psi = r->number("initial_sigma_psi", l.initial_sigma_psi);
    l.initial_sigma_vel = r->number("initial_sigma_vel", l.initial_sigma_vel);
    r->finish();
  }
  if (auto r = root.child("perception")) {
    auto& p = s.perception;
    p.segmentation.base_thresh = r->number("base_thresh", p.segmentation.base_thresh);
    p.segmentation.slope = r->number("slope", p.segmentation.slope);
    p.segmentation.min_points = r->count("min_points", p.segmentation.min_points);
    p.iou_gate = r->number("iou_gate", p.iou_gate);
    s.sensors.camera.sim.object_height = r->number("object_height", s.sensors.camera.sim.object_height);
    r->finish();
  }
  if (auto r = root.child("planner")) {
    auto& p = s.planner;
    p.margin = r->number("margin", p.margin);
    p.a_max = r->number("a_max", p.a_max);
    p.a_dec = r->number("a_dec", p.a_dec);
    p.omega_max = r->number("omega_max", p.omega_max);
    p.v_cruise = r->number("v_cruise", p.v_cruise);
    p.standoff = r->number("standoff", p.standoff);
    p.speed_levels = r->count("speed_levels", p.speed_levels);
    p.offset_spacing = r->number("offset_spacing", p.offset_spacing);
    p.offset_extent = r->number("offset_extent", p.offset_extent);
    p.sample_spacing = r->number("sample_spacing", p.sample_spacing);
    r->finish();
  }
  if (auto r = root.child("follower")) {
    auto& f = s.follower;
    f.lookahead = r->number("lookahead", f.lookahead);
    f.v_from_profile = r->boolean("v_from_profile", f.v_from_profile);
    f.v_fixed = r->number("v_fixed", f.v_fixed);
    f.extension_len = r->number("extension_len", f.extension_len);
    r->finish();
  }
  {
    auto r = root.child("behavior");
    if (!r) invalid("behavior", "required field missing");
    auto& d = s.behavior.defaults;
    if (auto t = r->child("tolerance")) {
      d.tolerance.position = t->number("position", d.tolerance.position);
      d.tolerance.heading = t->number("heading", d.tolerance.heading);
      t->finish();
    }
    if (auto m = r->child("markers")) {
      d.markers.red_label = m->text("red_label", d.markers.red_label);
      d.markers.green_label = m->text("green_label", d.markers.green_label);
      d.markers.min_ahead = m->number("min_ahead", d.markers.min_ahead);
      d.markers.min_width = m->number("min_width", d.markers.min_width);
      d.markers.max_width = m->number("max_width", d.markers.max_width);
      m->finish();
    }
    const json* tree = r->raw("tree");
    if (tree == nullptr) invalid(r->at("tree"), "required field missing");
    s.behavior.tree = read_tree(*tree, r->at("tree"));
    r->finish();
  }
  if (auto r = root.child("evaluation")) {
    const json& gates = r->array("gates");
    for (std::size_t i = 0; i < gates.size(); ++i) {
      const std::string path = r->at("gates") + "[" + std::to_string(i) + "]";
      const json& g = gates[i];
      if (!g.is_array() || g.size() != 2 || !g[0].is_number_unsigned() || !g[1].is_number_unsigned())
        invalid(path, "expected a pair of buoy indices");
      s.gates.push_back({g[0].get<std::size_t>(), g[1].get<std::size_t>()});
    }
    r->finish();
  }
  if (auto r = root.child("heartbeat")) read_heartbeat(*r, s.heartbeat);
  root.finish();
  return s;
}

template <typename F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    invalid(path, e.what());
  }
}

void positive(const std::string& path, double v) {
  if (!(v > 0.0)) invalid(path, "must be > 0");
}

void non_negative(const std::string& path, double v) {
  if (!(v >= 0.0)) invalid(path, "must be >= 0");
}

}  // namespace

void validate(const Scenario& s) {
  if (s.name.empty()) invalid("name", "must not be empty");
  positive("sim.duration", s.sim.duration);
  positive("sim.dt", s.sim.dt);
  if (s.sim.dt > s.sim.duration) invalid("sim.dt", "must not exceed sim.duration");
  check("vessel", [&] { s.vessel.validate(); });
  check("propeller", [&] { s.propeller.validate(); });
  if (!(s.propeller.k0 > 0.0)) invalid("propeller.k0", "must be > 0");
  non_negative("controller.kp_surge", s.controller.kp_surge);
  non_negative("controller.kp_yaw", s.controller.kp_yaw);

  for (std::size_t i = 0; i < s.world.circles.size(); ++i)
    positive("world.obstacles.circle[" + std::to_string(i) + "].radius", s.world.circles[i].radius);
  for (std::size_t i = 0; i < s.world.polygons.size(); ++i)
    if (s.world.polygons[i].vertices.size() < 3)
      invalid("world.obstacles.polygon[" + std::to_string(i) + "].vertices", "need >= 3 vertices");
  for (std::size_t i = 0; i < s.world.buoys.size(); ++i) {
    const std::string path = "world.buoys[" + std::to_string(i) + "]";
    positive(path + ".radius", s.world.buoys[i].shape.radius);
    if (s.world.buoys[i].label.empty()) invalid(path + ".label", "must not be empty");
  }

  const double max_rate = 1.0 / s.sim.dt + 1e-9;
  const auto rate = [&](const std::string& path, double hz) {
    positive(path, hz);
    if (hz > max_rate) invalid(path, "exceeds the simulation tick rate");
  };
  rate("sensors.gnss.rate_hz", s.sensors.gnss.rate_hz);
  rate("sensors.imu.rate_hz", s.sensors.imu.rate_hz);
  rate("sensors.lidar.rate_hz", s.sensors.lidar.rate_hz);
  rate("sensors.camera.rate_hz", s.sensors.camera.rate_hz);
  positive("sensors.gnss.sigma", s.sensors.gnss.sigma);
  positive("sensors.imu.sigma_psi", s.sensors.imu.sigma_psi);
  positive("sensors.imu.sigma_omega", s.sensors.imu.sigma_omega);
  positive("sensors.lidar.range_max", s.sensors.lidar.geometry.range_max);
  non_negative("sensors.lidar.noise_sigma", s.sensors.lidar.noise_sigma);
  if (s.sensors.lidar.outlier_k < 1) invalid("sensors.lidar.outlier_k", "must be >= 1");
  positive("sensors.lidar.outlier_thresh", s.sensors.lidar.outlier_thresh);
  const auto& cs = s.sensors.camera.sim;
  if (!(cs.miss_rate >= 0.0 && cs.miss_rate <= 1.0)) invalid("sensors.camera.miss_rate", "must be in [0, 1]");
  non_negative("sensors.camera.jitter_px", cs.bbox_jitter_px);
  positive("perception.object_height", cs.object_height);
  if (s.sensors.camera.mounts.empty()) invalid("sensors.camera.mounts", "need at least one camera");
  for (std::size_t i = 0; i < s.sensors.camera.mounts.size(); ++i)
    check("sensors.camera.mounts[" + std::to_string(i) + "]", [&] { s.sensors.camera.mounts[i].validate(); });

  const auto& q = s.localization.process_noise;
  for (const auto& [name, v] : {std::pair{"pos", q.pos}, {"psi", q.psi}, {"u", q.u}, {"v", q.v}, {"omega", q.omega}})
    non_negative(std::string("localization.process_noise.") + name, v);
  positive("localization.initial_sigma_pos", s.localization.initial_sigma_pos);
  positive("localization.initial_sigma_psi", s.localization.initial_sigma_psi);
  positive("localization.initial_sigma_vel", s.localization.initial_sigma_vel);

  positive("perception.base_thresh", s.perception.segmentation.base_thresh);
  non_negative("perception.slope", s.perception.segmentation.slope);
  if (s.perception.segmentation.min_points < 1) invalid("perception.min_points", "must be >= 1");
  if (!(s.perception.iou_gate > 0.0 && s.perception.iou_gate < 1.0))
    invalid("perception.iou_gate", "must be in (0, 1)");

  const auto& p = s.planner;
  non_negative("planner.margin", p.margin);
  positive("planner.a_max", p.a_max);
  positive("planner.a_dec", p.a_dec);
  positive("planner.omega_max", p.omega_max);
  positive("planner.v_cruise", p.v_cruise);
  non_negative("planner.standoff", p.standoff);
  if (p.speed_levels < 2) invalid("planner.speed_levels", "must be >= 2");
  positive("planner.offset_spacing", p.offset_spacing);
  non_negative("planner.offset_extent", p.offset_extent);
  positive("planner.sample_spacing", p.sample_spacing);
  check("follower", [&] { s.follower.validate(); });

  positive("behavior.tolerance.position", s.behavior.defaults.tolerance.position);
  positive("behavior.tolerance.heading", s.behavior.defaults.tolerance.heading);
  try {
    (void)behavior::build_tree(s.behavior.tree, s.behavior.defaults);
  } catch (const std::exception& e) {
    invalid("behavior.tree", e.what());
  }

  for (std::size_t i = 0; i < s.gates.size(); ++i) {
    const auto& g = s.gates[i];
    if (g.first >= s.world.buoys.size() || g.second >= s.world.buoys.size() || g.first == g.second)
      invalid("evaluation.gates[" + std::to_string(i) + "]", "must name two distinct buoys");
  }

  if (s.heartbeat.enabled) {
    positive("heartbeat.rate_hz", s.heartbeat.client.rate_hz);
    heartbeat::HeartbeatSentence probe;
    probe.team_id = s.heartbeat.client.team_id;
    probe.date = s.heartbeat.client.clock.date;
    check("heartbeat", [&] { probe.validate(); });
  }
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(ScenarioError::Kind::Parse, "byte " + std::to_string(e.byte), e.what());
  }
  Scenario s = from_json(doc);
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(ScenarioError::Kind::Parse, "", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace usvnav::harness
