#include "usvnav/behavior.hpp"

#include "usvnav/localization.hpp"
#include "usvnav/perception.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace usvnav::behavior {

using localization::EkfState;
using perception::FusedObject;

std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Running: return "RUNNING";
    case NodeStatus::Success: return "SUCCESS";
    case NodeStatus::Failure: return "FAILURE";
  }
  return "?";
}

NodeStatus Node::tick(Blackboard& bb, Trace* trace) {
  const NodeStatus s = on_tick(bb, trace);
  if (trace != nullptr) trace->push_back({name_, s});
  return s;
}

Sequence::Sequence(std::string name, std::vector<NodePtr> children)
    : Node(std::move(name)), children_(std::move(children)) {
  if (children_.empty()) throw std::invalid_argument("sequence '" + this->name() + "' has no children");
  for (const auto& c : children_)
    if (!c) throw std::invalid_argument("sequence '" + this->name() + "' has a null child");
}

void Sequence::reset() {
  current_ = 0;
  for (auto& c : children_) c->reset();
}

NodeStatus Sequence::on_tick(Blackboard& bb, Trace* trace) {
  for (; current_ < children_.size(); ++current_) {
    const NodeStatus s = children_[current_]->tick(bb, trace);
    if (s == NodeStatus::Running) return s;
    if (s == NodeStatus::Failure) {
      reset();
      return s;
    }
  }
  reset();
  return NodeStatus::Success;
}

namespace {

bool within(const Pose2D& ego, const Pose2D& goal, const GoalTolerance& tol) {
  return (ego.position() - goal.position()).norm() < tol.position &&
         std::abs(wrap_angle(ego.psi - goal.psi)) < tol.heading;
}

void request_goal(Blackboard& bb, const Pose2D& goal, bool pass_through) {
  bb.set(keys::kGoal, goal);
  bb.set(keys::kPassThrough, pass_through);
  bb.set(keys::kStopRequested, false);
}

}  // namespace

NodeStatus SearchChannelMarkers::on_tick(Blackboard& bb, Trace*) {
  const Pose2D ego = bb.get<EkfState>(keys::kEgo).pose();
  const auto& objects = bb.get<std::vector<FusedObject>>(keys::kFusedObjects);

  double best_dist = std::numeric_limits<double>::infinity();
  Vec2 best_mid = Vec2::Zero();
  Vec2 best_normal = Vec2::UnitX();
  for (const FusedObject& red : objects) {
    if (red.label != params_.red_label) continue;
    for (const FusedObject& green : objects) {
      if (green.label != params_.green_label) continue;
      const Vec2 across = green.position - red.position;
      const double width = across.norm();
      if (width < params_.min_width || width > params_.max_width) continue;
      const Vec2 mid = 0.5 * (red.position + green.position);
      if (mid.x() < params_.min_ahead) continue;
      if (mid.norm() < best_dist) {
        best_dist = mid.norm();
        best_mid = mid;
        // Crossing direction: perpendicular to the gate, pointing away from us.
        Vec2 n(-across.y(), across.x());
        if (n.dot(mid) < 0.0) n = -n;
        best_normal = n;
      }
    }
  }
  if (!std::isfinite(best_dist)) return NodeStatus::Running;
  const Vec2 goal = ego.to_world(best_mid);
  request_goal(bb, Pose2D{goal.x(), goal.y(), ego.psi + std::atan2(best_normal.y(), best_normal.x())},
               false);
  return NodeStatus::Success;
}

NodeStatus Navigate::on_tick(Blackboard& bb, Trace*) {
  const Pose2D goal = bb.get<Pose2D>(keys::kGoal);
  const Pose2D ego = bb.get<EkfState>(keys::kEgo).pose();
  bb.set(keys::kPassThrough, false);
  bb.set(keys::kStopRequested, false);
  return within(ego, goal, tol_) ? NodeStatus::Success : NodeStatus::Running;
}

NodeStatus MoveForward::on_tick(Blackboard& bb, Trace*) {
  const Pose2D ego = bb.get<EkfState>(keys::kEgo).pose();
  if (!started_) {
    goal_ = Pose2D{ego.x + distance_ * std::cos(ego.psi), ego.y + distance_ * std::sin(ego.psi),
                   ego.psi};
    started_ = true;
  }
  request_goal(bb, goal_, false);
  if (within(ego, goal_, tol_)) {
    started_ = false;
    return NodeStatus::Success;
  }
  return NodeStatus::Running;
}

NodeStatus Stop::on_tick(Blackboard& bb, Trace*) {
  const auto& m = bb.get<EkfState>(keys::kEgo).mean;
  bb.set(keys::kStopRequested, true);
  const double speed = std::sqrt(m(localization::kU) * m(localization::kU) +
                                 m(localization::kV) * m(localization::kV) +
                                 m(localization::kOmega) * m(localization::kOmega));
  return speed < speed_tol_ ? NodeStatus::Success : NodeStatus::Running;
}

RotateAroundBuoy::RotateAroundBuoy(double radius, Direction dir, int waypoint_count,
                                   double waypoint_tol, std::string name)
    : Node(std::move(name)), radius_(radius), dir_(dir), count_(waypoint_count), tol_(waypoint_tol) {
  if (!(radius > 0.0)) throw std::invalid_argument("rotate_around_buoy: radius must be > 0");
  if (waypoint_count < 3) throw std::invalid_argument("rotate_around_buoy: need >= 3 waypoints");
}

void RotateAroundBuoy::reset() {
  waypoints_.clear();
  next_ = 0;
}

NodeStatus RotateAroundBuoy::on_tick(Blackboard& bb, Trace*) {
  const Pose2D ego = bb.get<EkfState>(keys::kEgo).pose();
  if (waypoints_.empty()) {
    const auto* objects = bb.find<std::vector<FusedObject>>(keys::kFusedObjects);
    if (objects == nullptr || objects->empty()) return NodeStatus::Failure;
    const FusedObject* nearest = &objects->front();
    for (const auto& o : *objects)
      if (o.position.norm() < nearest->position.norm()) nearest = &o;
    center_ = ego.to_world(nearest->position);

    const double sign = dir_ == Direction::CounterClockwise ? 1.0 : -1.0;
    const Vec2 rel = ego.position() - center_;
    const double start = std::atan2(rel.y(), rel.x());
    for (int k = 1; k <= count_; ++k) {
      const double a = start + sign * 2.0 * std::numbers::pi * k / count_;
      waypoints_.emplace_back(center_.x() + radius_ * std::cos(a),
                              center_.y() + radius_ * std::sin(a),
                              a + sign * 0.5 * std::numbers::pi);
    }
    next_ = 0;
  }
  // A waypoint counts once reached, or once passed along its tangent nearby.
  const auto done = [&](const Pose2D& wp) {
    const Vec2 d = ego.position() - wp.position();
    const Vec2 tangent(std::cos(wp.psi), std::sin(wp.psi));
    return d.norm() < tol_ || (d.norm() < radius_ && d.dot(tangent) > 0.0);
  };
  while (next_ < waypoints_.size() && done(waypoints_[next_])) ++next_;
  if (next_ == waypoints_.size()) {
    reset();
    return NodeStatus::Success;
  }
  request_goal(bb, waypoints_[next_], true);
  return NodeStatus::Running;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& known_actions() {
  static const std::vector<std::string> names{"search_channel_markers", "navigate", "move_forward",
                                              "stop", "rotate_around_buoy"};
  return names;
}

const std::vector<std::string>& known_conditions() {
  static const std::vector<std::string> names{"objects_visible"};
  return names;
}

namespace {

struct ParamReader {
  const NodeSpec& spec;
  std::set<std::string> used;

  double number(const std::string& key, double fallback) {
    used.insert(key);
    const auto it = spec.numbers.find(key);
    return it == spec.numbers.end() ? fallback : it->second;
  }
  double required(const std::string& key) {
    used.insert(key);
    const auto it = spec.numbers.find(key);
    if (it == spec.numbers.end())
      throw TreeError("action '" + spec.name + "' requires parameter '" + key + "'");
    return it->second;
  }
  std::string text(const std::string& key, const std::string& fallback) {
    used.insert(key);
    const auto it = spec.strings.find(key);
    return it == spec.strings.end() ? fallback : it->second;
  }
  void finish() const {
    for (const auto& [k, v] : spec.numbers)
      if (!used.contains(k)) throw TreeError("node '" + spec.name + "': unknown parameter '" + k + "'");
    for (const auto& [k, v] : spec.strings)
      if (!used.contains(k)) throw TreeError("node '" + spec.name + "': unknown parameter '" + k + "'");
  }
};

NodePtr build_action(const NodeSpec& spec, const TreeDefaults& d) {
  ParamReader r{spec, {}};
  GoalTolerance tol{r.number("position_tol", d.tolerance.position),
                    r.number("heading_tol", d.tolerance.heading)};
  NodePtr node;
  if (spec.name == "search_channel_markers") {
    MarkerSearchParams p = d.markers;
    p.red_label = r.text("red_label", p.red_label);
    p.green_label = r.text("green_label", p.green_label);
    p.min_ahead = r.number("min_ahead", p.min_ahead);
    p.min_width = r.number("min_width", p.min_width);
    p.max_width = r.number("max_width", p.max_width);
    node = std::make_unique<SearchChannelMarkers>(p);
  } else if (spec.name == "navigate") {
    node = std::make_unique<Navigate>(tol);
  } else if (spec.name == "move_forward") {
    node = std::make_unique<MoveForward>(r.required("distance"), tol);
  } else if (spec.name == "stop") {
    node = std::make_unique<Stop>(r.number("speed_tol", 0.05));
  } else if (spec.name == "rotate_around_buoy") {
    const std::string dir = r.text("direction", "ccw");
    if (dir != "ccw" && dir != "cw") throw TreeError("rotate_around_buoy: direction must be ccw or cw");
    const double wps = r.number("waypoints", 12);
    try {
      node = std::make_unique<RotateAroundBuoy>(
          r.required("radius"), dir == "ccw" ? Direction::CounterClockwise : Direction::Clockwise,
          static_cast<int>(wps), r.number("waypoint_tol", 1.0));
    } catch (const std::invalid_argument& e) {
      throw TreeError(e.what());
    }
  } else {
    throw TreeError("unknown action '" + spec.name + "'");
  }
  r.finish();
  return node;
}

NodePtr build_condition(const NodeSpec& spec) {
  ParamReader r{spec, {}};
  NodePtr node;
  if (spec.name == "objects_visible") {
    const auto min_count = static_cast<std::size_t>(r.number("min_count", 1));
    node = std::make_unique<Condition>(spec.name, [min_count](const Blackboard& bb) {
      const auto* objs = bb.find<std::vector<FusedObject>>(keys::kFusedObjects);
      return objs != nullptr && objs->size() >= min_count;
    });
  } else {
    throw TreeError("unknown condition '" + spec.name + "'");
  }
  r.finish();
  return node;
}

}  // namespace

NodePtr build_tree(const NodeSpec& spec, const TreeDefaults& defaults) {
  if (spec.kind == "sequence") {
    if (spec.children.empty()) throw TreeError("sequence must have at least one child");
    std::vector<NodePtr> children;
    for (const auto& c : spec.children) children.push_back(build_tree(c, defaults));
    return std::make_unique<Sequence>(spec.name.empty() ? "sequence" : spec.name, std::move(children));
  }
  if (!spec.children.empty()) throw TreeError("leaf '" + spec.name + "' cannot have children");
  if (spec.kind == "action") return build_action(spec, defaults);
  if (spec.kind == "condition") return build_condition(spec);
  throw TreeError("unknown node kind '" + spec.kind + "'");
}

}  // namespace usvnav::behavior
