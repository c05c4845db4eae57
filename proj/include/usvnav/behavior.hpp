// Minimal behavior tree: a memoryful Sequence composite, condition leaves,
// and the action nodes that turn fused perception into navigation goals.
#pragma once

#include "usvnav/geometry.hpp"

#include <any>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <typeinfo>
#include <unordered_map>
#include <vector>

namespace usvnav::behavior {

enum class NodeStatus { Running, Success, Failure };

std::string_view to_string(NodeStatus s);

class BlackboardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Typed key-value store shared by the nodes of one tree.
class Blackboard {
 public:
  template <typename T>
  void set(const std::string& key, T value) {
    entries_[key] = std::move(value);
  }

  /// Throws BlackboardError for a missing key or a type mismatch.
  template <typename T>
  const T& get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw BlackboardError("blackboard: missing key '" + key + "'");
    const T* v = std::any_cast<T>(&it->second);
    if (v == nullptr) throw BlackboardError("blackboard: key '" + key + "' has a different type");
    return *v;
  }

  template <typename T>
  const T* find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : std::any_cast<T>(&it->second);
  }

  bool has(const std::string& key) const { return entries_.contains(key); }
  void erase(const std::string& key) { entries_.erase(key); }

 private:
  std::unordered_map<std::string, std::any> entries_;
};

// Well-known keys.
namespace keys {
inline constexpr const char* kEgo = "ego";                     // localization::EkfState
inline constexpr const char* kFusedObjects = "fused_objects";  // vector<perception::FusedObject>
inline constexpr const char* kGoal = "goal";                   // Pose2D
inline constexpr const char* kPassThrough = "goal_pass_through";  // bool
inline constexpr const char* kStopRequested = "stop_requested";   // bool
}  // namespace keys

struct TraceEntry {
  std::string node;
  NodeStatus status;
  bool operator==(const TraceEntry&) const = default;
};
using Trace = std::vector<TraceEntry>;

class Node {
 public:
  explicit Node(std::string name) : name_(std::move(name)) {}
  virtual ~Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Ticks the node, appending (name, status) to trace when given.
  NodeStatus tick(Blackboard& bb, Trace* trace = nullptr);
  /// Clears per-execution memory.
  virtual void reset() {}
  const std::string& name() const { return name_; }

 protected:
  virtual NodeStatus on_tick(Blackboard& bb, Trace* trace) = 0;

 private:
  std::string name_;
};

using NodePtr = std::unique_ptr<Node>;

/// Ticks children left to right and resumes at the running child on the
/// next tick. Throws std::invalid_argument when constructed without children.
class Sequence final : public Node {
 public:
  Sequence(std::string name, std::vector<NodePtr> children);
  void reset() override;
  std::size_t size() const { return children_.size(); }

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace* trace) override;

 private:
  std::vector<NodePtr> children_;
  std::size_t current_ = 0;
};

class Condition final : public Node {
 public:
  using Predicate = std::function<bool(const Blackboard&)>;
  Condition(std::string name, Predicate pred) : Node(std::move(name)), pred_(std::move(pred)) {}

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override {
    return pred_(bb) ? NodeStatus::Success : NodeStatus::Failure;
  }

 private:
  Predicate pred_;
};

/// Leaf bound to a callable; handy for tests and ad-hoc actions.
class FunctionAction final : public Node {
 public:
  using Fn = std::function<NodeStatus(Blackboard&)>;
  FunctionAction(std::string name, Fn fn) : Node(std::move(name)), fn_(std::move(fn)) {}

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override { return fn_(bb); }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Navigation actions

struct GoalTolerance {
  double position = 1.0;  // [m]
  double heading = 0.2;   // [rad]
};

struct MarkerSearchParams {
  std::string red_label = "red";
  std::string green_label = "green";
  double min_ahead = 1.0;   // gate midpoint must be this far in front [m]
  double min_width = 2.0;   // accepted red-green separation [m]
  double max_width = 20.0;
};

/// Finds the nearest red/green pair, writes its midpoint and the crossing
/// heading as the goal. Running until a pair is found.
class SearchChannelMarkers final : public Node {
 public:
  explicit SearchChannelMarkers(MarkerSearchParams p = {}, std::string name = "search_channel_markers")
      : Node(std::move(name)), params_(std::move(p)) {}

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override;

 private:
  MarkerSearchParams params_;
};

/// Running while the goal is being pursued; Success inside the tolerance.
class Navigate final : public Node {
 public:
  explicit Navigate(GoalTolerance tol = {}, std::string name = "navigate")
      : Node(std::move(name)), tol_(tol) {}

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override;

 private:
  GoalTolerance tol_;
};

/// Sets a goal `distance` ahead along the heading at first tick, then
/// behaves like Navigate.
class MoveForward final : public Node {
 public:
  MoveForward(double distance, GoalTolerance tol = {}, std::string name = "move_forward")
      : Node(std::move(name)), distance_(distance), tol_(tol) {}
  void reset() override { started_ = false; }

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override;

 private:
  double distance_;
  GoalTolerance tol_;
  bool started_ = false;
  Pose2D goal_;
};

/// Requests zero velocity; Success once |nu| < speed_tol.
class Stop final : public Node {
 public:
  explicit Stop(double speed_tol = 0.05, std::string name = "stop")
      : Node(std::move(name)), speed_tol_(speed_tol) {}

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override;

 private:
  double speed_tol_;
};

enum class Direction { CounterClockwise, Clockwise };

/// Circles the nearest fused buoy through `waypoint_count` waypoints at the
/// given radius, ending where it started. A waypoint is done once within
/// waypoint_tol, or once passed along its tangent within one radius.
/// Failure without a fused buoy.
class RotateAroundBuoy final : public Node {
 public:
  RotateAroundBuoy(double radius, Direction dir, int waypoint_count = 12,
                   double waypoint_tol = 1.0, std::string name = "rotate_around_buoy");
  void reset() override;

  const std::vector<Pose2D>& waypoints() const { return waypoints_; }
  const Vec2& center() const { return center_; }

 protected:
  NodeStatus on_tick(Blackboard& bb, Trace*) override;

 private:
  double radius_;
  Direction dir_;
  int count_;
  double tol_;
  std::vector<Pose2D> waypoints_;
  std::size_t next_ = 0;
  Vec2 center_ = Vec2::Zero();
};

// ---------------------------------------------------------------------------
// Declarative construction

/// Nested tree declaration, e.g. parsed from a scenario file.
struct NodeSpec {
  std::string kind;  // "sequence", "action" or "condition"
  std::string name;  // action/condition name; optional label for sequences
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> strings;
  std::vector<NodeSpec> children;
};

class TreeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& known_actions();
const std::vector<std::string>& known_conditions();

struct TreeDefaults {
  GoalTolerance tolerance;
  MarkerSearchParams markers;
};

/// Throws TreeError for unknown names, bad parameters or empty sequences.
NodePtr build_tree(const NodeSpec& spec, const TreeDefaults& defaults = {});

}  // namespace usvnav::behavior
