#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cloth/grid.hpp"

namespace cloth {

/// Straight-line anchor motion: pinned nodes move with constant velocity
/// from their initial positions.
struct PinMotion {
  Vec3 velocity{};
};

/// Dirichlet boundary spec: a set of pinned nodes, their anchor positions
/// at t = 0, and an optional prescribed motion.
struct BoundarySpec {
  std::vector<int> nodes;     // sorted, unique
  std::vector<Vec3> anchors;  // parallel to nodes; captured at scene build
  std::optional<PinMotion> motion;

  bool pinned_empty() const { return nodes.empty(); }
  Vec3 anchor_at(std::size_t k, double t) const {
    return motion ? anchors[k] + motion->velocity * t : anchors[k];
  }
  Vec3 pin_velocity() const { return motion ? motion->velocity : Vec3{}; }
};

struct SphereCollider {
  Vec3 center{};
  double radius = 0.0;
  double friction = 0.0;  // tangential velocity scale is (1 - friction)
};

/// Analytic forces applied outside the learned cell during NN stepping.
enum class PlugForce { Pressure, Gravity, Drag };

/// Everything needed to run one cloth setup: grid, material, time stepping,
/// boundary conditions, colliders, and which forces the NN path plugs in
/// analytically.
struct Scene {
  std::string name;
  GridTopology topology;
  ClothState initial;
  MaterialParams material;
  double dt = 0.0;
  int steps = 0;
  BoundarySpec bc;
  std::vector<SphereCollider> colliders;
  std::vector<PlugForce> plug_forces;

  bool plugs(PlugForce f) const;

  /// Explicit-integration guard: 0.5 * sqrt(m / (E * max springs per node)).
  double stable_dt() const;

  void validate() const;  // throws ConfigError naming the bad field
};

/// Ordered frames of cloth state plus the scene metadata needed to
/// interpret them.
struct Trajectory {
  int nx = 0;
  int ny = 0;
  double dt = 0.0;
  double spacing = 0.0;
  std::vector<ClothState> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  void validate() const;
};

}  // namespace cloth
