#include "cloth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cloth/error.hpp"

namespace cloth {

bool Scene::plugs(PlugForce f) const {
  return std::find(plug_forces.begin(), plug_forces.end(), f) != plug_forces.end();
}

double Scene::stable_dt() const {
  const int springs = topology.max_springs_per_node();
  const double k_row = material.stiffness * springs;
  if (k_row <= 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * std::sqrt(material.mass / k_row);
}

void Scene::validate() const {
  if (topology.nx < 2) throw ConfigError("grid.nx: must be >= 2");
  if (topology.ny < 2) throw ConfigError("grid.ny: must be >= 2");
  if (!(topology.spacing > 0.0)) throw ConfigError("grid.spacing: must be > 0");
  const size_t n = static_cast<size_t>(topology.node_count());
  if (topology.mask.size() != n) throw ConfigError("grid: topology mask size mismatch");
  if (initial.x.size() != n || initial.v.size() != n)
    throw ConfigError("initial state: node count does not match the grid");
  if (!initial.finite()) throw ConfigError("initial state: non-finite component");
  material.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time.dt: must be a finite value > 0");
  if (steps < 0) throw ConfigError("time.steps: must be >= 0");
  if (bc.anchors.size() != bc.nodes.size())
    throw ConfigError("pins: anchor list does not match the node list");
  for (size_t k = 0; k < bc.nodes.size(); ++k) {
    const int i = bc.nodes[k];
    if (i < 0 || i >= topology.node_count())
      throw ConfigError("pins.nodes[" + std::to_string(k) + "]: index out of range");
    if (k > 0 && bc.nodes[k - 1] >= i)
      throw ConfigError("pins.nodes: must be strictly increasing (sorted, unique)");
    if (!bc.anchors[k].finite())
      throw ConfigError("pins.anchors[" + std::to_string(k) + "]: non-finite component");
  }
  if (bc.motion && !bc.motion->velocity.finite())
    throw ConfigError("pins.motion.velocity: components must be finite");
  for (size_t k = 0; k < colliders.size(); ++k) {
    const std::string path = "colliders[" + std::to_string(k) + "]";
    const SphereCollider& s = colliders[k];
    if (!s.center.finite()) throw ConfigError(path + ".center: components must be finite");
    if (!(s.radius > 0.0) || !std::isfinite(s.radius))
      throw ConfigError(path + ".radius: must be a finite value > 0");
    if (!(s.friction >= 0.0 && s.friction <= 1.0))
      throw ConfigError(path + ".friction: must be in [0, 1]");
  }
  for (size_t k = 0; k < plug_forces.size(); ++k)
    for (size_t l = k + 1; l < plug_forces.size(); ++l)
      if (plug_forces[k] == plug_forces[l])
        throw ConfigError("plug_forces: duplicate entry");
}

void Trajectory::validate() const {
  if (nx < 2 || ny < 2) throw ConfigError("trajectory: grid dimensions must be >= 2");
  if (!(dt > 0.0)) throw ConfigError("trajectory: dt must be > 0");
  if (!(spacing > 0.0)) throw ConfigError("trajectory: spacing must be > 0");
  if (frames.empty()) throw ConfigError("trajectory: needs at least one frame");
  const size_t n = static_cast<size_t>(nx) * static_cast<size_t>(ny);
  for (size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].x.size() != n || frames[k].v.size() != n)
      throw ConfigError("trajectory: frame " + std::to_string(k) + " has the wrong node count");
    if (!frames[k].finite())
      throw ConfigError("trajectory: frame " + std::to_string(k) + " has non-finite components");
  }
}

}  // namespace cloth
