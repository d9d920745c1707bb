#include "cloth/sim.hpp"

#include <cmath>
#include <string>

#include "cloth/detail/kernels.hpp"
#include "cloth/error.hpp"

namespace cloth {

namespace {

void check_shape(const ClothState& state, const GridTopology& topo) {
  if (state.x.size() != static_cast<size_t>(topo.node_count()) ||
      state.v.size() != state.x.size())
    throw ConfigError("state shape does not match the grid topology");
}

std::array<double, kChannels> rest_of(const GridTopology& topo) { return topo.rest_length; }

/// Names the first non-finite force term for the step diagnostic. Only runs
/// on the failure path.
[[noreturn]] void diagnose_divergence(const ClothState& state, const Scene& scene) {
  const char* terms[4] = {"elastic", "damping", "pressure", "external"};
  for (int t = 0; t < 4; ++t) {
    ForceField f;
    switch (t) {
      case 0:
        f = elastic_force(state, scene.topology, scene.material.stiffness);
        break;
      case 1:
        f = damping_force(state, scene.topology, scene.material.damping);
        break;
      case 2:
        f = pressure_force(state, scene.topology, scene.material.pressure);
        break;
      default:
        f = external_force(state, scene.material.mass, scene.material.gravity,
                           scene.material.drag);
        break;
    }
    for (size_t i = 0; i < f.size(); ++i)
      if (!f[i].finite())
        throw NumericsError(std::string(terms[t]) + " force non-finite at node " +
                            std::to_string(i) + " (reduce dt or stiffness)");
  }
  throw NumericsError("non-finite state update (reduce dt or stiffness)");
}

}  // namespace

ForceField elastic_force(const ClothState& state, const GridTopology& topo, double stiffness) {
  check_shape(state, topo);
  ForceField f(state.x.size());
  detail::accumulate_elastic(state.x.data(), topo, stiffness, rest_of(topo), f.data());
  return f;
}

ForceField damping_force(const ClothState& state, const GridTopology& topo, double damping) {
  check_shape(state, topo);
  ForceField f(state.x.size());
  detail::accumulate_damping(state.x.data(), state.v.data(), topo, damping, f.data());
  return f;
}

ForceField pressure_force(const ClothState& state, const GridTopology& topo, double pressure) {
  check_shape(state, topo);
  ForceField f(state.x.size());
  detail::accumulate_pressure(state.x.data(), topo, pressure, f.data());
  return f;
}

ForceField external_force(const ClothState& state, double mass, const Vec3& gravity, double drag) {
  ForceField f(state.x.size());
  detail::accumulate_external(state.v.data(), state.node_count(), mass, gravity, drag, f.data());
  return f;
}

ForceField total_force(const ClothState& state, const Scene& scene) {
  check_shape(state, scene.topology);
  ForceField f(state.x.size());
  const MaterialParams& m = scene.material;
  detail::accumulate_elastic(state.x.data(), scene.topology, m.stiffness,
                             rest_of(scene.topology), f.data());
  detail::accumulate_damping(state.x.data(), state.v.data(), scene.topology, m.damping, f.data());
  detail::accumulate_pressure(state.x.data(), scene.topology, m.pressure, f.data());
  detail::accumulate_external(state.v.data(), state.node_count(), m.mass, m.gravity, m.drag,
                              f.data());
  return f;
}

Vec3Field total_impulse(const ClothState& state, const Scene& scene) {
  check_shape(state, scene.topology);
  const auto kernel = detail::make_scene_kernel<double>(scene);
  Vec3Field out(state.x.size());
  detail::total_impulse(state.x.data(), state.v.data(), kernel, out.data());
  return out;
}

Vec3Field plug_impulse(const ClothState& state, const Scene& scene) {
  check_shape(state, scene.topology);
  const auto kernel = detail::make_scene_kernel<double>(scene);
  Vec3Field out(state.x.size(), Vec3{});
  detail::add_plug_impulse(state.x.data(), state.v.data(), kernel, out.data());
  return out;
}

ClothState apply_dirichlet(const ClothState& state, const BoundarySpec& bc, double t) {
  ClothState out = state;
  const Vec3 u = bc.pin_velocity();
  for (size_t k = 0; k < bc.nodes.size(); ++k) {
    const size_t i = static_cast<size_t>(bc.nodes[k]);
    out.x[i] = bc.anchor_at(k, t);
    out.v[i] = u;
  }
  return out;
}

ClothState resolve_sphere_collision(const ClothState& state, const SphereCollider& sphere) {
  ClothState out = state;
  for (size_t i = 0; i < out.x.size(); ++i) {
    const Vec3 r = out.x[i] - sphere.center;
    const double dist = r.norm();
    if (dist > 0.0 && dist < sphere.radius) {
      const Vec3 n = r / dist;
      out.x[i] = sphere.center + n * sphere.radius;
      const double vn = out.v[i].dot(n);
      if (vn < 0.0) out.v[i] = (out.v[i] - n * vn) * (1.0 - sphere.friction);
    }
  }
  return out;
}

ClothState advance_with_impulse(const ClothState& state, const Vec3Field& impulse,
                                const Scene& scene, double t_next, std::vector<uint8_t>* constrained) {
  check_shape(state, scene.topology);
  if (impulse.size() != state.x.size())
    throw ConfigError("impulse field shape does not match the state");
  const auto kernel = detail::make_scene_kernel<double>(scene);
  ClothState out;
  out.x.resize(state.x.size());
  out.v.resize(state.v.size());
  if (constrained) constrained->assign(state.x.size(), 0);
  detail::advance_with_impulse(state.x.data(), state.v.data(), impulse.data(), kernel, t_next,
                               out.x.data(), out.v.data(),
                               constrained ? constrained->data() : nullptr);
  return out;
}

ClothState step_semi_implicit(const ClothState& state, const Scene& scene, double t_next) {
  const Vec3Field impulse = total_impulse(state, scene);
  ClothState out = advance_with_impulse(state, impulse, scene, t_next);
  if (!out.finite()) diagnose_divergence(state, scene);
  return out;
}

Trajectory simulate_scene(const Scene& scene) {
  scene.validate();
  Trajectory traj;
  traj.nx = scene.topology.nx;
  traj.ny = scene.topology.ny;
  traj.dt = scene.dt;
  traj.spacing = scene.topology.spacing;
  traj.frames.reserve(static_cast<size_t>(scene.steps) + 1);
  traj.frames.push_back(apply_dirichlet(scene.initial, scene.bc, 0.0));
  for (int k = 0; k < scene.steps; ++k) {
    try {
      traj.frames.push_back(step_semi_implicit(traj.frames.back(), scene, (k + 1) * scene.dt));
    } catch (const NumericsError& e) {
      throw NumericsError("simulation diverged at frame " + std::to_string(k + 1) + ": " +
                          e.what());
    }
  }
  return traj;
}

double kinetic_energy(const ClothState& state, double mass) {
  double sum = 0.0;
  for (const Vec3& v : state.v) sum += v.squared_norm();
  return 0.5 * mass * sum;
}

double spring_potential(const ClothState& state, const GridTopology& topo, double stiffness) {
  double sum = 0.0;
  for (int i = 0; i < topo.node_count(); ++i) {
    const uint16_t m = topo.mask[static_cast<size_t>(i)];
    for (int c = 0; c < kChannels; ++c) {
      if (!((m >> c) & 1u)) continue;
      const size_t j = static_cast<size_t>(topo.neighbor(i, c));
      const double len = (state.x[static_cast<size_t>(i)] - state.x[j]).norm();
      const double stretch = len - topo.rest_length[static_cast<size_t>(c)];
      sum += stretch * stretch;
    }
  }
  // the directed sum visits each unordered spring twice
  return 0.25 * stiffness * sum;
}

}  // namespace cloth
