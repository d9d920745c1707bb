#pragma once

#include <cstdint>
#include <vector>

#include "cloth/scene.hpp"

namespace cloth {

using ForceField = Vec3Field;

/// Spring restoring forces. Throws NumericsError when two connected nodes
/// coincide.
ForceField elastic_force(const ClothState& state, const GridTopology& topo, double stiffness);

/// Spring damping forces: relative velocity projected on the spring axis.
ForceField damping_force(const ClothState& state, const GridTopology& topo, double damping);

/// Per-node pressure from cross products over the 4 cardinal neighbors.
/// Nodes missing a cardinal neighbor get zero. `pressure` is signed.
ForceField pressure_force(const ClothState& state, const GridTopology& topo, double pressure);

/// Gravity plus air drag: m*g - d*v.
ForceField external_force(const ClothState& state, double mass, const Vec3& gravity, double drag);

/// Sum of all four force terms for the scene's material.
ForceField total_force(const ClothState& state, const Scene& scene);

/// Total force scaled by dt/m. This is the velocity impulse the simulator
/// step applies; it doubles as the reference impulse when checking that the
/// network step shares the simulator's constraint chain.
Vec3Field total_impulse(const ClothState& state, const Scene& scene);

/// Impulse of the scene's plug-in analytic forces (dt/m scaled).
Vec3Field plug_impulse(const ClothState& state, const Scene& scene);

/// Pins node positions to the anchor path at time t and sets pin
/// velocities (path derivative; zero for static pins).
ClothState apply_dirichlet(const ClothState& state, const BoundarySpec& bc, double t);

/// Projects penetrating nodes radially to the sphere surface, removes the
/// inward normal velocity of approaching nodes and scales their tangential
/// velocity by (1 - friction).
ClothState resolve_sphere_collision(const ClothState& state, const SphereCollider& sphere);

/// Applies the given velocity impulse and runs the shared constraint chain:
/// velocity-level collision response and pin velocities, advection by dt,
/// position-level intersection elimination, Dirichlet re-pin. `t_next` is
/// the absolute time of the frame being produced. `constrained`, when
/// non-null, is resized to node count and flags nodes touched by pins or
/// collision response.
ClothState advance_with_impulse(const ClothState& state, const Vec3Field& impulse,
                                const Scene& scene, double t_next,
                                std::vector<uint8_t>* constrained = nullptr);

/// One semi-implicit step producing the frame at time t_next. Aborts with a
/// diagnostic naming the node and force term on non-finite results.
ClothState step_semi_implicit(const ClothState& state, const Scene& scene, double t_next);

/// Runs the scene from its initial state; returns steps + 1 frames.
Trajectory simulate_scene(const Scene& scene);

double kinetic_energy(const ClothState& state, double mass);
double spring_potential(const ClothState& state, const GridTopology& topo, double stiffness);

}  // namespace cloth
