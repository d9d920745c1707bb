#pragma once

// Scalar-templated inner loops for the simulator and the network cell.
// The public double-precision API wraps these; the benchmark runs the same
// code instantiated for float. All loops write per-node outputs only, so
// parallel execution is bit-identical to serial.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cloth/error.hpp"
#include "cloth/grid.hpp"
#include "cloth/scene.hpp"
#include "cloth/threads.hpp"

namespace cloth::detail {

template <typename T>
constexpr T contact_band() {
  // Relative tolerance for treating a node as resting on a collider after
  // an earlier projection placed it on the surface.
  return std::numeric_limits<T>::epsilon() * T(16);
}

template <typename T>
inline T isru(T z, T alpha) {
  return z / std::sqrt(T(1) + alpha * z * z);
}

template <typename T>
inline VecT<T> isru3(const VecT<T>& p, T alpha) {
  return {isru(p.x, alpha), isru(p.y, alpha), isru(p.z, alpha)};
}

/// Scene constants cast once to the kernel scalar type.
template <typename T>
struct SceneKernel {
  const GridTopology* topo = nullptr;
  T stiffness{}, damping{}, mass{}, drag{}, pressure{}, dt{};
  VecT<T> gravity{};
  std::array<T, kChannels> rest_length{};
  std::vector<int> pin_nodes;
  std::vector<VecT<T>> pin_anchors;
  VecT<T> pin_velocity{};
  struct Sphere {
    VecT<T> center{};
    T radius{}, friction{};
  };
  std::vector<Sphere> spheres;
  bool plug_pressure = false, plug_gravity = false, plug_drag = false;
};

template <typename T>
SceneKernel<T> make_scene_kernel(const Scene& s) {
  SceneKernel<T> k;
  k.topo = &s.topology;
  k.stiffness = static_cast<T>(s.material.stiffness);
  k.damping = static_cast<T>(s.material.damping);
  k.mass = static_cast<T>(s.material.mass);
  k.drag = static_cast<T>(s.material.drag);
  k.pressure = static_cast<T>(s.material.pressure);
  k.dt = static_cast<T>(s.dt);
  k.gravity = s.material.gravity.template cast<T>();
  for (int c = 0; c < kChannels; ++c)
    k.rest_length[static_cast<size_t>(c)] = static_cast<T>(s.topology.rest_length[static_cast<size_t>(c)]);
  k.pin_nodes = s.bc.nodes;
  k.pin_anchors.reserve(s.bc.anchors.size());
  for (const Vec3& a : s.bc.anchors) k.pin_anchors.push_back(a.template cast<T>());
  k.pin_velocity = s.bc.pin_velocity().template cast<T>();
  for (const SphereCollider& c : s.colliders)
    k.spheres.push_back({c.center.template cast<T>(), static_cast<T>(c.radius), static_cast<T>(c.friction)});
  k.plug_pressure = s.plugs(PlugForce::Pressure);
  k.plug_gravity = s.plugs(PlugForce::Gravity);
  k.plug_drag = s.plugs(PlugForce::Drag);
  return k;
}

/// f_i -= sum_c E * (x_ij / |x_ij|) * (|x_ij| - L_c) over valid channels.
/// Throws when two connected nodes coincide.
template <typename T>
void accumulate_elastic(const VecT<T>* x, const GridTopology& topo, T stiffness,
                        const std::array<T, kChannels>& rest, VecT<T>* f) {
  std::atomic<int> bad{-1};
  parallel_for(topo.node_count(), [&](int i) {
    VecT<T> acc = f[i];
    const uint16_t m = topo.mask[static_cast<size_t>(i)];
    for (int c = 0; c < kChannels; ++c) {
      if (!((m >> c) & 1u)) continue;
      const VecT<T> d = x[i] - x[i + topo.neighbor_delta[static_cast<size_t>(c)]];
      const T len = d.norm();
      if (len == T(0)) {
        int expected = -1;
        bad.compare_exchange_strong(expected, i);
        continue;
      }
      acc -= d * (stiffness * (len - rest[static_cast<size_t>(c)]) / len);
    }
    f[i] = acc;
  });
  if (bad.load() >= 0)
    throw NumericsError("elastic force: singular spring (coincident nodes) at node " +
                        std::to_string(bad.load()));
}

/// f_i -= sum_c mu * (v_ij . xhat_ij) * xhat_ij over valid channels.
template <typename T>
void accumulate_damping(const VecT<T>* x, const VecT<T>* v, const GridTopology& topo, T damping,
                        VecT<T>* f) {
  std::atomic<int> bad{-1};
  parallel_for(topo.node_count(), [&](int i) {
    VecT<T> acc = f[i];
    const uint16_t m = topo.mask[static_cast<size_t>(i)];
    for (int c = 0; c < kChannels; ++c) {
      if (!((m >> c) & 1u)) continue;
      const int j = i + topo.neighbor_delta[static_cast<size_t>(c)];
      const VecT<T> d = x[i] - x[j];
      const T len = d.norm();
      if (len == T(0)) {
        int expected = -1;
        bad.compare_exchange_strong(expected, i);
        continue;
      }
      const VecT<T> dir = d / len;
      acc -= dir * (damping * (v[i] - v[j]).dot(dir));
    }
    f[i] = acc;
  });
  if (bad.load() >= 0)
    throw NumericsError("damping force: singular spring (coincident nodes) at node " +
                        std::to_string(bad.load()));
}

/// f_i += p * sum over the 4 ordered cardinal pairs of cross products.
/// Nodes missing any cardinal neighbor contribute nothing. The pair cycle
/// (E,N),(N,W),(W,S),(S,E) gives a flat sheet a consistent one-sided normal;
/// the sign of p selects the side.
template <typename T>
void accumulate_pressure(const VecT<T>* x, const GridTopology& topo, T pressure, VecT<T>* f) {
  if (pressure == T(0)) return;
  const int dE = topo.neighbor_delta[0], dN = topo.neighbor_delta[1];
  const int dW = topo.neighbor_delta[2], dS = topo.neighbor_delta[3];
  parallel_for(topo.node_count(), [&](int i) {
    if ((topo.mask[static_cast<size_t>(i)] & 0xFu) != 0xFu) return;
    const VecT<T> e = x[i] - x[i + dE];
    const VecT<T> n = x[i] - x[i + dN];
    const VecT<T> w = x[i] - x[i + dW];
    const VecT<T> s = x[i] - x[i + dS];
    f[i] += (e.cross(n) + n.cross(w) + w.cross(s) + s.cross(e)) * pressure;
  });
}

/// f_i += m * g - d * v_i.
template <typename T>
void accumulate_external(const VecT<T>* v, int n, T mass, const VecT<T>& gravity, T drag,
                         VecT<T>* f) {
  parallel_for(n, [&](int i) { f[i] += gravity * mass - v[i] * drag; });
}

/// Total force of all four terms, scaled by dt/m into a velocity impulse.
template <typename T>
void total_impulse(const VecT<T>* x, const VecT<T>* v, const SceneKernel<T>& k, VecT<T>* out) {
  const int n = k.topo->node_count();
  for (int i = 0; i < n; ++i) out[i] = VecT<T>{};
  accumulate_elastic(x, *k.topo, k.stiffness, k.rest_length, out);
  accumulate_damping(x, v, *k.topo, k.damping, out);
  accumulate_pressure(x, *k.topo, k.pressure, out);
  accumulate_external(v, n, k.mass, k.gravity, k.drag, out);
  const T scale = k.dt / k.mass;
  parallel_for(n, [&](int i) { out[i] *= scale; });
}

/// Impulse of the scene's plug-in analytic forces (applied outside the
/// learned cell).
template <typename T>
void add_plug_impulse(const VecT<T>* x, const VecT<T>* v, const SceneKernel<T>& k, VecT<T>* out) {
  const int n = k.topo->node_count();
  const T scale = k.dt / k.mass;
  if (k.plug_pressure && k.pressure != T(0)) {
    std::vector<VecT<T>> f(static_cast<size_t>(n));
    accumulate_pressure(x, *k.topo, k.pressure, f.data());
    parallel_for(n, [&](int i) { out[i] += f[static_cast<size_t>(i)] * scale; });
  }
  if (k.plug_gravity) {
    const VecT<T> dv = k.gravity * k.dt;
    parallel_for(n, [&](int i) { out[i] += dv; });
  }
  if (k.plug_drag) {
    const T c = k.drag * scale;
    parallel_for(n, [&](int i) { out[i] -= v[i] * c; });
  }
}

/// The shared constraint-and-advance chain of both the simulator step and
/// the network step: velocity update by the given impulse, velocity-level
/// collision response and pin velocities, advection, position-level
/// intersection elimination, Dirichlet re-pin. `t_next` is the absolute time
/// of the frame being produced, so moving pins land exactly on the anchor
/// path regardless of how many steps led here. `constrained`, when non-null,
/// is set to 1 for nodes touched by pins or collision response.
template <typename T>
void advance_with_impulse(const VecT<T>* x, const VecT<T>* v, const VecT<T>* impulse,
                          const SceneKernel<T>& k, T t_next, VecT<T>* x_out, VecT<T>* v_out,
                          uint8_t* constrained) {
  const int n = k.topo->node_count();
  parallel_for(n, [&](int i) {
    if (constrained) constrained[i] = 0;
    VecT<T> vv = v[i] + impulse[i];
    // velocity-level response for nodes resting on a collider
    for (const auto& s : k.spheres) {
      const VecT<T> r = x[i] - s.center;
      const T dist = r.norm();
      if (dist > T(0) && dist <= s.radius * (T(1) + contact_band<T>())) {
        const T vn = vv.dot(r) / dist;
        if (vn < T(0)) {
          const VecT<T> nrm = r / dist;
          vv = (vv - nrm * vn) * (T(1) - s.friction);
          if (constrained) constrained[i] = 1;
        }
      }
    }
    v_out[i] = vv;
    x_out[i] = x[i] + vv * k.dt;
  });
  // position-level intersection elimination with inelastic velocity response
  if (!k.spheres.empty()) {
    parallel_for(n, [&](int i) {
      for (const auto& s : k.spheres) {
        const VecT<T> r = x_out[i] - s.center;
        const T dist = r.norm();
        if (dist > T(0) && dist < s.radius) {
          const VecT<T> nrm = r / dist;
          x_out[i] = s.center + nrm * s.radius;
          const T vn = v_out[i].dot(nrm);
          if (vn < T(0)) v_out[i] = (v_out[i] - nrm * vn) * (T(1) - s.friction);
          if (constrained) constrained[i] = 1;
        }
      }
    });
  }
  // Dirichlet re-pin, last so pins always end exactly on the anchor path
  for (size_t p = 0; p < k.pin_nodes.size(); ++p) {
    const int i = k.pin_nodes[p];
    v_out[i] = k.pin_velocity;
    x_out[i] = k.pin_anchors[p] + k.pin_velocity * t_next;
    if (constrained) constrained[i] = 1;
  }
}

/// Branch weights cast once to the kernel scalar type.
template <typename T>
struct NetKernel {
  std::array<T, kChannels> kernel_gain{}, linear_w{}, nonlinear_w{}, deriv_w{};
  VecT<T> linear_b{};
  T self_velocity_w{}, isru_alpha{};
};

/// One network cell evaluation: per-node impulse from the linear, nonlinear
/// and derivative branches over the stencil difference channels, plus the
/// shared bias and the self-velocity term.
template <typename T>
void forward_impulse(const VecT<T>* x, const VecT<T>* v, const GridTopology& topo,
                     const NetKernel<T>& net, VecT<T>* out) {
  parallel_for(topo.node_count(), [&](int i) {
    VecT<T> acc = net.linear_b + v[i] * net.self_velocity_w;
    const uint16_t m = topo.mask[static_cast<size_t>(i)];
    for (int c = 0; c < kChannels; ++c) {
      if (!((m >> c) & 1u)) continue;
      const int j = i + topo.neighbor_delta[static_cast<size_t>(c)];
      const size_t cc = static_cast<size_t>(c);
      const VecT<T> phi = (x[i] - x[j]) * net.kernel_gain[cc];
      const VecT<T> xi = (v[i] - v[j]) * net.kernel_gain[cc];
      const VecT<T> s = isru3(phi, net.isru_alpha);
      acc += phi * net.linear_w[cc] + s * net.nonlinear_w[cc] + xi.hadamard(s) * net.deriv_w[cc];
    }
    out[i] = acc;
  });
}

}  // namespace cloth::detail
