#include "cloth/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

#include "cloth/detail/kernels.hpp"
#include "cloth/detail/net_kernel.hpp"
#include "cloth/error.hpp"
#include "cloth/sim.hpp"

namespace cloth {

namespace {

double bbox_diagonal(const ClothState& frame) {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = -lo;
  for (const Vec3& p : frame.x) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  return (hi - lo).norm();
}

/// Timed semi-implicit stepping in the requested scalar type. The network
/// variant swaps the force evaluation for the cell forward pass.
template <typename T>
double run_steps(const Scene& scene, const NetworkParams* params, int steps, int warmup) {
  const auto kernel = detail::make_scene_kernel<T>(scene);
  detail::NetKernel<T> net;
  if (params) net = detail::make_net_kernel<T>(*params);

  const size_t n = static_cast<size_t>(scene.topology.node_count());
  std::vector<VecT<T>> x(n), v(n), x_next(n), v_next(n), impulse(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = scene.initial.x[i].template cast<T>();
    v[i] = scene.initial.v[i].template cast<T>();
  }

  auto one_step = [&](T t_next) {
    if (params) {
      detail::forward_impulse(x.data(), v.data(), scene.topology, net, impulse.data());
      detail::add_plug_impulse(x.data(), v.data(), kernel, impulse.data());
    } else {
      detail::total_impulse(x.data(), v.data(), kernel, impulse.data());
    }
    detail::advance_with_impulse(x.data(), v.data(), impulse.data(), kernel, t_next, x_next.data(),
                                 v_next.data(), nullptr);
    x.swap(x_next);
    v.swap(v_next);
  };

  int k = 0;
  for (; k < warmup; ++k) one_step(static_cast<T>(k + 1) * kernel.dt);
  const auto begin = std::chrono::steady_clock::now();
  for (; k < warmup + steps; ++k) one_step(static_cast<T>(k + 1) * kernel.dt);
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(end - begin).count();
}

BenchResult bench(const Scene& scene, const NetworkParams* params, int steps, int warmup,
                  Precision precision) {
  scene.validate();
  if (steps < 1) throw ConfigError("bench: steps must be >= 1");
  if (warmup < 0) throw ConfigError("bench: warmup must be >= 0");
  BenchResult r;
  r.steps = steps;
  r.warmup = warmup;
  r.precision = precision;
  r.seconds = precision == Precision::F32 ? run_steps<float>(scene, params, steps, warmup)
                                          : run_steps<double>(scene, params, steps, warmup);
  r.steps_per_second = static_cast<double>(steps) / std::max(r.seconds, 1e-12);
  return r;
}

}  // namespace

Trajectory rollout(const NetworkParams& params, const Scene& scene, int steps) {
  scene.validate();
  if (steps < 0) steps = scene.steps;
  Trajectory traj;
  traj.nx = scene.topology.nx;
  traj.ny = scene.topology.ny;
  traj.dt = scene.dt;
  traj.spacing = scene.topology.spacing;
  traj.frames.reserve(static_cast<size_t>(steps) + 1);
  traj.frames.push_back(apply_dirichlet(scene.initial, scene.bc, 0.0));
  for (int k = 0; k < steps; ++k) {
    ClothState next = nn_step(traj.frames.back(), scene, params, (k + 1) * scene.dt);
    if (!next.finite())
      throw NumericsError("rollout diverged: non-finite state at frame " + std::to_string(k + 1));
    traj.frames.push_back(std::move(next));
  }
  return traj;
}

EvalReport evaluate_rollout(const Trajectory& test, const Trajectory& reference) {
  test.validate();
  reference.validate();
  if (test.nx != reference.nx || test.ny != reference.ny)
    throw ConfigError("evaluate: trajectories have different grid shapes");
  if (test.frame_count() != reference.frame_count())
    throw ConfigError("evaluate: trajectories have different frame counts (" +
                      std::to_string(test.frame_count()) + " vs " +
                      std::to_string(reference.frame_count()) + ")");

  const double diag = bbox_diagonal(reference.frames.front());
  if (!(diag > 0.0))
    throw NumericsError("evaluate: reference frame 0 has a degenerate bounding box");

  EvalReport report;
  const size_t n = test.frames.front().x.size();
  for (int f = 0; f < test.frame_count(); ++f) {
    const ClothState& a = test.frames[static_cast<size_t>(f)];
    const ClothState& b = reference.frames[static_cast<size_t>(f)];
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += (a.x[i] - b.x[i]).norm();
    report.frame_error_pct.push_back(100.0 * sum / (static_cast<double>(n) * diag));
  }
  double total = 0.0;
  for (double e : report.frame_error_pct) total += e;
  report.mean_error_pct = total / static_cast<double>(report.frame_error_pct.size());
  report.final_error_pct = report.frame_error_pct.back();
  return report;
}

std::string params_fingerprint(const NetworkParams& params) {
  uint64_t h = 0xcbf29ce484222325ULL;
  NetworkParams copy = params;
  for_each_scalar(copy, [&h](ParamGroup, int, double& value) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &value, sizeof bytes);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  });
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BenchResult benchmark_sim(const Scene& scene, int steps, int warmup, Precision precision) {
  return bench(scene, nullptr, steps, warmup, precision);
}

BenchResult benchmark_net(const NetworkParams& params, const Scene& scene, int steps, int warmup,
                          Precision precision) {
  return bench(scene, &params, steps, warmup, precision);
}

}  // namespace cloth
