#include "cloth/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cloth/detail/kernels.hpp"
#include "cloth/detail/net_kernel.hpp"
#include "cloth/error.hpp"
#include "cloth/sim.hpp"
#include "cloth/threads.hpp"

namespace cloth {

namespace {

void check_shape(const ClothState& state, const GridTopology& topo) {
  if (state.x.size() != static_cast<size_t>(topo.node_count()) ||
      state.v.size() != state.x.size())
    throw ConfigError("state shape does not match the grid topology");
}

void check_alpha(const NetworkParams& params) {
  if (!(params.isru_alpha > 0.0))
    throw ConfigError("isru_alpha: must be > 0");
}

/// Failure-path helper: names the branch that produced a non-finite value
/// at one node.
[[noreturn]] void diagnose_forward(const ClothState& state, const GridTopology& topo,
                                   const NetworkParams& p, int node) {
  const size_t i = static_cast<size_t>(node);
  Vec3 lin = p.linear_b;
  Vec3 non{};
  Vec3 der = state.v[i] * p.self_velocity_w;
  const uint16_t m = topo.mask[i];
  for (int c = 0; c < kChannels; ++c) {
    if (!((m >> c) & 1u)) continue;
    const size_t cc = static_cast<size_t>(c);
    const size_t j = static_cast<size_t>(topo.neighbor(node, c));
    const Vec3 phi = (state.x[i] - state.x[j]) * p.kernel_gain[cc];
    const Vec3 xi = (state.v[i] - state.v[j]) * p.kernel_gain[cc];
    const Vec3 s = detail::isru3(phi, p.isru_alpha);
    lin += phi * p.linear_w[cc];
    non += s * p.nonlinear_w[cc];
    der += xi.hadamard(s) * p.deriv_w[cc];
  }
  const char* branch = !lin.finite() ? "linear" : (!non.finite() ? "nonlinear" : "derivative");
  throw NumericsError("network impulse non-finite at node " + std::to_string(node) + " (" +
                      branch + " branch)");
}

}  // namespace

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Kernel:
      return "kernel";
    case ParamGroup::Linear:
      return "linear";
    case ParamGroup::Bias:
      return "bias";
    case ParamGroup::Nonlinear:
      return "nonlinear";
    case ParamGroup::Deriv:
      return "deriv";
    case ParamGroup::SelfVelocity:
      return "self_velocity";
    case ParamGroup::Alpha:
      return "alpha";
  }
  return "?";
}

ParamGroup param_group_from_name(const std::string& name) {
  for (int g = 0; g < kParamGroups; ++g)
    if (name == param_group_name(static_cast<ParamGroup>(g))) return static_cast<ParamGroup>(g);
  throw ConfigError("unknown parameter group: " + name);
}

NetworkParams::NetworkParams() {
  kernel_gain.fill(1.0);
  linear_w.fill(0.0);
  linear_b = Vec3{};
  nonlinear_w.fill(0.0);
  deriv_w.fill(0.0);
  self_velocity_w = 0.0;
  isru_alpha = 1.0;
  trainable.fill(true);
  set_trainable(ParamGroup::Kernel, false);
  set_trainable(ParamGroup::Alpha, false);
  brackets.fill(InitBracket{-1.0, 1.0});
}

void ParamGradients::add_scaled(const ParamGradients& o, double s) {
  for (int c = 0; c < kChannels; ++c) {
    const size_t cc = static_cast<size_t>(c);
    kernel[cc] += o.kernel[cc] * s;
    linear[cc] += o.linear[cc] * s;
    nonlinear[cc] += o.nonlinear[cc] * s;
    deriv[cc] += o.deriv[cc] * s;
  }
  bias += o.bias * s;
  self_velocity += o.self_velocity * s;
  alpha += o.alpha * s;
}

double isru(double z, double alpha) { return detail::isru(z, alpha); }

ChannelFeatures extract_channels(const ClothState& state, const GridTopology& topo,
                                 const std::array<double, kChannels>& kernel_gain) {
  check_shape(state, topo);
  const size_t n = state.x.size();
  ChannelFeatures feat;
  feat.pos_diff.assign(n * kChannels, Vec3{});
  feat.vel_diff.assign(n * kChannels, Vec3{});
  feat.vel_self = state.v;
  parallel_for(static_cast<int>(n), [&](int i) {
    const size_t ii = static_cast<size_t>(i);
    const uint16_t m = topo.mask[ii];
    for (int c = 0; c < kChannels; ++c) {
      if (!((m >> c) & 1u)) continue;
      const size_t cc = static_cast<size_t>(c);
      const size_t j = static_cast<size_t>(topo.neighbor(i, c));
      feat.pos_diff[ii * kChannels + cc] = (state.x[ii] - state.x[j]) * kernel_gain[cc];
      feat.vel_diff[ii * kChannels + cc] = (state.v[ii] - state.v[j]) * kernel_gain[cc];
    }
  });
  return feat;
}

Vec3Field forward_impulse(const ClothState& state, const GridTopology& topo,
                          const NetworkParams& params) {
  check_shape(state, topo);
  check_alpha(params);
  const auto net = detail::make_net_kernel<double>(params);
  Vec3Field out(state.x.size());
  detail::forward_impulse(state.x.data(), state.v.data(), topo, net, out.data());
  for (size_t i = 0; i < out.size(); ++i)
    if (!out[i].finite()) diagnose_forward(state, topo, params, static_cast<int>(i));
  return out;
}

ParamGradients backward_gradients(const ClothState& state, const GridTopology& topo,
                                  const NetworkParams& params, const Vec3Field& upstream) {
  check_shape(state, topo);
  check_alpha(params);
  if (upstream.size() != state.x.size())
    throw ConfigError("upstream cotangent shape does not match the state");

  const int n = topo.node_count();
  constexpr int kChunk = 1024;
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<ParamGradients> partial(static_cast<size_t>(chunks));
  // fixed chunk boundaries keep the reduction order independent of the
  // thread count
  parallel_for(chunks, [&](int chunk) {
    ParamGradients& grad = partial[static_cast<size_t>(chunk)];
    const int begin = chunk * kChunk;
    const int end = std::min(n, begin + kChunk);
    const double alpha = params.isru_alpha;
    for (int i = begin; i < end; ++i) {
      const size_t ii = static_cast<size_t>(i);
      const Vec3 u = upstream[ii];
      grad.bias += u;
      grad.self_velocity += u.dot(state.v[ii]);
      const uint16_t m = topo.mask[ii];
      for (int c = 0; c < kChannels; ++c) {
        if (!((m >> c) & 1u)) continue;
        const size_t cc = static_cast<size_t>(c);
        const size_t j = static_cast<size_t>(topo.neighbor(i, c));
        const Vec3 dx = state.x[ii] - state.x[j];
        const Vec3 dv = state.v[ii] - state.v[j];
        const double g = params.kernel_gain[cc];
        const Vec3 phi = dx * g;
        const Vec3 xi = dv * g;
        Vec3 s, sp, sa;
        for (int d = 0; d < 3; ++d) {
          const double z = phi[d];
          const double q = 1.0 + alpha * z * z;
          const double rq = 1.0 / std::sqrt(q);
          s[d] = z * rq;
          sp[d] = rq / q;                     // (1 + a z^2)^(-3/2)
          sa[d] = -0.5 * z * z * z * rq / q;  // d isru / d alpha
        }
        grad.linear[cc] += u.dot(phi);
        grad.nonlinear[cc] += u.dot(s);
        grad.deriv[cc] += u.dot(xi.hadamard(s));
        grad.kernel[cc] += u.dot(dx * params.linear_w[cc] +
                                 sp.hadamard(dx) * params.nonlinear_w[cc] +
                                 (dv.hadamard(s) + xi.hadamard(sp.hadamard(dx))) *
                                     params.deriv_w[cc]);
        grad.alpha +=
            u.dot(sa * params.nonlinear_w[cc] + xi.hadamard(sa) * params.deriv_w[cc]);
      }
    }
  });
  ParamGradients total;
  for (const ParamGradients& p : partial) total.add_scaled(p, 1.0);
  return total;
}

double finite_diff_check(const ClothState& state, const GridTopology& topo,
                         const NetworkParams& params, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_check: eps must be > 0");
  auto loss = [&](const NetworkParams& p) {
    const Vec3Field out = forward_impulse(state, topo, p);
    double sum = 0.0;
    for (const Vec3& o : out) sum += o.squared_norm();
    return sum;
  };
  Vec3Field out = forward_impulse(state, topo, params);
  Vec3Field upstream(out.size());
  for (size_t i = 0; i < out.size(); ++i) upstream[i] = out[i] * 2.0;
  ParamGradients analytic = backward_gradients(state, topo, params, upstream);

  std::vector<double> analytic_flat;
  analytic_flat.reserve(NetworkParams::kScalarCount);
  for_each_gradient(analytic, [&](ParamGroup, int, double& v) { analytic_flat.push_back(v); });

  double worst = 0.0;
  NetworkParams probe = params;
  int idx = -1;
  for_each_scalar(probe, [&](ParamGroup g, int, double& scalar) {
    ++idx;
    if (!params.is_trainable(g)) return;
    const double saved = scalar;
    scalar = saved + eps;
    const double hi = loss(probe);
    scalar = saved - eps;
    const double lo = loss(probe);
    scalar = saved;
    const double fd = (hi - lo) / (2.0 * eps);
    const double ga = analytic_flat[static_cast<size_t>(idx)];
    const double scale = std::max(std::abs(ga), std::abs(fd));
    if (scale < 1e-12) return;
    worst = std::max(worst, std::abs(ga - fd) / scale);
  });
  return worst;
}

ClothState nn_step(const ClothState& state, const Scene& scene, const NetworkParams& params,
                   double t_next) {
  Vec3Field impulse = forward_impulse(state, scene.topology, params);
  const auto kernel = detail::make_scene_kernel<double>(scene);
  detail::add_plug_impulse(state.x.data(), state.v.data(), kernel, impulse.data());
  return advance_with_impulse(state, impulse, scene, t_next);
}

}  // namespace cloth
