#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cloth/scene.hpp"

namespace cloth {

/// Trainable parameter groups, in serialization order.
enum class ParamGroup : int {
  Kernel = 0,       // per-channel kernel gains (frozen at 1 by default)
  Linear,           // linear branch channel weights
  Bias,             // single shared 3-vector bias
  Nonlinear,        // nonlinear branch channel weights
  Deriv,            // derivative branch channel weights
  SelfVelocity,     // scalar gain on the node's own velocity
  Alpha,            // ISRU shape parameter (frozen outside pre-search)
};
inline constexpr int kParamGroups = 7;
const char* param_group_name(ParamGroup g);
/// Parses a group name; throws ConfigError on unknown names.
ParamGroup param_group_from_name(const std::string& name);

/// Scale/sign bracket for uniform initialization of one group.
struct InitBracket {
  double lo = -1.0;
  double hi = 1.0;
};

/// All network cell parameters. Channel-indexed arrays follow the canonical
/// stencil order. Serializes to exactly 53 scalars (4*12 + 3 + 1 + 1).
struct NetworkParams {
  std::array<double, kChannels> kernel_gain;
  std::array<double, kChannels> linear_w;
  Vec3 linear_b;
  std::array<double, kChannels> nonlinear_w;
  std::array<double, kChannels> deriv_w;
  double self_velocity_w;
  double isru_alpha;

  std::array<bool, kParamGroups> trainable;
  std::array<InitBracket, kParamGroups> brackets;

  static constexpr int kScalarCount = 53;

  /// Zero weights, unit kernel gains, alpha = 1; kernel and alpha frozen.
  NetworkParams();

  bool is_trainable(ParamGroup g) const { return trainable[static_cast<size_t>(g)]; }
  void set_trainable(ParamGroup g, bool on) { trainable[static_cast<size_t>(g)] = on; }
};

/// Gradients (or any per-scalar companion values) with the same shape as
/// the trainable parameters.
struct ParamGradients {
  std::array<double, kChannels> kernel{};
  std::array<double, kChannels> linear{};
  Vec3 bias{};
  std::array<double, kChannels> nonlinear{};
  std::array<double, kChannels> deriv{};
  double self_velocity = 0.0;
  double alpha = 0.0;

  void add_scaled(const ParamGradients& o, double s);
};

/// Visits every parameter scalar in serialization order:
/// fn(group, index_within_group, reference).
template <typename Params, typename Fn>
void for_each_scalar(Params& p, Fn&& fn) {
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Kernel, c, p.kernel_gain[static_cast<size_t>(c)]);
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Linear, c, p.linear_w[static_cast<size_t>(c)]);
  for (int d = 0; d < 3; ++d) fn(ParamGroup::Bias, d, p.linear_b[d]);
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Nonlinear, c, p.nonlinear_w[static_cast<size_t>(c)]);
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Deriv, c, p.deriv_w[static_cast<size_t>(c)]);
  fn(ParamGroup::SelfVelocity, 0, p.self_velocity_w);
  fn(ParamGroup::Alpha, 0, p.isru_alpha);
}
template <typename Grads, typename Fn>
void for_each_gradient(Grads& g, Fn&& fn) {
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Kernel, c, g.kernel[static_cast<size_t>(c)]);
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Linear, c, g.linear[static_cast<size_t>(c)]);
  for (int d = 0; d < 3; ++d) fn(ParamGroup::Bias, d, g.bias[d]);
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Nonlinear, c, g.nonlinear[static_cast<size_t>(c)]);
  for (int c = 0; c < kChannels; ++c) fn(ParamGroup::Deriv, c, g.deriv[static_cast<size_t>(c)]);
  fn(ParamGroup::SelfVelocity, 0, g.self_velocity);
  fn(ParamGroup::Alpha, 0, g.alpha);
}

/// Per-node, per-channel difference features. Invalid channels are exactly
/// zero. Layout: feature of (node i, channel c) at index i*kChannels + c.
struct ChannelFeatures {
  std::vector<Vec3> pos_diff;  // from positions
  std::vector<Vec3> vel_diff;  // from velocities
  std::vector<Vec3> vel_self;  // one extra channel: the node's own velocity
};

/// Inverse square root unit: z / sqrt(1 + alpha z^2). Odd, monotone,
/// bounded by 1/sqrt(alpha).
double isru(double z, double alpha);

/// Two-tap difference features per channel (dilation 2 on skip channels),
/// identical across the three spatial dimensions.
ChannelFeatures extract_channels(const ClothState& state, const GridTopology& topo,
                                 const std::array<double, kChannels>& kernel_gain);

/// Per-node 3D impulse from the three-branch cell.
Vec3Field forward_impulse(const ClothState& state, const GridTopology& topo,
                          const NetworkParams& params);

/// Exact reverse-mode gradients of forward_impulse contracted with the
/// upstream cotangent, for every parameter group (freezing is applied by
/// the optimizer, not here).
ParamGradients backward_gradients(const ClothState& state, const GridTopology& topo,
                                  const NetworkParams& params, const Vec3Field& upstream);

/// Central-difference check of backward_gradients on the scalar loss
/// sum_i |impulse_i|^2. Returns the worst relative error over all scalars
/// of trainable groups.
double finite_diff_check(const ClothState& state, const GridTopology& topo,
                         const NetworkParams& params, double eps);

/// One network step producing the frame at time t_next: forward impulse plus
/// the scene's plug-in impulses, then the same constraint chain as the
/// simulator step.
ClothState nn_step(const ClothState& state, const Scene& scene, const NetworkParams& params,
                   double t_next);

}  // namespace cloth
