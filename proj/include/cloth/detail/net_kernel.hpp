#pragma once

#include "cloth/detail/kernels.hpp"
#include "cloth/net.hpp"

namespace cloth::detail {

template <typename T>
NetKernel<T> make_net_kernel(const NetworkParams& p) {
  NetKernel<T> k;
  for (int c = 0; c < kChannels; ++c) {
    const size_t cc = static_cast<size_t>(c);
    k.kernel_gain[cc] = static_cast<T>(p.kernel_gain[cc]);
    k.linear_w[cc] = static_cast<T>(p.linear_w[cc]);
    k.nonlinear_w[cc] = static_cast<T>(p.nonlinear_w[cc]);
    k.deriv_w[cc] = static_cast<T>(p.deriv_w[cc]);
  }
  k.linear_b = p.linear_b.template cast<T>();
  k.self_velocity_w = static_cast<T>(p.self_velocity_w);
  k.isru_alpha = static_cast<T>(p.isru_alpha);
  return k;
}

}  // namespace cloth::detail
