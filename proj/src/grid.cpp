#include "cloth/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "cloth/error.hpp"

namespace cloth {

const std::array<StencilOffset, kChannels>& stencil_offsets() {
  static const std::array<StencilOffset, kChannels> offsets = {{
      {1, 0, 1.0},
      {0, 1, 1.0},
      {-1, 0, 1.0},
      {0, -1, 1.0},
      {1, 1, std::numbers::sqrt2},
      {-1, 1, std::numbers::sqrt2},
      {-1, -1, std::numbers::sqrt2},
      {1, -1, std::numbers::sqrt2},
      {2, 0, 2.0},
      {0, 2, 2.0},
      {-2, 0, 2.0},
      {0, -2, 2.0},
  }};
  return offsets;
}

int negated_channel(int c) {
  static const std::array<int, kChannels> negated = {2, 3, 0, 1, 6, 7, 4, 5, 10, 11, 8, 9};
  return negated[static_cast<size_t>(c)];
}

uint64_t channel_order_hash() {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_byte = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (const StencilOffset& o : stencil_offsets()) {
    char buf[64];
    const int len = std::snprintf(buf, sizeof buf, "%d,%d,%.17g;", o.dx, o.dy, o.rest_multiplier);
    for (int i = 0; i < len; ++i) mix_byte(static_cast<unsigned char>(buf[i]));
  }
  return h;
}

bool ClothState::finite() const {
  for (const Vec3& p : x)
    if (!p.finite()) return false;
  for (const Vec3& p : v)
    if (!p.finite()) return false;
  return true;
}

std::size_t GridTopology::spring_pair_count() const {
  std::size_t directed = 0;
  for (uint16_t m : mask) directed += static_cast<std::size_t>(std::popcount(m));
  return directed / 2;
}

int GridTopology::max_springs_per_node() const {
  int best = 0;
  for (uint16_t m : mask) best = std::max(best, std::popcount(m));
  return best;
}

void MaterialParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(stiffness) || stiffness < 0.0)
    throw ConfigError("material.stiffness: must be a finite value >= 0");
  if (!finite(damping) || damping < 0.0)
    throw ConfigError("material.damping: must be a finite value >= 0");
  if (!finite(mass) || mass <= 0.0) throw ConfigError("material.mass: must be a finite value > 0");
  if (!gravity.finite()) throw ConfigError("material.gravity: components must be finite");
  if (!finite(drag) || drag < 0.0) throw ConfigError("material.drag: must be a finite value >= 0");
  if (!finite(pressure)) throw ConfigError("material.pressure: must be finite");
}

GridInit build_grid(int nx, int ny, double spacing, const Vec3& origin, GridPlane plane) {
  if (nx < 2) throw ConfigError("grid.nx: must be >= 2");
  if (ny < 2) throw ConfigError("grid.ny: must be >= 2");
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw ConfigError("grid.spacing: must be a finite value > 0");
  if (!origin.finite()) throw ConfigError("grid.origin: components must be finite");

  GridInit g;
  GridTopology& topo = g.topology;
  topo.nx = nx;
  topo.ny = ny;
  topo.spacing = spacing;
  const auto& offsets = stencil_offsets();
  for (int c = 0; c < kChannels; ++c) {
    topo.neighbor_delta[static_cast<size_t>(c)] = offsets[static_cast<size_t>(c)].dy * nx +
                                                  offsets[static_cast<size_t>(c)].dx;
    topo.rest_length[static_cast<size_t>(c)] =
        spacing * offsets[static_cast<size_t>(c)].rest_multiplier;
  }
  topo.mask.assign(static_cast<size_t>(nx) * static_cast<size_t>(ny), 0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      uint16_t m = 0;
      for (int c = 0; c < kChannels; ++c) {
        const int jx = ix + offsets[static_cast<size_t>(c)].dx;
        const int jy = iy + offsets[static_cast<size_t>(c)].dy;
        if (jx >= 0 && jx < nx && jy >= 0 && jy < ny) m |= static_cast<uint16_t>(1u << c);
      }
      topo.mask[static_cast<size_t>(topo.node_index(ix, iy))] = m;
    }
  }

  ClothState& state = g.state;
  state.x.resize(static_cast<size_t>(topo.node_count()));
  state.v.assign(static_cast<size_t>(topo.node_count()), Vec3{});
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double a = spacing * ix;
      const double b = spacing * iy;
      Vec3 p = origin;
      switch (plane) {
        case GridPlane::XY:
          p += Vec3{a, b, 0.0};
          break;
        case GridPlane::XZ:
          p += Vec3{a, 0.0, b};
          break;
        case GridPlane::YZ:
          p += Vec3{0.0, a, b};
          break;
      }
      state.x[static_cast<size_t>(topo.node_index(ix, iy))] = p;
    }
  }
  return g;
}

}  // namespace cloth
