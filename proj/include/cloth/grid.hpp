#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cloth/vec3.hpp"

namespace cloth {

/// Number of neighbor difference channels (the stencil minus its center).
inline constexpr int kChannels = 12;

/// One stencil neighbor: grid offset plus its rest-length multiple of the
/// grid spacing.
struct StencilOffset {
  int dx;
  int dy;
  double rest_multiplier;
};

/// The 12 neighbor offsets in canonical channel order:
/// cardinal E,N,W,S; diagonal NE,NW,SW,SE; skip E2,N2,W2,S2.
/// This order is frozen: checkpoints and feature layouts depend on it.
const std::array<StencilOffset, kChannels>& stencil_offsets();

/// Channel whose offset is the negation of channel c.
int negated_channel(int c);

/// Hash of the canonical channel ordering, embedded in checkpoints so a
/// file written against a different ordering is refused on load.
uint64_t channel_order_hash();

/// Positions and velocities of all grid nodes. Node index is iy*nx + ix.
struct ClothState {
  Vec3Field x;
  Vec3Field v;

  int node_count() const { return static_cast<int>(x.size()); }
  bool finite() const;
};

/// Static stencil connectivity of an nx-by-ny grid.
struct GridTopology {
  int nx = 0;
  int ny = 0;
  double spacing = 0.0;
  std::array<int, kChannels> neighbor_delta{};   // node index delta per channel
  std::array<double, kChannels> rest_length{};   // spacing * rest_multiplier
  std::vector<uint16_t> mask;                    // bit c set iff neighbor in grid

  int node_count() const { return nx * ny; }
  bool valid(int node, int c) const { return (mask[static_cast<size_t>(node)] >> c) & 1u; }
  int neighbor(int node, int c) const { return node + neighbor_delta[static_cast<size_t>(c)]; }
  int node_index(int ix, int iy) const { return iy * nx + ix; }

  /// Count of unordered (i, j) spring pairs with a valid channel between them.
  std::size_t spring_pair_count() const;
  /// Number of valid channels at the most-connected node.
  int max_springs_per_node() const;
};

/// Material constants for the mass-spring sheet. `pressure` is signed: the
/// config layer folds the chosen sheet side into its sign.
struct MaterialParams {
  double stiffness = 0.0;   // spring constant, force per unit elongation
  double damping = 0.0;     // spring damping coefficient
  double mass = 1.0;        // per-node mass
  Vec3 gravity{};           // acceleration vector
  double drag = 0.0;        // air drag coefficient, force per unit velocity
  double pressure = 0.0;    // per-node pressure scale (signed)

  void validate() const;  // throws ConfigError naming the bad field
};

enum class GridPlane { XY, XZ, YZ };

struct GridInit {
  GridTopology topology;
  ClothState state;
};

/// Builds a regular nx-by-ny grid in the given plane with zero velocities,
/// and its stencil topology. Deterministic: identical inputs give
/// bit-identical outputs. Requires nx >= 2, ny >= 2, spacing > 0.
GridInit build_grid(int nx, int ny, double spacing, const Vec3& origin, GridPlane plane);

}  // namespace cloth
