#pragma once

#include <cmath>
#include <vector>

namespace cloth {

/// 3-component vector, templated so the benchmark path can run in f32.
template <typename T>
struct VecT {
  T x{}, y{}, z{};

  constexpr VecT() = default;
  constexpr VecT(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

  template <typename U>
  constexpr VecT<U> cast() const {
    return {static_cast<U>(x), static_cast<U>(y), static_cast<U>(z)};
  }

  constexpr VecT operator+(const VecT& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr VecT operator-(const VecT& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr VecT operator-() const { return {-x, -y, -z}; }
  constexpr VecT operator*(T s) const { return {x * s, y * s, z * s}; }
  constexpr VecT operator/(T s) const { return {x / s, y / s, z / s}; }
  constexpr VecT& operator+=(const VecT& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr VecT& operator-=(const VecT& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr VecT& operator*=(T s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  constexpr bool operator==(const VecT& o) const { return x == o.x && y == o.y && z == o.z; }

  constexpr T dot(const VecT& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr VecT cross(const VecT& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  /// Componentwise product.
  constexpr VecT hadamard(const VecT& o) const { return {x * o.x, y * o.y, z * o.z}; }
  constexpr T squared_norm() const { return dot(*this); }
  T norm() const { return std::sqrt(squared_norm()); }

  constexpr T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

template <typename T>
constexpr VecT<T> operator*(T s, const VecT<T>& v) {
  return v * s;
}

using Vec3 = VecT<double>;
using Vec3f = VecT<float>;

using Vec3Field = std::vector<Vec3>;

}  // namespace cloth
