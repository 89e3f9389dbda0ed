#pragma once

#include <cmath>

namespace uavgrid {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dist2d(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// straight-line distance between a ground point and a point dz above b
inline double dist3d(Vec2 a, Vec2 b, double dz) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + dz * dz);
}

}  // namespace uavgrid
