#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "selconv/graph.hpp"

namespace selconv {
namespace detail {

struct Int3 {
  std::int64_t x = 0, y = 0, z = 0;
};

inline Int3 operator+(Int3 a, Int3 b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
inline Int3 operator*(std::int64_t s, Int3 v) {
  return {s * v.x, s * v.y, s * v.z};
}
inline std::int64_t dot(Int3 a, Int3 b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Int3 cross(Int3 a, Int3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct CubeFrame {
  Int3 n;  // outward face normal
  Int3 u;  // 3D direction of the face's upward selection
  Int3 r;  // rightward selection direction, n x u
};

// Atlas strip face order: +x, -x, +y (top), -y (bottom), +z, -z. Side faces
// keep up toward the +y pole; the top face's up points at -z, the bottom
// face's up at +z.
inline const std::array<CubeFrame, 6>& cube_frames() {
  static const std::array<CubeFrame, 6> frames = [] {
    std::array<CubeFrame, 6> f{};
    const Int3 x{1, 0, 0}, y{0, 1, 0}, z{0, 0, 1};
    const Int3 nx{-1, 0, 0}, ny{0, -1, 0}, nz{0, 0, -1};
    f[0] = {x, y, {}};
    f[1] = {nx, y, {}};
    f[2] = {y, nz, {}};
    f[3] = {ny, z, {}};
    f[4] = {z, y, {}};
    f[5] = {nz, y, {}};
    for (CubeFrame& fr : f) fr.r = cross(fr.n, fr.u);
    return f;
  }();
  return frames;
}

}  // namespace detail

// Pixel graph of a cube-map sphere: six face_size x face_size faces laid out
// as a horizontal atlas strip (node id = (face*F + row)*F + col, position
// (face*F + col, row)). Faces carry ordinary grid edges; seam edges join
// pixel rows across all 12 cube edges by folding a king step over the border
// onto the adjacent face. Selections live in the source pixel's face frame,
// so upward always means toward the +y pole on side faces. A step that would
// leave across two borders at once has no pixel to land on, which is why the
// three pixels meeting at each cube corner lack one diagonal neighbor.
inline PositionalGraph build_cubemap(std::int64_t face_size) {
  if (face_size < 2)
    throw std::invalid_argument("cube map face size must be >= 2");
  const std::int64_t F = face_size;
  const auto& frames = detail::cube_frames();

  // Everything is scaled by F: pixel (f, r, c) sits at
  // F*n + (2c+1-F)*right + (F-2r-1)*up, all integer.
  auto node_at = [&](detail::Int3 p) -> std::int64_t {
    for (int f = 0; f < 6; ++f) {
      if (detail::dot(p, frames[static_cast<std::size_t>(f)].n) != F) continue;
      const std::int64_t a = detail::dot(p, frames[static_cast<std::size_t>(f)].r);
      const std::int64_t b = detail::dot(p, frames[static_cast<std::size_t>(f)].u);
      const std::int64_t c = (a + F - 1) / 2;
      const std::int64_t r = (F - 1 - b) / 2;
      if (c < 0 || c >= F || r < 0 || r >= F) return -1;
      if (a != 2 * c + 1 - F || b != F - 2 * r - 1) return -1;
      return (static_cast<std::int64_t>(f) * F + r) * F + c;
    }
    return -1;
  };

  std::vector<Vec2> pos;
  pos.reserve(static_cast<std::size_t>(6 * F * F));
  for (std::int64_t f = 0; f < 6; ++f)
    for (std::int64_t r = 0; r < F; ++r)
      for (std::int64_t c = 0; c < F; ++c)
        pos.push_back({static_cast<double>(f * F + c), static_cast<double>(r)});

  std::vector<GraphEdge> edges;
  for (int f = 0; f < 6; ++f) {
    const detail::CubeFrame& fr = frames[static_cast<std::size_t>(f)];
    for (std::int64_t r = 0; r < F; ++r)
      for (std::int64_t c = 0; c < F; ++c) {
        const std::int64_t src = (static_cast<std::int64_t>(f) * F + r) * F + c;
        for (int m = 1; m <= 8; ++m) {
          const auto [dx, dy] = selection_step(m);
          const std::int64_t a = 2 * (c + dx) + 1 - F;
          const std::int64_t b = F - 2 * (r + dy) - 1;
          const bool cross_x = std::llabs(a) > F;
          const bool cross_y = std::llabs(b) > F;
          if (cross_x && cross_y) continue;  // over a cube corner
          detail::Int3 p;
          if (!cross_x && !cross_y) {
            p = F * fr.n + a * fr.r + b * fr.u;
          } else if (cross_x) {
            const std::int64_t s = a > 0 ? 1 : -1;
            p = (s * F) * fr.r + (2 * F - std::llabs(a)) * fr.n + b * fr.u;
          } else {
            const std::int64_t s = b > 0 ? 1 : -1;
            p = (s * F) * fr.u + (2 * F - std::llabs(b)) * fr.n + a * fr.r;
          }
          const std::int64_t dst = node_at(p);
          if (dst < 0) throw std::logic_error("cube fold missed a pixel");
          edges.push_back({src, dst, m});
        }
      }
  }
  return PositionalGraph::build(std::move(pos), std::move(edges));
}

}  // namespace selconv
