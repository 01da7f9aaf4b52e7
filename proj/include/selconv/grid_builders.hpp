#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "selconv/graph.hpp"

namespace selconv {

// Row-major boolean image; nonzero marks pixels that belong to the domain.
struct Mask {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<char> data;

  static Mask filled(std::int64_t h, std::int64_t w, bool value) {
    if (h < 1 || w < 1) throw std::invalid_argument("mask dims must be >= 1");
    Mask m;
    m.h = h;
    m.w = w;
    m.data.assign(static_cast<std::size_t>(h * w), value ? 1 : 0);
    return m;
  }

  bool at(std::int64_t r, std::int64_t c) const {
    return data[static_cast<std::size_t>(r * w + c)] != 0;
  }
  void set(std::int64_t r, std::int64_t c, bool value) {
    data[static_cast<std::size_t>(r * w + c)] = value ? 1 : 0;
  }
};

// 8-connected pixel lattice; node id r*width+c at position (c, r).
inline PositionalGraph build_grid(std::int64_t height, std::int64_t width) {
  if (height < 1 || width < 1)
    throw std::invalid_argument("grid dimensions must be >= 1");
  std::vector<Vec2> pos;
  pos.reserve(static_cast<std::size_t>(height * width));
  for (std::int64_t r = 0; r < height; ++r)
    for (std::int64_t c = 0; c < width; ++c)
      pos.push_back({static_cast<double>(c), static_cast<double>(r)});
  std::vector<GraphEdge> edges;
  for (std::int64_t r = 0; r < height; ++r)
    for (std::int64_t c = 0; c < width; ++c)
      for (int m = 1; m <= 8; ++m) {
        const auto [dx, dy] = selection_step(m);
        const std::int64_t nc = c + dx, nr = r + dy;
        if (nc < 0 || nc >= width || nr < 0 || nr >= height) continue;
        edges.push_back({r * width + c, nr * width + nc, m});
      }
  return PositionalGraph::build(std::move(pos), std::move(edges));
}

// Grid plus wrap edges joining column 0 and column width-1 as horizontal
// neighbors, diagonals included; the image is a cylinder.
inline PositionalGraph build_panorama(std::int64_t height, std::int64_t width) {
  if (height < 1) throw std::invalid_argument("panorama height must be >= 1");
  // width 2 would duplicate the in-grid horizontal edges.
  if (width < 3) throw std::invalid_argument("panorama width must be >= 3");
  std::vector<Vec2> pos;
  pos.reserve(static_cast<std::size_t>(height * width));
  for (std::int64_t r = 0; r < height; ++r)
    for (std::int64_t c = 0; c < width; ++c)
      pos.push_back({static_cast<double>(c), static_cast<double>(r)});
  std::vector<GraphEdge> edges;
  for (std::int64_t r = 0; r < height; ++r)
    for (std::int64_t c = 0; c < width; ++c)
      for (int m = 1; m <= 8; ++m) {
        const auto [dx, dy] = selection_step(m);
        const std::int64_t nr = r + dy;
        if (nr < 0 || nr >= height) continue;
        std::int64_t nc = c + dx;
        if (nc < 0) nc += width;
        if (nc >= width) nc -= width;
        edges.push_back({r * width + c, nr * width + nc, m});
      }
  return PositionalGraph::build(std::move(pos), std::move(edges));
}

// Grid restricted to masked pixels: a node per true pixel (row-major ids),
// edges kept only when both endpoints are masked.
inline PositionalGraph build_masked_graph(const Mask& mask) {
  if (mask.h < 1 || mask.w < 1 ||
      mask.data.size() != static_cast<std::size_t>(mask.h * mask.w))
    throw std::invalid_argument("malformed mask");
  std::vector<std::int64_t> id(static_cast<std::size_t>(mask.h * mask.w), -1);
  std::vector<Vec2> pos;
  for (std::int64_t r = 0; r < mask.h; ++r)
    for (std::int64_t c = 0; c < mask.w; ++c)
      if (mask.at(r, c)) {
        id[static_cast<std::size_t>(r * mask.w + c)] =
            static_cast<std::int64_t>(pos.size());
        pos.push_back({static_cast<double>(c), static_cast<double>(r)});
      }
  if (pos.empty()) throw std::invalid_argument("mask has no true pixel");
  std::vector<GraphEdge> edges;
  for (std::int64_t r = 0; r < mask.h; ++r)
    for (std::int64_t c = 0; c < mask.w; ++c) {
      const std::int64_t src = id[static_cast<std::size_t>(r * mask.w + c)];
      if (src < 0) continue;
      for (int m = 1; m <= 8; ++m) {
        const auto [dx, dy] = selection_step(m);
        const std::int64_t nc = c + dx, nr = r + dy;
        if (nc < 0 || nc >= mask.w || nr < 0 || nr >= mask.h) continue;
        const std::int64_t dst = id[static_cast<std::size_t>(nr * mask.w + nc)];
        if (dst < 0) continue;
        edges.push_back({src, dst, m});
      }
    }
  return PositionalGraph::build(std::move(pos), std::move(edges));
}

}  // namespace selconv
