#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "selconv/errors.hpp"
#include "selconv/graph.hpp"
#include "selconv/grid_builders.hpp"

namespace selconv {

// Triangulated mesh with a UV atlas. Faces reference 3D vertices and UV
// points independently, so chart seams show up as UV edges referenced by a
// single face while their 3D edge is shared.
struct UvMesh {
  struct Corner {
    std::int64_t v = 0;
    std::int64_t uv = 0;
  };
  struct Tri {
    Corner a, b, c;
  };
  std::vector<std::array<double, 3>> vertices;
  std::vector<Vec2> uvs;
  std::vector<Tri> faces;
};

// Wavefront OBJ subset: `v x y z`, `vt u v`, `f a/b a/b a/b ...` with an
// optional ignored normal index. Polygons are fan-triangulated from their
// first corner; indices are 1-based, negative values count from the end.
// Other keywords and comments are skipped.
inline UvMesh parse_obj(const std::string& text) {
  UvMesh mesh;
  std::istringstream lines(text);
  std::string line;
  std::int64_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError("obj line " + std::to_string(line_no) + ": " + what);
  };
  auto resolve = [&](std::int64_t idx, std::int64_t count,
                     const char* what) -> std::int64_t {
    const std::int64_t out = idx < 0 ? count + idx : idx - 1;
    if (idx == 0 || out < 0 || out >= count)
      fail(std::string(what) + " index out of range");
    return out;
  };
  while (std::getline(lines, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream in(line);
    std::string tag;
    if (!(in >> tag)) continue;
    if (tag == "v") {
      std::array<double, 3> p{};
      if (!(in >> p[0] >> p[1] >> p[2])) fail("vertex needs 3 coordinates");
      mesh.vertices.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(in >> t.x >> t.y)) fail("texture coordinate needs 2 values");
      mesh.uvs.push_back(t);
    } else if (tag == "f") {
      std::vector<UvMesh::Corner> corners;
      std::string item;
      while (in >> item) {
        const std::size_t s1 = item.find('/');
        if (s1 == std::string::npos || s1 + 1 >= item.size() ||
            item[s1 + 1] == '/')
          fail("face corner missing uv index");
        const std::size_t s2 = item.find('/', s1 + 1);
        try {
          const std::int64_t vi = std::stoll(item.substr(0, s1));
          const std::int64_t ti = std::stoll(
              item.substr(s1 + 1, s2 == std::string::npos ? std::string::npos
                                                          : s2 - s1 - 1));
          corners.push_back(
              {resolve(vi, static_cast<std::int64_t>(mesh.vertices.size()),
                       "vertex"),
               resolve(ti, static_cast<std::int64_t>(mesh.uvs.size()), "uv")});
        } catch (const std::invalid_argument&) {
          fail("malformed face corner");
        } catch (const std::out_of_range&) {
          fail("malformed face corner");
        }
      }
      if (corners.size() < 3) fail("face needs at least 3 corners");
      for (std::size_t i = 1; i + 1 < corners.size(); ++i) {
        const UvMesh::Tri tri{corners[0], corners[i], corners[i + 1]};
        const Vec2 a = mesh.uvs[static_cast<std::size_t>(tri.a.uv)];
        const Vec2 b = mesh.uvs[static_cast<std::size_t>(tri.b.uv)];
        const Vec2 c = mesh.uvs[static_cast<std::size_t>(tri.c.uv)];
        const double area2 =
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if (area2 == 0.0) fail("degenerate uv triangle");
        mesh.faces.push_back(tri);
      }
    }
  }
  return mesh;
}

// A directed boundary UV edge, oriented as its face references it. `twin` is
// the boundary edge on another chart sharing the same 3D vertex pair, or -1
// for a true mesh boundary.
struct SeamEdge {
  std::int64_t uv_a = 0;
  std::int64_t uv_b = 0;
  std::int64_t v_a = 0;
  std::int64_t v_b = 0;
  std::int64_t loop = -1;
  std::int64_t twin = -1;
};

struct BoundaryLoop {
  std::vector<std::int64_t> edges;  // ids into UvBoundary::edges, chained
  std::vector<Vec2> points;         // start point of each edge; closed polygon
};

struct UvBoundary {
  std::vector<SeamEdge> edges;
  std::vector<BoundaryLoop> loops;
};

// Chains every once-referenced UV edge into closed loops and pairs seam
// edges across charts through their shared 3D edge. Interior UV edges must
// be referenced exactly twice and boundary chains must close.
inline UvBoundary uv_boundary_loops(const UvMesh& mesh) {
  auto key = [](std::int64_t a, std::int64_t b) {
    return std::make_pair(std::min(a, b), std::max(a, b));
  };
  std::map<std::pair<std::int64_t, std::int64_t>, int> refs;
  std::vector<SeamEdge> directed;
  for (const UvMesh::Tri& f : mesh.faces) {
    const UvMesh::Corner c[3] = {f.a, f.b, f.c};
    for (int i = 0; i < 3; ++i) {
      const UvMesh::Corner& s = c[i];
      const UvMesh::Corner& t = c[(i + 1) % 3];
      directed.push_back({s.uv, t.uv, s.v, t.v, -1, -1});
      ++refs[key(s.uv, t.uv)];
    }
  }
  for (const auto& [pair, n] : refs)
    if (n > 2)
      throw ParseError("uv edge (" + std::to_string(pair.first) + "," +
                       std::to_string(pair.second) +
                       ") referenced more than twice");
  UvBoundary out;
  for (const SeamEdge& e : directed)
    if (refs[key(e.uv_a, e.uv_b)] == 1) out.edges.push_back(e);

  std::map<std::int64_t, std::int64_t> next_from;
  for (std::size_t i = 0; i < out.edges.size(); ++i) {
    const SeamEdge& e = out.edges[i];
    if (!next_from.emplace(e.uv_a, static_cast<std::int64_t>(i)).second)
      throw ParseError("non-manifold boundary: two boundary edges leave uv " +
                       std::to_string(e.uv_a));
  }
  {
    std::set<std::int64_t> entered;
    for (const SeamEdge& e : out.edges)
      if (!entered.insert(e.uv_b).second)
        throw ParseError(
            "non-manifold boundary: two boundary edges enter uv " +
            std::to_string(e.uv_b));
  }
  for (std::size_t i = 0; i < out.edges.size(); ++i) {
    if (out.edges[i].loop >= 0) continue;
    const std::int64_t loop_id = static_cast<std::int64_t>(out.loops.size());
    BoundaryLoop loop;
    std::int64_t cur = static_cast<std::int64_t>(i);
    while (true) {
      SeamEdge& e = out.edges[static_cast<std::size_t>(cur)];
      e.loop = loop_id;
      loop.edges.push_back(cur);
      loop.points.push_back(mesh.uvs[static_cast<std::size_t>(e.uv_a)]);
      const auto it = next_from.find(e.uv_b);
      if (it == next_from.end())
        throw ParseError("open boundary chain after uv edge (" +
                         std::to_string(e.uv_a) + "," +
                         std::to_string(e.uv_b) + ")");
      cur = it->second;
      if (cur == static_cast<std::int64_t>(i)) break;
    }
    out.loops.push_back(std::move(loop));
  }

  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::int64_t>>
      by_3d;
  for (std::size_t i = 0; i < out.edges.size(); ++i)
    by_3d[key(out.edges[i].v_a, out.edges[i].v_b)].push_back(
        static_cast<std::int64_t>(i));
  for (const auto& [pair, ids] : by_3d) {
    if (ids.size() > 2)
      throw ParseError("3d edge (" + std::to_string(pair.first) + "," +
                       std::to_string(pair.second) +
                       ") lies on more than two chart boundaries");
    if (ids.size() == 2) {
      out.edges[static_cast<std::size_t>(ids[0])].twin = ids[1];
      out.edges[static_cast<std::size_t>(ids[1])].twin = ids[0];
    }
  }
  return out;
}

namespace detail {

inline bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  const double cross =
      (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  if (std::abs(cross) > 1e-12) return false;
  const double along = (b.x - a.x) * (p.x - a.x) + (b.y - a.y) * (p.y - a.y);
  const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
  return along >= -1e-12 && along <= len2 + 1e-12;
}

// Even-odd test with a +x ray, half-open in y so vertices count once.
inline bool in_polygon(const std::vector<Vec2>& pts, Vec2 p) {
  bool odd = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[(i + 1) % pts.size()];
    if (on_segment(a, b, p)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_int = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_int) odd = !odd;
    }
  }
  return odd;
}

}  // namespace detail

// Pixel (r, c) of a tex_size^2 image is true when its center
// ((c+0.5)/T, 1-(r+0.5)/T) lies inside any loop polygon under the even-odd
// rule; points exactly on an edge count as inside.
inline Mask rasterize_mask(const std::vector<BoundaryLoop>& loops,
                           std::int64_t tex_size) {
  if (tex_size < 1) throw std::invalid_argument("tex_size must be >= 1");
  for (const BoundaryLoop& loop : loops)
    if (loop.points.size() < 3)
      throw std::invalid_argument("degenerate boundary loop");
  Mask mask = Mask::filled(tex_size, tex_size, false);
  const double t = static_cast<double>(tex_size);
  for (std::int64_t r = 0; r < tex_size; ++r)
    for (std::int64_t c = 0; c < tex_size; ++c) {
      const Vec2 p{(static_cast<double>(c) + 0.5) / t,
                   1.0 - (static_cast<double>(r) + 0.5) / t};
      for (const BoundaryLoop& loop : loops)
        if (detail::in_polygon(loop.points, p)) {
          mask.set(r, c, true);
          break;
        }
    }
  return mask;
}

// Masked grid over the rasterized atlas plus cross-seam edges: pixels within
// 0.75 px of a twinned boundary edge are parameterized by arc length,
// matched to the nearest-parameter pixel of the twin edge (ties toward the
// lower parameter), and connected. The new edge's selection is the one the
// within-chart continuation would have: the twin chart is rotated into this
// chart's frame by the rigid angle between the two edges' UV directions.
inline PositionalGraph build_texture_graph(const UvMesh& mesh,
                                           std::int64_t tex_size) {
  const UvBoundary boundary = uv_boundary_loops(mesh);
  if (boundary.loops.empty())
    throw std::invalid_argument("mesh has no boundary loops");
  const Mask mask = rasterize_mask(boundary.loops, tex_size);
  const PositionalGraph base = build_masked_graph(mask);

  const double t = static_cast<double>(tex_size);
  std::vector<std::int64_t> node_at(
      static_cast<std::size_t>(tex_size * tex_size), -1);
  for (std::int64_t i = 0; i < base.node_count(); ++i) {
    const Vec2 p = base.position(i);
    node_at[static_cast<std::size_t>(std::llround(p.y) * tex_size +
                                     std::llround(p.x))] = i;
  }
  auto uv_center = [&](std::int64_t r, std::int64_t c) {
    return Vec2{(static_cast<double>(c) + 0.5) / t,
                1.0 - (static_cast<double>(r) + 0.5) / t};
  };

  // Pixels sitting on each twinned edge, with their arc-length parameter.
  struct EdgePixel {
    double param;
    std::int64_t node, r, c;
  };
  const double band = 0.75 / t;
  std::vector<std::vector<EdgePixel>> members(boundary.edges.size());
  for (std::size_t e = 0; e < boundary.edges.size(); ++e) {
    const SeamEdge& se = boundary.edges[e];
    if (se.twin < 0) continue;
    const Vec2 a = mesh.uvs[static_cast<std::size_t>(se.uv_a)];
    const Vec2 b = mesh.uvs[static_cast<std::size_t>(se.uv_b)];
    const double len2 =
        (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
    if (len2 == 0.0) continue;
    const std::int64_t r0 = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(
               std::floor((1.0 - std::max(a.y, b.y) - band) * t - 0.5)));
    const std::int64_t r1 = std::min<std::int64_t>(
        tex_size - 1, static_cast<std::int64_t>(std::ceil(
                          (1.0 - std::min(a.y, b.y) + band) * t - 0.5)));
    const std::int64_t c0 = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(
               std::floor((std::min(a.x, b.x) - band) * t - 0.5)));
    const std::int64_t c1 = std::min<std::int64_t>(
        tex_size - 1, static_cast<std::int64_t>(std::ceil(
                          (std::max(a.x, b.x) + band) * t - 0.5)));
    for (std::int64_t r = r0; r <= r1; ++r)
      for (std::int64_t c = c0; c <= c1; ++c) {
        if (!mask.at(r, c)) continue;
        const Vec2 p = uv_center(r, c);
        const double along =
            ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / len2;
        const double param = std::clamp(along, 0.0, 1.0);
        const double fx = a.x + param * (b.x - a.x) - p.x;
        const double fy = a.y + param * (b.y - a.y) - p.y;
        if (fx * fx + fy * fy > band * band) continue;
        members[e].push_back(
            {param,
             node_at[static_cast<std::size_t>(r * tex_size + c)], r, c});
      }
  }

  std::set<std::pair<std::int64_t, std::int64_t>> pairs;
  for (const GraphEdge& e : base.edges()) pairs.insert({e.src, e.dst});
  std::vector<GraphEdge> edges = base.edges();
  for (std::size_t e = 0; e < boundary.edges.size(); ++e) {
    const SeamEdge& se = boundary.edges[e];
    if (se.twin < 0) continue;
    const SeamEdge& tw = boundary.edges[static_cast<std::size_t>(se.twin)];
    // Twin endpoints ordered so that equal parameters share a 3D point.
    const bool flip = tw.v_a == se.v_b && se.v_a != se.v_b;
    const std::complex<double> pa(
        mesh.uvs[static_cast<std::size_t>(se.uv_a)].x,
        mesh.uvs[static_cast<std::size_t>(se.uv_a)].y);
    const std::complex<double> pb(
        mesh.uvs[static_cast<std::size_t>(se.uv_b)].x,
        mesh.uvs[static_cast<std::size_t>(se.uv_b)].y);
    const std::complex<double> qa(
        mesh.uvs[static_cast<std::size_t>(flip ? tw.uv_b : tw.uv_a)].x,
        mesh.uvs[static_cast<std::size_t>(flip ? tw.uv_b : tw.uv_a)].y);
    const std::complex<double> qb(
        mesh.uvs[static_cast<std::size_t>(flip ? tw.uv_a : tw.uv_b)].x,
        mesh.uvs[static_cast<std::size_t>(flip ? tw.uv_a : tw.uv_b)].y);
    if (qb == qa || pb == pa) continue;
    std::complex<double> rot = (pb - pa) / (qb - qa);
    rot /= std::abs(rot);
    for (const EdgePixel& p : members[e]) {
      const EdgePixel* best = nullptr;
      double best_cost = 0.0, best_param = 0.0;
      for (const EdgePixel& q :
           members[static_cast<std::size_t>(se.twin)]) {
        const double param = flip ? 1.0 - q.param : q.param;
        const double cost = std::abs(p.param - param);
        if (best == nullptr || cost < best_cost ||
            (cost == best_cost && param < best_param) ||
            (cost == best_cost && param == best_param && q.node < best->node)) {
          best = &q;
          best_cost = cost;
          best_param = param;
        }
      }
      if (best == nullptr || best->node == p.node) continue;
      const Vec2 quv = uv_center(best->r, best->c);
      const std::complex<double> mapped =
          pa + rot * (std::complex<double>(quv.x, quv.y) - qa);
      const Vec2 delta{mapped.real() * t - 0.5 - static_cast<double>(p.c),
                       (1.0 - mapped.imag()) * t - 0.5 -
                           static_cast<double>(p.r)};
      const int sel = select(delta, 1e-9);
      if (sel == 0) continue;
      if (!pairs.insert({p.node, best->node}).second) continue;
      edges.push_back({p.node, best->node, sel});
    }
  }
  return PositionalGraph::from_full_edges(base.positions(), std::move(edges),
                                          base.epsilon());
}

}  // namespace selconv
