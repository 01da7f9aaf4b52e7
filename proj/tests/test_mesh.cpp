#include "selconv/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "selconv/cubemap.hpp"
#include "selconv/grid_builders.hpp"

namespace selconv {
namespace {

const char* kTwoQuadObj = R"(# two 3d squares sharing one edge, two uv charts
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 2 0 0
v 2 1 0
vt 0.125 0.5
vt 0.5 0.5
vt 0.5 0.875
vt 0.125 0.875
vt 0.625 0.5
vt 1.0 0.5
vt 1.0 0.875
vt 0.625 0.875
f 1/1 2/2 3/3 4/4
f 2/5 5/6 6/7 3/8
)";

const char* kSingleSquareObj = R"(
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0.125 0.5
vt 0.5 0.5
vt 0.5 0.875
vt 0.125 0.875
f 1/1 2/2 3/3 4/4
)";

// Cube unwrapped into six F x F charts on a (6F+12)-pixel atlas strip, chart
// frames chosen to match the cube-map builder (chart +u = face right,
// chart +v = face up, strip order +x,-x,+y,-y,+z,-z).
std::string cube_obj(std::int64_t face) {
  struct V3 {
    int x, y, z;
  };
  struct Frame {
    V3 n, u, r;
  };
  static const Frame frames[6] = {
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
      {{-1, 0, 0}, {0, 1, 0}, {0, 0, -1}},
      {{0, 1, 0}, {0, 0, -1}, {-1, 0, 0}},
      {{0, -1, 0}, {0, 0, 1}, {-1, 0, 0}},
      {{0, 0, 1}, {0, 1, 0}, {-1, 0, 0}},
      {{0, 0, -1}, {0, 1, 0}, {1, 0, 0}},
  };
  const std::int64_t tex = 6 * face + 12;
  auto corner_id = [](V3 p) {
    return (p.x > 0 ? 4 : 0) + (p.y > 0 ? 2 : 0) + (p.z > 0 ? 1 : 0) + 1;
  };
  std::ostringstream obj;
  obj << std::setprecision(17);
  for (int bit = 0; bit < 8; ++bit)
    obj << "v " << (bit & 4 ? 1 : -1) << ' ' << (bit & 2 ? 1 : -1) << ' '
        << (bit & 1 ? 1 : -1) << '\n';
  std::ostringstream faces;
  for (int i = 0; i < 6; ++i) {
    const Frame& f = frames[i];
    auto mix = [&](int sr, int su) {
      return V3{f.n.x + sr * f.r.x + su * f.u.x,
                f.n.y + sr * f.r.y + su * f.u.y,
                f.n.z + sr * f.r.z + su * f.u.z};
    };
    const double x0 = static_cast<double>(i * (face + 2) + 1) /
                      static_cast<double>(tex);
    const double y0 = static_cast<double>(tex - face - 1) /
                      static_cast<double>(tex);
    const double s = static_cast<double>(face) / static_cast<double>(tex);
    obj << "vt " << x0 << ' ' << y0 << '\n';
    obj << "vt " << x0 + s << ' ' << y0 << '\n';
    obj << "vt " << x0 + s << ' ' << y0 + s << '\n';
    obj << "vt " << x0 << ' ' << y0 + s << '\n';
    faces << "f " << corner_id(mix(-1, -1)) << '/' << 4 * i + 1 << ' '
          << corner_id(mix(1, -1)) << '/' << 4 * i + 2 << ' '
          << corner_id(mix(1, 1)) << '/' << 4 * i + 3 << ' '
          << corner_id(mix(-1, 1)) << '/' << 4 * i + 4 << '\n';
  }
  obj << faces.str();
  return obj.str();
}

TEST(ParseObj, ReadsVerticesUvsAndFanTriangulates) {
  const UvMesh mesh = parse_obj(kTwoQuadObj);
  ASSERT_EQ(mesh.vertices.size(), 6u);
  ASSERT_EQ(mesh.uvs.size(), 8u);
  ASSERT_EQ(mesh.faces.size(), 4u);  // two quads, fanned
  EXPECT_EQ(mesh.vertices[4][0], 2.0);
  EXPECT_EQ(mesh.uvs[1].x, 0.5);
  EXPECT_EQ(mesh.uvs[1].y, 0.5);
  // Fan of quad 1: (v0,v1,v2) and (v0,v2,v3) in 0-based indices.
  EXPECT_EQ(mesh.faces[0].a.v, 0);
  EXPECT_EQ(mesh.faces[0].b.v, 1);
  EXPECT_EQ(mesh.faces[0].c.v, 2);
  EXPECT_EQ(mesh.faces[1].a.v, 0);
  EXPECT_EQ(mesh.faces[1].b.v, 2);
  EXPECT_EQ(mesh.faces[1].c.v, 3);
  EXPECT_EQ(mesh.faces[0].b.uv, 1);
}

TEST(ParseObj, SupportsNegativeIndicesAndIgnoredNormals) {
  const UvMesh mesh = parse_obj(
      "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
      "vt 0 0\nvt 1 0\nvt 0 1\n"
      "vn 0 0 1\ns off\n"
      "f -3/-3/1 -2/-2/1 -1/-1/1\n");
  ASSERT_EQ(mesh.faces.size(), 1u);
  EXPECT_EQ(mesh.faces[0].a.v, 0);
  EXPECT_EQ(mesh.faces[0].b.uv, 1);
  EXPECT_EQ(mesh.faces[0].c.v, 2);
}

TEST(ParseObj, RejectsMalformedInput) {
  EXPECT_THROW(parse_obj("v 0 0\n"), ParseError);
  EXPECT_THROW(parse_obj("v 0 0 0\nvt 0 0\nf 1 1 1\n"), ParseError);
  EXPECT_THROW(parse_obj("v 0 0 0\nvt 0 0\nf 1//1 1//1 1//1\n"), ParseError);
  EXPECT_THROW(parse_obj("v 0 0 0\nvt 0 0\nf 1/1 1/1\n"), ParseError);
  EXPECT_THROW(parse_obj("v 0 0 0\nvt 0 0\nf 0/1 1/1 1/1\n"), ParseError);
  EXPECT_THROW(parse_obj("v 0 0 0\nvt 0 0\nf 2/1 1/1 1/1\n"), ParseError);
  // colinear uvs
  EXPECT_THROW(
      parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\n"
                "vt 0 0\nvt 0.5 0.5\nvt 1 1\nf 1/1 2/2 3/3\n"),
      ParseError);
}

TEST(BoundaryLoops, SingleChartHasOneLoopWithoutTwins) {
  const UvBoundary b = uv_boundary_loops(parse_obj(kSingleSquareObj));
  ASSERT_EQ(b.loops.size(), 1u);
  ASSERT_EQ(b.edges.size(), 4u);
  EXPECT_EQ(b.loops[0].edges.size(), 4u);
  EXPECT_EQ(b.loops[0].points.size(), 4u);
  for (const SeamEdge& e : b.edges) {
    EXPECT_EQ(e.twin, -1);
    EXPECT_EQ(e.loop, 0);
  }
  // The loop visits the four chart corners.
  std::set<std::pair<double, double>> corners;
  for (const Vec2& p : b.loops[0].points) corners.insert({p.x, p.y});
  const std::set<std::pair<double, double>> want = {
      {0.125, 0.5}, {0.5, 0.5}, {0.5, 0.875}, {0.125, 0.875}};
  EXPECT_EQ(corners, want);
}

TEST(BoundaryLoops, TwoQuadChartsTwinOnlyTheSharedEdge) {
  const UvBoundary b = uv_boundary_loops(parse_obj(kTwoQuadObj));
  ASSERT_EQ(b.loops.size(), 2u);
  ASSERT_EQ(b.edges.size(), 8u);
  int twinned = 0;
  for (std::size_t i = 0; i < b.edges.size(); ++i) {
    const SeamEdge& e = b.edges[i];
    if (e.twin < 0) continue;
    ++twinned;
    const SeamEdge& tw = b.edges[static_cast<std::size_t>(e.twin)];
    EXPECT_EQ(tw.twin, static_cast<std::int64_t>(i));
    EXPECT_NE(e.loop, tw.loop);
    // Shared 3D edge is v2-v3 (0-based ids 1 and 2).
    EXPECT_EQ(std::min(e.v_a, e.v_b), 1);
    EXPECT_EQ(std::max(e.v_a, e.v_b), 2);
  }
  EXPECT_EQ(twinned, 2);
}

TEST(BoundaryLoops, CubeUnwrapTwinsEveryEdge) {
  const UvMesh mesh = parse_obj(cube_obj(3));
  const UvBoundary b = uv_boundary_loops(mesh);
  ASSERT_EQ(b.loops.size(), 6u);
  ASSERT_EQ(b.edges.size(), 24u);
  for (const BoundaryLoop& loop : b.loops) EXPECT_EQ(loop.edges.size(), 4u);
  for (std::size_t i = 0; i < b.edges.size(); ++i) {
    const SeamEdge& e = b.edges[i];
    ASSERT_GE(e.twin, 0);
    const SeamEdge& tw = b.edges[static_cast<std::size_t>(e.twin)];
    EXPECT_EQ(tw.twin, static_cast<std::int64_t>(i));
    EXPECT_EQ(std::minmax(e.v_a, e.v_b), std::minmax(tw.v_a, tw.v_b));
    EXPECT_NE(e.loop, tw.loop);
  }
  // Boundary set equals an independent once-referenced tally.
  std::map<std::pair<std::int64_t, std::int64_t>, int> refs;
  for (const UvMesh::Tri& f : mesh.faces) {
    const UvMesh::Corner c[3] = {f.a, f.b, f.c};
    for (int i = 0; i < 3; ++i)
      ++refs[std::minmax(c[i].uv, c[(i + 1) % 3].uv)];
  }
  std::set<std::pair<std::int64_t, std::int64_t>> expect, got;
  for (const auto& [pair, n] : refs)
    if (n == 1) expect.insert(pair);
  for (const SeamEdge& e : b.edges) got.insert(std::minmax(e.uv_a, e.uv_b));
  EXPECT_EQ(got, expect);
}

TEST(BoundaryLoops, ReportsNonManifoldBoundaries) {
  // Two uv triangles meeting only at uv 1 (bowtie): two boundary edges leave
  // the shared vertex.
  EXPECT_THROW(
      uv_boundary_loops(parse_obj(
          "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 2 0 0\nv 2 1 0\n"
          "vt 0 0\nvt 0.4 0.4\nvt 0 0.8\nvt 0.8 0.8\nvt 0.8 0\n"
          "f 1/1 2/2 3/3\nf 2/2 5/5 4/4\n")),
      ParseError);
  // One uv edge referenced three times.
  EXPECT_THROW(
      uv_boundary_loops(parse_obj(
          "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 2 2 0\n"
          "vt 0 0\nvt 1 0\nvt 0 1\nvt 1 1\nvt 0.9 0.2\n"
          "f 1/1 2/2 3/3\nf 2/2 4/4 3/3\nf 1/1 2/2 5/5\n")),
      ParseError);
}

BoundaryLoop loop_of(std::vector<Vec2> pts) {
  BoundaryLoop loop;
  loop.points = std::move(pts);
  return loop;
}

TEST(Rasterize, UnitSquareCoversEveryPixel) {
  const Mask m = rasterize_mask(
      {loop_of({{0, 0}, {1, 0}, {1, 1}, {0, 1}})}, 4);
  for (std::int64_t r = 0; r < 4; ++r)
    for (std::int64_t c = 0; c < 4; ++c) EXPECT_TRUE(m.at(r, c));
}

TEST(Rasterize, TriangleMatchesHalfPlaneOracle) {
  const Mask m =
      rasterize_mask({loop_of({{0, 0}, {1, 0}, {0, 1}})}, 8);
  for (std::int64_t r = 0; r < 8; ++r)
    for (std::int64_t c = 0; c < 8; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / 8.0;
      const double v = 1.0 - (static_cast<double>(r) + 0.5) / 8.0;
      EXPECT_EQ(m.at(r, c), u + v <= 1.0 + 1e-12) << r << "," << c;
    }
}

// Independent even-odd oracle: casts the ray upward in +y instead of +x and
// uses an explicit distance-to-segment test for the inclusive boundary.
bool oracle_inside(const std::vector<Vec2>& pts, Vec2 p) {
  bool odd = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[(i + 1) % pts.size()];
    const double ax = b.x - a.x, ay = b.y - a.y;
    const double len2 = ax * ax + ay * ay;
    if (len2 > 0.0) {
      const double tt =
          std::clamp(((p.x - a.x) * ax + (p.y - a.y) * ay) / len2, 0.0, 1.0);
      const double dx = a.x + tt * ax - p.x, dy = a.y + tt * ay - p.y;
      if (std::sqrt(dx * dx + dy * dy) <= 1e-12) return true;
    }
    if ((a.x > p.x) != (b.x > p.x)) {
      const double y_int = a.y + (p.x - a.x) * (b.y - a.y) / (b.x - a.x);
      if (p.y < y_int) odd = !odd;
    }
  }
  return odd;
}

TEST(Rasterize, MatchesRayCastOracleOnRandomPolygons) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> coord(0.05, 0.95);
  std::uniform_int_distribution<int> arity(5, 9);
  std::int64_t checks = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pts;
    const int n = arity(rng);
    for (int i = 0; i < n; ++i) pts.push_back({coord(rng), coord(rng)});
    const Mask m = rasterize_mask({loop_of(pts)}, 8);
    for (std::int64_t r = 0; r < 8; ++r)
      for (std::int64_t c = 0; c < 8; ++c) {
        const Vec2 p{(static_cast<double>(c) + 0.5) / 8.0,
                     1.0 - (static_cast<double>(r) + 0.5) / 8.0};
        EXPECT_EQ(m.at(r, c), oracle_inside(pts, p))
            << "trial " << trial << " pixel " << r << "," << c;
        ++checks;
      }
  }
  EXPECT_GE(checks, 1000);
}

TEST(Rasterize, DisjointLoopsUnion) {
  const std::vector<Vec2> a = {{0.05, 0.05}, {0.35, 0.05}, {0.35, 0.35},
                               {0.05, 0.35}};
  const std::vector<Vec2> b = {{0.6, 0.55}, {0.9, 0.55}, {0.9, 0.95},
                               {0.6, 0.95}};
  const Mask both = rasterize_mask({loop_of(a), loop_of(b)}, 10);
  const Mask ma = rasterize_mask({loop_of(a)}, 10);
  const Mask mb = rasterize_mask({loop_of(b)}, 10);
  for (std::int64_t r = 0; r < 10; ++r)
    for (std::int64_t c = 0; c < 10; ++c)
      EXPECT_EQ(both.at(r, c), ma.at(r, c) || mb.at(r, c));
}

TEST(Rasterize, RejectsDegenerateLoop) {
  EXPECT_THROW(rasterize_mask({loop_of({{0, 0}, {1, 1}})}, 4),
               std::invalid_argument);
}

using EdgeTuple = std::tuple<std::int64_t, std::int64_t, int>;

std::set<EdgeTuple> edge_tuples(const PositionalGraph& g) {
  std::set<EdgeTuple> out;
  for (const GraphEdge& e : g.edges()) out.insert({e.src, e.dst, e.sel});
  return out;
}

TEST(TextureGraph, SingleChartMatchesMaskedGraph) {
  const UvMesh mesh = parse_obj(kSingleSquareObj);
  const PositionalGraph tex = build_texture_graph(mesh, 8);
  const Mask mask = rasterize_mask(uv_boundary_loops(mesh).loops, 8);
  const PositionalGraph ref = build_masked_graph(mask);
  EXPECT_EQ(tex.node_count(), ref.node_count());
  EXPECT_EQ(edge_tuples(tex), edge_tuples(ref));
  for (std::int64_t i = 0; i < tex.node_count(); ++i) {
    EXPECT_EQ(tex.position(i).x, ref.position(i).x);
    EXPECT_EQ(tex.position(i).y, ref.position(i).y);
  }
}

TEST(TextureGraph, TwoQuadSeamPixelsGainOneCrossEdgeEach) {
  const PositionalGraph tex = build_texture_graph(parse_obj(kTwoQuadObj), 8);
  // Charts rasterize to rows 1..3, columns 1..3 and 5..7; row-major ids.
  ASSERT_EQ(tex.node_count(), 18);
  auto id_at = [&](std::int64_t r, std::int64_t c) {
    for (std::int64_t i = 0; i < tex.node_count(); ++i)
      if (std::llround(tex.position(i).y) == r &&
          std::llround(tex.position(i).x) == c)
        return i;
    return std::int64_t{-1};
  };
  const Mask mask = rasterize_mask(
      uv_boundary_loops(parse_obj(kTwoQuadObj)).loops, 8);
  std::set<EdgeTuple> want = edge_tuples(build_masked_graph(mask));
  for (std::int64_t r = 1; r <= 3; ++r) {
    want.insert({id_at(r, 3), id_at(r, 5), 1});
    want.insert({id_at(r, 5), id_at(r, 3), 5});
  }
  EXPECT_EQ(edge_tuples(tex), want);
}

TEST(TextureGraph, CubeUnwrapMatchesCubemapStructure) {
  for (const std::int64_t face : {2, 3}) {
    const std::int64_t tex_size = 6 * face + 12;
    const PositionalGraph tex =
        build_texture_graph(parse_obj(cube_obj(face)), tex_size);
    const PositionalGraph cube = build_cubemap(face);
    ASSERT_EQ(tex.node_count(), cube.node_count()) << "F " << face;

    // Texture node -> cube-map node through the (face, row, col) bijection.
    std::vector<std::int64_t> to_cube(
        static_cast<std::size_t>(tex.node_count()), -1);
    for (std::int64_t i = 0; i < tex.node_count(); ++i) {
      const std::int64_t c_img = std::llround(tex.position(i).x);
      const std::int64_t r_img = std::llround(tex.position(i).y);
      const std::int64_t f = (c_img - 1) / (face + 2);
      const std::int64_t col = (c_img - 1) % (face + 2);
      const std::int64_t row = r_img - 1;
      ASSERT_GE(f, 0);
      ASSERT_LT(f, 6);
      ASSERT_GE(row, 0);
      ASSERT_LT(row, face);
      ASSERT_LT(col, face);
      to_cube[static_cast<std::size_t>(i)] = (f * face + row) * face + col;
    }
    auto face_of = [&](std::int64_t cube_id) { return cube_id / (face * face); };

    std::set<EdgeTuple> tex_in, tex_cross;
    for (const GraphEdge& e : tex.edges()) {
      const std::int64_t s = to_cube[static_cast<std::size_t>(e.src)];
      const std::int64_t d = to_cube[static_cast<std::size_t>(e.dst)];
      (face_of(s) == face_of(d) ? tex_in : tex_cross).insert({s, d, e.sel});
    }
    std::set<EdgeTuple> cube_in, cube_cross_odd, cube_cross_even;
    for (const GraphEdge& e : cube.edges()) {
      if (face_of(e.src) == face_of(e.dst))
        cube_in.insert({e.src, e.dst, e.sel});
      else
        (e.sel % 2 == 1 ? cube_cross_odd : cube_cross_even)
            .insert({e.src, e.dst, e.sel});
    }
    // In-face subgraphs identical; straight seam crossings identical; the
    // only cube-map edges without a texture counterpart are diagonal seam
    // crossings (the texture builder links one pixel per boundary edge).
    EXPECT_EQ(tex_in, cube_in) << "F " << face;
    EXPECT_EQ(tex_cross, cube_cross_odd) << "F " << face;
    EXPECT_FALSE(cube_cross_even.empty());
  }
}

TEST(TextureGraph, RejectsAtlasWithNoCoveredPixel) {
  // Chart far smaller than one pixel cell: no pixel center falls inside.
  const UvMesh mesh = parse_obj(
      "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
      "vt 0.3 0.3\nvt 0.35 0.3\nvt 0.35 0.35\nvt 0.3 0.35\n"
      "f 1/1 2/2 3/3 4/4\n");
  EXPECT_THROW(build_texture_graph(mesh, 4), std::invalid_argument);
}

}  // namespace
}  // namespace selconv
