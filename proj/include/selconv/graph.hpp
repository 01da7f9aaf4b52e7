#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "selconv/errors.hpp"
#include "selconv/sparse.hpp"

namespace selconv {

// Selections: 0 is the node itself; 1..8 are the eight compass directions,
// starting at "right" and advancing counter-clockwise as displayed.
// Coordinates are image-style: x grows right, y grows down, so "up" is
// negative y.
constexpr int kSelections = 9;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 selection_direction(int m) {
  static const double h = std::sqrt(2.0) / 2.0;
  switch (m) {
    case 1: return {1.0, 0.0};
    case 2: return {h, -h};
    case 3: return {0.0, -1.0};
    case 4: return {-h, -h};
    case 5: return {-1.0, 0.0};
    case 6: return {-h, h};
    case 7: return {0.0, 1.0};
    case 8: return {h, h};
    default: throw std::invalid_argument("selection out of range 1..8");
  }
}

inline int opposite_selection(int m) {
  if (m < 1 || m > 8) throw std::invalid_argument("selection out of range 1..8");
  return ((m + 3) % 8) + 1;
}

// Integer king-move step of a selection, (dx, dy) with y growing down.
inline std::pair<int, int> selection_step(int m) {
  switch (m) {
    case 1: return {1, 0};
    case 2: return {1, -1};
    case 3: return {0, -1};
    case 4: return {-1, -1};
    case 5: return {-1, 0};
    case 6: return {-1, 1};
    case 7: return {0, 1};
    case 8: return {1, 1};
    default: throw std::invalid_argument("selection out of range 1..8");
  }
}

// Maps a displacement to its selection: 0 below epsilon, otherwise the
// direction with the largest dot product, ties toward the smaller index.
inline int select(Vec2 delta, double epsilon) {
  const double norm = std::hypot(delta.x, delta.y);
  if (norm < epsilon) return 0;
  int best = 1;
  double best_dot = -2.0 * norm;
  for (int m = 1; m <= 8; ++m) {
    const Vec2 d = selection_direction(m);
    const double dot = d.x * delta.x + d.y * delta.y;
    if (dot > best_dot) {
      best_dot = dot;
      best = m;
    }
  }
  return best;
}

struct GraphEdge {
  std::int64_t src = 0;
  std::int64_t dst = 0;
  int sel = 0;
};

// A node set with 2D positions plus directed selection-labelled edges.
// Invariants: exactly one self edge (i, i, 0) per node, selection 0 only on
// self edges, no duplicate (src, dst), edges sorted by (src, dst).
class PositionalGraph {
 public:
  PositionalGraph() = default;

  // Builds from neighbor edges (selections 1..8); self edges are added here.
  static PositionalGraph build(std::vector<Vec2> positions,
                               std::vector<GraphEdge> neighbor_edges,
                               std::optional<double> epsilon = std::nullopt) {
    for (const GraphEdge& e : neighbor_edges) {
      if (e.sel < 1 || e.sel > 8)
        throw std::invalid_argument("neighbor edge selection must be 1..8");
      if (e.src == e.dst)
        throw std::invalid_argument("neighbor edge may not be a self loop");
    }
    const std::int64_t n = static_cast<std::int64_t>(positions.size());
    neighbor_edges.reserve(neighbor_edges.size() + positions.size());
    for (std::int64_t i = 0; i < n; ++i) neighbor_edges.push_back({i, i, 0});
    return from_full_edges(std::move(positions), std::move(neighbor_edges),
                           epsilon);
  }

  // Builds from a complete edge list that must already contain self edges.
  static PositionalGraph from_full_edges(
      std::vector<Vec2> positions, std::vector<GraphEdge> edges,
      std::optional<double> epsilon = std::nullopt) {
    PositionalGraph g;
    g.pos_ = std::move(positions);
    g.edges_ = std::move(edges);
    const std::int64_t n = g.node_count();
    std::vector<char> self_seen(static_cast<std::size_t>(n), 0);
    for (const GraphEdge& e : g.edges_) {
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
        throw std::invalid_argument("edge endpoint out of range");
      if (e.sel < 0 || e.sel > 8)
        throw std::invalid_argument("edge selection out of range");
      if ((e.src == e.dst) != (e.sel == 0))
        throw std::invalid_argument(
            "selection 0 is exactly the self-edge label");
      if (e.src == e.dst) {
        if (self_seen[static_cast<std::size_t>(e.src)])
          throw std::invalid_argument("duplicate self edge");
        self_seen[static_cast<std::size_t>(e.src)] = 1;
      }
    }
    for (std::int64_t i = 0; i < n; ++i)
      if (!self_seen[static_cast<std::size_t>(i)])
        throw std::invalid_argument("node missing its self edge");
    std::sort(g.edges_.begin(), g.edges_.end(),
              [](const GraphEdge& a, const GraphEdge& b) {
                return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
              });
    for (std::size_t i = 1; i < g.edges_.size(); ++i)
      if (g.edges_[i].src == g.edges_[i - 1].src &&
          g.edges_[i].dst == g.edges_[i - 1].dst)
        throw std::invalid_argument("duplicate (src,dst) edge");
    g.epsilon_ = epsilon ? *epsilon : g.default_epsilon();
    if (g.epsilon_ <= 0.0) throw std::invalid_argument("epsilon must be positive");
    return g;
  }

  std::int64_t node_count() const {
    return static_cast<std::int64_t>(pos_.size());
  }
  std::int64_t edge_count() const {
    return static_cast<std::int64_t>(edges_.size());
  }
  const std::vector<Vec2>& positions() const { return pos_; }
  Vec2 position(std::int64_t i) const {
    return pos_[static_cast<std::size_t>(i)];
  }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  double epsilon() const { return epsilon_; }

 private:
  // 1e-6 times the median neighbor-edge length; spacing-scale noise floor.
  double default_epsilon() const {
    std::vector<double> lengths;
    lengths.reserve(edges_.size());
    for (const GraphEdge& e : edges_) {
      if (e.src == e.dst) continue;
      const Vec2 a = pos_[static_cast<std::size_t>(e.src)];
      const Vec2 b = pos_[static_cast<std::size_t>(e.dst)];
      lengths.push_back(std::hypot(b.x - a.x, b.y - a.y));
    }
    if (lengths.empty()) return 1e-6;
    std::sort(lengths.begin(), lengths.end());
    const std::size_t n = lengths.size();
    const double median = (n % 2 == 1)
                              ? lengths[n / 2]
                              : 0.5 * (lengths[n / 2 - 1] + lengths[n / 2]);
    return median > 0.0 ? 1e-6 * median : 1e-6;
  }

  std::vector<Vec2> pos_;
  std::vector<GraphEdge> edges_;
  double epsilon_ = 1e-6;
};

// Per-selection adjacency. mats[m][i][j] is nonzero iff edge (i, j) carries
// selection m; unnormalized entries are 1, normalized rows sum to 1.
struct SelectionAdjacency {
  std::int64_t nodes = 0;
  std::array<SparseMatrix, kSelections> mats;
  bool normalized = false;

  bool has_selection(int m, std::int64_t node) const {
    const SparseMatrix& s = mats[static_cast<std::size_t>(m)];
    return s.row_begin(node) != s.row_end(node);
  }
};

inline SelectionAdjacency build_adjacency(const PositionalGraph& g) {
  SelectionAdjacency adj;
  adj.nodes = g.node_count();
  std::array<std::vector<Triplet>, kSelections> tr;
  for (const GraphEdge& e : g.edges())
    tr[static_cast<std::size_t>(e.sel)].push_back({e.src, e.dst, 1.0f});
  for (int m = 0; m < kSelections; ++m)
    adj.mats[static_cast<std::size_t>(m)] = SparseMatrix::from_triplets(
        adj.nodes, adj.nodes, std::move(tr[static_cast<std::size_t>(m)]));
  return adj;
}

// Divides each entry by the count of same-selection edges leaving its node.
inline SelectionAdjacency normalize(SelectionAdjacency adj) {
  if (adj.normalized)
    throw std::invalid_argument("adjacency is already normalized");
  for (int m = 0; m < kSelections; ++m) {
    SparseMatrix& s = adj.mats[static_cast<std::size_t>(m)];
    for (std::int64_t r = 0; r < s.rows(); ++r) {
      const std::int64_t k = s.row_end(r) - s.row_begin(r);
      if (k <= 1) continue;
      const float inv = 1.0f / static_cast<float>(k);
      for (std::int64_t e = s.row_begin(r); e < s.row_end(r); ++e)
        s.entry_val(e) *= inv;
    }
  }
  adj.normalized = true;
  return adj;
}

// A multi-hop walk; steps are selections 1..8 applied left to right.
using HopPath = std::vector<int>;

inline SparseMatrix compose_hops(const SelectionAdjacency& adj,
                                 const HopPath& path) {
  if (path.empty()) throw std::invalid_argument("empty hop path");
  for (int s : path)
    if (s < 1 || s > 8) throw std::invalid_argument("hop step out of range");
  SparseMatrix out = adj.mats[static_cast<std::size_t>(path[0])];
  for (std::size_t i = 1; i < path.size(); ++i)
    out = sparse_compose(out, adj.mats[static_cast<std::size_t>(path[i])]);
  return out;
}

// King-move decomposition of an integer offset: the diagonal component first,
// then the straight remainder. Length equals the Chebyshev norm.
inline HopPath offset_to_path(std::int64_t dx, std::int64_t dy) {
  if (dx == 0 && dy == 0)
    throw std::invalid_argument("zero offset has no hop path");
  auto step_selection = [](int sx, int sy) {
    if (sx == 1 && sy == 0) return 1;
    if (sx == 1 && sy == -1) return 2;
    if (sx == 0 && sy == -1) return 3;
    if (sx == -1 && sy == -1) return 4;
    if (sx == -1 && sy == 0) return 5;
    if (sx == -1 && sy == 1) return 6;
    if (sx == 0 && sy == 1) return 7;
    return 8;  // (1, 1)
  };
  const std::int64_t ax = std::llabs(dx), ay = std::llabs(dy);
  const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  HopPath path;
  path.reserve(static_cast<std::size_t>(std::max(ax, ay)));
  const std::int64_t diag = std::min(ax, ay);
  for (std::int64_t i = 0; i < diag; ++i)
    path.push_back(step_selection(sx, sy));
  for (std::int64_t i = diag; i < ax; ++i) path.push_back(step_selection(sx, 0));
  for (std::int64_t i = diag; i < ay; ++i) path.push_back(step_selection(0, sy));
  return path;
}

// perm[i] is the new id of old node i.
inline PositionalGraph permute_nodes(const PositionalGraph& g,
                                     const std::vector<std::int64_t>& perm) {
  const std::int64_t n = g.node_count();
  if (static_cast<std::int64_t>(perm.size()) != n)
    throw std::invalid_argument("permutation size mismatch");
  std::vector<char> hit(static_cast<std::size_t>(n), 0);
  for (std::int64_t p : perm) {
    if (p < 0 || p >= n || hit[static_cast<std::size_t>(p)])
      throw std::invalid_argument("not a permutation");
    hit[static_cast<std::size_t>(p)] = 1;
  }
  std::vector<Vec2> pos(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    pos[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        g.position(i);
  std::vector<GraphEdge> edges;
  edges.reserve(g.edges().size());
  for (const GraphEdge& e : g.edges())
    edges.push_back({perm[static_cast<std::size_t>(e.src)],
                     perm[static_cast<std::size_t>(e.dst)], e.sel});
  return PositionalGraph::from_full_edges(std::move(pos), std::move(edges),
                                          g.epsilon());
}

// Text dump: "n <count>", one "v <id> <x> <y>" per node in id order, one
// "e <src> <dst> <selection>" per edge sorted by (src, dst).
inline std::string dump_graph(const PositionalGraph& g) {
  std::string out;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "n %lld\n",
                static_cast<long long>(g.node_count()));
  out += buf;
  for (std::int64_t i = 0; i < g.node_count(); ++i) {
    const Vec2 p = g.position(i);
    std::snprintf(buf, sizeof(buf), "v %lld %.17g %.17g\n",
                  static_cast<long long>(i), p.x, p.y);
    out += buf;
  }
  for (const GraphEdge& e : g.edges()) {
    std::snprintf(buf, sizeof(buf), "e %lld %lld %d\n",
                  static_cast<long long>(e.src),
                  static_cast<long long>(e.dst), e.sel);
    out += buf;
  }
  return out;
}

inline PositionalGraph parse_graph(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  if (!(in >> tag) || tag != "n") throw ParseError("graph dump: missing n line");
  std::int64_t n = -1;
  if (!(in >> n) || n < 0) throw ParseError("graph dump: bad node count");
  std::vector<Vec2> pos(static_cast<std::size_t>(n));
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<GraphEdge> edges;
  while (in >> tag) {
    if (tag == "v") {
      std::int64_t id;
      Vec2 p;
      if (!(in >> id >> p.x >> p.y) || id < 0 || id >= n)
        throw ParseError("graph dump: bad v line");
      if (seen[static_cast<std::size_t>(id)])
        throw ParseError("graph dump: duplicate node id");
      seen[static_cast<std::size_t>(id)] = 1;
      pos[static_cast<std::size_t>(id)] = p;
    } else if (tag == "e") {
      GraphEdge e;
      if (!(in >> e.src >> e.dst >> e.sel))
        throw ParseError("graph dump: bad e line");
      edges.push_back(e);
    } else {
      throw ParseError("graph dump: unknown record '" + tag + "'");
    }
  }
  for (std::int64_t i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw ParseError("graph dump: missing node record");
  try {
    return PositionalGraph::from_full_edges(std::move(pos), std::move(edges));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("graph dump: ") + e.what());
  }
}

}  // namespace selconv
