#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "selconv/conv_types.hpp"
#include "selconv/graph.hpp"
#include "selconv/sparse.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

// One tap of a transferred kernel: the tap's pixel offset, the hop path that
// realizes it (empty for the center tap), and an [in, out] weight block.
struct SelectionWeight {
  std::int64_t dx = 0;
  std::int64_t dy = 0;
  HopPath path;
  Tensor w;
};

// Weight table of one convolution, entries in kernel scan order (ky outer,
// kx inner). stride is recorded but not applied by forward_conv: dropping
// nodes changes the graph, so callers downsample with cluster_grid + pool
// on the full-resolution output.
struct SelectionConvLayer {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t kernel_size = 0;
  int stride = 1;
  int dilation = 1;
  PaddingMode pad;
  Tensor bias;  // [out], may be empty
  std::vector<SelectionWeight> weights;
};

// Cross-correlation convention: the tap at kernel cell (ky, kx) weights the
// neighbor displaced by ((kx - r) * dilation, (ky - r) * dilation).
inline SelectionConvLayer transfer_conv(const Kernel2D& k, int dilation,
                                        int stride, PaddingMode pad) {
  k.check_square_odd();
  if (dilation < 1) throw std::invalid_argument("dilation must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  SelectionConvLayer layer;
  layer.in_channels = k.in_channels();
  layer.out_channels = k.out_channels();
  layer.kernel_size = k.kh();
  layer.stride = stride;
  layer.dilation = dilation;
  layer.pad = std::move(pad);
  layer.bias = k.bias;
  const std::int64_t r = (k.kh() - 1) / 2;
  for (std::int64_t ky = 0; ky < k.kh(); ++ky) {
    for (std::int64_t kx = 0; kx < k.kw(); ++kx) {
      SelectionWeight sw;
      sw.dx = (kx - r) * dilation;
      sw.dy = (ky - r) * dilation;
      if (sw.dx != 0 || sw.dy != 0) sw.path = offset_to_path(sw.dx, sw.dy);
      sw.w = Tensor({k.in_channels(), k.out_channels()});
      for (std::int64_t i = 0; i < k.in_channels(); ++i)
        for (std::int64_t o = 0; o < k.out_channels(); ++o)
          sw.w(i, o) = k.w(o, i, ky, kx);
      layer.weights.push_back(std::move(sw));
    }
  }
  return layer;
}

// Exact inverse of transfer_conv: the offsets must tile the kernel scan and
// every weight is copied back bit for bit.
inline Kernel2D reconstruct_kernel(const SelectionConvLayer& layer) {
  const std::int64_t ks = layer.kernel_size;
  if (ks < 1 || ks % 2 == 0)
    throw std::invalid_argument("kernel size must be odd and positive");
  const std::int64_t r = (ks - 1) / 2;
  const std::int64_t d = layer.dilation;
  Kernel2D k;
  k.w = Tensor::zeros({layer.out_channels, layer.in_channels, ks, ks});
  k.bias = layer.bias;
  std::vector<char> seen(static_cast<std::size_t>(ks * ks), 0);
  for (const SelectionWeight& sw : layer.weights) {
    if (sw.dx % d != 0 || sw.dy % d != 0)
      throw std::invalid_argument("tap offset not divisible by dilation");
    const std::int64_t kx = sw.dx / d + r;
    const std::int64_t ky = sw.dy / d + r;
    if (kx < 0 || kx >= ks || ky < 0 || ky >= ks)
      throw std::invalid_argument("tap offset outside the kernel");
    char& cell = seen[static_cast<std::size_t>(ky * ks + kx)];
    if (cell) throw std::invalid_argument("duplicate tap offset");
    cell = 1;
    if (sw.w.rank() != 2 || sw.w.dim(0) != layer.in_channels ||
        sw.w.dim(1) != layer.out_channels)
      throw std::invalid_argument("tap weight shape mismatch");
    for (std::int64_t i = 0; i < layer.in_channels; ++i)
      for (std::int64_t o = 0; o < layer.out_channels; ++o)
        k.w(o, i, ky, kx) = sw.w(i, o);
  }
  for (char cell : seen)
    if (!cell) throw std::invalid_argument("missing tap offset");
  return k;
}

// Composed per-tap aggregation matrices for one (layer, adjacency) pairing,
// reusable across inputs. gather[e] walks tap e's hop path with the padding
// corrections baked in; the center tap stays an identity passthrough and its
// slot is left empty. stuck[e][i] (constant padding only) is the share of
// node i's walk that fell off the graph and resolves to the pad value.
//
// Padding applies at the first missing step of a walk: zero drops the rest of
// the walk, replicate keeps the value where the walk stopped, reflect takes
// one step opposite to the missing one (staying put when that is also
// missing), constant converts the stranded share to the pad value.
struct ConvPlan {
  std::int64_t nodes = 0;
  std::vector<SparseMatrix> gather;
  std::vector<std::vector<float>> stuck;
};

inline ConvPlan make_conv_plan(const SelectionConvLayer& layer,
                               const SelectionAdjacency& adj) {
  if (!adj.normalized)
    throw std::invalid_argument("forward_conv requires a normalized adjacency");
  const std::int64_t n = adj.nodes;
  const PadKind kind = layer.pad.kind;

  std::array<std::optional<SparseMatrix>, kSelections> miss_cache;
  // Diagonal over the nodes lacking selection m.
  auto missing_diag = [&](int m) -> const SparseMatrix& {
    auto& slot = miss_cache[static_cast<std::size_t>(m)];
    if (!slot) {
      std::vector<Triplet> tr;
      for (std::int64_t i = 0; i < n; ++i)
        if (!adj.has_selection(m, i)) tr.push_back({i, i, 1.0f});
      slot = SparseMatrix::from_triplets(n, n, std::move(tr));
    }
    return *slot;
  };
  std::array<std::optional<SparseMatrix>, kSelections> refl_cache;
  // One step against failed step m: opposite neighbors where present, stay
  // in place where the opposite is missing too.
  auto reflect_step = [&](int m) -> const SparseMatrix& {
    auto& slot = refl_cache[static_cast<std::size_t>(m)];
    if (!slot) {
      const int opp = opposite_selection(m);
      slot = sparse_add(adj.mats[static_cast<std::size_t>(opp)],
                        missing_diag(opp));
    }
    return *slot;
  };

  ConvPlan plan;
  plan.nodes = n;
  plan.gather.resize(layer.weights.size());
  plan.stuck.resize(kind == PadKind::constant ? layer.weights.size() : 0);
  for (std::size_t e = 0; e < layer.weights.size(); ++e) {
    const HopPath& path = layer.weights[e].path;
    if (path.empty()) continue;
    SparseMatrix reach = SparseMatrix::identity(n);
    SparseMatrix extra(n, n);
    std::vector<float> stuck;
    if (kind == PadKind::constant) stuck.assign(static_cast<std::size_t>(n), 0.0f);
    for (int step : path) {
      if (kind != PadKind::zero) {
        // Mass parked at nodes that cannot take this step.
        SparseMatrix dead = sparse_compose(reach, missing_diag(step));
        if (kind == PadKind::replicate) {
          extra = sparse_add(extra, dead);
        } else if (kind == PadKind::reflect) {
          extra = sparse_add(extra, sparse_compose(dead, reflect_step(step)));
        } else {
          const std::vector<float> rs = dead.row_sums();
          for (std::int64_t i = 0; i < n; ++i)
            stuck[static_cast<std::size_t>(i)] +=
                rs[static_cast<std::size_t>(i)];
        }
      }
      reach = sparse_compose(reach, adj.mats[static_cast<std::size_t>(step)]);
    }
    plan.gather[e] = (kind == PadKind::replicate || kind == PadKind::reflect)
                         ? sparse_add(reach, extra)
                         : std::move(reach);
    if (kind == PadKind::constant) plan.stuck[e] = std::move(stuck);
  }
  return plan;
}

inline Tensor forward_conv(const ConvPlan& plan, const SelectionConvLayer& layer,
                           const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != plan.nodes || x.dim(1) != layer.in_channels)
    throw std::invalid_argument("forward_conv feature shape mismatch");
  if (plan.gather.size() != layer.weights.size())
    throw std::invalid_argument("conv plan does not match the layer");
  const std::int64_t n = plan.nodes;
  const std::int64_t in = layer.in_channels;
  const std::int64_t out = layer.out_channels;
  std::vector<float> padv;
  if (layer.pad.kind == PadKind::constant) {
    padv.resize(static_cast<std::size_t>(in));
    for (std::int64_t c = 0; c < in; ++c)
      padv[static_cast<std::size_t>(c)] = layer.pad.channel_value(c, in);
  }
  Tensor y = Tensor::zeros({n, out});
  for (std::size_t e = 0; e < layer.weights.size(); ++e) {
    const SelectionWeight& sw = layer.weights[e];
    Tensor gathered = sw.path.empty() ? x : spmm(plan.gather[e], x);
    if (layer.pad.kind == PadKind::constant && !sw.path.empty()) {
      const std::vector<float>& stuck = plan.stuck[e];
      for (std::int64_t i = 0; i < n; ++i) {
        const float s = stuck[static_cast<std::size_t>(i)];
        if (s == 0.0f) continue;
        for (std::int64_t c = 0; c < in; ++c)
          gathered(i, c) += s * padv[static_cast<std::size_t>(c)];
      }
    }
    const Tensor t = matmul(gathered, sw.w);
    float* yd = y.data();
    const float* td = t.data();
    for (std::int64_t i = 0; i < n * out; ++i) yd[i] += td[i];
  }
  if (layer.bias.numel() > 0) {
    if (layer.bias.rank() != 1 || layer.bias.dim(0) != out)
      throw std::invalid_argument("conv bias shape mismatch");
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t o = 0; o < out; ++o) y(i, o) += layer.bias(o);
  }
  return y;
}

inline Tensor forward_conv(const SelectionConvLayer& layer,
                           const SelectionAdjacency& adj, const Tensor& x) {
  return forward_conv(make_conv_plan(layer, adj), layer, x);
}

// Node clustering used by pooling, unpooling and stride emulation.
// assignment may hold -1 for nodes outside every cell; such nodes vanish when
// pooling and are refilled from their nearest cluster when unpooling.
struct ClusterMap {
  std::int64_t clusters = 0;
  std::vector<std::int64_t> assignment;
  std::vector<Vec2> cluster_positions;  // mean member position
  std::vector<std::int64_t> central_node;
  PositionalGraph saved_graph;  // the pre-pool graph, for unpooling
};

inline ClusterMap make_clusters(const PositionalGraph& g,
                                std::vector<std::int64_t> assignment,
                                std::int64_t clusters) {
  const std::int64_t n = g.node_count();
  if (static_cast<std::int64_t>(assignment.size()) != n)
    throw std::invalid_argument("assignment size mismatch");
  if (clusters < 0) throw std::invalid_argument("negative cluster count");
  ClusterMap cm;
  cm.clusters = clusters;
  cm.cluster_positions.assign(static_cast<std::size_t>(clusters), Vec2{});
  cm.central_node.assign(static_cast<std::size_t>(clusters), -1);
  std::vector<std::int64_t> count(static_cast<std::size_t>(clusters), 0);
  std::vector<Vec2> sum(static_cast<std::size_t>(clusters), Vec2{});
  // Central node: lexicographically smallest (y, x) position, id tiebreak.
  std::vector<Vec2> best(static_cast<std::size_t>(clusters), Vec2{});
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t a = assignment[static_cast<std::size_t>(i)];
    if (a == -1) continue;
    if (a < 0 || a >= clusters)
      throw std::invalid_argument("cluster id out of range");
    const Vec2 p = g.position(i);
    const std::size_t ai = static_cast<std::size_t>(a);
    sum[ai].x += p.x;
    sum[ai].y += p.y;
    ++count[ai];
    std::int64_t& c = cm.central_node[ai];
    if (c < 0 || std::tie(p.y, p.x, i) < std::tie(best[ai].y, best[ai].x, c)) {
      c = i;
      best[ai] = p;
    }
  }
  for (std::int64_t a = 0; a < clusters; ++a) {
    const std::size_t ai = static_cast<std::size_t>(a);
    if (count[ai] == 0) throw std::invalid_argument("empty cluster");
    cm.cluster_positions[ai] = {sum[ai].x / static_cast<double>(count[ai]),
                                sum[ai].y / static_cast<double>(count[ai])};
  }
  cm.assignment = std::move(assignment);
  cm.saved_graph = g;
  return cm;
}

struct GridBounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

// Imposes an out_rows x out_cols cell lattice over bounds; each node joins the
// cell containing its position (floor division). Nodes outside the bounds get
// -1; empty cells produce no cluster, the rest keep row-major cell order.
inline ClusterMap cluster_grid(const PositionalGraph& g, std::int64_t out_rows,
                               std::int64_t out_cols, GridBounds b) {
  if (out_rows < 1 || out_cols < 1)
    throw std::invalid_argument("cell lattice dims must be >= 1");
  const double cw = (b.max_x - b.min_x) / static_cast<double>(out_cols);
  const double ch = (b.max_y - b.min_y) / static_cast<double>(out_rows);
  if (!(cw > 0.0) || !(ch > 0.0))
    throw std::invalid_argument("bounds must have positive extent");
  const std::int64_t n = g.node_count();
  std::vector<std::int64_t> cell(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(out_rows * out_cols), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec2 p = g.position(i);
    const double fx = std::floor((p.x - b.min_x) / cw);
    const double fy = std::floor((p.y - b.min_y) / ch);
    if (fx < 0.0 || fx >= static_cast<double>(out_cols) || fy < 0.0 ||
        fy >= static_cast<double>(out_rows))
      continue;
    const std::int64_t id = static_cast<std::int64_t>(fy) * out_cols +
                            static_cast<std::int64_t>(fx);
    cell[static_cast<std::size_t>(i)] = id;
    used[static_cast<std::size_t>(id)] = 1;
  }
  std::vector<std::int64_t> remap(static_cast<std::size_t>(out_rows * out_cols),
                                  -1);
  std::int64_t next = 0;
  for (std::int64_t id = 0; id < out_rows * out_cols; ++id)
    if (used[static_cast<std::size_t>(id)])
      remap[static_cast<std::size_t>(id)] = next++;
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t& c = cell[static_cast<std::size_t>(i)];
    if (c >= 0) c = remap[static_cast<std::size_t>(c)];
  }
  return make_clusters(g, std::move(cell), next);
}

// Circular mean on the 8-way compass, selection m at angle (m-1)*45 degrees.
// Exact half-angle cases round toward the lower selection index; full
// cancellation (opposite contributors) falls back to the smallest contributor.
inline int circular_mean_selection(const std::vector<int>& sels) {
  if (sels.empty()) throw std::invalid_argument("no selections to average");
  constexpr double kQuarter = 0.78539816339744830961;  // pi / 4
  double sx = 0.0, sy = 0.0;
  for (int m : sels) {
    if (m < 1 || m > 8)
      throw std::invalid_argument("selection out of range 1..8");
    const double a = static_cast<double>(m - 1) * kQuarter;
    sx += std::cos(a);
    sy += std::sin(a);
  }
  if (std::hypot(sx, sy) < 1e-9)
    return *std::min_element(sels.begin(), sels.end());
  const double turns = std::atan2(sy, sx) / kQuarter;
  const double lo = std::floor(turns);
  auto to_sel = [](double k) {
    int m = static_cast<int>(std::llround(k)) % 8;
    if (m < 0) m += 8;
    return m + 1;
  };
  const double d_lo = turns - lo;
  const double d_hi = lo + 1.0 - turns;
  if (std::abs(d_lo - d_hi) < 1e-9) return std::min(to_sel(lo), to_sel(lo + 1.0));
  return d_lo < d_hi ? to_sel(lo) : to_sel(lo + 1.0);
}

enum class PoolMode { max, mean, central };

struct PoolResult {
  PositionalGraph graph;
  Tensor features;
};

// One output node per cluster at the mean member position. Every inter-cluster
// edge bundle collapses to a single edge whose selection is the circular mean
// of the contributing selections.
inline PoolResult pool(const PositionalGraph& g, const Tensor& x,
                       const ClusterMap& cm, PoolMode mode) {
  const std::int64_t n = g.node_count();
  if (x.rank() != 2 || x.dim(0) != n)
    throw std::invalid_argument("pool feature shape mismatch");
  if (static_cast<std::int64_t>(cm.assignment.size()) != n)
    throw std::invalid_argument("cluster map does not match the graph");
  const std::int64_t ch = x.dim(1);
  const std::int64_t k = cm.clusters;
  Tensor f = Tensor::zeros({k, ch});
  if (mode == PoolMode::max)
    f.fill(-std::numeric_limits<float>::infinity());
  std::vector<std::int64_t> count(static_cast<std::size_t>(k), 0);
  if (mode == PoolMode::central) {
    for (std::int64_t a = 0; a < k; ++a)
      for (std::int64_t c = 0; c < ch; ++c)
        f(a, c) = x(cm.central_node[static_cast<std::size_t>(a)], c);
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t a = cm.assignment[static_cast<std::size_t>(i)];
      if (a < 0) continue;
      ++count[static_cast<std::size_t>(a)];
      for (std::int64_t c = 0; c < ch; ++c)
        f(a, c) = mode == PoolMode::max ? std::max(f(a, c), x(i, c))
                                        : f(a, c) + x(i, c);
    }
    if (mode == PoolMode::mean)
      for (std::int64_t a = 0; a < k; ++a)
        for (std::int64_t c = 0; c < ch; ++c)
          f(a, c) /= static_cast<float>(count[static_cast<std::size_t>(a)]);
  }
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<int>> buckets;
  for (const GraphEdge& e : g.edges()) {
    if (e.sel == 0) continue;
    const std::int64_t a = cm.assignment[static_cast<std::size_t>(e.src)];
    const std::int64_t b = cm.assignment[static_cast<std::size_t>(e.dst)];
    if (a < 0 || b < 0 || a == b) continue;
    buckets[{a, b}].push_back(e.sel);
  }
  std::vector<GraphEdge> edges;
  edges.reserve(buckets.size());
  for (const auto& [key, sels] : buckets)
    edges.push_back({key.first, key.second, circular_mean_selection(sels)});
  PoolResult out;
  out.features = std::move(f);
  out.graph = PositionalGraph::build(cm.cluster_positions, std::move(edges));
  return out;
}

enum class UnpoolMode { copy, average };

// copy: every cluster member receives the cluster value (nodes the clustering
// dropped receive their nearest cluster's value). average: each fine node then
// becomes the mean of itself and its 1-ring over those copied values.
inline Tensor unpool(const ClusterMap& cm, const Tensor& coarse,
                     UnpoolMode mode) {
  if (coarse.rank() != 2 || coarse.dim(0) != cm.clusters)
    throw std::invalid_argument("unpool feature shape mismatch");
  const std::int64_t n = cm.saved_graph.node_count();
  const std::int64_t ch = coarse.dim(1);
  Tensor fine({n, ch});
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t a = cm.assignment[static_cast<std::size_t>(i)];
    if (a < 0) {
      if (cm.clusters == 0)
        throw std::invalid_argument("cannot unpool through an empty clustering");
      const Vec2 p = cm.saved_graph.position(i);
      double best = std::numeric_limits<double>::infinity();
      for (std::int64_t c = 0; c < cm.clusters; ++c) {
        const Vec2 q = cm.cluster_positions[static_cast<std::size_t>(c)];
        const double d2 = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
        if (d2 < best) {
          best = d2;
          a = c;
        }
      }
    }
    for (std::int64_t c = 0; c < ch; ++c) fine(i, c) = coarse(a, c);
  }
  if (mode == UnpoolMode::copy) return fine;
  Tensor out({n, ch});
  const std::vector<GraphEdge>& edges = cm.saved_graph.edges();
  std::size_t e = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<float> acc(static_cast<std::size_t>(ch), 0.0f);
    std::int64_t deg = 0;
    // Edges are sorted by (src, dst); the self edge contributes node i itself.
    while (e < edges.size() && edges[e].src == i) {
      for (std::int64_t c = 0; c < ch; ++c)
        acc[static_cast<std::size_t>(c)] += fine(edges[e].dst, c);
      ++deg;
      ++e;
    }
    for (std::int64_t c = 0; c < ch; ++c)
      out(i, c) = acc[static_cast<std::size_t>(c)] / static_cast<float>(deg);
  }
  return out;
}

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  float* d = y.data();
  for (std::int64_t i = 0; i < y.numel(); ++i)
    d[i] = d[i] > 0.0f ? d[i] : 0.0f;
  return y;
}

// x: [nodes, channels]; per-channel x * scale + shift.
inline Tensor affine_norm(const Tensor& x, const Tensor& scale,
                          const Tensor& shift) {
  if (x.rank() != 2) throw std::invalid_argument("affine_norm expects rank 2");
  const std::int64_t ch = x.dim(1);
  if (scale.rank() != 1 || scale.dim(0) != ch || shift.rank() != 1 ||
      shift.dim(0) != ch)
    throw std::invalid_argument("affine_norm channel mismatch");
  Tensor y = x;
  for (std::int64_t i = 0; i < x.dim(0); ++i)
    for (std::int64_t c = 0; c < ch; ++c)
      y(i, c) = y(i, c) * scale(c) + shift(c);
  return y;
}

// w: [out, in] applied to a flat vector; bias may be empty.
inline Tensor linear(const Tensor& w, const Tensor& bias, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0))
    throw std::invalid_argument("linear shape mismatch");
  if (bias.numel() > 0 && (bias.rank() != 1 || bias.dim(0) != w.dim(0)))
    throw std::invalid_argument("linear bias shape mismatch");
  Tensor y({w.dim(0)});
  for (std::int64_t o = 0; o < w.dim(0); ++o) {
    float acc = 0.0f;
    for (std::int64_t i = 0; i < w.dim(1); ++i) acc += w(o, i) * x(i);
    y(o) = acc + (bias.numel() > 0 ? bias(o) : 0.0f);
  }
  return y;
}

}  // namespace selconv
