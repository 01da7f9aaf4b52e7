#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "selconv/graph.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

struct SuperpixelSet {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<std::int64_t> labels;  // row-major pixel labels, 0..count-1
  std::vector<Vec2> centroids;       // mean member position per label
  Tensor mean_features;              // [count, channels]

  std::int64_t count() const {
    return static_cast<std::int64_t>(centroids.size());
  }
};

// SLIC superpixels on a [C,H,W] image. Seeds sit on a near-square lattice of
// about k cells, nudged to the lowest-gradient pixel of their 3x3 window;
// ten assignment/update rounds follow with the distance
// d = |color diff| + (compactness/S) * |xy diff| scanned over a 2Sx2S window
// per center, S = sqrt(H*W/k). Stray components are merged into their largest
// neighbor so every label is 4-connected, and labels are compacted.
inline SuperpixelSet slic(const Tensor& image, std::int64_t k,
                          double compactness) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  const std::int64_t ch = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < 1 || w < 1) throw std::invalid_argument("empty image");
  if (k < 1 || k > h * w)
    throw std::invalid_argument("cluster count out of range");
  const double spacing =
      std::sqrt(static_cast<double>(h * w) / static_cast<double>(k));

  auto pixel = [&](std::int64_t r, std::int64_t c, std::int64_t i) {
    return image(i, std::clamp<std::int64_t>(r, 0, h - 1),
                 std::clamp<std::int64_t>(c, 0, w - 1));
  };
  auto gradient = [&](std::int64_t r, std::int64_t c) {
    double g = 0.0;
    for (std::int64_t i = 0; i < ch; ++i) {
      const double gx = pixel(r, c + 1, i) - pixel(r, c - 1, i);
      const double gy = pixel(r + 1, c, i) - pixel(r - 1, c, i);
      g += gx * gx + gy * gy;
    }
    return g;
  };

  struct Center {
    double x, y;
    std::vector<double> color;
  };
  std::vector<Center> centers;
  {
    // Seed lattice: nx*ny as close to k as possible, then closest to the
    // image aspect ratio, spreading horizontally on a full tie.
    std::int64_t nx = 1, ny = 1;
    double best_count = std::numeric_limits<double>::infinity();
    double best_aspect = 0.0;
    for (std::int64_t cx = 1; cx <= std::min(w, k); ++cx)
      for (std::int64_t cy_base : {k / cx, (k + cx - 1) / cx}) {
        const std::int64_t cy = std::clamp<std::int64_t>(cy_base, 1, h);
        const double count_err =
            std::abs(static_cast<double>(cx * cy - k));
        const double aspect_err = std::abs(
            std::log((static_cast<double>(cx) * static_cast<double>(h)) /
                     (static_cast<double>(cy) * static_cast<double>(w))));
        if (count_err < best_count ||
            (count_err == best_count && aspect_err < best_aspect) ||
            (count_err == best_count && aspect_err == best_aspect &&
             cx > nx)) {
          best_count = count_err;
          best_aspect = aspect_err;
          nx = cx;
          ny = cy;
        }
      }
    for (std::int64_t iy = 0; iy < ny; ++iy)
      for (std::int64_t ix = 0; ix < nx; ++ix) {
        std::int64_t r = std::llround(
            (static_cast<double>(iy) + 0.5) * static_cast<double>(h) /
                static_cast<double>(ny) -
            0.5);
        std::int64_t c = std::llround(
            (static_cast<double>(ix) + 0.5) * static_cast<double>(w) /
                static_cast<double>(nx) -
            0.5);
        r = std::clamp<std::int64_t>(r, 0, h - 1);
        c = std::clamp<std::int64_t>(c, 0, w - 1);
        // Perturb to the lowest-gradient pixel nearby, keeping the seed on a
        // tie so constant regions stay on the lattice.
        std::int64_t br = r, bc = c;
        double bg = gradient(r, c);
        for (std::int64_t dr = -1; dr <= 1; ++dr)
          for (std::int64_t dc = -1; dc <= 1; ++dc) {
            const std::int64_t rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            const double g = gradient(rr, cc);
            if (g < bg) {
              bg = g;
              br = rr;
              bc = cc;
            }
          }
        Center s;
        s.x = static_cast<double>(bc);
        s.y = static_cast<double>(br);
        s.color.resize(static_cast<std::size_t>(ch));
        for (std::int64_t i = 0; i < ch; ++i)
          s.color[static_cast<std::size_t>(i)] = image(i, br, bc);
        centers.push_back(std::move(s));
      }
  }

  const double spatial_weight = compactness / spacing;
  std::vector<std::int64_t> labels(static_cast<std::size_t>(h * w), -1);
  for (int iter = 0; iter < 10; ++iter) {
    std::vector<double> best(static_cast<std::size_t>(h * w),
                             std::numeric_limits<double>::infinity());
    std::fill(labels.begin(), labels.end(), -1);
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const Center& s = centers[ci];
      const std::int64_t r0 = std::max<std::int64_t>(
          0, static_cast<std::int64_t>(std::ceil(s.y - spacing)));
      const std::int64_t r1 = std::min<std::int64_t>(
          h - 1, static_cast<std::int64_t>(std::floor(s.y + spacing)));
      const std::int64_t c0 = std::max<std::int64_t>(
          0, static_cast<std::int64_t>(std::ceil(s.x - spacing)));
      const std::int64_t c1 = std::min<std::int64_t>(
          w - 1, static_cast<std::int64_t>(std::floor(s.x + spacing)));
      for (std::int64_t r = r0; r <= r1; ++r)
        for (std::int64_t c = c0; c <= c1; ++c) {
          double dc2 = 0.0;
          for (std::int64_t i = 0; i < ch; ++i) {
            const double d = image(i, r, c) - s.color[static_cast<std::size_t>(i)];
            dc2 += d * d;
          }
          const double dx = static_cast<double>(c) - s.x;
          const double dy = static_cast<double>(r) - s.y;
          const double d =
              std::sqrt(dc2) + spatial_weight * std::sqrt(dx * dx + dy * dy);
          const std::size_t p = static_cast<std::size_t>(r * w + c);
          if (d < best[p]) {
            best[p] = d;
            labels[p] = static_cast<std::int64_t>(ci);
          }
        }
    }
    // Extreme aspect ratios can leave pixels outside every window.
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c) {
        std::int64_t& l = labels[static_cast<std::size_t>(r * w + c)];
        if (l >= 0) continue;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t ci = 0; ci < centers.size(); ++ci) {
          const double dx = static_cast<double>(c) - centers[ci].x;
          const double dy = static_cast<double>(r) - centers[ci].y;
          const double d2 = dx * dx + dy * dy;
          if (d2 < bd) {
            bd = d2;
            l = static_cast<std::int64_t>(ci);
          }
        }
      }
    // Recenter on the members.
    std::vector<double> sx(centers.size(), 0.0), sy(centers.size(), 0.0);
    std::vector<std::vector<double>> sc(
        centers.size(), std::vector<double>(static_cast<std::size_t>(ch), 0.0));
    std::vector<std::int64_t> cnt(centers.size(), 0);
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c) {
        const std::size_t ci =
            static_cast<std::size_t>(labels[static_cast<std::size_t>(r * w + c)]);
        sx[ci] += static_cast<double>(c);
        sy[ci] += static_cast<double>(r);
        for (std::int64_t i = 0; i < ch; ++i)
          sc[ci][static_cast<std::size_t>(i)] += image(i, r, c);
        ++cnt[ci];
      }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      if (cnt[ci] == 0) continue;
      const double inv = 1.0 / static_cast<double>(cnt[ci]);
      centers[ci].x = sx[ci] * inv;
      centers[ci].y = sy[ci] * inv;
      for (std::int64_t i = 0; i < ch; ++i)
        centers[ci].color[static_cast<std::size_t>(i)] =
            sc[ci][static_cast<std::size_t>(i)] * inv;
    }
  }

  // Connectivity enforcement. Find 4-connected components of the label field,
  // keep each label's largest component, and fold every other component into
  // its largest neighboring component until all pixels reach a kept one.
  const std::int64_t total = h * w;
  std::vector<std::int64_t> comp(static_cast<std::size_t>(total), -1);
  std::vector<std::int64_t> comp_label, comp_size, comp_first;
  for (std::int64_t p = 0; p < total; ++p) {
    if (comp[static_cast<std::size_t>(p)] >= 0) continue;
    const std::int64_t id = static_cast<std::int64_t>(comp_label.size());
    const std::int64_t lab = labels[static_cast<std::size_t>(p)];
    comp_label.push_back(lab);
    comp_first.push_back(p);
    std::int64_t size = 0;
    std::vector<std::int64_t> stack{p};
    comp[static_cast<std::size_t>(p)] = id;
    while (!stack.empty()) {
      const std::int64_t q = stack.back();
      stack.pop_back();
      ++size;
      const std::int64_t r = q / w, c = q % w;
      const std::int64_t nb[4] = {q - w, q + w, q - 1, q + 1};
      const bool ok[4] = {r > 0, r < h - 1, c > 0, c < w - 1};
      for (int t = 0; t < 4; ++t) {
        if (!ok[t]) continue;
        const std::size_t u = static_cast<std::size_t>(nb[t]);
        if (comp[u] >= 0 || labels[u] != lab) continue;
        comp[u] = id;
        stack.push_back(nb[t]);
      }
    }
    comp_size.push_back(size);
  }
  const std::int64_t ncomp = static_cast<std::int64_t>(comp_label.size());
  // Primary component per label: largest, first-pixel tiebreak.
  std::vector<std::int64_t> primary_of_label;
  {
    std::int64_t max_label = -1;
    for (std::int64_t l : comp_label) max_label = std::max(max_label, l);
    primary_of_label.assign(static_cast<std::size_t>(max_label + 1), -1);
    for (std::int64_t i = 0; i < ncomp; ++i) {
      std::int64_t& best = primary_of_label[static_cast<std::size_t>(
          comp_label[static_cast<std::size_t>(i)])];
      if (best < 0 ||
          comp_size[static_cast<std::size_t>(i)] >
              comp_size[static_cast<std::size_t>(best)])
        best = i;
    }
  }
  std::vector<std::int64_t> parent(static_cast<std::size_t>(ncomp));
  for (std::int64_t i = 0; i < ncomp; ++i)
    parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](std::int64_t x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  std::vector<char> has_primary(static_cast<std::size_t>(ncomp), 0);
  for (std::int64_t p : primary_of_label)
    if (p >= 0) has_primary[static_cast<std::size_t>(p)] = 1;
  std::vector<std::int64_t> set_size = comp_size;
  std::vector<std::int64_t> queue;
  for (std::int64_t i = 0; i < ncomp; ++i)
    if (!has_primary[static_cast<std::size_t>(i)]) queue.push_back(i);
  while (!queue.empty()) {
    std::vector<std::int64_t> next;
    for (std::int64_t i : queue) {
      const std::int64_t root = find(i);
      if (has_primary[static_cast<std::size_t>(root)]) continue;
      // Largest neighboring set, first-pixel tiebreak.
      std::int64_t best = -1;
      for (std::int64_t p = 0; p < total; ++p) {
        if (find(comp[static_cast<std::size_t>(p)]) != root) continue;
        const std::int64_t r = p / w, c = p % w;
        const std::int64_t nb[4] = {p - w, p + w, p - 1, p + 1};
        const bool ok[4] = {r > 0, r < h - 1, c > 0, c < w - 1};
        for (int t = 0; t < 4; ++t) {
          if (!ok[t]) continue;
          const std::int64_t other = find(comp[static_cast<std::size_t>(nb[t])]);
          if (other == root) continue;
          if (best < 0 ||
              set_size[static_cast<std::size_t>(other)] >
                  set_size[static_cast<std::size_t>(best)] ||
              (set_size[static_cast<std::size_t>(other)] ==
                   set_size[static_cast<std::size_t>(best)] &&
               comp_first[static_cast<std::size_t>(other)] <
                   comp_first[static_cast<std::size_t>(best)]))
            best = other;
        }
      }
      if (best < 0) continue;  // isolated full-image component, keep as is
      parent[static_cast<std::size_t>(root)] = best;
      set_size[static_cast<std::size_t>(best)] +=
          set_size[static_cast<std::size_t>(root)];
      if (!has_primary[static_cast<std::size_t>(best)])
        next.push_back(best);
    }
    queue = std::move(next);
  }
  for (std::int64_t p = 0; p < total; ++p) {
    const std::int64_t root = find(comp[static_cast<std::size_t>(p)]);
    labels[static_cast<std::size_t>(p)] =
        comp_label[static_cast<std::size_t>(root)];
  }

  // Compact labels and gather centroids and mean features.
  std::vector<std::int64_t> remap;
  {
    std::int64_t max_label = -1;
    for (std::int64_t l : labels) max_label = std::max(max_label, l);
    remap.assign(static_cast<std::size_t>(max_label + 1), -1);
    std::int64_t next_id = 0;
    for (std::int64_t l : labels)
      if (remap[static_cast<std::size_t>(l)] < 0)
        remap[static_cast<std::size_t>(l)] = -2;  // mark present
    for (std::size_t l = 0; l < remap.size(); ++l)
      if (remap[l] == -2) remap[l] = next_id++;
    for (std::int64_t& l : labels) l = remap[static_cast<std::size_t>(l)];
  }
  SuperpixelSet out;
  out.h = h;
  out.w = w;
  out.labels = std::move(labels);
  std::int64_t count = 0;
  for (std::int64_t l : out.labels) count = std::max(count, l + 1);
  out.centroids.assign(static_cast<std::size_t>(count), Vec2{});
  out.mean_features = Tensor::zeros({count, ch});
  std::vector<std::int64_t> cnt(static_cast<std::size_t>(count), 0);
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      const std::size_t l =
          static_cast<std::size_t>(out.labels[static_cast<std::size_t>(r * w + c)]);
      out.centroids[l].x += static_cast<double>(c);
      out.centroids[l].y += static_cast<double>(r);
      for (std::int64_t i = 0; i < ch; ++i)
        out.mean_features(static_cast<std::int64_t>(l), i) += image(i, r, c);
      ++cnt[l];
    }
  for (std::int64_t l = 0; l < count; ++l) {
    const double inv = 1.0 / static_cast<double>(cnt[static_cast<std::size_t>(l)]);
    out.centroids[static_cast<std::size_t>(l)].x *= inv;
    out.centroids[static_cast<std::size_t>(l)].y *= inv;
    for (std::int64_t i = 0; i < ch; ++i)
      out.mean_features(l, i) *=
          1.0f / static_cast<float>(cnt[static_cast<std::size_t>(l)]);
  }
  return out;
}

// One node per superpixel at its centroid. Each node proposes edges to its
// knn nearest centroids; per selection only the closest candidate survives.
// KNN is not symmetric and the result is intentionally not symmetrized.
inline PositionalGraph build_superpixel_graph(const SuperpixelSet& sp,
                                              std::int64_t knn) {
  if (knn < 1) throw std::invalid_argument("knn must be >= 1");
  const std::int64_t n = sp.count();
  if (n < 2)
    throw std::invalid_argument("need at least 2 superpixels for neighbors");
  std::vector<GraphEdge> edges;
  std::vector<std::pair<double, std::int64_t>> cand;
  for (std::int64_t i = 0; i < n; ++i) {
    cand.clear();
    const Vec2 p = sp.centroids[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec2 q = sp.centroids[static_cast<std::size_t>(j)];
      const double d2 = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
      cand.push_back({d2, j});
    }
    std::sort(cand.begin(), cand.end());
    const std::size_t take =
        std::min<std::size_t>(cand.size(), static_cast<std::size_t>(knn));
    std::int64_t kept[kSelections];
    std::fill(kept, kept + kSelections, -1);
    for (std::size_t t = 0; t < take; ++t) {
      const std::int64_t j = cand[t].second;
      const Vec2 q = sp.centroids[static_cast<std::size_t>(j)];
      const int sel = select({q.x - p.x, q.y - p.y}, 1e-12);
      if (sel == 0 || kept[sel] >= 0) continue;
      kept[sel] = j;
      edges.push_back({i, j, sel});
    }
  }
  return PositionalGraph::build(sp.centroids, std::move(edges));
}

}  // namespace selconv
