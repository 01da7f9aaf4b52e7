#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "selconv/graph.hpp"
#include "selconv/layers.hpp"
#include "selconv/model_io.hpp"
#include "selconv/reference.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

// [C, H, W] image -> [H*W, C] node features, node id = row * W + col.
inline Tensor image_to_features(const Tensor& chw) {
  if (chw.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  const std::int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor f({h * w, c});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) f(y * w + x, ch) = chw(ch, y, x);
  return f;
}

inline Tensor features_to_image(const Tensor& f, std::int64_t rows,
                                std::int64_t cols) {
  if (f.rank() != 2 || f.dim(0) != rows * cols)
    throw std::invalid_argument("features do not fill a rows x cols grid");
  Tensor img({f.dim(1), rows, cols});
  for (std::int64_t ch = 0; ch < f.dim(1); ++ch)
    for (std::int64_t y = 0; y < rows; ++y)
      for (std::int64_t x = 0; x < cols; ++x) img(ch, y, x) = f(y * cols + x, ch);
  return img;
}

namespace detail {

inline float stat_at(const std::vector<float>& v, std::int64_t c) {
  return v.size() == 1 ? v[0] : v[static_cast<std::size_t>(c)];
}

inline void check_stats(const ModelManifest& m) {
  for (const std::vector<float>* v : {&m.normalize_mean, &m.normalize_std})
    if (v->size() != 1 &&
        static_cast<std::int64_t>(v->size()) != m.input_channels)
      throw std::invalid_argument("normalize stats must have 1 or C entries");
}

inline const Tensor& named(const TensorMap& tensors, const std::string& name) {
  const auto it = tensors.find(name);
  if (it == tensors.end())
    throw std::invalid_argument("pipeline references unknown tensor: " + name);
  return it->second;
}

}  // namespace detail

// Per-channel (v - mean) / std on a [C, H, W] image, the same input
// normalization GraphRunner applies to node features.
inline Tensor normalize_chw(const ModelManifest& m, Tensor img) {
  if (img.rank() != 3 || img.dim(0) != m.input_channels)
    throw std::invalid_argument("image does not match manifest input");
  detail::check_stats(m);
  for (std::int64_t c = 0; c < img.dim(0); ++c) {
    const float mean = detail::stat_at(m.normalize_mean, c);
    const float sd = detail::stat_at(m.normalize_std, c);
    for (std::int64_t y = 0; y < img.dim(1); ++y)
      for (std::int64_t x = 0; x < img.dim(2); ++x)
        img(c, y, x) = (img(c, y, x) - mean) / sd;
  }
  return img;
}

// Dense-CNN twin of a manifest, for oracle comparisons. Upsample scale is the
// window of the most recent unreverted coarsening (pool or conv stride); only
// copy mode has a nearest-neighbor equivalent.
inline ref::RefNet make_ref_net(const ModelManifest& m,
                                const TensorMap& tensors) {
  ref::RefNet net;
  std::vector<int> coarsen_stack;
  for (const LayerSpec& l : m.layers) {
    if (l.type == "conv") {
      ref::RefConv conv;
      conv.kernel.w = detail::named(tensors, l.weight);
      if (!l.bias.empty()) conv.kernel.bias = detail::named(tensors, l.bias);
      conv.stride = static_cast<int>(l.stride);
      conv.dilation = static_cast<int>(l.dilation);
      conv.pad = l.padding;
      if (l.stride > 1) coarsen_stack.push_back(static_cast<int>(l.stride));
      net.layers.push_back(std::move(conv));
    } else if (l.type == "relu") {
      net.layers.push_back(ref::RefRelu{});
    } else if (l.type == "affine_norm") {
      net.layers.push_back(ref::RefAffine{detail::named(tensors, l.scale),
                                          detail::named(tensors, l.shift)});
    } else if (l.type == "maxpool" || l.type == "avgpool") {
      const int k = static_cast<int>(l.kernel);
      coarsen_stack.push_back(k);
      if (l.type == "maxpool")
        net.layers.push_back(ref::RefMaxPool{k});
      else
        net.layers.push_back(ref::RefAvgPool{k});
    } else if (l.type == "upsample") {
      if (l.mode != "copy")
        throw std::invalid_argument(
            "only copy upsampling has a dense reference");
      if (coarsen_stack.empty())
        throw std::invalid_argument("upsample without a matching pool");
      net.layers.push_back(ref::RefUpsample{coarsen_stack.back()});
      coarsen_stack.pop_back();
    } else if (l.type == "flatten") {
      net.layers.push_back(ref::RefFlatten{});
    } else if (l.type == "linear") {
      ref::RefLinear lin;
      lin.w = detail::named(tensors, l.weight);
      if (!l.bias.empty()) lin.bias = detail::named(tensors, l.bias);
      net.layers.push_back(std::move(lin));
    } else {
      throw std::invalid_argument("unknown layer type: " + l.type);
    }
  }
  return net;
}

// Compiles a manifest against one graph, then runs it on any number of
// feature tensors. Everything input-independent is done once here: weight
// transfer, conv plans, and the cluster maps of every coarsening step.
//
// rows/cols/pitch describe the raster the node positions live on; pooling
// cells of size window*pitch are anchored at the position minimum shifted by
// half a pitch, so full cells pool exactly like their dense counterparts and
// trailing remainder rows/cols fall outside every cell (floor semantics).
// Conv stride is the same clustering with ceil-sized output and central-node
// (lowest (y, x)) sampling, which keeps phase-0 positions.
class GraphRunner {
 public:
  GraphRunner(const ModelManifest& m, const TensorMap& tensors,
              const PositionalGraph& graph, std::int64_t rows,
              std::int64_t cols, double pitch = 1.0) {
    detail::check_stats(m);
    if (m.input_channels < 1)
      throw std::invalid_argument("input channel count must be >= 1");
    if (rows < 1 || cols < 1 || !(pitch > 0.0))
      throw std::invalid_argument("raster shape must be positive");
    mean_ = m.normalize_mean;
    std_ = m.normalize_std;
    input_channels_ = m.input_channels;
    input_nodes_ = graph.node_count();

    PositionalGraph g = graph;
    SelectionAdjacency adj = normalize(build_adjacency(g));
    std::int64_t ch = m.input_channels;
    bool flat = false;
    std::int64_t flat_len = -1;
    struct Saved {
      std::int64_t cm;
      std::int64_t rows, cols;
      double pitch;
    };
    std::vector<Saved> stack;

    // Clusters the current graph into out_rows x out_cols cells of size
    // `cell`, replaces the graph with the pooled one, and returns the map id.
    const auto coarsen = [&](std::int64_t out_rows, std::int64_t out_cols,
                             double cell) {
      double min_x = std::numeric_limits<double>::infinity();
      double min_y = min_x;
      for (std::int64_t i = 0; i < g.node_count(); ++i) {
        min_x = std::min(min_x, g.position(i).x);
        min_y = std::min(min_y, g.position(i).y);
      }
      GridBounds b;
      b.min_x = min_x - pitch / 2.0;
      b.min_y = min_y - pitch / 2.0;
      b.max_x = b.min_x + static_cast<double>(out_cols) * cell;
      b.max_y = b.min_y + static_cast<double>(out_rows) * cell;
      cluster_maps_.push_back(cluster_grid(g, out_rows, out_cols, b));
      const std::int64_t id =
          static_cast<std::int64_t>(cluster_maps_.size()) - 1;
      stack.push_back({id, rows, cols, pitch});
      g = pool(g, Tensor::zeros({g.node_count(), 1}), cluster_maps_.back(),
               PoolMode::mean)
              .graph;
      adj = normalize(build_adjacency(g));
      rows = out_rows;
      cols = out_cols;
      return id;
    };
    const auto require_nodes = [&](const std::string& type) {
      if (flat)
        throw std::invalid_argument(type + " cannot follow flatten");
    };

    for (const LayerSpec& l : m.layers) {
      if (l.type == "conv") {
        require_nodes(l.type);
        Kernel2D k;
        k.w = detail::named(tensors, l.weight);
        if (!l.bias.empty()) k.bias = detail::named(tensors, l.bias);
        k.check_square_odd();
        if (k.in_channels() != ch)
          throw std::invalid_argument("conv input channel mismatch");
        CConv step;
        step.layer = transfer_conv(k, static_cast<int>(l.dilation),
                                   static_cast<int>(l.stride), l.padding);
        step.plan = make_conv_plan(step.layer, adj);
        ch = k.out_channels();
        if (l.stride > 1) {
          const std::int64_t s = l.stride;
          step.stride_cm = coarsen((rows + s - 1) / s, (cols + s - 1) / s,
                                   static_cast<double>(s) * pitch);
          pitch *= static_cast<double>(s);
        }
        steps_.push_back(std::move(step));
      } else if (l.type == "relu") {
        steps_.push_back(CRelu{});
      } else if (l.type == "affine_norm") {
        require_nodes(l.type);
        CAffine step{detail::named(tensors, l.scale),
                     detail::named(tensors, l.shift)};
        if (step.scale.rank() != 1 || step.scale.dim(0) != ch ||
            step.shift.rank() != 1 || step.shift.dim(0) != ch)
          throw std::invalid_argument("affine_norm channel mismatch");
        steps_.push_back(std::move(step));
      } else if (l.type == "maxpool" || l.type == "avgpool") {
        require_nodes(l.type);
        const std::int64_t k = l.kernel;
        if (k < 1) throw std::invalid_argument("pool kernel must be >= 1");
        if (rows / k < 1 || cols / k < 1)
          throw std::invalid_argument("pool output is empty");
        const std::int64_t cm =
            coarsen(rows / k, cols / k, static_cast<double>(k) * pitch);
        pitch *= static_cast<double>(k);
        steps_.push_back(
            CPool{cm, l.type == "maxpool" ? PoolMode::max : PoolMode::mean});
      } else if (l.type == "upsample") {
        require_nodes(l.type);
        if (stack.empty())
          throw std::invalid_argument("upsample without a matching pool");
        const Saved s = stack.back();
        stack.pop_back();
        UnpoolMode mode;
        if (l.mode == "copy") mode = UnpoolMode::copy;
        else if (l.mode == "average") mode = UnpoolMode::average;
        else throw std::invalid_argument("unknown upsample mode: " + l.mode);
        steps_.push_back(CUnpool{s.cm, mode});
        g = cluster_maps_[static_cast<std::size_t>(s.cm)].saved_graph;
        adj = normalize(build_adjacency(g));
        rows = s.rows;
        cols = s.cols;
        pitch = s.pitch;
      } else if (l.type == "flatten") {
        require_nodes(l.type);
        if (l.order != "chw" && !l.order.empty())
          throw std::invalid_argument("unknown flatten order: " + l.order);
        if (g.node_count() != rows * cols)
          throw std::invalid_argument(
              "flatten requires a dense grid clustering");
        steps_.push_back(CFlatten{});
        flat = true;
        flat_len = ch * rows * cols;
      } else if (l.type == "linear") {
        if (!flat)
          throw std::invalid_argument("linear requires a flattened input");
        CLinear step;
        step.w = detail::named(tensors, l.weight);
        if (!l.bias.empty()) step.bias = detail::named(tensors, l.bias);
        if (step.w.rank() != 2 || step.w.dim(1) != flat_len)
          throw std::invalid_argument("linear shape mismatch");
        flat_len = step.w.dim(0);
        steps_.push_back(std::move(step));
      } else {
        throw std::invalid_argument("unknown layer type: " + l.type);
      }
    }
    output_graph_ = std::move(g);
    output_rows_ = rows;
    output_cols_ = cols;
    output_flat_ = flat;
  }

  Tensor run(const Tensor& features) const {
    if (features.rank() != 2 || features.dim(0) != input_nodes_ ||
        features.dim(1) != input_channels_)
      throw std::invalid_argument("features do not match the compiled input");
    Tensor x = features;
    for (std::int64_t c = 0; c < input_channels_; ++c) {
      const float mean = detail::stat_at(mean_, c);
      const float sd = detail::stat_at(std_, c);
      for (std::int64_t i = 0; i < input_nodes_; ++i)
        x(i, c) = (x(i, c) - mean) / sd;
    }
    for (const Step& step : steps_) {
      if (std::holds_alternative<CConv>(step)) {
        const CConv& s = std::get<CConv>(step);
        x = forward_conv(s.plan, s.layer, x);
        if (s.stride_cm >= 0) {
          const ClusterMap& cm =
              cluster_maps_[static_cast<std::size_t>(s.stride_cm)];
          x = pool(cm.saved_graph, x, cm, PoolMode::central).features;
        }
      } else if (std::holds_alternative<CPool>(step)) {
        const CPool& s = std::get<CPool>(step);
        const ClusterMap& cm = cluster_maps_[static_cast<std::size_t>(s.cm)];
        x = pool(cm.saved_graph, x, cm, s.mode).features;
      } else if (std::holds_alternative<CUnpool>(step)) {
        const CUnpool& s = std::get<CUnpool>(step);
        x = unpool(cluster_maps_[static_cast<std::size_t>(s.cm)], x, s.mode);
      } else if (std::holds_alternative<CRelu>(step)) {
        x = relu(x);
      } else if (std::holds_alternative<CAffine>(step)) {
        const CAffine& s = std::get<CAffine>(step);
        x = affine_norm(x, s.scale, s.shift);
      } else if (std::holds_alternative<CFlatten>(step)) {
        const std::int64_t n = x.dim(0), ch = x.dim(1);
        Tensor y({ch * n});
        for (std::int64_t c = 0; c < ch; ++c)
          for (std::int64_t i = 0; i < n; ++i) y(c * n + i) = x(i, c);
        x = std::move(y);
      } else {
        const CLinear& s = std::get<CLinear>(step);
        x = linear(s.w, s.bias, x);
      }
    }
    return x;
  }

  std::int64_t input_nodes() const { return input_nodes_; }
  std::int64_t input_channels() const { return input_channels_; }
  // Shape of the per-node output; meaningless after a flatten.
  const PositionalGraph& output_graph() const { return output_graph_; }
  std::int64_t output_rows() const { return output_rows_; }
  std::int64_t output_cols() const { return output_cols_; }
  bool output_flat() const { return output_flat_; }

 private:
  struct CConv {
    SelectionConvLayer layer;
    ConvPlan plan;
    std::int64_t stride_cm = -1;
  };
  struct CPool {
    std::int64_t cm;
    PoolMode mode;
  };
  struct CUnpool {
    std::int64_t cm;
    UnpoolMode mode;
  };
  struct CRelu {};
  struct CAffine {
    Tensor scale, shift;
  };
  struct CFlatten {};
  struct CLinear {
    Tensor w, bias;
  };
  using Step =
      std::variant<CConv, CPool, CUnpool, CRelu, CAffine, CFlatten, CLinear>;

  std::vector<Step> steps_;
  std::vector<ClusterMap> cluster_maps_;
  std::vector<float> mean_, std_;
  std::int64_t input_channels_ = 0;
  std::int64_t input_nodes_ = 0;
  PositionalGraph output_graph_;
  std::int64_t output_rows_ = 0;
  std::int64_t output_cols_ = 0;
  bool output_flat_ = false;
};

}  // namespace selconv
