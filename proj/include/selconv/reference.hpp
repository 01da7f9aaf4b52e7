#pragma once

// Reference CNN used to validate the graph engine. Everything here works on
// dense [C, H, W] tensors with plain loops. conv2d_ref exists twice: a direct
// nested-loop form and an im2col form, so a bug in one arrangement cannot
// validate itself. Both share only resolve_tap, which *defines* the padding
// semantics of the project.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "selconv/conv_types.hpp"
#include "selconv/tensor.hpp"

namespace selconv {
namespace ref {

// Where a kernel tap reads from. `skip` means the tap contributes nothing
// (zero padding); `use_pad_value` means the constant pad value is read.
struct TapSample {
  bool skip = false;
  bool use_pad_value = false;
  std::int64_t x = 0;
  std::int64_t y = 0;
};

// Resolves the source of the tap at scaled offset (dx, dy) from (x, y).
// Out-of-bounds taps walk the king-move decomposition of the offset
// (diagonal steps first) and apply the padding rule at the first step that
// leaves the image: constant reads the pad value, replicate reads the walk's
// last in-bounds pixel, reflect steps once against the failed direction
// (falling back to the last in-bounds pixel).
inline TapSample resolve_tap(std::int64_t w, std::int64_t h, std::int64_t x,
                             std::int64_t y, std::int64_t dx, std::int64_t dy,
                             PadKind kind) {
  const std::int64_t tx = x + dx, ty = y + dy;
  if (tx >= 0 && tx < w && ty >= 0 && ty < h) return {false, false, tx, ty};
  if (kind == PadKind::zero) return {true, false, 0, 0};
  const std::int64_t ax = std::llabs(dx), ay = std::llabs(dy);
  const std::int64_t sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const std::int64_t sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const std::int64_t len = std::max(ax, ay);
  std::int64_t cx = x, cy = y;
  for (std::int64_t i = 0; i < len; ++i) {
    const std::int64_t stepx = i < ax ? sx : 0;
    const std::int64_t stepy = i < ay ? sy : 0;
    const std::int64_t nx = cx + stepx, ny = cy + stepy;
    if (nx < 0 || nx >= w || ny < 0 || ny >= h) {
      if (kind == PadKind::constant) return {false, true, 0, 0};
      if (kind == PadKind::replicate) return {false, false, cx, cy};
      const std::int64_t rx = cx - stepx, ry = cy - stepy;
      if (rx >= 0 && rx < w && ry >= 0 && ry < h) return {false, false, rx, ry};
      return {false, false, cx, cy};
    }
    cx = nx;
    cy = ny;
  }
  return {false, false, cx, cy};
}

inline void check_conv_args(const Tensor& image, const Kernel2D& k, int stride,
                            int dilation) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  k.check_square_odd();
  if (image.dim(0) != k.in_channels())
    throw std::invalid_argument("image channels do not match kernel");
  if (stride < 1 || dilation < 1)
    throw std::invalid_argument("stride and dilation must be >= 1");
}

// Output spatial size: "same"-sized stride-1 result sampled at phase-0
// positions 0, s, 2s, ...
inline std::int64_t strided_extent(std::int64_t n, int stride) {
  return (n + stride - 1) / stride;
}

inline Tensor conv2d_ref(const Tensor& image, const Kernel2D& k, int stride,
                         int dilation, const PaddingMode& pad) {
  check_conv_args(image, k, stride, dilation);
  const std::int64_t c_in = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::int64_t c_out = k.out_channels(), ks = k.kh(), r = ks / 2;
  const std::int64_t oh = strided_extent(h, stride), ow = strided_extent(w, stride);
  Tensor out({c_out, oh, ow});
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const std::int64_t y = oy * stride, x = ox * stride;
      for (std::int64_t o = 0; o < c_out; ++o) {
        float acc = 0.0f;
        for (std::int64_t i = 0; i < c_in; ++i)
          for (std::int64_t ky = 0; ky < ks; ++ky)
            for (std::int64_t kx = 0; kx < ks; ++kx) {
              const TapSample t =
                  resolve_tap(w, h, x, y, (kx - r) * dilation,
                              (ky - r) * dilation, pad.kind);
              float v;
              if (t.skip) continue;
              if (t.use_pad_value)
                v = pad.channel_value(i, c_in);
              else
                v = image(i, t.y, t.x);
              acc += k.w(o, i, ky, kx) * v;
            }
        out(o, oy, ox) = acc + (k.has_bias() ? k.bias(o) : 0.0f);
      }
    }
  return out;
}

// Same contract as conv2d_ref, arranged as gather + matrix product.
inline Tensor conv2d_ref_im2col(const Tensor& image, const Kernel2D& k,
                                int stride, int dilation,
                                const PaddingMode& pad) {
  check_conv_args(image, k, stride, dilation);
  const std::int64_t c_in = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::int64_t c_out = k.out_channels(), ks = k.kh(), r = ks / 2;
  const std::int64_t oh = strided_extent(h, stride), ow = strided_extent(w, stride);
  const std::int64_t taps = c_in * ks * ks;
  Tensor cols({oh * ow, taps});
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const std::int64_t row = oy * ow + ox;
      const std::int64_t y = oy * stride, x = ox * stride;
      for (std::int64_t i = 0; i < c_in; ++i)
        for (std::int64_t ky = 0; ky < ks; ++ky)
          for (std::int64_t kx = 0; kx < ks; ++kx) {
            const TapSample t = resolve_tap(w, h, x, y, (kx - r) * dilation,
                                            (ky - r) * dilation, pad.kind);
            float v = 0.0f;
            if (t.skip)
              v = 0.0f;
            else if (t.use_pad_value)
              v = pad.channel_value(i, c_in);
            else
              v = image(i, t.y, t.x);
            cols(row, (i * ks + ky) * ks + kx) = v;
          }
    }
  Tensor wmat({taps, c_out});
  for (std::int64_t o = 0; o < c_out; ++o)
    for (std::int64_t i = 0; i < c_in; ++i)
      for (std::int64_t ky = 0; ky < ks; ++ky)
        for (std::int64_t kx = 0; kx < ks; ++kx)
          wmat((i * ks + ky) * ks + kx, o) = k.w(o, i, ky, kx);
  Tensor prod = matmul(cols, wmat);
  Tensor out({c_out, oh, ow});
  for (std::int64_t o = 0; o < c_out; ++o) {
    const float b = k.has_bias() ? k.bias(o) : 0.0f;
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox)
        out(o, oy, ox) = prod(oy * ow + ox, o) + b;
  }
  return out;
}

inline Tensor maxpool2d_ref(const Tensor& image, int kernel) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  if (kernel < 1) throw std::invalid_argument("pool kernel must be >= 1");
  const std::int64_t c = image.dim(0);
  const std::int64_t oh = image.dim(1) / kernel, ow = image.dim(2) / kernel;
  if (oh == 0 || ow == 0) throw std::invalid_argument("pool output is empty");
  Tensor out({c, oh, ow});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        float m = image(ch, oy * kernel, ox * kernel);
        for (std::int64_t dy = 0; dy < kernel; ++dy)
          for (std::int64_t dx = 0; dx < kernel; ++dx)
            m = std::max(m, image(ch, oy * kernel + dy, ox * kernel + dx));
        out(ch, oy, ox) = m;
      }
  return out;
}

inline Tensor avgpool2d_ref(const Tensor& image, int kernel) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  if (kernel < 1) throw std::invalid_argument("pool kernel must be >= 1");
  const std::int64_t c = image.dim(0);
  const std::int64_t oh = image.dim(1) / kernel, ow = image.dim(2) / kernel;
  if (oh == 0 || ow == 0) throw std::invalid_argument("pool output is empty");
  Tensor out({c, oh, ow});
  const float inv = 1.0f / static_cast<float>(kernel * kernel);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        float s = 0.0f;
        for (std::int64_t dy = 0; dy < kernel; ++dy)
          for (std::int64_t dx = 0; dx < kernel; ++dx)
            s += image(ch, oy * kernel + dy, ox * kernel + dx);
        out(ch, oy, ox) = s * inv;
      }
  return out;
}

inline Tensor upsample_nearest_ref(const Tensor& image, int scale) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  if (scale < 1) throw std::invalid_argument("upsample scale must be >= 1");
  Tensor out({image.dim(0), image.dim(1) * scale, image.dim(2) * scale});
  for (std::int64_t c = 0; c < image.dim(0); ++c)
    for (std::int64_t y = 0; y < out.dim(1); ++y)
      for (std::int64_t x = 0; x < out.dim(2); ++x)
        out(c, y, x) = image(c, y / scale, x / scale);
  return out;
}

inline Tensor relu_ref(Tensor t) {
  for (float& v : t.storage()) v = v > 0.0f ? v : 0.0f;
  return t;
}

inline Tensor affine_ref(const Tensor& image, const Tensor& scale,
                         const Tensor& shift) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  if (scale.rank() != 1 || shift.rank() != 1 || scale.dim(0) != image.dim(0) ||
      shift.dim(0) != image.dim(0))
    throw std::invalid_argument("affine parameter shape mismatch");
  Tensor out = image;
  for (std::int64_t c = 0; c < image.dim(0); ++c)
    for (std::int64_t y = 0; y < image.dim(1); ++y)
      for (std::int64_t x = 0; x < image.dim(2); ++x)
        out(c, y, x) = image(c, y, x) * scale(c) + shift(c);
  return out;
}

// [C, H, W] -> flat [C*H*W] with index c*(H*W) + y*W + x.
inline Tensor flatten_chw(const Tensor& image) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C,H,W]");
  return image.reshaped({image.numel()});
}

inline Tensor linear_ref(const Tensor& w, const Tensor& bias, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0))
    throw std::invalid_argument("linear shape mismatch");
  Tensor out({w.dim(0)});
  for (std::int64_t o = 0; o < w.dim(0); ++o) {
    float acc = bias.numel() > 0 ? bias(o) : 0.0f;
    for (std::int64_t i = 0; i < w.dim(1); ++i) acc += w(o, i) * x(i);
    out(o) = acc;
  }
  return out;
}

struct RefConv {
  Kernel2D kernel;
  int stride = 1;
  int dilation = 1;
  PaddingMode pad = PaddingMode::zero();
};
struct RefMaxPool {
  int kernel = 2;
};
struct RefAvgPool {
  int kernel = 2;
};
struct RefUpsample {
  int scale = 2;
};
struct RefRelu {};
struct RefAffine {
  Tensor scale;
  Tensor shift;
};
struct RefFlatten {};
struct RefLinear {
  Tensor w;
  Tensor bias;
};

using RefLayer = std::variant<RefConv, RefMaxPool, RefAvgPool, RefUpsample,
                              RefRelu, RefAffine, RefFlatten, RefLinear>;

struct RefNet {
  std::vector<RefLayer> layers;
};

// Runs layers in order. The running value is [C, H, W] until a flatten, then
// rank-1; shape misuse (conv after flatten etc.) throws.
inline Tensor run_ref(const RefNet& net, Tensor value) {
  for (const RefLayer& layer : net.layers) {
    if (std::holds_alternative<RefConv>(layer)) {
      const RefConv& l = std::get<RefConv>(layer);
      value = conv2d_ref(value, l.kernel, l.stride, l.dilation, l.pad);
    } else if (std::holds_alternative<RefMaxPool>(layer)) {
      value = maxpool2d_ref(value, std::get<RefMaxPool>(layer).kernel);
    } else if (std::holds_alternative<RefAvgPool>(layer)) {
      value = avgpool2d_ref(value, std::get<RefAvgPool>(layer).kernel);
    } else if (std::holds_alternative<RefUpsample>(layer)) {
      value = upsample_nearest_ref(value, std::get<RefUpsample>(layer).scale);
    } else if (std::holds_alternative<RefRelu>(layer)) {
      value = relu_ref(std::move(value));
    } else if (std::holds_alternative<RefAffine>(layer)) {
      const RefAffine& l = std::get<RefAffine>(layer);
      value = affine_ref(value, l.scale, l.shift);
    } else if (std::holds_alternative<RefFlatten>(layer)) {
      value = flatten_chw(value);
    } else {
      const RefLinear& l = std::get<RefLinear>(layer);
      value = linear_ref(l.w, l.bias, value);
    }
  }
  return value;
}

}  // namespace ref
}  // namespace selconv
