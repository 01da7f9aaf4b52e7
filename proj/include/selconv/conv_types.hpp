#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "selconv/tensor.hpp"

namespace selconv {

enum class PadKind { zero, constant, replicate, reflect };

// Padding behavior for kernel taps that fall off the grid/graph.
// `value` is used by `constant` only: one entry per input channel, or a
// single entry broadcast to all channels.
struct PaddingMode {
  PadKind kind = PadKind::zero;
  std::vector<float> value;

  static PaddingMode zero() { return {PadKind::zero, {}}; }
  static PaddingMode constant(std::vector<float> v) {
    return {PadKind::constant, std::move(v)};
  }
  static PaddingMode replicate() { return {PadKind::replicate, {}}; }
  static PaddingMode reflect() { return {PadKind::reflect, {}}; }

  float channel_value(std::int64_t c, std::int64_t channels) const {
    if (kind != PadKind::constant) return 0.0f;
    if (value.size() == 1) return value[0];
    if (static_cast<std::int64_t>(value.size()) != channels)
      throw std::invalid_argument("constant pad value/channel mismatch");
    return value[static_cast<std::size_t>(c)];
  }
};

// Dense 2D convolution weights, cross-correlation convention:
// out[o] += w[o][i][ky][kx] * in[i][y + (ky - r) * dil][x + (kx - r) * dil].
struct Kernel2D {
  Tensor w;     // [out][in][kh][kw]
  Tensor bias;  // [out], may be empty

  std::int64_t out_channels() const { return w.dim(0); }
  std::int64_t in_channels() const { return w.dim(1); }
  std::int64_t kh() const { return w.dim(2); }
  std::int64_t kw() const { return w.dim(3); }
  bool has_bias() const { return bias.numel() > 0; }

  void check_square_odd() const {
    if (w.rank() != 4) throw std::invalid_argument("kernel must be rank 4");
    if (kh() != kw() || kh() % 2 == 0)
      throw std::invalid_argument("kernel must be square with odd size");
    if (has_bias() && (bias.rank() != 1 || bias.dim(0) != out_channels()))
      throw std::invalid_argument("bias shape mismatch");
  }
};

}  // namespace selconv
