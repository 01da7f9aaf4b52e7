#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "selconv/conv_types.hpp"
#include "selconv/errors.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

// Channel-planar image with values in [0,1]; data is a [C,H,W] tensor.
struct ImageBuffer {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 0;
  Tensor data;
};

namespace detail {

inline std::int64_t pnm_int(std::istream& in, const char* what) {
  // Header tokens are separated by whitespace; '#' starts a comment line.
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  std::int64_t value = -1;
  while (c != EOF && std::isdigit(c)) {
    if (value < 0) value = 0;
    value = value * 10 + (c - '0');
    c = in.get();
  }
  if (value < 0)
    throw ParseError(std::string("image header: expected ") + what);
  if (c != EOF) in.unget();
  return value;
}

}  // namespace detail

// Binary PGM (P5, 1 channel) or PPM (P6, 3 channels), 8-bit maxval 255;
// bytes map to [0,1] as value/255.
inline ImageBuffer read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open image: " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  std::int64_t channels = 0;
  if (magic[0] == 'P' && magic[1] == '5') channels = 1;
  else if (magic[0] == 'P' && magic[1] == '6') channels = 3;
  else throw ParseError("unsupported image magic (want P5 or P6): " + path);
  const std::int64_t w = detail::pnm_int(in, "width");
  const std::int64_t h = detail::pnm_int(in, "height");
  const std::int64_t maxval = detail::pnm_int(in, "maxval");
  if (w < 1 || h < 1) throw ParseError("image has empty dimensions: " + path);
  if (maxval != 255)
    throw ParseError("unsupported maxval (want 255): " + path);
  in.get();  // single whitespace byte before the payload
  std::vector<char> bytes(static_cast<std::size_t>(h * w * channels));
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw ParseError("truncated image payload: " + path);
  ImageBuffer buf;
  buf.height = h;
  buf.width = w;
  buf.channels = channels;
  buf.data = Tensor::zeros({channels, h, w});
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      for (std::int64_t i = 0; i < channels; ++i)
        buf.data(i, r, c) =
            static_cast<float>(static_cast<unsigned char>(
                bytes[static_cast<std::size_t>((r * w + c) * channels + i)])) /
            255.0f;
  return buf;
}

// Inverse of read_image with round-half-up quantization; out-of-range values
// are clamped to [0,1] first.
inline void write_image(const ImageBuffer& buf, const std::string& path) {
  if (buf.channels != 1 && buf.channels != 3)
    throw std::invalid_argument("image must have 1 or 3 channels");
  if (buf.height < 1 || buf.width < 1 ||
      buf.data.shape() != std::vector<std::int64_t>{buf.channels, buf.height,
                                                    buf.width})
    throw std::invalid_argument("image buffer shape mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << (buf.channels == 1 ? "P5" : "P6") << "\n"
      << buf.width << " " << buf.height << "\n255\n";
  std::vector<char> bytes;
  bytes.reserve(static_cast<std::size_t>(buf.height * buf.width * buf.channels));
  for (std::int64_t r = 0; r < buf.height; ++r)
    for (std::int64_t c = 0; c < buf.width; ++c)
      for (std::int64_t i = 0; i < buf.channels; ++i) {
        const float v = std::clamp(buf.data(i, r, c), 0.0f, 1.0f);
        bytes.push_back(static_cast<char>(
            static_cast<unsigned char>(std::floor(v * 255.0f + 0.5f))));
      }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("image write failed: " + path);
}

struct TensorSpec {
  std::vector<std::int64_t> shape;
  std::int64_t offset = 0;
  std::int64_t length = 0;
};

// One pipeline layer. Tensor-valued parameters are names into the tensor
// table; an empty name means absent (e.g. a conv without bias).
struct LayerSpec {
  std::string type;            // conv|relu|affine_norm|maxpool|avgpool|upsample|flatten|linear
  std::string weight;          // conv, linear
  std::string bias;            // conv, linear (optional)
  std::string scale, shift;    // affine_norm
  std::int64_t stride = 1;     // conv
  std::int64_t dilation = 1;   // conv
  std::int64_t kernel = 0;     // maxpool, avgpool (window == stride)
  PaddingMode padding = PaddingMode::zero();  // conv
  std::string mode;            // upsample: copy|average
  std::string order;           // flatten: chw
};

struct ModelManifest {
  std::int64_t format_version = 1;
  std::vector<LayerSpec> layers;
  std::map<std::string, TensorSpec> tensors;  // name-sorted
  std::int64_t input_channels = 0;
  std::vector<float> normalize_mean{0.0f};
  std::vector<float> normalize_std{1.0f};
};

using TensorMap = std::map<std::string, Tensor>;

namespace detail {

inline void append_le32(std::string& out, float v) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline float read_le32(const std::string& blob, std::int64_t offset) {
  const auto b = [&](std::int64_t i) {
    return static_cast<std::uint32_t>(
        static_cast<unsigned char>(blob[static_cast<std::size_t>(offset + i)]));
  };
  return std::bit_cast<float>(b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24));
}

inline nlohmann::ordered_json layer_to_json(const LayerSpec& layer) {
  nlohmann::ordered_json j;
  j["type"] = layer.type;
  if (layer.type == "conv") {
    j["weight"] = layer.weight;
    j["bias"] = layer.bias;
    j["stride"] = layer.stride;
    j["dilation"] = layer.dilation;
    switch (layer.padding.kind) {
      case PadKind::zero: j["padding"] = "zero"; break;
      case PadKind::constant: j["padding"] = "constant"; break;
      case PadKind::replicate: j["padding"] = "replicate"; break;
      case PadKind::reflect: j["padding"] = "reflect"; break;
    }
    if (layer.padding.kind == PadKind::constant)
      j["pad_value"] = layer.padding.value;
  } else if (layer.type == "affine_norm") {
    j["scale"] = layer.scale;
    j["shift"] = layer.shift;
  } else if (layer.type == "maxpool" || layer.type == "avgpool") {
    j["kernel"] = layer.kernel;
  } else if (layer.type == "upsample") {
    j["mode"] = layer.mode;
  } else if (layer.type == "flatten") {
    j["order"] = layer.order.empty() ? "chw" : layer.order;
  } else if (layer.type == "linear") {
    j["weight"] = layer.weight;
    j["bias"] = layer.bias;
  } else if (layer.type != "relu") {
    throw std::invalid_argument("unknown layer type: " + layer.type);
  }
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec layer;
  layer.type = j.at("type").get<std::string>();
  if (layer.type == "conv") {
    layer.weight = j.at("weight").get<std::string>();
    layer.bias = j.at("bias").get<std::string>();
    layer.stride = j.at("stride").get<std::int64_t>();
    layer.dilation = j.at("dilation").get<std::int64_t>();
    const std::string pad = j.at("padding").get<std::string>();
    if (pad == "zero") layer.padding = PaddingMode::zero();
    else if (pad == "replicate") layer.padding = PaddingMode::replicate();
    else if (pad == "reflect") layer.padding = PaddingMode::reflect();
    else if (pad == "constant")
      layer.padding = PaddingMode::constant(
          j.at("pad_value").get<std::vector<float>>());
    else throw ParseError("unknown padding mode: " + pad);
    if (layer.stride < 1 || layer.dilation < 1)
      throw ParseError("conv stride/dilation must be >= 1");
  } else if (layer.type == "relu") {
  } else if (layer.type == "affine_norm") {
    layer.scale = j.at("scale").get<std::string>();
    layer.shift = j.at("shift").get<std::string>();
  } else if (layer.type == "maxpool" || layer.type == "avgpool") {
    layer.kernel = j.at("kernel").get<std::int64_t>();
    if (layer.kernel < 1) throw ParseError("pool kernel must be >= 1");
  } else if (layer.type == "upsample") {
    layer.mode = j.at("mode").get<std::string>();
    if (layer.mode != "copy" && layer.mode != "average")
      throw ParseError("unknown upsample mode: " + layer.mode);
  } else if (layer.type == "flatten") {
    layer.order = j.at("order").get<std::string>();
    if (layer.order != "chw")
      throw ParseError("unknown flatten order: " + layer.order);
  } else if (layer.type == "linear") {
    layer.weight = j.at("weight").get<std::string>();
    layer.bias = j.at("bias").get<std::string>();
  } else {
    throw ParseError("unknown layer type: " + layer.type);
  }
  return layer;
}

}  // namespace detail

// Writes manifest.json and weights.bin into `dir`. The tensor table is
// rebuilt name-sorted with cumulative offsets, so the same model always
// produces identical bytes.
inline void save_model(const ModelManifest& manifest, const TensorMap& tensors,
                       const std::string& dir) {
  std::string blob;
  std::map<std::string, TensorSpec> table;
  for (const auto& [name, tensor] : tensors) {
    TensorSpec spec;
    spec.shape = tensor.shape();
    spec.offset = static_cast<std::int64_t>(blob.size());
    spec.length = tensor.numel() * 4;
    for (const float v : tensor.storage()) detail::append_le32(blob, v);
    table.emplace(name, std::move(spec));
  }

  nlohmann::ordered_json j;
  j["format_version"] = manifest.format_version;
  j["layers"] = nlohmann::ordered_json::array();
  for (const LayerSpec& layer : manifest.layers)
    j["layers"].push_back(detail::layer_to_json(layer));
  j["tensors"] = nlohmann::ordered_json::object();
  for (const auto& [name, spec] : table) {
    nlohmann::ordered_json t;
    t["shape"] = spec.shape;
    t["offset"] = spec.offset;
    t["length"] = spec.length;
    j["tensors"][name] = std::move(t);
  }
  j["input"] = {{"channels", manifest.input_channels},
                {"normalize", {{"mean", manifest.normalize_mean},
                               {"std", manifest.normalize_std}}}};

  std::ofstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write manifest in " + dir);
  mf << j.dump(2) << "\n";
  if (!mf) throw std::runtime_error("manifest write failed in " + dir);
  std::ofstream wf(dir + "/weights.bin", std::ios::binary);
  if (!wf) throw std::runtime_error("cannot write weights in " + dir);
  wf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!wf) throw std::runtime_error("weights write failed in " + dir);
}

// Loads and validates manifest.json + weights.bin from `dir`.
inline std::pair<ModelManifest, TensorMap> load_model(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) throw ParseError("missing manifest.json in " + dir);
  nlohmann::json j;
  try {
    mf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest.json: " + std::string(e.what()));
  }
  std::ifstream wf(dir + "/weights.bin", std::ios::binary);
  if (!wf) throw ParseError("missing weights.bin in " + dir);
  std::ostringstream ws;
  ws << wf.rdbuf();
  const std::string blob = ws.str();

  ModelManifest manifest;
  TensorMap tensors;
  try {
    manifest.format_version = j.at("format_version").get<std::int64_t>();
    if (manifest.format_version != 1)
      throw ParseError("unsupported format_version");
    for (const auto& layer : j.at("layers"))
      manifest.layers.push_back(detail::layer_from_json(layer));
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& [name, tj] : j.at("tensors").items()) {
      TensorSpec spec;
      spec.shape = tj.at("shape").get<std::vector<std::int64_t>>();
      spec.offset = tj.at("offset").get<std::int64_t>();
      spec.length = tj.at("length").get<std::int64_t>();
      std::int64_t numel = 1;
      for (const std::int64_t d : spec.shape) {
        if (d < 1) throw ParseError("tensor " + name + " has empty dim");
        numel *= d;
      }
      if (spec.length != numel * 4)
        throw ParseError("tensor " + name + " length does not match shape");
      if (spec.offset < 0 || spec.offset % 4 != 0 ||
          spec.offset + spec.length >
              static_cast<std::int64_t>(blob.size()))
        throw ParseError("tensor " + name + " offset outside weights.bin");
      spans.push_back({spec.offset, spec.offset + spec.length});
      Tensor t = Tensor::zeros(spec.shape);
      for (std::int64_t i = 0; i < numel; ++i)
        t.storage()[static_cast<std::size_t>(i)] =
            detail::read_le32(blob, spec.offset + i * 4);
      manifest.tensors.emplace(name, std::move(spec));
      tensors.emplace(name, std::move(t));
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
      if (spans[i].first < spans[i - 1].second)
        throw ParseError("tensor table has overlapping offsets");
    const auto& input = j.at("input");
    manifest.input_channels = input.at("channels").get<std::int64_t>();
    if (manifest.input_channels < 1)
      throw ParseError("input.channels must be >= 1");
    const auto& norm = input.at("normalize");
    manifest.normalize_mean = norm.at("mean").get<std::vector<float>>();
    manifest.normalize_std = norm.at("std").get<std::vector<float>>();
    if (manifest.normalize_mean.empty() || manifest.normalize_std.empty())
      throw ParseError("normalize mean/std must be non-empty");
    for (const float s : manifest.normalize_std)
      if (s == 0.0f) throw ParseError("normalize std may not be zero");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest.json: " + std::string(e.what()));
  }
  // Tensor names referenced by layers must exist.
  for (const LayerSpec& layer : manifest.layers)
    for (const std::string* name :
         {&layer.weight, &layer.bias, &layer.scale, &layer.shift})
      if (!name->empty() && tensors.find(*name) == tensors.end())
        throw ParseError("layer references unknown tensor: " + *name);
  return {std::move(manifest), std::move(tensors)};
}

}  // namespace selconv
