// selconv command line entry point.
//
// verify  runs the grid-equivalence suite against the dense reference and
//         exits 0 only if every deviation is within tolerance.
// graph   builds one of the supported graphs and writes the text dump.
// run     loads a model directory, executes it on an input asset, and writes
//         the per-node results back into the input's layout.
// bench   times graph construction, adjacency assembly, and forward
//         convolution over a list of grid sizes.
//
// Exit codes: 0 success, 1 verification failure, 2 usage error, 3 asset or
// parse error. SELCONV_THREADS caps worker threads.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "selconv/cubemap.hpp"
#include "selconv/errors.hpp"
#include "selconv/grid_builders.hpp"
#include "selconv/mesh.hpp"
#include "selconv/pipeline.hpp"
#include "selconv/slic.hpp"

namespace {

using namespace selconv;

Tensor random_tensor(std::vector<std::int64_t> shape, std::mt19937& rng,
                     float scale) {
  Tensor t = Tensor::zeros(shape);
  std::normal_distribution<float> dist(0.0f, scale);
  for (float& v : t.storage()) v = dist(rng);
  return t;
}

Kernel2D random_kernel(std::int64_t out, std::int64_t in, std::int64_t ks,
                       std::mt19937& rng) {
  Kernel2D k;
  const float scale = 1.0f / std::sqrt(static_cast<float>(in * ks * ks));
  k.w = random_tensor({out, in, ks, ks}, rng, scale);
  k.bias = random_tensor({out}, rng, 0.1f);
  return k;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  float m = 0.0f;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.storage()[static_cast<std::size_t>(i)] -
                             b.storage()[static_cast<std::size_t>(i)]));
  return m;
}

// Stride-1 selection conv plus, for stride > 1, the central-node downsampling
// that realizes phase-0 strided sampling. `inject` swaps two off-center taps
// after the transfer, the negative-control fixture for verify.
Tensor graph_conv(const PositionalGraph& g, const SelectionAdjacency& adj,
                  const Kernel2D& k, int stride, int dilation,
                  const PaddingMode& pad, const Tensor& feats,
                  std::int64_t rows, std::int64_t cols, bool inject) {
  SelectionConvLayer layer = transfer_conv(k, dilation, stride, pad);
  if (inject) std::swap(layer.weights[0].w, layer.weights[1].w);
  Tensor y = forward_conv(layer, adj, feats);
  if (stride > 1) {
    const std::int64_t s = stride;
    GridBounds b{-0.5, -0.5, -0.5 + static_cast<double>((cols + s - 1) / s * s),
                 -0.5 + static_cast<double>((rows + s - 1) / s * s)};
    const ClusterMap cm =
        cluster_grid(g, (rows + s - 1) / s, (cols + s - 1) / s, b);
    y = pool(g, y, cm, PoolMode::central).features;
  }
  return y;
}

PositionalGraph jittered_grid(std::int64_t h, std::int64_t w,
                              std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  // Disk radius 0.19: two such jitters stay strictly inside the selection
  // wedges, so every neighbor keeps its lattice selection.
  const auto jitter = [&]() {
    double dx = 0.0, dy = 0.0;
    do {
      dx = unit(rng);
      dy = unit(rng);
    } while (dx * dx + dy * dy > 1.0);
    return Vec2{dx * 0.19, dy * 0.19};
  };
  std::vector<Vec2> pos;
  pos.reserve(static_cast<std::size_t>(h * w));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      const Vec2 j = jitter();
      pos.push_back({static_cast<double>(c) + j.x,
                     static_cast<double>(r) + j.y});
    }
  std::vector<GraphEdge> edges;
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      for (std::int64_t dr = -1; dr <= 1; ++dr)
        for (std::int64_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const std::int64_t nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          const std::int64_t a = r * w + c, bnode = nr * w + nc;
          const Vec2 d{pos[static_cast<std::size_t>(bnode)].x -
                           pos[static_cast<std::size_t>(a)].x,
                       pos[static_cast<std::size_t>(bnode)].y -
                           pos[static_cast<std::size_t>(a)].y};
          edges.push_back({a, bnode, select(d, 1e-9)});
        }
  return PositionalGraph::build(std::move(pos), std::move(edges));
}

struct VerifyArgs {
  std::uint32_t seed = 7;
  std::int64_t trials = 3;
  bool inject_fault = false;
};

int cmd_verify(const VerifyArgs& args) {
  const float kGridTol = 1e-5f;
  const float kCnnTol = 1e-4f;
  std::mt19937 rng(args.seed);
  bool ok = true;
  const auto report = [&](const char* name, float dev, float tol,
                          bool extra_ok = true) {
    const bool pass = dev <= tol && extra_ok;
    ok = ok && pass;
    std::printf("%-18s max |delta| %.3g  tolerance %.0e  %s\n", name,
                static_cast<double>(dev), static_cast<double>(tol),
                pass ? "ok" : "FAILED");
  };

  // Grid equivalence over every padding/kernel/stride/dilation combination.
  {
    const std::int64_t h = 12, w = 12, in_ch = 3, out_ch = 4;
    const PositionalGraph g = build_grid(h, w);
    const SelectionAdjacency adj = normalize(build_adjacency(g));
    const std::vector<PaddingMode> pads = {
        PaddingMode::zero(), PaddingMode::constant({0.4f, -0.2f, 0.9f}),
        PaddingMode::replicate(), PaddingMode::reflect()};
    float worst = 0.0f;
    for (const PaddingMode& pad : pads)
      for (const std::int64_t ks : {3, 5, 7})
        for (const int stride : {1, 2})
          for (const int dilation : {1, 2})
            for (std::int64_t t = 0; t < args.trials; ++t) {
              const Kernel2D k = random_kernel(out_ch, in_ch, ks, rng);
              const Tensor img = random_tensor({in_ch, h, w}, rng, 1.0f);
              const Tensor got =
                  graph_conv(g, adj, k, stride, dilation, pad,
                             image_to_features(img), h, w, args.inject_fault);
              const Tensor want =
                  ref::conv2d_ref(img, k, stride, dilation, pad);
              worst = std::max(
                  worst, max_abs_diff(
                             features_to_image(got, want.dim(1), want.dim(2)),
                             want));
            }
    report("grid equivalence", worst, kGridTol);
  }

  // Jittered positions: selections, and therefore outputs, must not move.
  {
    const std::int64_t h = 10, w = 11;
    const PositionalGraph lattice = build_grid(h, w);
    const PositionalGraph jit = jittered_grid(h, w, rng);
    bool sels_equal = jit.edges().size() == lattice.edges().size();
    if (sels_equal)
      for (std::size_t i = 0; i < jit.edges().size(); ++i)
        sels_equal = sels_equal &&
                     jit.edges()[i].src == lattice.edges()[i].src &&
                     jit.edges()[i].dst == lattice.edges()[i].dst &&
                     jit.edges()[i].sel == lattice.edges()[i].sel;
    const SelectionAdjacency adj = normalize(build_adjacency(jit));
    float worst = sels_equal ? 0.0f : 1.0f;
    for (std::int64_t t = 0; t < args.trials; ++t) {
      const Kernel2D k = random_kernel(3, 2, 3, rng);
      const Tensor img = random_tensor({2, h, w}, rng, 1.0f);
      const Tensor got = graph_conv(jit, adj, k, 1, 1, PaddingMode::reflect(),
                                    image_to_features(img), h, w, false);
      const Tensor want =
          ref::conv2d_ref(img, k, 1, 1, PaddingMode::reflect());
      worst = std::max(worst, max_abs_diff(features_to_image(got, h, w), want));
    }
    report("jittered grid", worst, kGridTol, sels_equal);
  }

  // End-to-end CNN: conv/relu/maxpool blocks into a linear head.
  {
    ModelManifest m;
    m.input_channels = 3;
    m.normalize_mean = {0.5f};
    m.normalize_std = {0.25f};
    TensorMap tensors;
    const auto add_conv = [&](const std::string& name, std::int64_t in,
                              std::int64_t out, PaddingMode pad) {
      tensors[name + ".w"] =
          random_tensor({out, in, 3, 3}, rng,
                        1.0f / std::sqrt(static_cast<float>(in * 9)));
      tensors[name + ".b"] = random_tensor({out}, rng, 0.1f);
      LayerSpec l;
      l.type = "conv";
      l.weight = name + ".w";
      l.bias = name + ".b";
      l.padding = std::move(pad);
      m.layers.push_back(std::move(l));
      m.layers.push_back({});
      m.layers.back().type = "relu";
      m.layers.push_back({});
      m.layers.back().type = "maxpool";
      m.layers.back().kernel = 2;
    };
    add_conv("c1", 3, 8, PaddingMode::zero());
    add_conv("c2", 8, 12, PaddingMode::replicate());
    add_conv("c3", 12, 16, PaddingMode::zero());
    m.layers.push_back({});
    m.layers.back().type = "flatten";
    m.layers.back().order = "chw";
    tensors["head.w"] = random_tensor({10, 16 * 2 * 2}, rng, 0.125f);
    tensors["head.b"] = random_tensor({10}, rng, 0.1f);
    m.layers.push_back({});
    m.layers.back().type = "linear";
    m.layers.back().weight = "head.w";
    m.layers.back().bias = "head.b";

    const PositionalGraph g = build_grid(16, 16);
    const GraphRunner runner(m, tensors, g, 16, 16);
    const ref::RefNet net = make_ref_net(m, tensors);
    float worst = 0.0f;
    bool argmax_ok = true;
    const std::int64_t inputs = std::max<std::int64_t>(args.trials, 4);
    for (std::int64_t t = 0; t < inputs; ++t) {
      const Tensor img = random_tensor({3, 16, 16}, rng, 1.0f);
      const Tensor got = runner.run(image_to_features(img));
      const Tensor want = ref::run_ref(net, normalize_chw(m, img));
      worst = std::max(worst, max_abs_diff(got, want));
      std::int64_t ga = 0, wa = 0;
      for (std::int64_t i = 1; i < 10; ++i) {
        if (got(i) > got(ga)) ga = i;
        if (want(i) > want(wa)) wa = i;
      }
      argmax_ok = argmax_ok && ga == wa;
    }
    report("cnn end-to-end", worst, kCnnTol, argmax_ok);
  }

  std::printf("verification %s\n", ok ? "passed" : "FAILED");
  return ok ? 0 : 1;
}

struct AssetArgs {
  std::string kind;
  std::string out;
  std::string model;
  std::string input;
  std::string mask;
  std::string obj;
  std::int64_t h = 8, w = 8;
  std::int64_t face = 2;
  std::int64_t tex = 0;
  std::int64_t superpixels = 64;
  double compactness = 10.0;
  std::int64_t knn = 4;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Mask mask_from_image(const ImageBuffer& img) {
  Mask m = Mask::filled(img.height, img.width, false);
  for (std::int64_t r = 0; r < img.height; ++r)
    for (std::int64_t c = 0; c < img.width; ++c)
      m.set(r, c, img.data(0, r, c) > 0.5f);
  return m;
}

int cmd_graph(const AssetArgs& a) {
  PositionalGraph g;
  if (a.kind == "grid") {
    g = build_grid(a.h, a.w);
  } else if (a.kind == "panorama") {
    g = build_panorama(a.h, a.w);
  } else if (a.kind == "cubemap") {
    g = build_cubemap(a.face);
  } else if (a.kind == "mask") {
    if (a.mask.empty()) throw CLI::ValidationError("--mask is required");
    g = build_masked_graph(mask_from_image(read_image(a.mask)));
  } else if (a.kind == "superpixel") {
    if (a.input.empty()) throw CLI::ValidationError("--input is required");
    const ImageBuffer img = read_image(a.input);
    const SuperpixelSet sp = slic(img.data, a.superpixels, a.compactness);
    g = build_superpixel_graph(sp, a.knn);
  } else if (a.kind == "texture") {
    if (a.obj.empty() || a.tex < 1)
      throw CLI::ValidationError("--obj and --tex are required");
    g = build_texture_graph(parse_obj(read_text_file(a.obj)), a.tex);
  } else {
    throw CLI::ValidationError("unknown --kind: " + a.kind);
  }
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw ParseError("cannot write: " + a.out);
  out << dump_graph(g);
  std::printf("%s: %lld nodes, %lld edges -> %s\n", a.kind.c_str(),
              static_cast<long long>(g.node_count()),
              static_cast<long long>(g.edge_count()), a.out.c_str());
  return 0;
}

// Per-node results as text: one line per node, channels space-separated.
void write_values(const Tensor& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write: " + path);
  if (t.rank() == 1) {
    for (std::int64_t i = 0; i < t.dim(0); ++i)
      out << t(i) << "\n";
    return;
  }
  for (std::int64_t i = 0; i < t.dim(0); ++i) {
    for (std::int64_t c = 0; c < t.dim(1); ++c)
      out << (c ? " " : "") << t(i, c);
    out << "\n";
  }
}

int cmd_run(const AssetArgs& a) {
  const auto [manifest, tensors] = load_model(a.model);
  const ImageBuffer img = read_image(a.input);
  if (manifest.input_channels != img.channels)
    throw ParseError("model expects " +
                     std::to_string(manifest.input_channels) +
                     " channels, input has " + std::to_string(img.channels));

  PositionalGraph g;
  SuperpixelSet sp;
  if (a.kind == "grid") {
    g = build_grid(img.height, img.width);
  } else if (a.kind == "panorama") {
    g = build_panorama(img.height, img.width);
  } else if (a.kind == "cubemap") {
    if (img.width != 6 * img.height)
      throw ParseError("cubemap input must be a 6F x F atlas strip");
    if (a.face > 0 && a.face != img.height)
      throw ParseError("--face does not match the input atlas");
    g = build_cubemap(img.height);
  } else if (a.kind == "mask") {
    if (a.mask.empty()) throw CLI::ValidationError("--mask is required");
    const ImageBuffer mimg = read_image(a.mask);
    if (mimg.height != img.height || mimg.width != img.width)
      throw ParseError("mask dimensions do not match the input");
    g = build_masked_graph(mask_from_image(mimg));
  } else if (a.kind == "superpixel") {
    sp = slic(img.data, a.superpixels, a.compactness);
    g = build_superpixel_graph(sp, a.knn);
  } else if (a.kind == "texture") {
    if (a.obj.empty()) throw CLI::ValidationError("--obj is required");
    if (img.height != img.width)
      throw ParseError("texture input must be square");
    g = build_texture_graph(parse_obj(read_text_file(a.obj)), img.height);
  } else {
    throw CLI::ValidationError("unknown --kind: " + a.kind);
  }

  // Node features: superpixels carry their mean color, every other kind
  // samples the image at the node's pixel position.
  Tensor feats;
  if (a.kind == "superpixel") {
    feats = sp.mean_features;
  } else {
    feats = Tensor::zeros({g.node_count(), img.channels});
    for (std::int64_t i = 0; i < g.node_count(); ++i) {
      const std::int64_t x = std::llround(g.position(i).x);
      const std::int64_t y = std::llround(g.position(i).y);
      for (std::int64_t c = 0; c < img.channels; ++c)
        feats(i, c) = img.data(c, y, x);
    }
  }

  const GraphRunner runner(manifest, tensors, g, img.height, img.width);
  const Tensor out = runner.run(feats);

  if (runner.output_flat()) {
    write_values(out, a.out);
    std::printf("wrote %lld values -> %s\n",
                static_cast<long long>(out.numel()), a.out.c_str());
    return 0;
  }
  const std::int64_t n = out.dim(0), ch = out.dim(1);
  const bool imageable = ch == 1 || ch == 3;
  const PositionalGraph& og = runner.output_graph();
  ImageBuffer result;
  result.channels = ch;
  if (imageable && a.kind == "superpixel" && n == sp.count()) {
    result.height = img.height;
    result.width = img.width;
    result.data = Tensor::zeros({ch, img.height, img.width});
    for (std::int64_t r = 0; r < img.height; ++r)
      for (std::int64_t c = 0; c < img.width; ++c) {
        const std::int64_t label =
            sp.labels[static_cast<std::size_t>(r * img.width + c)];
        for (std::int64_t k = 0; k < ch; ++k)
          result.data(k, r, c) = out(label, k);
      }
  } else if (imageable && a.kind != "superpixel" &&
             runner.output_rows() == img.height &&
             runner.output_cols() == img.width) {
    // Same raster as the input: paint by node position, holes stay black.
    result.height = img.height;
    result.width = img.width;
    result.data = Tensor::zeros({ch, img.height, img.width});
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t x = std::llround(og.position(i).x);
      const std::int64_t y = std::llround(og.position(i).y);
      for (std::int64_t k = 0; k < ch; ++k) result.data(k, y, x) = out(i, k);
    }
  } else if (imageable && a.kind != "superpixel" &&
             n == runner.output_rows() * runner.output_cols()) {
    // Coarsened dense raster: node ids are row-major cells.
    result.height = runner.output_rows();
    result.width = runner.output_cols();
    result.data = features_to_image(out, result.height, result.width);
  } else {
    write_values(out, a.out);
    std::printf("wrote %lld x %lld values -> %s\n", static_cast<long long>(n),
                static_cast<long long>(ch), a.out.c_str());
    return 0;
  }
  write_image(result, a.out);
  std::printf("wrote %lld x %lld image -> %s\n",
              static_cast<long long>(result.width),
              static_cast<long long>(result.height), a.out.c_str());
  return 0;
}

struct BenchArgs {
  std::string sizes = "16,32,64";
  std::string out;
  std::uint32_t seed = 7;
  int repeats = 3;
};

int cmd_bench(const BenchArgs& args) {
  std::vector<std::int64_t> sizes;
  std::stringstream ss(args.sizes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::int64_t v = std::strtoll(item.c_str(), nullptr, 10);
    if (v < 2) throw CLI::ValidationError("--sizes entries must be >= 2");
    sizes.push_back(v);
  }
  if (sizes.empty()) throw CLI::ValidationError("--sizes is empty");

  std::ofstream csv(args.out, std::ios::binary);
  if (!csv) throw ParseError("cannot write: " + args.out);
  csv << "size,nodes,graph_ms_mean,graph_ms_var,adj_ms_mean,adj_ms_var,"
         "conv_ms_mean,conv_ms_var\n";
  std::mt19937 rng(args.seed);
  const auto ms_since = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  };
  const auto stats = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return std::pair<double, double>{mean, var};
  };

  for (const std::int64_t s : sizes) {
    std::vector<double> graph_ms, adj_ms, conv_ms;
    const Kernel2D k = random_kernel(8, 8, 3, rng);
    for (int r = 0; r < args.repeats; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      const PositionalGraph g = build_grid(s, s);
      graph_ms.push_back(ms_since(t0));

      t0 = std::chrono::steady_clock::now();
      const SelectionAdjacency adj = normalize(build_adjacency(g));
      adj_ms.push_back(ms_since(t0));

      const Tensor x = random_tensor({s * s, 8}, rng, 1.0f);
      const SelectionConvLayer layer =
          transfer_conv(k, 1, 1, PaddingMode::zero());
      const ConvPlan plan = make_conv_plan(layer, adj);
      t0 = std::chrono::steady_clock::now();
      const Tensor y = forward_conv(plan, layer, x);
      conv_ms.push_back(ms_since(t0));
      if (y.numel() == 0) throw std::runtime_error("empty conv output");
    }
    const auto [gm, gv] = stats(graph_ms);
    const auto [am, av] = stats(adj_ms);
    const auto [cm, cv] = stats(conv_ms);
    csv << s << "," << s * s << "," << gm << "," << gv << "," << am << ","
        << av << "," << cm << "," << cv << "\n";
    std::printf("size %-6lld graph %.3f ms  adjacency %.3f ms  conv %.3f ms\n",
                static_cast<long long>(s), gm, am, cm);
  }
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selection-based graph convolution engine"};
  app.require_subcommand(1);

  VerifyArgs vargs;
  CLI::App* verify =
      app.add_subcommand("verify", "check the engine against the dense oracle");
  verify->add_option("--seed", vargs.seed, "RNG seed");
  verify->add_option("--trials", vargs.trials, "cases per configuration")
      ->check(CLI::PositiveNumber);
  verify->add_flag("--inject-fault", vargs.inject_fault,
                   "corrupt one weight mapping (negative-control fixture)");

  AssetArgs gargs;
  CLI::App* graph = app.add_subcommand("graph", "build a graph and dump it");
  graph->set_help_flag("--help", "print help");  // frees -h for --h below
  graph->add_option("--kind", gargs.kind,
                    "grid|panorama|cubemap|superpixel|mask|texture")
      ->required();
  graph->add_option("--out", gargs.out, "output path")->required();
  graph->add_option("--h", gargs.h, "grid/panorama rows");
  graph->add_option("--w", gargs.w, "grid/panorama columns");
  graph->add_option("--face", gargs.face, "cubemap face size");
  graph->add_option("--tex", gargs.tex, "texture raster size");
  graph->add_option("--obj", gargs.obj, "OBJ mesh path");
  graph->add_option("--input", gargs.input, "input image (superpixel)");
  graph->add_option("--mask", gargs.mask, "mask image (mask kind)");
  graph->add_option("--superpixels", gargs.superpixels, "superpixel count");
  graph->add_option("--compactness", gargs.compactness, "SLIC compactness");
  graph->add_option("--knn", gargs.knn, "superpixel neighbor candidates");

  AssetArgs rargs;
  CLI::App* run = app.add_subcommand("run", "execute a model on an asset");
  run->add_option("--model", rargs.model, "model directory")->required();
  run->add_option("--kind", rargs.kind,
                  "grid|panorama|cubemap|superpixel|mask|texture")
      ->required();
  run->add_option("--input", rargs.input, "input image (P5/P6)")->required();
  run->add_option("--mask", rargs.mask, "mask image");
  run->add_option("--obj", rargs.obj, "OBJ mesh path");
  run->add_option("--face", rargs.face, "expected cubemap face size");
  run->add_option("--superpixels", rargs.superpixels, "superpixel count");
  run->add_option("--compactness", rargs.compactness, "SLIC compactness");
  run->add_option("--knn", rargs.knn, "superpixel neighbor candidates");
  run->add_option("--out", rargs.out, "output path")->required();
  rargs.face = 0;

  BenchArgs bargs;
  CLI::App* bench = app.add_subcommand("bench", "time the core operations");
  bench->add_option("--sizes", bargs.sizes, "comma-separated grid sizes");
  bench->add_option("--out", bargs.out, "CSV output path")->required();
  bench->add_option("--seed", bargs.seed, "RNG seed");
  bench->add_option("--repeats", bargs.repeats, "runs per size")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*verify) return cmd_verify(vargs);
    if (*graph) return cmd_graph(gargs);
    if (*run) return cmd_run(rargs);
    return cmd_bench(bargs);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "selconv: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "selconv: %s\n", e.what());
    return 3;
  }
}
