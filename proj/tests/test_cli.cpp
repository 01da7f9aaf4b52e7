// Drives the installed CLI binary end to end: graph dumps, model runs on
// every image-backed domain, bench output, and the exit-code contract.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "selconv/cubemap.hpp"
#include "selconv/graph.hpp"
#include "selconv/grid_builders.hpp"
#include "selconv/mesh.hpp"
#include "selconv/model_io.hpp"
#include "selconv/slic.hpp"

namespace fs = std::filesystem;
using namespace selconv;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(SELCONV_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("selconv_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ImageBuffer random_image(std::int64_t h, std::int64_t w, std::int64_t ch,
                         std::uint32_t seed) {
  ImageBuffer img;
  img.height = h;
  img.width = w;
  img.channels = ch;
  img.data = Tensor::zeros({ch, h, w});
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  for (float& v : img.data.storage())
    v = static_cast<float>(byte(rng)) / 255.0f;
  return img;
}

// Depthwise model: out channel o reads only in channel o with the given 3x3
// stencil (identity passthrough or box blur).
void save_stencil_model(const fs::path& dir, std::int64_t channels,
                        bool blur) {
  Tensor w = Tensor::zeros({channels, channels, 3, 3});
  for (std::int64_t o = 0; o < channels; ++o) {
    if (blur) {
      for (std::int64_t ky = 0; ky < 3; ++ky)
        for (std::int64_t kx = 0; kx < 3; ++kx)
          w(o, o, ky, kx) = 1.0f / 9.0f;
    } else {
      w(o, o, 1, 1) = 1.0f;
    }
  }
  ModelManifest m;
  m.input_channels = channels;
  LayerSpec conv;
  conv.type = "conv";
  conv.weight = "stencil.weight";
  conv.padding = PaddingMode::zero();
  m.layers.push_back(conv);
  TensorMap tensors;
  tensors["stencil.weight"] = std::move(w);
  save_model(m, tensors, dir.string());
}

}  // namespace

TEST(CliGraph, GridDumpMatchesBuilder) {
  const fs::path dir = fresh_dir("grid");
  const fs::path out = dir / "g.txt";
  ASSERT_EQ(run_cli("graph --kind grid --h 3 --w 3 --out " + out.string()), 0);
  const PositionalGraph g = parse_graph(read_text(out));
  EXPECT_EQ(g.node_count(), 9);
  EXPECT_EQ(g.edge_count(), 49);
  EXPECT_EQ(read_text(out), dump_graph(build_grid(3, 3)));
}

TEST(CliGraph, CubemapFaceTwoHasTwentyFourNodes) {
  const fs::path dir = fresh_dir("cube");
  const fs::path out = dir / "g.txt";
  ASSERT_EQ(run_cli("graph --kind cubemap --face 2 --out " + out.string()), 0);
  const PositionalGraph g = parse_graph(read_text(out));
  EXPECT_EQ(g.node_count(), 24);
  EXPECT_EQ(read_text(out), dump_graph(build_cubemap(2)));
}

TEST(CliGraph, TextureDumpPassesTheInvariantChecker) {
  const fs::path dir = fresh_dir("tex");
  const fs::path out = dir / "g.txt";
  const std::string obj = std::string(SELCONV_ASSET_DIR) + "/twoquad.obj";
  ASSERT_EQ(
      run_cli("graph --kind texture --obj " + obj + " --tex 8 --out " +
              out.string()),
      0);
  // parse_graph re-runs the full-edge-list invariants on the dump.
  const PositionalGraph g = parse_graph(read_text(out));
  EXPECT_EQ(g.node_count(), 18);
}

TEST(CliRun, IdentityModelReproducesTheImage) {
  const fs::path dir = fresh_dir("identity");
  fs::create_directories(dir / "model");
  save_stencil_model(dir / "model", 3, false);
  const ImageBuffer img = random_image(6, 7, 3, 99);
  write_image(img, (dir / "in.ppm").string());
  ASSERT_EQ(run_cli("run --model " + (dir / "model").string() +
                    " --kind grid --input " + (dir / "in.ppm").string() +
                    " --out " + (dir / "out.ppm").string()),
            0);
  EXPECT_EQ(read_text(dir / "out.ppm"), read_text(dir / "in.ppm"));
}

TEST(CliRun, SuperpixelsPaintClusterMeansOntoMemberPixels) {
  const std::int64_t h = 8, w = 9, k = 6;
  const fs::path dir = fresh_dir("sp");
  fs::create_directories(dir / "model");
  save_stencil_model(dir / "model", 3, false);
  const ImageBuffer img = random_image(h, w, 3, 17);
  write_image(img, (dir / "in.ppm").string());
  ASSERT_EQ(run_cli("run --model " + (dir / "model").string() +
                    " --kind superpixel --superpixels " + std::to_string(k) +
                    " --knn 8 --input " + (dir / "in.ppm").string() +
                    " --out " + (dir / "out.ppm").string()),
            0);
  // The identity model leaves cluster means untouched, so the output is the
  // segmentation painted back onto the pixels.
  const ImageBuffer back = read_image((dir / "in.ppm").string());
  const SuperpixelSet sp = slic(back.data, k, 10.0);
  ImageBuffer want;
  want.height = h;
  want.width = w;
  want.channels = 3;
  want.data = Tensor::zeros({3, h, w});
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      for (std::int64_t ch = 0; ch < 3; ++ch)
        want.data(ch, r, c) = sp.mean_features(
            sp.labels[static_cast<std::size_t>(r * w + c)], ch);
  write_image(want, (dir / "want.ppm").string());
  EXPECT_EQ(read_text(dir / "out.ppm"), read_text(dir / "want.ppm"));
}

TEST(CliRun, CubemapBlurKeepsFaceInteriorsAndChangesSeams) {
  const std::int64_t f = 4;
  const fs::path dir = fresh_dir("cubeblur");
  fs::create_directories(dir / "model");
  save_stencil_model(dir / "model", 3, true);
  const ImageBuffer img = random_image(f, 6 * f, 3, 23);
  write_image(img, (dir / "in.ppm").string());
  const std::string base = "run --model " + (dir / "model").string() +
                           " --input " + (dir / "in.ppm").string();
  ASSERT_EQ(run_cli(base + " --kind cubemap --out " +
                    (dir / "cube.ppm").string()),
            0);
  ASSERT_EQ(
      run_cli(base + " --kind grid --out " + (dir / "flat.ppm").string()), 0);
  const ImageBuffer cube = read_image((dir / "cube.ppm").string());
  const ImageBuffer flat = read_image((dir / "flat.ppm").string());

  // Interior pixels of every face see the same 3x3 neighborhood both ways.
  for (std::int64_t face = 0; face < 6; ++face)
    for (std::int64_t r = 1; r < f - 1; ++r)
      for (std::int64_t c = 1; c < f - 1; ++c)
        for (std::int64_t ch = 0; ch < 3; ++ch)
          EXPECT_EQ(cube.data(ch, r, face * f + c),
                    flat.data(ch, r, face * f + c))
              << "face " << face << " r " << r << " c " << c;

  // Seam pixels pull from folded faces instead of the flat atlas.
  std::int64_t differing = 0;
  for (std::int64_t face = 0; face < 6; ++face)
    for (std::int64_t r = 0; r < f; ++r)
      for (std::int64_t ch = 0; ch < 3; ++ch) {
        if (cube.data(ch, r, face * f) != flat.data(ch, r, face * f))
          ++differing;
        if (cube.data(ch, r, face * f + f - 1) !=
            flat.data(ch, r, face * f + f - 1))
          ++differing;
      }
  EXPECT_GT(differing, 0);
}

TEST(CliRun, PanoramaBlurMatchesTheCylindricalOracle) {
  const std::int64_t h = 5, w = 6;
  const fs::path dir = fresh_dir("pano");
  fs::create_directories(dir / "model");
  save_stencil_model(dir / "model", 3, true);
  const ImageBuffer img = random_image(h, w, 3, 31);
  write_image(img, (dir / "in.ppm").string());
  ASSERT_EQ(run_cli("run --model " + (dir / "model").string() +
                    " --kind panorama --input " + (dir / "in.ppm").string() +
                    " --out " + (dir / "out.ppm").string()),
            0);
  const ImageBuffer got = read_image((dir / "out.ppm").string());
  // Horizontal wrap, vertical zero padding, box blur.
  for (std::int64_t ch = 0; ch < 3; ++ch)
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c) {
        float acc = 0.0f;
        for (std::int64_t dr = -1; dr <= 1; ++dr)
          for (std::int64_t dc = -1; dc <= 1; ++dc) {
            const std::int64_t rr = r + dr;
            if (rr < 0 || rr >= h) continue;
            acc += img.data(ch, rr, (c + dc + w) % w) / 9.0f;
          }
        EXPECT_NEAR(got.data(ch, r, c), acc, 0.5f / 255.0f + 1e-5f)
            << "ch " << ch << " r " << r << " c " << c;
      }
}

TEST(CliBench, WritesTheCsvSchema) {
  const fs::path dir = fresh_dir("bench");
  const fs::path out = dir / "times.csv";
  ASSERT_EQ(run_cli("bench --sizes 8,12 --out " + out.string()), 0);
  std::istringstream csv(read_text(out));
  std::string line;
  ASSERT_TRUE(std::getline(csv, line));
  EXPECT_EQ(line,
            "size,nodes,graph_ms_mean,graph_ms_var,adj_ms_mean,adj_ms_var,"
            "conv_ms_mean,conv_ms_var");
  std::int64_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(read_text(out).substr(read_text(out).find('\n') + 1).substr(0, 2),
            "8,");
}

TEST(CliExitCodes, MatchTheContract) {
  const fs::path dir = fresh_dir("codes");
  EXPECT_EQ(run_cli("verify --seed 1 --trials 1"), 0);
  EXPECT_EQ(run_cli("verify --seed 1 --trials 1 --inject-fault"), 1);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("graph --kind nosuch --out " + (dir / "g").string()), 2);
  EXPECT_EQ(run_cli("graph --bogus-flag"), 2);
  EXPECT_EQ(run_cli("graph --kind mask --mask " + (dir / "absent.pgm").string() +
                    " --out " + (dir / "g").string()),
            3);
  std::ofstream(dir / "bad.obj") << "f 1/1 2/2\n";
  EXPECT_EQ(run_cli("graph --kind texture --obj " + (dir / "bad.obj").string() +
                    " --tex 4 --out " + (dir / "g").string()),
            3);
}
