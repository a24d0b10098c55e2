#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "labelmend/cam.hpp"
#include "labelmend/tensor.hpp"

namespace labelmend {

enum class ShapeKind { kEllipse, kRect, kBlob };

struct SceneShape {
  ShapeKind kind = ShapeKind::kEllipse;
  std::uint32_t cls = 1;  // foreground class index
  float color[3] = {0.8f, 0.2f, 0.2f};
  double cx = 0, cy = 0, rx = 10, ry = 10;
  double phase = 0;  // blob boundary wobble offset
};

struct NoiseSpec {
  int dilate_px = 0;
  int erode_px = 0;
  int shift_px = 0;          // along +x
  double flip_fraction = 0;  // fraction of 4x4 tiles whose mask toggles
};

struct FidelitySpec {
  double correct = 0.9;    // probability mass on the true class when the
  double incorrect = 0.4;  // initial label is right / wrong
};

struct SceneSpec {
  std::uint32_t height = 128;
  std::uint32_t width = 128;
  std::uint32_t num_classes = 4;  // background + foregrounds
  std::vector<SceneShape> shapes;
  NoiseSpec noise;
  FidelitySpec fidelity;
  float background_color[3] = {0.12f, 0.12f, 0.14f};
  float color_jitter = 0.01f;
  std::uint64_t seed = 1;
};

struct Scene {
  ImageRGB image;
  LabelMap gt;
  ScoreMapSet scores;  // blurred, normalized activations of corrupted masks
  TensorF32 probs;     // synthetic clean-model output [C,H,W]
};

// Fully determined by the scene description (including its seed):
// rasterized ground truth, an image with mild seeded jitter, score planes
// from morphologically corrupted masks, and probability maps whose mass
// on the true class depends on whether the corrupted label is right there.
Scene generate(const SceneSpec& spec);

double corruption_rate(const LabelMap& init, const LabelMap& gt);

// Suite description: N scenes with deterministically placed shapes.
struct SuiteSpec {
  std::uint32_t images = 20;
  std::uint64_t seed = 7;
  std::uint32_t height = 128, width = 128;
  std::uint32_t num_classes = 4;
  std::uint32_t shapes_per_image = 3;
  double min_radius = 14, max_radius = 26;
  NoiseSpec noise;
  FidelitySpec fidelity;
};

std::vector<SceneSpec> make_suite(const SuiteSpec& suite);

SuiteSpec parse_suite_file(const std::filesystem::path& path);

// Writes <id>.ppm, <id>_scores.lmt, <id>_probs.lmt, <id>_gt.pgm per scene
// plus a manifest.tsv in the layout the correction pipeline reads.
// Returns the manifest path.
std::filesystem::path write_suite(const SuiteSpec& suite,
                                  const std::filesystem::path& outdir);

}  // namespace labelmend
