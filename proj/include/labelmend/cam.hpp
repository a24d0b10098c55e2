#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "labelmend/mat.hpp"
#include "labelmend/tensor.hpp"

namespace labelmend {

// Linear classifier weights over feature channels, one row per foreground
// class (class index 1..num_classes-1 maps to row index-1; background has
// no row).
struct ClassifierWeights {
  Mat<float> w;  // [num_foreground, K]

  std::uint32_t num_classes() const {
    return static_cast<std::uint32_t>(w.rows) + 1;
  }
};

// Per-class activation planes, min-max normalized to [0,1]. Planes for
// classes outside `relevant` are identically zero, as is plane 0.
struct ScoreMapSet {
  std::uint32_t num_classes = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> planes;          // [num_classes, H, W]
  std::vector<std::uint32_t> relevant;  // sorted foreground class ids
  std::vector<std::uint32_t> degenerate;  // relevant classes whose plane collapsed

  const float* plane(std::uint32_t c) const {
    return planes.data() + static_cast<std::size_t>(c) * height * width;
  }
  float* plane(std::uint32_t c) {
    return planes.data() + static_cast<std::size_t>(c) * height * width;
  }
};

// Weighted channel sums for the relevant classes, negatives clamped to
// zero, then per-plane min-max rescale. A plane that is constant after
// clamping is zeroed and reported in `degenerate`.
ScoreMapSet compute_cam(const TensorF32& features,  // [K, H, W]
                        const ClassifierWeights& weights,
                        const std::vector<std::uint32_t>& relevant);

// Raw weighted sums before clamping/normalization; exposed for tests and
// diagnostics.
std::vector<float> cam_raw_plane(const TensorF32& features,
                                 const ClassifierWeights& weights,
                                 std::uint32_t cls);

// Per pixel: argmax over relevant planes, background when the best score
// falls below `background_threshold`, ties to the lowest class index.
// When `foreground_threshold` is set, pixels whose best score lands in
// [background_threshold, foreground_threshold) become unlabeled — the
// confidence-band seeding used for evaluation baselines.
LabelMap assign_labels(const ScoreMapSet& scores, float background_threshold,
                       std::optional<float> foreground_threshold = std::nullopt);

// ScoreMapSet <-> [C,H,W] tensor for on-disk exchange.
TensorF32 scores_to_tensor(const ScoreMapSet& s);
ScoreMapSet scores_from_tensor(const TensorF32& t,
                               std::vector<std::uint32_t> relevant);

namespace serial {
// Reference form of the activation kernel, no OpenMP.
ScoreMapSet compute_cam(const TensorF32& features, const ClassifierWeights& weights,
                        const std::vector<std::uint32_t>& relevant);
}  // namespace serial

}  // namespace labelmend
