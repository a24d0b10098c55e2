#include "labelmend/cam.hpp"

#include <algorithm>
#include <cmath>

#include "labelmend/eqcore.hpp"
#include "labelmend/error.hpp"

namespace labelmend {

namespace {

void check_inputs(const TensorF32& features, const ClassifierWeights& weights,
                  const std::vector<std::uint32_t>& relevant) {
  if (features.dims.size() != 3)
    raise(Errc::shape_mismatch, "features must be [K,H,W]");
  if (features.dim(0) != weights.w.cols)
    raise(Errc::shape_mismatch, "feature channels do not match weight columns");
  if (relevant.empty()) raise(Errc::empty_relevant_set, "relevant class set is empty");
  for (auto c : relevant)
    if (c == 0 || c >= weights.num_classes())
      raise(Errc::index_out_of_range,
            "relevant class " + std::to_string(c) + " has no weight row");
}

ScoreMapSet compute_cam_impl(const TensorF32& features,
                             const ClassifierWeights& weights,
                             const std::vector<std::uint32_t>& relevant,
                             bool parallel) {
  check_inputs(features, weights, relevant);
  const std::uint32_t k = features.dim(0);
  const std::uint32_t h = features.dim(1);
  const std::uint32_t w = features.dim(2);
  const std::size_t plane_px = static_cast<std::size_t>(h) * w;

  ScoreMapSet out;
  out.num_classes = weights.num_classes();
  out.height = h;
  out.width = w;
  out.relevant = relevant;
  std::sort(out.relevant.begin(), out.relevant.end());
  out.relevant.erase(std::unique(out.relevant.begin(), out.relevant.end()),
                     out.relevant.end());
  out.planes.assign(static_cast<std::size_t>(out.num_classes) * plane_px, 0.f);

  for (std::uint32_t c : out.relevant) {
    float* plane = out.plane(c);
    activation_plane<float>(features.data.data(), k, plane_px,
                            weights.w.row(c - 1), plane, parallel);
    if (!clamp_and_normalize(plane, plane_px)) out.degenerate.push_back(c);
  }
  return out;
}

}  // namespace

ScoreMapSet compute_cam(const TensorF32& features, const ClassifierWeights& weights,
                        const std::vector<std::uint32_t>& relevant) {
  return compute_cam_impl(features, weights, relevant, true);
}

namespace serial {
ScoreMapSet compute_cam(const TensorF32& features, const ClassifierWeights& weights,
                        const std::vector<std::uint32_t>& relevant) {
  return compute_cam_impl(features, weights, relevant, false);
}
}  // namespace serial

std::vector<float> cam_raw_plane(const TensorF32& features,
                                 const ClassifierWeights& weights,
                                 std::uint32_t cls) {
  check_inputs(features, weights, {cls});
  const std::size_t plane_px =
      static_cast<std::size_t>(features.dim(1)) * features.dim(2);
  std::vector<float> plane(plane_px, 0.f);
  activation_plane<float>(features.data.data(), features.dim(0), plane_px,
                          weights.w.row(cls - 1), plane.data(), false);
  return plane;
}

LabelMap assign_labels(const ScoreMapSet& scores, float background_threshold,
                       std::optional<float> foreground_threshold) {
  if (background_threshold <= 0.f || background_threshold >= 1.f)
    raise(Errc::config_error, "background threshold must be in (0,1)");
  const std::size_t plane_px = static_cast<std::size_t>(scores.height) * scores.width;
  std::vector<const float*> planes;
  planes.reserve(scores.relevant.size());
  for (std::uint32_t c : scores.relevant) planes.push_back(scores.plane(c));

  LabelMap out(scores.height, scores.width, scores.num_classes);
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < static_cast<long long>(plane_px); ++p)
    out.labels[p] = assign_pixel<float>(planes, scores.relevant,
                                        static_cast<std::size_t>(p),
                                        background_threshold, foreground_threshold);
  return out;
}

TensorF32 scores_to_tensor(const ScoreMapSet& s) {
  return TensorF32({s.num_classes, s.height, s.width}, s.planes);
}

ScoreMapSet scores_from_tensor(const TensorF32& t,
                               std::vector<std::uint32_t> relevant) {
  if (t.dims.size() != 3) raise(Errc::shape_mismatch, "score tensor must be [C,H,W]");
  ScoreMapSet s;
  s.num_classes = t.dim(0);
  s.height = t.dim(1);
  s.width = t.dim(2);
  s.planes = t.data;
  std::sort(relevant.begin(), relevant.end());
  relevant.erase(std::unique(relevant.begin(), relevant.end()), relevant.end());
  for (auto c : relevant)
    if (c == 0 || c >= s.num_classes)
      raise(Errc::index_out_of_range, "relevant class out of range");
  s.relevant = std::move(relevant);
  return s;
}

}  // namespace labelmend
