#pragma once

// Scalar-generic cores for the activation, similarity, and edge-filter
// math. Production code instantiates them with float; the test suites
// re-run them in double where tighter tolerances apply.

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace labelmend {

// Weighted sum over feature channels for one class plane; accumulation is
// always double regardless of the storage type.
template <typename T>
void activation_plane(const T* features, std::size_t channels, std::size_t plane_px,
                      const T* weight_row, T* out, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
  for (long long p = 0; p < static_cast<long long>(plane_px); ++p) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch)
      acc += static_cast<double>(weight_row[ch]) * features[ch * plane_px + p];
    out[p] = static_cast<T>(acc);
  }
}

// Clamp negatives to zero, then min-max rescale to [0,1]. Returns false
// when the plane is constant; the plane is zeroed in that case.
template <typename T>
bool clamp_and_normalize(T* plane, std::size_t n) {
  T lo = plane[0] < T(0) ? T(0) : plane[0];
  T hi = lo;
  for (std::size_t i = 0; i < n; ++i) {
    if (plane[i] < T(0)) plane[i] = T(0);
    lo = plane[i] < lo ? plane[i] : lo;
    hi = plane[i] > hi ? plane[i] : hi;
  }
  if (!(hi > lo)) {
    for (std::size_t i = 0; i < n; ++i) plane[i] = T(0);
    return false;
  }
  const T inv = T(1) / (hi - lo);
  for (std::size_t i = 0; i < n; ++i) plane[i] = (plane[i] - lo) * inv;
  return true;
}

// Argmax over the given class planes with a background threshold and an
// optional unlabeled band. Ties go to the lowest class index.
template <typename T>
std::uint8_t assign_pixel(const std::vector<const T*>& planes,
                          const std::vector<std::uint32_t>& classes, std::size_t px,
                          T bg_threshold, std::optional<T> fg_threshold) {
  T best = T(-1);
  std::uint32_t best_c = 0;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const T v = planes[i][px];
    if (v > best) {
      best = v;
      best_c = classes[i];
    }
  }
  if (best < bg_threshold) return 0;
  if (fg_threshold && best < *fg_threshold) return 255;
  return static_cast<std::uint8_t>(best_c);
}

// Adjacency-gated exponential kernel on Euclidean feature distance; h is
// the feature dimension.
template <typename T>
T semantic_weight(const T* vi, const T* vj, std::size_t h) {
  double sq = 0.0;
  for (std::size_t d = 0; d < h; ++d) {
    const double diff = static_cast<double>(vi[d]) - static_cast<double>(vj[d]);
    sq += diff * diff;
  }
  return static_cast<T>(std::exp(-std::sqrt(sq) / (2.0 * static_cast<double>(h))));
}

// mean minus population standard deviation over the adjacent-pair weights,
// each unordered pair counted once; non-adjacent (structural zero) entries
// never enter the statistics.
template <typename T>
double edge_filter_threshold(const std::vector<T>& weights) {
  if (weights.empty()) return 0.0;
  double mean = 0.0;
  for (T w : weights) mean += static_cast<double>(w);
  mean /= static_cast<double>(weights.size());
  double var = 0.0;
  for (T w : weights) {
    const double d = static_cast<double>(w) - mean;
    var += d * d;
  }
  var /= static_cast<double>(weights.size());
  return mean - std::sqrt(var);
}

// Directed keep rule: an edge survives from i's side unless its weight is
// below the threshold AND below i's strongest incident weight. The
// undirected result is the OR (default) or AND of the two directions.
template <typename T>
std::vector<std::uint8_t> filter_edges(
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
    const std::vector<T>& weights, std::uint32_t n, bool and_mode,
    double* gamma_out) {
  const double gamma = edge_filter_threshold(weights);
  if (gamma_out) *gamma_out = gamma;
  std::vector<T> max_w(n, T(0));
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    max_w[i] = weights[e] > max_w[i] ? weights[e] : max_w[i];
    max_w[j] = weights[e] > max_w[j] ? weights[e] : max_w[j];
  }
  std::vector<std::uint8_t> keep(pairs.size(), 0);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    const double w = static_cast<double>(weights[e]);
    const bool drop_from_i = w < gamma && weights[e] < max_w[i];
    const bool drop_from_j = w < gamma && weights[e] < max_w[j];
    keep[e] = and_mode ? (!drop_from_i && !drop_from_j) : (!drop_from_i || !drop_from_j);
  }
  return keep;
}

}  // namespace labelmend
