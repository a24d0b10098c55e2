#pragma once

// Brute-force reference evaluators used only by tests. Everything here is
// written as plain dense loops, independent of the library's kernels, so
// the two sides of each comparison share no implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "labelmend/gat.hpp"
#include "labelmend/graph.hpp"
#include "labelmend/mat.hpp"

namespace oracle {

// ---- activation maps ----------------------------------------------------

template <typename T>
struct DenseCam {
  std::vector<std::vector<T>> planes;  // indexed by class id, [H*W]
  std::vector<std::uint8_t> labels;
};

// Direct per-pixel evaluation: weighted channel sum, clamp, min-max
// rescale, then argmax with a background threshold.
template <typename T>
DenseCam<T> dense_cam(const std::vector<T>& features, std::size_t channels,
                      std::size_t h, std::size_t w,
                      const std::vector<std::vector<T>>& weight_rows,  // class-1 -> row
                      const std::vector<std::uint32_t>& relevant, T bg_threshold) {
  const std::size_t hw = h * w;
  const std::size_t num_classes = weight_rows.size() + 1;
  DenseCam<T> out;
  out.planes.assign(num_classes, std::vector<T>(hw, T(0)));
  for (std::uint32_t c : relevant) {
    auto& plane = out.planes[c];
    for (std::size_t p = 0; p < hw; ++p) {
      double acc = 0;
      for (std::size_t k = 0; k < channels; ++k)
        acc += static_cast<double>(weight_rows[c - 1][k]) * features[k * hw + p];
      plane[p] = static_cast<T>(acc);
    }
    for (auto& v : plane)
      if (v < T(0)) v = T(0);
    T lo = plane[0], hi = plane[0];
    for (T v : plane) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi > lo) {
      for (auto& v : plane) v = (v - lo) / (hi - lo);
    } else {
      for (auto& v : plane) v = T(0);
    }
  }
  out.labels.resize(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    T best = T(-1);
    std::uint32_t best_c = 0;
    for (std::uint32_t c : relevant) {
      if (out.planes[c][p] > best) {
        best = out.planes[c][p];
        best_c = c;
      }
    }
    out.labels[p] = best < bg_threshold ? 0 : static_cast<std::uint8_t>(best_c);
  }
  return out;
}

// ---- similarity and edge filtering --------------------------------------

template <typename T>
std::vector<std::vector<T>> dense_semantic(const labelmend::Mat<T>& v,
                                           const std::vector<std::vector<bool>>& w_l) {
  const std::size_t n = v.rows;
  std::vector<std::vector<T>> w_s(n, std::vector<T>(n, T(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!w_l[i][j]) continue;
      double sq = 0;
      for (std::size_t d = 0; d < v.cols; ++d) {
        const double diff = static_cast<double>(v.at(i, d)) - v.at(j, d);
        sq += diff * diff;
      }
      w_s[i][j] = static_cast<T>(
          std::exp(-std::sqrt(sq) / (2.0 * static_cast<double>(v.cols))));
    }
  return w_s;
}

// Evaluates the directed keep rule over all ordered pairs of the full
// matrix, then symmetrizes and adds the diagonal.
template <typename T>
std::vector<std::vector<bool>> dense_adjacency(
    const std::vector<std::vector<bool>>& w_l, const std::vector<std::vector<T>>& w_s,
    bool and_mode, double* gamma_out) {
  const std::size_t n = w_l.size();
  double mean = 0, count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (w_l[i][j]) {
        mean += static_cast<double>(w_s[i][j]);
        count += 1;
      }
  mean = count > 0 ? mean / count : 0;
  double var = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (w_l[i][j]) var += (static_cast<double>(w_s[i][j]) - mean) *
                            (static_cast<double>(w_s[i][j]) - mean);
  var = count > 0 ? var / count : 0;
  const double gamma = mean - std::sqrt(var);
  if (gamma_out) *gamma_out = gamma;

  auto directed_keep = [&](std::size_t i, std::size_t j) {
    double max_inc = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (w_l[i][k]) max_inc = std::max(max_inc, static_cast<double>(w_s[i][k]));
    const double w = static_cast<double>(w_s[i][j]);
    return !(w < gamma && w < max_inc);
  };

  std::vector<std::vector<bool>> a(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) a[i][i] = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !w_l[i][j]) continue;
      const bool keep = and_mode ? directed_keep(i, j) && directed_keep(j, i)
                                 : directed_keep(i, j) || directed_keep(j, i);
      if (keep) a[i][j] = true;
    }
  return a;
}

// ---- attention network ---------------------------------------------------

// Dense masked two-layer evaluation working entirely on n x n matrices.
template <typename T>
labelmend::Mat<T> dense_gat_forward(const labelmend::GatModel<T>& model,
                                    const labelmend::Mat<T>& x,
                                    const std::vector<std::vector<bool>>& adj) {
  const std::size_t n = x.rows;
  auto matmul_bt = [](const labelmend::Mat<T>& a, const labelmend::Mat<T>& b) {
    labelmend::Mat<T> c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < b.rows; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k < a.cols; ++k)
          acc += static_cast<double>(a.at(i, k)) * b.at(j, k);
        c.at(i, j) = static_cast<T>(acc);
      }
    return c;
  };
  auto head_eval = [&](const labelmend::Mat<T>& input,
                       const labelmend::AttentionHead<T>& head) {
    const labelmend::Mat<T> q = matmul_bt(input, head.w_query);
    const labelmend::Mat<T> k = matmul_bt(input, head.w_key);
    const labelmend::Mat<T> v = matmul_bt(input, head.w_value);
    labelmend::Mat<T> alpha(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      std::vector<double> e(n, -std::numeric_limits<double>::infinity());
      for (std::size_t j = 0; j < n; ++j) {
        if (!adj[i][j]) continue;
        double acc = 0;
        for (std::size_t d = 0; d < q.cols; ++d)
          acc += static_cast<double>(q.at(i, d)) * k.at(j, d);
        e[j] = acc;
        mx = std::max(mx, acc);
      }
      double denom = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (adj[i][j]) denom += std::exp(e[j] - mx);
      for (std::size_t j = 0; j < n; ++j)
        alpha.at(i, j) = adj[i][j] ? static_cast<T>(std::exp(e[j] - mx) / denom) : T(0);
    }
    labelmend::Mat<T> out(n, v.cols);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < v.cols; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j)
          acc += static_cast<double>(alpha.at(i, j)) * v.at(j, c);
        out.at(i, c) = static_cast<T>(acc);
      }
    return out;
  };

  labelmend::Mat<T> hidden(n, model.heads() * model.d_hidden);
  for (std::uint32_t h = 0; h < model.heads(); ++h) {
    const labelmend::Mat<T> out = head_eval(x, model.layer1[h]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::uint32_t d = 0; d < model.d_hidden; ++d)
        hidden.at(i, static_cast<std::size_t>(h) * model.d_hidden + d) =
            std::max(out.at(i, d), T(0));
  }
  const labelmend::Mat<T> logits = head_eval(hidden, model.layer2);
  labelmend::Mat<T> z(n, logits.cols);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.cols; ++c)
      mx = std::max(mx, static_cast<double>(logits.at(i, c)));
    double denom = 0;
    for (std::size_t c = 0; c < logits.cols; ++c)
      denom += std::exp(static_cast<double>(logits.at(i, c)) - mx);
    for (std::size_t c = 0; c < logits.cols; ++c)
      z.at(i, c) =
          static_cast<T>(std::exp(static_cast<double>(logits.at(i, c)) - mx) / denom);
  }
  return z;
}

// ---- bilinear pooling ----------------------------------------------------

// Direct resample-then-average, one pixel at a time.
inline std::vector<std::vector<double>> dense_pool(
    const std::vector<float>& dense, std::size_t channels, std::size_t sh,
    std::size_t sw, const std::vector<std::uint32_t>& assignment, std::size_t h,
    std::size_t w, std::size_t superpixels) {
  std::vector<std::vector<double>> sums(superpixels,
                                        std::vector<double>(channels, 0.0));
  std::vector<std::size_t> counts(superpixels, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double sy = (y + 0.5) * static_cast<double>(sh) / h - 0.5;
      double sx = (x + 0.5) * static_cast<double>(sw) / w - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(sh - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(sw - 1));
      const std::size_t y0 = static_cast<std::size_t>(sy);
      const std::size_t x0 = static_cast<std::size_t>(sx);
      const std::size_t y1 = std::min(y0 + 1, sh - 1);
      const std::size_t x1 = std::min(x0 + 1, sw - 1);
      const double fy = sy - static_cast<double>(y0);
      const double fx = sx - static_cast<double>(x0);
      const std::uint32_t sp = assignment[y * w + x];
      ++counts[sp];
      for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = dense.data() + c * sh * sw;
        const double val = (1 - fy) * (1 - fx) * plane[y0 * sw + x0] +
                           (1 - fy) * fx * plane[y0 * sw + x1] +
                           fy * (1 - fx) * plane[y1 * sw + x0] +
                           fy * fx * plane[y1 * sw + x1];
        sums[sp][c] += val;
      }
    }
  for (std::size_t sp = 0; sp < superpixels; ++sp)
    for (std::size_t c = 0; c < channels; ++c) sums[sp][c] /= counts[sp];
  return sums;
}

// ---- nearest-center assignment check -------------------------------------

// Given fixed centers, recompute each pixel's nearest center by scanning
// all of them with the (distance, id) tie rule.
inline std::vector<std::uint32_t> nearest_center_assignment(
    const labelmend::TensorF32& lab, std::uint32_t h, std::uint32_t w,
    const std::vector<labelmend::SuperpixelPartition::Center>& centers,
    float compactness, float s) {
  const std::size_t npx = static_cast<std::size_t>(h) * w;
  const float* lp = lab.data.data();
  const float* ap = lp + npx;
  const float* bp = lp + 2 * npx;
  const float scale = compactness / s;
  std::vector<std::uint32_t> out(npx, 0);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      float best = std::numeric_limits<float>::infinity();
      std::uint32_t best_id = 0;
      for (std::uint32_t c = 0; c < centers.size(); ++c) {
        const float dl = lp[p] - centers[c].l;
        const float da = ap[p] - centers[c].a;
        const float db = bp[p] - centers[c].b;
        const float dx = static_cast<float>(x) - centers[c].x;
        const float dy = static_cast<float>(y) - centers[c].y;
        const float d = std::sqrt(dl * dl + da * da + db * db +
                                  scale * scale * (dx * dx + dy * dy));
        if (d < best) {
          best = d;
          best_id = c;
        }
      }
      out[p] = best_id;
    }
  return out;
}

}  // namespace oracle
