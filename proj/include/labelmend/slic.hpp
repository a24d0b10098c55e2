#pragma once

#include <cstdint>
#include <vector>

#include "labelmend/tensor.hpp"

namespace labelmend {

struct SlicOptions {
  std::uint32_t target_count = 1000;
  float compactness = 10.f;
  int iters = 10;
};

struct SuperpixelPartition {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t count = 0;
  std::vector<std::uint32_t> assignment;  // H*W, ids dense in [0, count)

  struct Center {
    float l, a, b, x, y;
  };
  std::vector<Center> centers;

  std::uint32_t at(std::uint32_t y, std::uint32_t x) const {
    return assignment[static_cast<std::size_t>(y) * width + x];
  }
};

// sRGB (D65) to CIELAB, planes [3,H,W] as L,a,b.
TensorF32 rgb_to_lab(const ImageRGB& image);

// Local k-means over (L,a,b,x,y) with grid-initialized centers, a 2S x 2S
// search window, and a final pass that folds disconnected fragments into
// their largest neighbor. Deterministic: fixed scan orders, ties to the
// lowest id, and results independent of the OpenMP thread count.
SuperpixelPartition slic(const ImageRGB& image, const SlicOptions& opt);

// Assignment ids as a [H,W] float tensor for file exchange.
TensorF32 partition_to_tensor(const SuperpixelPartition& p);
SuperpixelPartition partition_from_tensor(const TensorF32& t);

namespace serial {
SuperpixelPartition slic(const ImageRGB& image, const SlicOptions& opt);
TensorF32 rgb_to_lab(const ImageRGB& image);
}  // namespace serial

}  // namespace labelmend
