// Writes a small feature stack and classifier weights for the CLI
// end-to-end script: two blobby activation channels over a 32x32 canvas.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "labelmend/tensor.hpp"

using namespace labelmend;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_label_fixture <outdir>\n");
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  const std::uint32_t k = 2, h = 32, w = 32;
  std::vector<float> features(static_cast<std::size_t>(k) * h * w);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const float d0 = std::hypot(x - 10.f, y - 12.f);
      const float d1 = std::hypot(x - 24.f, y - 20.f);
      features[p] = std::exp(-d0 * d0 / 30.f);
      features[h * w + p] = std::exp(-d1 * d1 / 30.f);
    }
  write_tensor(TensorF32({k, h, w}, std::move(features)), dir / "features.lmt");

  // two foreground classes, each keyed to one channel
  write_tensor(TensorF32({2, 2}, {1.f, 0.f, 0.f, 1.f}), dir / "weights.lmt");
  return 0;
}
