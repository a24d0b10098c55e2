#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace labelmend {

// Dense float container exchanged between pipeline stages via the LMT1
// binary format. Stacks are channel-major [C, H, W] so per-class planes
// stay contiguous.
struct TensorF32 {
  std::vector<std::uint32_t> dims;  // 1 to 4 extents
  std::vector<float> data;          // row-major

  TensorF32() = default;
  TensorF32(std::vector<std::uint32_t> d, std::vector<float> values);

  std::size_t size() const { return data.size(); }
  std::uint32_t dim(std::size_t i) const { return dims.at(i); }
};

constexpr std::uint8_t kUnlabeled = 255;

// Per-pixel category indices. Background is always class 0; 255 marks
// pixels without a usable label.
struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t num_classes = 0;  // includes background
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(std::uint32_t h, std::uint32_t w, std::uint32_t classes,
           std::uint8_t fill = 0);

  std::uint8_t at(std::uint32_t y, std::uint32_t x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(std::uint32_t y, std::uint32_t x) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return labels.size(); }
};

struct ImageRGB {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> r, g, b;  // each H*W, values in [0,1]

  ImageRGB() = default;
  ImageRGB(std::uint32_t h, std::uint32_t w);

  std::size_t index(std::uint32_t y, std::uint32_t x) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  std::size_t size() const { return r.size(); }
};

using Palette = std::vector<std::array<std::uint8_t, 3>>;

// LMT1 container: magic "LMT1", u8 ndim, ndim x u32 dims, f32 payload,
// everything little-endian. Loaders reject NaN/Inf payloads.
TensorF32 read_tensor(const std::filesystem::path& path);
void write_tensor(const TensorF32& t, const std::filesystem::path& path);
TensorF32 decode_tensor(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_tensor(const TensorF32& t);

// Label maps travel as binary PGM (P5, maxval 255); the pixel value is the
// category index, 255 the unlabeled sentinel.
LabelMap read_label_map(const std::filesystem::path& path, std::uint32_t num_classes);
void write_label_map(const LabelMap& m, const std::filesystem::path& path);

ImageRGB read_image_ppm(const std::filesystem::path& path);
void write_image_ppm(const ImageRGB& img, const std::filesystem::path& path);

// Binary PPM (P6) rendering; sentinel pixels come out mid-gray.
std::vector<std::uint8_t> write_color_overlay(const LabelMap& labels,
                                              const Palette& palette);

// Deterministic palette: class 0 black, the rest spread around the hue wheel.
Palette default_palette(std::uint32_t num_classes);

void write_bytes(const std::vector<std::uint8_t>& bytes,
                 const std::filesystem::path& path);

}  // namespace labelmend
