#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "labelmend/error.hpp"
#include "labelmend/rng.hpp"
#include "labelmend/slic.hpp"
#include "oracle.hpp"

using namespace labelmend;

namespace {

ImageRGB uniform_image(std::uint32_t h, std::uint32_t w, float r, float g, float b) {
  ImageRGB img(h, w);
  std::fill(img.r.begin(), img.r.end(), r);
  std::fill(img.g.begin(), img.g.end(), g);
  std::fill(img.b.begin(), img.b.end(), b);
  return img;
}

// vertical color edge at column `split`, optionally a sine-wavy one
ImageRGB two_tone(std::uint32_t h, std::uint32_t w, std::uint32_t split,
                  double wave_amp = 0) {
  ImageRGB img(h, w);
  for (std::uint32_t y = 0; y < h; ++y) {
    const double edge = split + wave_amp * std::sin(2.0 * 3.14159265 * y / h * 3);
    for (std::uint32_t x = 0; x < w; ++x) {
      const bool left = x < edge;
      const std::size_t i = img.index(y, x);
      img.r[i] = left ? 0.9f : 0.1f;
      img.g[i] = left ? 0.2f : 0.6f;
      img.b[i] = left ? 0.1f : 0.9f;
    }
  }
  return img;
}

ImageRGB random_blob_image(std::uint32_t h, std::uint32_t w, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB img(h, w);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.r[i] = static_cast<float>(rng.next_double());
    img.g[i] = static_cast<float>(rng.next_double());
    img.b[i] = static_cast<float>(rng.next_double());
  }
  // smooth the noise a little so superpixels have structure to follow
  for (int pass = 0; pass < 2; ++pass) {
    ImageRGB s = img;
    for (std::uint32_t y = 1; y + 1 < h; ++y)
      for (std::uint32_t x = 1; x + 1 < w; ++x) {
        const std::size_t i = img.index(y, x);
        s.r[i] = (img.r[i - 1] + img.r[i + 1] + img.r[i - w] + img.r[i + w]) / 4;
        s.g[i] = (img.g[i - 1] + img.g[i + 1] + img.g[i - w] + img.g[i + w]) / 4;
        s.b[i] = (img.b[i - 1] + img.b[i + 1] + img.b[i - w] + img.b[i + w]) / 4;
      }
    img = s;
  }
  return img;
}

void check_partition_contract(const SuperpixelPartition& p) {
  REQUIRE(p.assignment.size() == static_cast<std::size_t>(p.height) * p.width);
  std::vector<std::uint64_t> area(p.count, 0);
  for (auto id : p.assignment) {
    REQUIRE(id < p.count);
    ++area[id];
  }
  for (auto a : area) CHECK(a > 0);

  // each id must form exactly one 4-connected component
  std::vector<std::uint8_t> seen(p.assignment.size(), 0);
  std::vector<std::uint32_t> stack;
  std::uint32_t components = 0;
  for (std::uint32_t start = 0; start < p.assignment.size(); ++start) {
    if (seen[start]) continue;
    ++components;
    const std::uint32_t label = p.assignment[start];
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::uint32_t q = stack.back();
      stack.pop_back();
      const std::uint32_t x = q % p.width, y = q / p.width;
      const std::uint32_t nbr[4] = {x > 0 ? q - 1 : q, x + 1 < p.width ? q + 1 : q,
                                    y > 0 ? q - p.width : q,
                                    y + 1 < p.height ? q + p.width : q};
      for (std::uint32_t r : nbr)
        if (r != q && !seen[r] && p.assignment[r] == label) {
          seen[r] = 1;
          stack.push_back(r);
        }
    }
  }
  CHECK(components == p.count);
}

std::size_t boundary_length(const SuperpixelPartition& p) {
  std::size_t len = 0;
  for (std::uint32_t y = 0; y < p.height; ++y)
    for (std::uint32_t x = 0; x < p.width; ++x) {
      if (x + 1 < p.width && p.at(y, x) != p.at(y, x + 1)) ++len;
      if (y + 1 < p.height && p.at(y, x) != p.at(y + 1, x)) ++len;
    }
  return len;
}

}  // namespace

TEST_SUITE("superpixel") {

TEST_CASE("lab conversion hits the standard anchor points") {
  ImageRGB img(1, 3);
  img.r = {0.f, 1.f, 1.f};
  img.g = {0.f, 1.f, 0.f};
  img.b = {0.f, 1.f, 0.f};
  const TensorF32 lab = rgb_to_lab(img);
  const std::size_t n = 3;
  CHECK(lab.data[0] == doctest::Approx(0).epsilon(1e-3));       // black L
  CHECK(std::abs(lab.data[n + 0]) < 1e-3);                      // black a
  CHECK(lab.data[1] == doctest::Approx(100).epsilon(1e-3));     // white L
  CHECK(std::abs(lab.data[n + 1]) < 0.1);                       // white a
  CHECK(std::abs(lab.data[2 * n + 1]) < 0.1);                   // white b
  CHECK(lab.data[2] == doctest::Approx(53.24).epsilon(0.005));  // red L
  CHECK(lab.data[n + 2] == doctest::Approx(80.09).epsilon(0.005));
  CHECK(lab.data[2 * n + 2] == doctest::Approx(67.20).epsilon(0.005));
}

TEST_CASE("uniform image, target 9: a 3x3 grid of near-square superpixels") {
  const ImageRGB img = uniform_image(60, 60, 0.4f, 0.5f, 0.6f);
  SlicOptions opt;
  opt.target_count = 9;
  const SuperpixelPartition p = slic(img, opt);
  REQUIRE(p.count == 9);
  check_partition_contract(p);
  std::vector<std::uint64_t> area(9, 0);
  for (auto id : p.assignment) ++area[id];
  for (auto a : area) {
    CHECK(a >= 361);
    CHECK(a <= 445);
  }
  // centers sit on a 3x3 grid: 3 distinct x positions and 3 distinct y
  for (const auto& c : p.centers) {
    const float gx = std::fmod(c.x, 20.f);
    const float gy = std::fmod(c.y, 20.f);
    CHECK(std::abs(gx - 9.5f) < 2.f);
    CHECK(std::abs(gy - 9.5f) < 2.f);
  }
}

TEST_CASE("degenerate target: one superpixel per pixel") {
  const ImageRGB img = uniform_image(12, 9, 0.2f, 0.2f, 0.2f);
  SlicOptions opt;
  opt.target_count = 12 * 9;
  const SuperpixelPartition p = slic(img, opt);
  CHECK(p.count == 12 * 9);
  check_partition_contract(p);
}

TEST_CASE("two-tone image, target 2: the boundary sits on the color edge") {
  const std::uint32_t split = 30;
  const ImageRGB img = two_tone(60, 60, split);
  SlicOptions opt;
  opt.target_count = 2;
  opt.compactness = 40.f;
  const SuperpixelPartition p = slic(img, opt);
  REQUIRE(p.count == 2);
  check_partition_contract(p);
  for (std::uint32_t y = 0; y < 60; ++y)
    for (std::uint32_t x = 0; x < 60; ++x) {
      if (x + 1 < split) CHECK(p.at(y, x) == p.at(y, 0));
      if (x > split) CHECK(p.at(y, x) == p.at(y, 59));
    }

  // final assignment equals a brute-force nearest-center scan
  const TensorF32 lab = rgb_to_lab(img);
  const float s = std::sqrt(3600.f / 2.f);
  const auto ref = oracle::nearest_center_assignment(lab, 60, 60, p.centers,
                                                     opt.compactness, s);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) agree += ref[i] == p.assignment[i];
  // connectivity enforcement may overrule a few pixels at the seam
  CHECK(agree >= ref.size() - 60);
}

TEST_CASE("deterministic across runs and thread counts") {
  const ImageRGB img = random_blob_image(64, 48, 5);
  SlicOptions opt;
  opt.target_count = 40;
  const SuperpixelPartition a = slic(img, opt);
  const SuperpixelPartition b = slic(img, opt);
  CHECK(a.assignment == b.assignment);
  const SuperpixelPartition s = serial::slic(img, opt);
  CHECK(a.assignment == s.assignment);
  CHECK(a.count == s.count);
  const TensorF32 lab_p = rgb_to_lab(img);
  const TensorF32 lab_s = serial::rgb_to_lab(img);
  CHECK(lab_p.data == lab_s.data);
}

TEST_CASE("partition contract holds on random images") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ImageRGB img = random_blob_image(50 + seed * 7, 40 + seed * 5, seed);
    SlicOptions opt;
    opt.target_count = 30 + static_cast<std::uint32_t>(seed) * 10;
    const SuperpixelPartition p = slic(img, opt);
    check_partition_contract(p);
    CHECK(p.count >= opt.target_count / 2);
    CHECK(p.count <= opt.target_count + opt.target_count / 2);
  }
}

TEST_CASE("higher compactness never lengthens the two-tone boundary") {
  for (double amp : {0.0, 3.0}) {
    const ImageRGB img = two_tone(48, 48, 24, amp);
    std::size_t prev = SIZE_MAX;
    for (float m : {2.f, 10.f, 40.f}) {
      SlicOptions opt;
      opt.target_count = 2;
      opt.compactness = m;
      const std::size_t len = boundary_length(slic(img, opt));
      CHECK(len <= prev);
      prev = len;
    }
  }
}

TEST_CASE("invalid inputs raise typed errors") {
  const ImageRGB img = uniform_image(4, 4, 0.5f, 0.5f, 0.5f);
  SlicOptions opt;
  opt.target_count = 17;
  try {
    slic(img, opt);
    FAIL("expected TargetTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::target_too_large);
  }
  try {
    slic(ImageRGB(), {});
    FAIL("expected EmptyImage");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_image);
  }
}

TEST_CASE("partition tensor round trip") {
  const ImageRGB img = random_blob_image(20, 20, 9);
  SlicOptions opt;
  opt.target_count = 8;
  const SuperpixelPartition p = slic(img, opt);
  const SuperpixelPartition q = partition_from_tensor(partition_to_tensor(p));
  CHECK(q.assignment == p.assignment);
  CHECK(q.count == p.count);
}

}  // TEST_SUITE
