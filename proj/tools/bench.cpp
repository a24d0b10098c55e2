// Times the OpenMP kernels against their serial reference twins on a
// synthetic workload and checks that both produce identical bytes.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "labelmend/cam.hpp"
#include "labelmend/detector.hpp"
#include "labelmend/graph.hpp"
#include "labelmend/mat.hpp"
#include "labelmend/rng.hpp"
#include "labelmend/slic.hpp"
#include "labelmend/synth.hpp"

using namespace labelmend;
using Clock = std::chrono::steady_clock;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool equal) {
  std::printf("%-22s %10.2f ms %10.2f ms %7.2fx   %s\n", name.c_str(), serial_ms,
              parallel_ms, serial_ms / parallel_ms, equal ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  SuiteSpec suite;
  suite.images = 1;
  suite.height = 512;
  suite.width = 512;
  suite.seed = 99;
  suite.noise.dilate_px = 3;
  suite.noise.shift_px = 4;
  const Scene scene = generate(make_suite(suite)[0]);

  // color conversion
  {
    TensorF32 a, b;
    const double ts = time_best_of(3, [&] { a = serial::rgb_to_lab(scene.image); });
    const double tp = time_best_of(3, [&] { b = rgb_to_lab(scene.image); });
    report("rgb_to_lab", ts, tp, a.data == b.data);
  }

  // activation maps on a synthetic 64-channel stack
  {
    Rng rng(1);
    const std::uint32_t k = 64;
    std::vector<float> feat(static_cast<std::size_t>(k) * suite.height * suite.width);
    for (auto& f : feat) f = static_cast<float>(rng.uniform(-1, 1));
    const TensorF32 features({k, suite.height, suite.width}, std::move(feat));
    ClassifierWeights weights;
    weights.w = Mat<float>(3, k);
    for (auto& f : weights.w.v) f = static_cast<float>(rng.uniform(-1, 1));
    ScoreMapSet a, b;
    const double ts =
        time_best_of(3, [&] { a = serial::compute_cam(features, weights, {1, 2, 3}); });
    const double tp =
        time_best_of(3, [&] { b = compute_cam(features, weights, {1, 2, 3}); });
    report("compute_cam", ts, tp, a.planes == b.planes);
  }

  // per-pixel loss
  {
    const LabelMap init = assign_labels(scene.scores, 0.05f);
    TensorF32 a, b;
    const double ts = time_best_of(3, [&] { a = serial::pixel_loss(scene.probs, init); });
    const double tp = time_best_of(3, [&] { b = pixel_loss(scene.probs, init); });
    report("pixel_loss", ts, tp, a.data == b.data);
  }

  // superpixels
  SuperpixelPartition part;
  {
    SlicOptions opt;
    opt.target_count = 1000;
    SuperpixelPartition a, b;
    const double ts = time_best_of(2, [&] { a = serial::slic(scene.image, opt); });
    const double tp = time_best_of(2, [&] { b = slic(scene.image, opt); });
    report("slic", ts, tp, a.assignment == b.assignment && a.count == b.count);
    part = b;
  }

  // feature pooling from a quarter-resolution stack
  {
    Rng rng(2);
    const std::uint32_t c = 64, sh = suite.height / 4, sw = suite.width / 4;
    std::vector<float> feat(static_cast<std::size_t>(c) * sh * sw);
    for (auto& f : feat) f = static_cast<float>(rng.uniform(-1, 1));
    const TensorF32 dense({c, sh, sw}, std::move(feat));
    NodeFeatures a, b;
    const double ts = time_best_of(3, [&] { a = serial::pool_features(dense, part); });
    const double tp = time_best_of(3, [&] { b = pool_features(dense, part); });
    report("pool_features", ts, tp, a.v == b.v);
  }

  // dense matmul as used inside attention
  {
    Rng rng(3);
    Mat<float> x(4096, 256), w(64, 256);
    for (auto& f : x.v) f = static_cast<float>(rng.uniform(-1, 1));
    for (auto& f : w.v) f = static_cast<float>(rng.uniform(-1, 1));
    Mat<float> a, b;
    const double ts = time_best_of(3, [&] { a = serial::gemm_nt(x, w); });
    const double tp = time_best_of(3, [&] { b = gemm_nt(x, w); });
    report("gemm_nt 4096x256x64", ts, tp, a.v == b.v);
  }

  return 0;
}
