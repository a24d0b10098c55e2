#include <doctest.h>

#include "labelmend/cam.hpp"
#include "labelmend/error.hpp"
#include "labelmend/rng.hpp"
#include "oracle.hpp"

using namespace labelmend;

namespace {

ClassifierWeights make_weights(std::size_t fg_classes, std::size_t k, Rng& rng) {
  ClassifierWeights w;
  w.w = Mat<float>(fg_classes, k);
  for (auto& v : w.w.v) v = static_cast<float>(rng.uniform(-1, 1));
  return w;
}

}  // namespace

TEST_SUITE("camlab") {

TEST_CASE("constant plane collapses to zero and is reported") {
  const TensorF32 features({1, 2, 2}, {1.f, 1.f, 1.f, 1.f});
  ClassifierWeights w;
  w.w = Mat<float>(1, 1);
  w.w.v = {2.f};
  const ScoreMapSet s = compute_cam(features, w, {1});
  CHECK(s.degenerate == std::vector<std::uint32_t>{1});
  for (std::size_t p = 0; p < 4; ++p) CHECK(s.plane(1)[p] == 0.f);
}

TEST_CASE("raw scores are the plain weighted channel sums") {
  // two pixels, two channels: f = identity columns, weights (1,1)
  const TensorF32 features({2, 1, 2}, {1.f, 0.f, 0.f, 1.f});
  ClassifierWeights w;
  w.w = Mat<float>(1, 2);
  w.w.v = {1.f, 1.f};
  const auto raw = cam_raw_plane(features, w, 1);
  CHECK(raw == std::vector<float>{1.f, 1.f});
}

TEST_CASE("irrelevant classes keep an identically zero plane") {
  Rng rng(7);
  TensorF32 features({3, 4, 4}, std::vector<float>(48));
  for (auto& f : features.data) f = static_cast<float>(rng.uniform(0, 1));
  const ClassifierWeights w = make_weights(3, 3, rng);
  const ScoreMapSet s = compute_cam(features, w, {2});
  for (std::size_t p = 0; p < 16; ++p) {
    CHECK(s.plane(1)[p] == 0.f);
    CHECK(s.plane(3)[p] == 0.f);
  }
}

TEST_CASE("assignment: argmax, background threshold, tie break") {
  ScoreMapSet s;
  s.num_classes = 3;
  s.height = 1;
  s.width = 3;
  s.relevant = {1, 2};
  s.planes.assign(9, 0.f);
  // pixel 0: clear winner class 1; pixel 1: both below threshold;
  // pixel 2: exact tie
  s.plane(1)[0] = 0.8f;
  s.plane(2)[0] = 0.3f;
  s.plane(1)[1] = 0.04f;
  s.plane(2)[1] = 0.04f;
  s.plane(1)[2] = 0.5f;
  s.plane(2)[2] = 0.5f;
  const LabelMap m = assign_labels(s, 0.05f);
  CHECK(m.labels[0] == 1);
  CHECK(m.labels[1] == 0);
  CHECK(m.labels[2] == 1);
}

TEST_CASE("confidence band marks mid-score pixels unlabeled") {
  ScoreMapSet s;
  s.num_classes = 2;
  s.height = 1;
  s.width = 3;
  s.relevant = {1};
  s.planes.assign(6, 0.f);
  s.plane(1)[0] = 0.02f;
  s.plane(1)[1] = 0.2f;
  s.plane(1)[2] = 0.9f;
  const LabelMap m = assign_labels(s, 0.05f, 0.3f);
  CHECK(m.labels[0] == 0);
  CHECK(m.labels[1] == kUnlabeled);
  CHECK(m.labels[2] == 1);
}

TEST_CASE("no sentinel ever appears without a confidence band") {
  Rng rng(11);
  for (int it = 0; it < 20; ++it) {
    TensorF32 features({2, 5, 5}, std::vector<float>(50));
    for (auto& f : features.data) f = static_cast<float>(rng.uniform(-2, 2));
    const ClassifierWeights w = make_weights(2, 2, rng);
    const LabelMap m = assign_labels(compute_cam(features, w, {1, 2}), 0.05f);
    for (auto v : m.labels) CHECK(v != kUnlabeled);
  }
}

TEST_CASE("power-of-two rescaling of the inputs cannot move any label") {
  Rng rng(13);
  for (int it = 0; it < 20; ++it) {
    TensorF32 features({2, 6, 6}, std::vector<float>(72));
    for (auto& f : features.data) f = static_cast<float>(rng.uniform(-1, 1));
    const ClassifierWeights w = make_weights(2, 2, rng);
    const LabelMap base = assign_labels(compute_cam(features, w, {1, 2}), 0.05f);
    for (float lambda : {0.25f, 0.5f, 2.f, 8.f}) {
      TensorF32 scaled = features;
      for (auto& f : scaled.data) f *= lambda;
      const LabelMap m = assign_labels(compute_cam(scaled, w, {1, 2}), 0.05f);
      CHECK(m.labels == base.labels);
    }
  }
}

TEST_CASE("matches the dense per-pixel oracle on small instances") {
  Rng rng(17);
  for (int it = 0; it < 100; ++it) {
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng.next_below(4));
    const std::uint32_t h = 2 + static_cast<std::uint32_t>(rng.next_below(7));
    const std::uint32_t w = 2 + static_cast<std::uint32_t>(rng.next_below(7));
    const std::uint32_t fg = 1 + static_cast<std::uint32_t>(rng.next_below(3));
    TensorF32 features({k, h, w}, std::vector<float>(static_cast<std::size_t>(k) * h * w));
    for (auto& f : features.data) f = static_cast<float>(rng.uniform(-1, 1));
    const ClassifierWeights weights = make_weights(fg, k, rng);
    std::vector<std::uint32_t> relevant;
    for (std::uint32_t c = 1; c <= fg; ++c)
      if (rng.next_double() < 0.7 || (relevant.empty() && c == fg)) relevant.push_back(c);

    const ScoreMapSet s = compute_cam(features, weights, relevant);
    const LabelMap m = assign_labels(s, 0.05f);

    std::vector<std::vector<float>> rows(fg);
    for (std::uint32_t c = 0; c < fg; ++c)
      rows[c].assign(weights.w.row(c), weights.w.row(c) + k);
    const auto ref = oracle::dense_cam<float>(features.data, k, h, w, rows, relevant, 0.05f);
    for (std::uint32_t c : relevant)
      for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p)
        CHECK(std::abs(s.plane(c)[p] - ref.planes[c][p]) <= 1e-6f);
    // labels must agree except where two classes tie within the value
    // tolerance, where either winner is acceptable
    for (std::size_t p = 0; p < m.labels.size(); ++p) {
      if (m.labels[p] == ref.labels[p]) continue;
      REQUIRE(m.labels[p] != 0);
      REQUIRE(ref.labels[p] != 0);
      CHECK(std::abs(ref.planes[m.labels[p]][p] - ref.planes[ref.labels[p]][p]) <=
            2e-6f);
    }
  }
}

TEST_CASE("serial reference produces identical bytes") {
  Rng rng(19);
  TensorF32 features({3, 16, 16}, std::vector<float>(3 * 256));
  for (auto& f : features.data) f = static_cast<float>(rng.uniform(-2, 2));
  const ClassifierWeights w = make_weights(3, 3, rng);
  const ScoreMapSet a = compute_cam(features, w, {1, 2, 3});
  const ScoreMapSet b = serial::compute_cam(features, w, {1, 2, 3});
  CHECK(a.planes == b.planes);
  CHECK(a.degenerate == b.degenerate);
}

TEST_CASE("input contract violations raise typed errors") {
  Rng rng(3);
  const ClassifierWeights w = make_weights(2, 3, rng);
  const TensorF32 bad_shape({3, 4}, std::vector<float>(12, 0.f));
  CHECK_THROWS_AS(compute_cam(bad_shape, w, {1}), Error);
  const TensorF32 features({3, 2, 2}, std::vector<float>(12, 0.f));
  try {
    compute_cam(features, w, {});
    FAIL("expected EmptyRelevantSet");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_relevant_set);
  }
}

}  // TEST_SUITE
