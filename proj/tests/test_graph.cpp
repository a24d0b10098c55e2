#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "labelmend/error.hpp"
#include "labelmend/graph.hpp"
#include "labelmend/rng.hpp"
#include "labelmend/slic.hpp"
#include "oracle.hpp"

using namespace labelmend;

namespace {

// hand-built partition: grid of rectangular superpixels
SuperpixelPartition grid_partition(std::uint32_t h, std::uint32_t w, std::uint32_t ny,
                                   std::uint32_t nx) {
  SuperpixelPartition p;
  p.height = h;
  p.width = w;
  p.count = nx * ny;
  p.assignment.resize(static_cast<std::size_t>(h) * w);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::uint32_t gy = std::min(y * ny / h, ny - 1);
      const std::uint32_t gx = std::min(x * nx / w, nx - 1);
      p.assignment[static_cast<std::size_t>(y) * w + x] = gy * nx + gx;
    }
  p.centers.resize(p.count, {0, 0, 0, 0, 0});
  return p;
}

std::vector<std::vector<bool>> pairs_to_dense(const AdjacentPairs& pairs,
                                              std::uint32_t n) {
  std::vector<std::vector<bool>> w_l(n, std::vector<bool>(n, false));
  for (auto [i, j] : pairs) w_l[i][j] = w_l[j][i] = true;
  return w_l;
}

// random connected adjacency structure on n nodes
AdjacentPairs random_pairs(std::uint32_t n, Rng& rng) {
  AdjacentPairs pairs;
  for (std::uint32_t i = 1; i < n; ++i)
    pairs.emplace_back(static_cast<std::uint32_t>(rng.next_below(i)), i);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (rng.next_double() < 0.2) pairs.emplace_back(i, j);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace

TEST_SUITE("graphbuild") {

TEST_CASE("pooling a constant field gives every node that constant") {
  const auto part = grid_partition(8, 8, 2, 2);
  const TensorF32 dense({1, 8, 8}, std::vector<float>(64, 3.f));
  const NodeFeatures v = pool_features(dense, part);
  REQUIRE(v.rows == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(v.at(i, 0) == doctest::Approx(3.f));

  const TensorF32 tiny({1, 1, 1}, {5.f});
  const NodeFeatures v2 = pool_features(tiny, part);
  for (std::size_t i = 0; i < 4; ++i) CHECK(v2.at(i, 0) == doctest::Approx(5.f));
}

TEST_CASE("2x bilinear upsample matches the hand-computed grid") {
  const auto part = grid_partition(4, 4, 1, 1);
  const TensorF32 dense({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  const NodeFeatures v = pool_features(dense, part);
  // row samples: 1, 1.25, 1.75, 2 / column blend likewise; the mean over
  // the 4x4 grid is the mean of the 16 bilinear values
  const auto ref = oracle::dense_pool(dense.data, 1, 2, 2, part.assignment, 4, 4, 1);
  CHECK(v.at(0, 0) == doctest::Approx(ref[0][0]).epsilon(1e-6));
  CHECK(v.at(0, 0) == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("pooling matches the brute-force oracle and the serial twin") {
  Rng rng(71);
  for (int it = 0; it < 10; ++it) {
    const std::uint32_t h = 8 + static_cast<std::uint32_t>(rng.next_below(9));
    const std::uint32_t w = 8 + static_cast<std::uint32_t>(rng.next_below(9));
    const std::uint32_t sh = 2 + static_cast<std::uint32_t>(rng.next_below(h - 2));
    const std::uint32_t sw = 2 + static_cast<std::uint32_t>(rng.next_below(w - 2));
    const std::uint32_t c = 1 + static_cast<std::uint32_t>(rng.next_below(3));
    const auto part = grid_partition(h, w, 2, 3);
    TensorF32 dense({c, sh, sw},
                    std::vector<float>(static_cast<std::size_t>(c) * sh * sw));
    for (auto& f : dense.data) f = static_cast<float>(rng.uniform(-1, 1));

    const NodeFeatures v = pool_features(dense, part);
    const NodeFeatures vs = serial::pool_features(dense, part);
    CHECK(v.v == vs.v);

    const auto ref =
        oracle::dense_pool(dense.data, c, sh, sw, part.assignment, h, w, part.count);
    for (std::uint32_t sp = 0; sp < part.count; ++sp)
      for (std::uint32_t ch = 0; ch < c; ++ch)
        CHECK(v.at(sp, ch) == doctest::Approx(ref[sp][ch]).epsilon(1e-5));
  }
}

TEST_CASE("handcrafted features: uniform image differs only in centroid") {
  ImageRGB img(8, 8);
  std::fill(img.r.begin(), img.r.end(), 0.3f);
  std::fill(img.g.begin(), img.g.end(), 0.7f);
  std::fill(img.b.begin(), img.b.end(), 0.5f);
  const auto part = grid_partition(8, 8, 2, 2);
  const NodeFeatures v = handcrafted_features(img, part);
  REQUIRE(v.cols == 16);
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t d = 0; d < 14; ++d)
      CHECK(v.at(i, d) == doctest::Approx(v.at(0, d)).epsilon(1e-6));
  CHECK(v.at(0, 14) != doctest::Approx(v.at(1, 14)));
}

TEST_CASE("handcrafted features: full-image superpixel centroid is centered") {
  ImageRGB img(9, 9);
  std::fill(img.r.begin(), img.r.end(), 0.2f);
  const auto part = grid_partition(9, 9, 1, 1);
  const NodeFeatures v = handcrafted_features(img, part);
  CHECK(v.at(0, 14) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(v.at(0, 15) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("handcrafted features separate the two tones") {
  ImageRGB img(8, 8);
  for (std::uint32_t y = 0; y < 8; ++y)
    for (std::uint32_t x = 0; x < 8; ++x) {
      const std::size_t i = img.index(y, x);
      img.r[i] = x < 4 ? 0.9f : 0.1f;
      img.g[i] = 0.2f;
      img.b[i] = x < 4 ? 0.1f : 0.9f;
    }
  const auto part = grid_partition(8, 8, 1, 2);
  const NodeFeatures v = handcrafted_features(img, part);
  float diff = 0;
  for (std::size_t d = 0; d < 3; ++d) diff += std::abs(v.at(0, d) - v.at(1, d));
  CHECK(diff > 0.1f);
}

TEST_CASE("spatial adjacency: grid, single, and split partitions") {
  const auto grid = grid_partition(9, 9, 3, 3);
  const AdjacentPairs pairs = spatial_weights(grid);
  std::vector<int> degree(9, 0);
  for (auto [i, j] : pairs) {
    ++degree[i];
    ++degree[j];
  }
  CHECK(degree[0] == 2);  // corners
  CHECK(degree[2] == 2);
  CHECK(degree[6] == 2);
  CHECK(degree[8] == 2);
  CHECK(degree[4] == 4);  // center

  const auto single = grid_partition(4, 4, 1, 1);
  CHECK(spatial_weights(single).empty());

  const auto halves = grid_partition(4, 4, 1, 2);
  const auto he = spatial_weights(halves);
  REQUIRE(he.size() == 1);
  CHECK(he[0] == std::pair<std::uint32_t, std::uint32_t>{0, 1});
}

TEST_CASE("semantic weight: identical features 1, distance 2h gives 1/e") {
  NodeFeatures v(2, 4);
  const AdjacentPairs pairs = {{0, 1}};
  auto w = semantic_weights(v, pairs);
  CHECK(w[0] == doctest::Approx(1.0));

  // place the rows exactly 2h = 8 apart in Euclidean norm
  v.at(1, 0) = 8.f;
  w = semantic_weights(v, pairs);
  CHECK(w[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("equal weights keep every edge plus self-loops") {
  const AdjacentPairs pairs = {{0, 1}, {1, 2}, {0, 2}};
  const std::vector<float> w = {0.5f, 0.5f, 0.5f};
  const ImageGraph g = build_adjacency(pairs, w, 3);
  CHECK(g.gamma == doctest::Approx(0.5));
  for (const auto& e : g.edges) CHECK(e.keep == 1);
  const Csr a = adjacency_csr(g);
  for (std::uint32_t i = 0; i < 3; ++i) {
    bool self = false;
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s)
      if (a.col[s] == i) self = true;
    CHECK(self);
  }
}

TEST_CASE("path-graph example: weak edge survives via the other endpoint") {
  // path 0-1-2-3 with weights 1.0, 0.5, 0.3
  const AdjacentPairs pairs = {{0, 1}, {1, 2}, {2, 3}};
  const std::vector<float> w = {1.0f, 0.5f, 0.3f};
  const ImageGraph g = build_adjacency(pairs, w, 4);
  CHECK(g.gamma == doctest::Approx(0.305608).epsilon(1e-4));
  // the 0.3 edge is below gamma and below node 2's max, but it is node
  // 3's only (hence strongest) edge, so the OR keeps it
  CHECK(g.edges[2].keep == 1);
  CHECK(g.edges[0].keep == 1);
  CHECK(g.edges[1].keep == 1);

  // with AND symmetrization the same edge is dropped
  const ImageGraph g2 = build_adjacency(pairs, w, 4, EdgeSymmetrize::kAnd);
  CHECK(g2.edges[2].keep == 0);
}

TEST_CASE("a leaf's only edge is never filtered away") {
  // star around node 0; one leaf edge far below the rest
  const AdjacentPairs pairs = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const std::vector<float> w = {0.9f, 0.95f, 0.85f, 0.05f};
  const ImageGraph g = build_adjacency(pairs, w, 5);
  CHECK(g.edges[3].keep == 1);
  const Csr a = adjacency_csr(g);
  for (std::uint32_t i = 0; i < 5; ++i) CHECK(a.degree(i) >= 2);
}

TEST_CASE("filtered adjacency matches the dense rule on random graphs") {
  Rng rng(101);
  for (int it = 0; it < 100; ++it) {
    const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng.next_below(11));
    const AdjacentPairs pairs = random_pairs(n, rng);
    std::vector<float> w(pairs.size());
    for (auto& x : w) x = static_cast<float>(rng.uniform(0.01, 1.0));
    for (const bool and_mode : {false, true}) {
      const ImageGraph g = build_adjacency(
          pairs, w, n, and_mode ? EdgeSymmetrize::kAnd : EdgeSymmetrize::kOr);

      const auto w_l = pairs_to_dense(pairs, n);
      std::vector<std::vector<float>> w_s(n, std::vector<float>(n, 0.f));
      for (std::size_t e = 0; e < pairs.size(); ++e)
        w_s[pairs[e].first][pairs[e].second] = w_s[pairs[e].second][pairs[e].first] =
            w[e];
      double gamma_ref = 0;
      const auto a_ref = oracle::dense_adjacency(w_l, w_s, and_mode, &gamma_ref);

      CHECK(std::abs(g.gamma - gamma_ref) <= 1e-6);
      for (std::size_t e = 0; e < pairs.size(); ++e) {
        const bool kept_ref = a_ref[pairs[e].first][pairs[e].second];
        CHECK(static_cast<bool>(g.edges[e].keep) == kept_ref);
      }
      if (!and_mode) {
        const Csr a = adjacency_csr(g);
        for (std::uint32_t i = 0; i < n; ++i) CHECK(a.degree(i) >= 2);
      }
    }
  }
}

TEST_CASE("gamma and the kept set are invariant to node relabeling") {
  Rng rng(131);
  const std::uint32_t n = 8;
  const AdjacentPairs pairs = random_pairs(n, rng);
  std::vector<float> w(pairs.size());
  for (auto& x : w) x = static_cast<float>(rng.uniform(0.01, 1.0));
  const ImageGraph g = build_adjacency(pairs, w, n);

  // permute ids and rebuild
  std::vector<std::uint32_t> perm(n);
  for (std::uint32_t i = 0; i < n; ++i) perm[i] = (i * 5 + 3) % n;
  AdjacentPairs ppairs;
  for (auto [i, j] : pairs)
    ppairs.emplace_back(std::min(perm[i], perm[j]), std::max(perm[i], perm[j]));
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ppairs[a] < ppairs[b]; });
  AdjacentPairs sorted_pairs;
  std::vector<float> sorted_w;
  for (auto e : order) {
    sorted_pairs.push_back(ppairs[e]);
    sorted_w.push_back(w[e]);
  }
  const ImageGraph pg = build_adjacency(sorted_pairs, sorted_w, n);
  CHECK(pg.gamma == doctest::Approx(g.gamma).epsilon(1e-7));
  for (std::size_t e = 0; e < order.size(); ++e)
    CHECK(pg.edges[e].keep == g.edges[order[e]].keep);
}

TEST_CASE("graph file round trip") {
  Rng rng(151);
  const std::uint32_t n = 6;
  const AdjacentPairs pairs = random_pairs(n, rng);
  std::vector<float> w(pairs.size());
  for (auto& x : w) x = static_cast<float>(rng.uniform(0.01, 1.0));
  const ImageGraph g = build_adjacency(pairs, w, n);
  NodeFeatures v(n, 5);
  for (auto& x : v.v) x = static_cast<float>(rng.uniform(-1, 1));

  const auto path = std::filesystem::temp_directory_path() / "labelmend_graph.lmg";
  write_graph(g, v, path);
  const auto [g2, v2] = read_graph(path);
  CHECK(g2.n == g.n);
  CHECK(g2.gamma == g.gamma);
  CHECK(v2.v == v.v);
  REQUIRE(g2.edges.size() == g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    CHECK(g2.edges[e].i == g.edges[e].i);
    CHECK(g2.edges[e].j == g.edges[e].j);
    CHECK(g2.edges[e].w_s == g.edges[e].w_s);
    CHECK(g2.edges[e].keep == g.edges[e].keep);
  }
}

}  // TEST_SUITE
