#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "labelmend/mat.hpp"
#include "labelmend/slic.hpp"
#include "labelmend/tensor.hpp"

namespace labelmend {

// One row of pooled features per superpixel.
using NodeFeatures = Mat<float>;

// Unordered spatially-adjacent superpixel pairs, i < j, sorted.
using AdjacentPairs = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

enum class EdgeSymmetrize { kOr, kAnd };

// Superpixel graph for one image. Every listed edge is a spatial
// adjacency; `w_s` carries its semantic similarity and `keep` whether it
// survived the low-similarity filter. Self-loops are implicit members of
// the filtered adjacency.
struct ImageGraph {
  std::uint32_t n = 0;
  struct Edge {
    std::uint32_t i, j;  // i < j
    float w_s;
    std::uint8_t keep;
  };
  std::vector<Edge> edges;
  float gamma = 0.f;
};

// Filtered adjacency with self-loops in compressed sparse rows; columns
// sorted ascending per row. This is what the attention layers consume.
struct Csr {
  std::uint32_t n = 0;
  std::vector<std::uint32_t> row_ptr;  // n+1
  std::vector<std::uint32_t> col;

  std::uint32_t degree(std::uint32_t i) const { return row_ptr[i + 1] - row_ptr[i]; }
};

Csr adjacency_csr(const ImageGraph& g);

// Bilinear upsampling of a coarse feature stack to the image extent
// followed by per-superpixel averaging. Sampling uses the half-pixel
// (align-corners-false) convention.
NodeFeatures pool_features(const TensorF32& dense,  // [C, h', w']
                           const SuperpixelPartition& partition);

// 16-dim color/position descriptor per superpixel: mean Lab, Lab spread,
// 8-bin hue histogram, normalized centroid; every block scaled to [0,1].
// Stands in when no CNN feature stack is available.
NodeFeatures handcrafted_features(const ImageRGB& image,
                                  const SuperpixelPartition& partition);

AdjacentPairs spatial_weights(const SuperpixelPartition& partition);

// Similarity per adjacent pair: exp(-||v_i - v_j|| / (2h)).
std::vector<float> semantic_weights(const NodeFeatures& v, const AdjacentPairs& pairs);

ImageGraph build_adjacency(const AdjacentPairs& pairs,
                           const std::vector<float>& w_s, std::uint32_t n,
                           EdgeSymmetrize mode = EdgeSymmetrize::kOr);

// Convenience: pairs -> similarities -> filtered graph.
ImageGraph build_graph(const NodeFeatures& v, const SuperpixelPartition& partition,
                       EdgeSymmetrize mode = EdgeSymmetrize::kOr);

// LMG1 container: magic, u32 n, u32 h, f32 node features, u32 edge count,
// edges as (u32 i, u32 j, u8 w_l, f32 w_s, u8 a), f32 gamma; little-endian.
void write_graph(const ImageGraph& g, const NodeFeatures& v,
                 const std::filesystem::path& path);
std::pair<ImageGraph, NodeFeatures> read_graph(const std::filesystem::path& path);

namespace serial {
NodeFeatures pool_features(const TensorF32& dense, const SuperpixelPartition& partition);
}

}  // namespace labelmend
