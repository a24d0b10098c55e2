#pragma once

#include <cstdint>
#include <vector>

#include "labelmend/detector.hpp"
#include "labelmend/tensor.hpp"

namespace labelmend {

// Per-class overlap counts plus the derived ratios. Counts merge across
// images for dataset-style reporting; ratios are recomputed afterwards.
struct IoUReport {
  std::uint32_t num_classes = 0;
  std::vector<std::uint64_t> intersection;  // per class
  std::vector<std::uint64_t> pred_count;
  std::vector<std::uint64_t> gt_count;
  std::uint64_t matching = 0;  // pred == gt over judged pixels
  std::uint64_t judged = 0;    // pixels with usable ground truth

  std::vector<double> iou;  // -1 where the class is absent from both maps
  double mean_iou = 0.0;    // over classes present in either map
  double pixel_accuracy = 0.0;

  void merge(const IoUReport& other);
  void finalize();
};

// Intersection-over-union per class; classes absent from both maps do not
// enter the mean. Prediction maps must be sentinel-free; ground-truth
// sentinel pixels are skipped.
IoUReport iou(const LabelMap& pred, const LabelMap& gt);

// Dataset-style alternative: average over an externally fixed class list
// instead of the classes present in this pair of maps. Classes from the
// list that are absent from both maps are skipped (their IoU is undefined).
double mean_iou_fixed(const IoUReport& report,
                      const std::vector<std::uint32_t>& classes);

struct SeedQuality {
  double precision = -1.0;  // -1 when no pixel was selected
  double coverage = 0.0;    // selected / labeled
  bool empty = false;
};

// How trustworthy and how plentiful the selected clean set is.
SeedQuality seed_quality(const CleanMask& clean, const LabelMap& init,
                         const LabelMap& gt);

}  // namespace labelmend
