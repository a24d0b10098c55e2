#pragma once

#include <cstdint>
#include <vector>

#include "labelmend/tensor.hpp"

namespace labelmend {

// Loss value stored for pixels that carry no initial label; larger than
// any admissible threshold so such pixels can never be selected.
constexpr float kLossUnlabeled = 3.4e38f;

struct CleanMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> clean;  // 1 = selected as clean
  float theta = 0.f;
  bool empty_warning = false;

  std::size_t count() const {
    std::size_t n = 0;
    for (auto c : clean) n += c;
    return n;
  }
};

struct ThetaCandidate {
  double theta = 0.;
  double precision = 1.;          // vacuously 1 when nothing is selected
  double selected_fraction = 0.;  // selected / labeled
  std::uint64_t selected = 0;
};

struct ThetaReport {
  std::vector<ThetaCandidate> candidates;  // ascending theta
  double chosen = 0.;
  double target_precision = 0.;
  bool unmet_precision = false;
};

// One image's worth of evidence for threshold selection.
struct ThetaSample {
  const TensorF32* losses;   // [H,W]
  const LabelMap* init;      // labels the losses were computed under
  const LabelMap* gt;        // strong annotation
};

// Per-pixel negative log-likelihood of the initial label under the clean
// model's prediction. Computed in double, stored float; unlabeled pixels
// get kLossUnlabeled.
TensorF32 pixel_loss(const TensorF32& probs,  // [C,H,W], rows sum to 1
                     const LabelMap& init_labels);

// Small-loss selection: clean iff loss <= theta (inclusive).
CleanMask detect_clean(const TensorF32& losses, double theta);

// Integer tallies of one threshold sweep; summable across images in any
// order without changing the result.
struct ThetaCounts {
  std::vector<std::uint64_t> selected;  // per ascending candidate
  std::vector<std::uint64_t> judged;    // selected with usable ground truth
  std::vector<std::uint64_t> correct;   // judged and init == gt
  std::uint64_t labeled = 0;

  void add(const ThetaCounts& other);
};

ThetaCounts theta_counts(const TensorF32& losses, const LabelMap& init,
                         const LabelMap& gt, const std::vector<double>& grid);

ThetaReport finalize_theta(const std::vector<double>& grid, const ThetaCounts& counts,
                           double target_precision);

// Sweep the candidate grid and keep the largest threshold whose selection
// precision (against ground truth) still meets the target. Counting is
// integer-exact, so image order cannot perturb the result.
ThetaReport select_theta(const std::vector<ThetaSample>& samples,
                         double target_precision,
                         const std::vector<double>& candidates);

// 40 log-spaced values spanning [1e-5, 1e-1].
std::vector<double> default_theta_grid();

// Probability stacks must be per-pixel distributions: entries in [0,1],
// every pixel column summing to 1 within 1e-4.
void validate_probability_map(const TensorF32& probs);

// Clean masks travel as P5 files: 255 = clean, 0 = not selected.
void write_clean_mask(const CleanMask& m, const std::filesystem::path& path);
CleanMask read_clean_mask(const std::filesystem::path& path);

namespace serial {
TensorF32 pixel_loss(const TensorF32& probs, const LabelMap& init_labels);
}

}  // namespace labelmend
