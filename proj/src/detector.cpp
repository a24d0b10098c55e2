#include "labelmend/detector.hpp"

#include <algorithm>
#include <cmath>

#include "labelmend/error.hpp"

namespace labelmend {

namespace {

void check_prob_shape(const TensorF32& probs, const LabelMap& labels) {
  if (probs.dims.size() != 3)
    raise(Errc::shape_mismatch, "probability map must be [C,H,W]");
  if (probs.dim(1) != labels.height || probs.dim(2) != labels.width)
    raise(Errc::shape_mismatch, "probability map extent differs from label map");
  if (probs.dim(0) != labels.num_classes)
    raise(Errc::shape_mismatch, "probability map class count differs from label map");
}

template <bool Parallel>
TensorF32 pixel_loss_impl(const TensorF32& probs, const LabelMap& init_labels) {
  check_prob_shape(probs, init_labels);
  const std::size_t plane_px =
      static_cast<std::size_t>(init_labels.height) * init_labels.width;
  std::vector<float> losses(plane_px);
#pragma omp parallel for schedule(static) if (Parallel)
  for (long long p = 0; p < static_cast<long long>(plane_px); ++p) {
    const std::uint8_t label = init_labels.labels[p];
    if (label == kUnlabeled) {
      losses[p] = kLossUnlabeled;
      continue;
    }
    const double prob = probs.data[static_cast<std::size_t>(label) * plane_px + p];
    if (prob <= 0.0) {
      losses[p] = kLossUnlabeled;
    } else {
      losses[p] = static_cast<float>(std::min(-std::log(prob),
                                              static_cast<double>(kLossUnlabeled)));
    }
  }
  return TensorF32({init_labels.height, init_labels.width}, std::move(losses));
}

}  // namespace

TensorF32 pixel_loss(const TensorF32& probs, const LabelMap& init_labels) {
  return pixel_loss_impl<true>(probs, init_labels);
}

namespace serial {
TensorF32 pixel_loss(const TensorF32& probs, const LabelMap& init_labels) {
  return pixel_loss_impl<false>(probs, init_labels);
}
}  // namespace serial

CleanMask detect_clean(const TensorF32& losses, double theta) {
  if (!(theta > 0.0) || theta >= static_cast<double>(kLossUnlabeled))
    raise(Errc::non_positive_theta, "theta must be positive and finite");
  if (losses.dims.size() != 2)
    raise(Errc::shape_mismatch, "loss tensor must be [H,W]");
  CleanMask m;
  m.height = losses.dim(0);
  m.width = losses.dim(1);
  m.theta = static_cast<float>(theta);
  m.clean.resize(losses.size());
  std::size_t selected = 0;
  // comparison happens at the losses' storage precision so the inclusive
  // boundary behaves as stored
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const bool c = losses.data[i] <= m.theta;
    m.clean[i] = c ? 1 : 0;
    selected += c;
  }
  m.empty_warning = (selected == 0);
  return m;
}

std::vector<double> default_theta_grid() {
  std::vector<double> grid(40);
  const double lo = std::log(1e-5), hi = std::log(1e-1);
  for (int i = 0; i < 40; ++i)
    grid[i] = std::exp(lo + (hi - lo) * i / 39.0);
  return grid;
}

void ThetaCounts::add(const ThetaCounts& other) {
  if (selected.empty()) {
    *this = other;
    return;
  }
  if (other.selected.size() != selected.size())
    raise(Errc::shape_mismatch, "theta count grids differ");
  for (std::size_t i = 0; i < selected.size(); ++i) {
    selected[i] += other.selected[i];
    judged[i] += other.judged[i];
    correct[i] += other.correct[i];
  }
  labeled += other.labeled;
}

ThetaCounts theta_counts(const TensorF32& losses, const LabelMap& init,
                         const LabelMap& gt, const std::vector<double>& grid) {
  if (losses.size() != init.size() || init.size() != gt.size())
    raise(Errc::shape_mismatch, "loss/init/gt extents disagree");
  // A pixel with loss L is selected by every candidate >= L, so bump a
  // difference array at the first qualifying index and prefix-sum after.
  // Candidates are compared at float precision to match detect_clean.
  const std::size_t k = grid.size();
  std::vector<float> fgrid(k);
  for (std::size_t i = 0; i < k; ++i) fgrid[i] = static_cast<float>(grid[i]);
  ThetaCounts c;
  c.selected.assign(k, 0);
  c.judged.assign(k, 0);
  c.correct.assign(k, 0);
  for (std::size_t p = 0; p < losses.size(); ++p) {
    const std::uint8_t label = init.labels[p];
    if (label == kUnlabeled) continue;
    ++c.labeled;
    const float loss = losses.data[p];
    const auto it = std::lower_bound(fgrid.begin(), fgrid.end(), loss);
    if (it == fgrid.end()) continue;
    const std::size_t first = static_cast<std::size_t>(it - fgrid.begin());
    const std::uint8_t g = gt.labels[p];
    ++c.selected[first];
    if (g != kUnlabeled) {
      ++c.judged[first];
      if (g == label) ++c.correct[first];
    }
  }
  for (std::size_t i = 1; i < k; ++i) {
    c.selected[i] += c.selected[i - 1];
    c.judged[i] += c.judged[i - 1];
    c.correct[i] += c.correct[i - 1];
  }
  return c;
}

ThetaReport finalize_theta(const std::vector<double>& grid, const ThetaCounts& counts,
                           double target_precision) {
  if (grid.empty()) raise(Errc::empty_candidate_grid, "no theta candidates");
  if (!(target_precision > 0.5 && target_precision < 1.0))
    raise(Errc::config_error, "target precision must be in (0.5, 1)");
  const std::size_t k = grid.size();
  ThetaReport report;
  report.target_precision = target_precision;
  report.candidates.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    ThetaCandidate& c = report.candidates[i];
    c.theta = grid[i];
    c.selected = counts.selected[i];
    c.precision = counts.judged[i] == 0
                      ? 1.0  // vacuous: nothing selected to judge
                      : static_cast<double>(counts.correct[i]) /
                            static_cast<double>(counts.judged[i]);
    c.selected_fraction = counts.labeled == 0
                              ? 0.0
                              : static_cast<double>(counts.selected[i]) /
                                    static_cast<double>(counts.labeled);
  }
  report.chosen = grid.front();
  report.unmet_precision = true;
  for (std::size_t i = k; i-- > 0;) {
    if (report.candidates[i].precision >= target_precision) {
      report.chosen = grid[i];
      report.unmet_precision = false;
      break;
    }
  }
  return report;
}

ThetaReport select_theta(const std::vector<ThetaSample>& samples,
                         double target_precision,
                         const std::vector<double>& candidates) {
  if (candidates.empty()) raise(Errc::empty_candidate_grid, "no theta candidates");
  std::vector<double> grid = candidates;
  std::sort(grid.begin(), grid.end());
  ThetaCounts total;
  total.selected.assign(grid.size(), 0);
  total.judged.assign(grid.size(), 0);
  total.correct.assign(grid.size(), 0);
  for (const ThetaSample& s : samples) {
    if (s.gt == nullptr)
      raise(Errc::missing_ground_truth, "sample without ground truth");
    total.add(theta_counts(*s.losses, *s.init, *s.gt, grid));
  }
  return finalize_theta(grid, total, target_precision);
}

void validate_probability_map(const TensorF32& probs) {
  if (probs.dims.size() != 3)
    raise(Errc::shape_mismatch, "probability map must be [C,H,W]");
  const std::uint32_t c = probs.dim(0);
  const std::size_t plane_px = static_cast<std::size_t>(probs.dim(1)) * probs.dim(2);
  for (std::size_t p = 0; p < plane_px; ++p) {
    double sum = 0.0;
    for (std::uint32_t ch = 0; ch < c; ++ch) {
      const float v = probs.data[ch * plane_px + p];
      if (v < 0.f || v > 1.f)
        raise(Errc::non_finite_value, "probability outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-4)
      raise(Errc::shape_mismatch, "pixel distribution does not sum to 1");
  }
}

void write_clean_mask(const CleanMask& m, const std::filesystem::path& path) {
  LabelMap as_map(m.height, m.width, 2);
  for (std::size_t i = 0; i < m.clean.size(); ++i)
    as_map.labels[i] = m.clean[i] ? kUnlabeled : 0;  // 255 reads well in viewers
  write_label_map(as_map, path);
}

CleanMask read_clean_mask(const std::filesystem::path& path) {
  const LabelMap as_map = read_label_map(path, 2);
  CleanMask m;
  m.height = as_map.height;
  m.width = as_map.width;
  m.clean.resize(as_map.size());
  for (std::size_t i = 0; i < m.clean.size(); ++i)
    m.clean[i] = as_map.labels[i] != 0 ? 1 : 0;
  return m;
}

}  // namespace labelmend
