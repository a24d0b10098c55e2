#include "labelmend/eval.hpp"

#include "labelmend/error.hpp"

namespace labelmend {

void IoUReport::merge(const IoUReport& other) {
  if (num_classes == 0) {
    *this = other;
    return;
  }
  if (other.num_classes != num_classes)
    raise(Errc::shape_mismatch, "merging reports with different class counts");
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    intersection[c] += other.intersection[c];
    pred_count[c] += other.pred_count[c];
    gt_count[c] += other.gt_count[c];
  }
  matching += other.matching;
  judged += other.judged;
}

void IoUReport::finalize() {
  iou.assign(num_classes, -1.0);
  double sum = 0.0;
  std::uint32_t present = 0;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    const std::uint64_t uni = pred_count[c] + gt_count[c] - intersection[c];
    if (uni == 0) continue;
    iou[c] = static_cast<double>(intersection[c]) / static_cast<double>(uni);
    sum += iou[c];
    ++present;
  }
  mean_iou = present > 0 ? sum / present : 0.0;
  pixel_accuracy =
      judged > 0 ? static_cast<double>(matching) / static_cast<double>(judged) : 0.0;
}

IoUReport iou(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    raise(Errc::shape_mismatch, "prediction and ground truth differ in extent");
  const std::uint32_t classes = std::max(pred.num_classes, gt.num_classes);
  IoUReport r;
  r.num_classes = classes;
  r.intersection.assign(classes, 0);
  r.pred_count.assign(classes, 0);
  r.gt_count.assign(classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint8_t p = pred.labels[i];
    if (p == kUnlabeled)
      raise(Errc::index_out_of_range, "prediction map contains unlabeled pixels");
    const std::uint8_t g = gt.labels[i];
    if (g == kUnlabeled) continue;
    ++r.judged;
    ++r.pred_count[p];
    ++r.gt_count[g];
    if (p == g) {
      ++r.intersection[p];
      ++r.matching;
    }
  }
  r.finalize();
  return r;
}

double mean_iou_fixed(const IoUReport& report,
                      const std::vector<std::uint32_t>& classes) {
  double sum = 0.0;
  std::uint32_t counted = 0;
  for (std::uint32_t c : classes) {
    if (c >= report.num_classes || report.iou[c] < 0) continue;
    sum += report.iou[c];
    ++counted;
  }
  return counted > 0 ? sum / counted : 0.0;
}

SeedQuality seed_quality(const CleanMask& clean, const LabelMap& init,
                         const LabelMap& gt) {
  if (clean.clean.size() != init.size() || init.size() != gt.size())
    raise(Errc::shape_mismatch, "mask and label maps differ in extent");
  std::uint64_t selected = 0, judged = 0, correct = 0, labeled = 0;
  for (std::size_t i = 0; i < init.size(); ++i) {
    const std::uint8_t label = init.labels[i];
    if (label != kUnlabeled) ++labeled;
    if (!clean.clean[i]) continue;
    ++selected;
    if (gt.labels[i] == kUnlabeled) continue;
    ++judged;
    if (gt.labels[i] == label) ++correct;
  }
  SeedQuality q;
  q.empty = selected == 0;
  q.precision = judged > 0 ? static_cast<double>(correct) / judged : -1.0;
  q.coverage = labeled > 0 ? static_cast<double>(selected) / labeled : 0.0;
  return q;
}

}  // namespace labelmend
