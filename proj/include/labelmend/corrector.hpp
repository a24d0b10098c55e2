#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "labelmend/config.hpp"
#include "labelmend/detector.hpp"
#include "labelmend/gat.hpp"
#include "labelmend/graph.hpp"
#include "labelmend/slic.hpp"
#include "labelmend/tensor.hpp"

namespace labelmend {

// Per-superpixel label evidence: the majority vote of the clean pixels a
// superpixel overlaps, or unseeded (-1) when it overlaps none.
struct NodeLabelAssignment {
  std::vector<std::int32_t> labels;   // -1 = unseeded
  std::vector<float> vote_margin;    // winning fraction among clean pixels
  std::uint32_t seeded_count = 0;

  std::uint32_t distinct_classes() const;
};

NodeLabelAssignment embed_clean(const CleanMask& clean, const LabelMap& init_labels,
                                const SuperpixelPartition& partition,
                                std::uint32_t num_classes);

enum class NodeSource : std::uint8_t { kSeeded, kPredicted };

struct CorrectionResult {
  LabelMap corrected;
  std::vector<NodeSource> source;     // per superpixel
  std::vector<std::int32_t> node_labels;
  Mat<float> z;                       // empty when training was skipped
  GatModel<float> model;              // trained parameters, when trained
  double final_loss = 0.0;
  bool trained = false;
  bool diverged = false;
};

struct CorrectOptions {
  TrainConfig train;
  std::uint32_t heads = 8, d_hidden = 8, d_att = 8;
  bool trust_gat_everywhere = false;
};

// Train on the seeded superpixels, predict the rest, and project labels
// back to pixels. Seeded superpixels keep their embedded label unless
// trust_gat_everywhere is set. Training is skipped when every superpixel
// is seeded or only one class is seeded. A diverged run falls back to the
// initial labels for unseeded superpixels and flags the result.
CorrectionResult correct_image(const ImageGraph& graph, const NodeFeatures& features,
                               const NodeLabelAssignment& seeds,
                               const SuperpixelPartition& partition,
                               std::uint32_t num_classes, const CorrectOptions& opt,
                               const LabelMap* init_labels = nullptr);

struct ManifestRow {
  std::string id;
  std::filesystem::path image, scores, probs, gt;
  std::string features;  // path or "HANDCRAFTED"
  std::vector<std::uint32_t> relevant;
  bool has_gt = false;
};

// TSV columns: id, image.ppm, scores.lmt, probs.lmt,
// features.lmt|HANDCRAFTED, relevant classes (comma list), optional
// gt.pgm. Relative paths resolve against the manifest directory. Rows
// come back sorted by id.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

struct ImageSummary {
  std::string id;
  std::string status = "ok";  // or the error text
  std::uint32_t nodes = 0;
  std::uint32_t seeded = 0;
  double final_loss = 0.0;
  bool trained = false;
  bool diverged = false;
  // metrics when ground truth is present, else -1
  double corruption = -1.0;
  double init_accuracy = -1.0, corrected_accuracy = -1.0;
  double init_miou = -1.0, corrected_miou = -1.0;
  double seed_precision = -1.0, seed_coverage = -1.0;
};

struct PipelineSummary {
  double theta = 0.0;
  bool theta_auto = false;
  std::vector<ImageSummary> images;  // manifest order (sorted by id)
  std::size_t failures = 0;
};

// Full per-image correction over a manifest: label assignment, loss-based
// clean detection (threshold from config or selected against ground
// truth), superpixels, graph, GAT correction, artifact and summary
// output. Images run on a bounded worker pool; any per-image failure is
// recorded and the rest continue.
PipelineSummary run_pipeline(const std::filesystem::path& manifest_path,
                             const PipelineConfig& config,
                             const std::filesystem::path& outdir);

void write_summary(const PipelineSummary& s, const std::filesystem::path& path);

}  // namespace labelmend
