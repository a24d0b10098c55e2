#include "labelmend/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "labelmend/cam.hpp"
#include "labelmend/error.hpp"
#include "labelmend/eval.hpp"
#include "labelmend/log.hpp"
#include "labelmend/rng.hpp"
#include "labelmend/synth.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace labelmend {

std::uint32_t NodeLabelAssignment::distinct_classes() const {
  std::vector<std::int32_t> seen;
  for (auto l : labels)
    if (l >= 0 && std::find(seen.begin(), seen.end(), l) == seen.end())
      seen.push_back(l);
  return static_cast<std::uint32_t>(seen.size());
}

NodeLabelAssignment embed_clean(const CleanMask& clean, const LabelMap& init_labels,
                                const SuperpixelPartition& partition,
                                std::uint32_t num_classes) {
  if (clean.clean.size() != init_labels.size() ||
      init_labels.size() != partition.assignment.size())
    raise(Errc::shape_mismatch, "mask, labels, and partition differ in extent");

  NodeLabelAssignment out;
  out.labels.assign(partition.count, -1);
  out.vote_margin.assign(partition.count, 0.f);

  Mat<std::uint32_t> votes(partition.count, num_classes);
  std::vector<std::uint32_t> totals(partition.count, 0);
  for (std::size_t p = 0; p < clean.clean.size(); ++p) {
    if (!clean.clean[p]) continue;
    const std::uint8_t label = init_labels.labels[p];
    if (label == kUnlabeled) continue;  // unlabeled pixels carry no vote
    ++votes.at(partition.assignment[p], label);
    ++totals[partition.assignment[p]];
  }
  for (std::uint32_t sp = 0; sp < partition.count; ++sp) {
    if (totals[sp] == 0) continue;
    std::uint32_t best = 0, best_c = 0;
    for (std::uint32_t c = 0; c < num_classes; ++c) {
      if (votes.at(sp, c) > best) {  // strict: ties stay at the lowest index
        best = votes.at(sp, c);
        best_c = c;
      }
    }
    out.labels[sp] = static_cast<std::int32_t>(best_c);
    out.vote_margin[sp] = static_cast<float>(best) / static_cast<float>(totals[sp]);
    ++out.seeded_count;
  }
  return out;
}

namespace {

LabelMap project_to_pixels(const std::vector<std::int32_t>& node_labels,
                           const SuperpixelPartition& partition,
                           std::uint32_t num_classes) {
  LabelMap out(partition.height, partition.width, num_classes);
  for (std::size_t p = 0; p < partition.assignment.size(); ++p)
    out.labels[p] = static_cast<std::uint8_t>(node_labels[partition.assignment[p]]);
  return out;
}

std::int32_t argmax_row(const Mat<float>& z, std::uint32_t row) {
  std::uint32_t best = 0;
  float best_v = z.at(row, 0);
  for (std::uint32_t c = 1; c < z.cols; ++c)
    if (z.at(row, c) > best_v) {
      best_v = z.at(row, c);
      best = c;
    }
  return static_cast<std::int32_t>(best);
}

}  // namespace

CorrectionResult correct_image(const ImageGraph& graph, const NodeFeatures& features,
                               const NodeLabelAssignment& seeds,
                               const SuperpixelPartition& partition,
                               std::uint32_t num_classes, const CorrectOptions& opt,
                               const LabelMap* init_labels) {
  if (graph.n != partition.count || seeds.labels.size() != graph.n)
    raise(Errc::shape_mismatch, "graph, seeds, and partition disagree");
  if (seeds.seeded_count == 0)
    raise(Errc::empty_seed_set, "no superpixel overlaps a clean pixel");

  CorrectionResult result;
  result.node_labels = seeds.labels;
  result.source.assign(graph.n, NodeSource::kSeeded);

  const std::uint32_t distinct = seeds.distinct_classes();
  const bool all_seeded = seeds.seeded_count == graph.n;

  if (distinct == 1) {
    // one seeded class: a softmax over it is ill-posed, assign uniformly
    std::int32_t the_class = 0;
    for (auto l : seeds.labels)
      if (l >= 0) {
        the_class = l;
        break;
      }
    for (std::uint32_t i = 0; i < graph.n; ++i) {
      if (result.node_labels[i] < 0) {
        result.node_labels[i] = the_class;
        result.source[i] = NodeSource::kPredicted;
      }
    }
    result.corrected = project_to_pixels(result.node_labels, partition, num_classes);
    return result;
  }
  if (all_seeded) {
    result.corrected = project_to_pixels(result.node_labels, partition, num_classes);
    return result;
  }

  const Csr a = adjacency_csr(graph);
  try {
    GatModel<float> model =
        init_model<float>(static_cast<std::uint32_t>(features.cols), opt.d_hidden,
                          opt.d_att, opt.heads, num_classes, opt.train.seed,
                          opt.train.init_scale);
    TrainOutcome<float> outcome = train_gat(model, features, a, seeds.labels, opt.train);
    result.trained = true;
    result.final_loss = outcome.best_loss;
    result.z = std::move(outcome.z);
    result.model = std::move(outcome.model);
    for (std::uint32_t i = 0; i < graph.n; ++i) {
      const bool seeded = seeds.labels[i] >= 0;
      if (seeded && !opt.trust_gat_everywhere) continue;  // keep clean evidence
      result.node_labels[i] = argmax_row(result.z, i);
      result.source[i] = NodeSource::kPredicted;
    }
  } catch (const Error& e) {
    if (e.code() != Errc::diverged_loss) throw;
    result.diverged = true;
    log_warn("training diverged, keeping initial labels for unseeded superpixels");
    if (init_labels == nullptr)
      raise(Errc::diverged_loss, "diverged and no initial labels to fall back on");
    // per-pixel fallback: seeded superpixels keep the embedded label,
    // everything else keeps its initial label
    LabelMap out(partition.height, partition.width, num_classes);
    for (std::size_t p = 0; p < partition.assignment.size(); ++p) {
      const std::uint32_t sp = partition.assignment[p];
      if (seeds.labels[sp] >= 0) {
        out.labels[p] = static_cast<std::uint8_t>(seeds.labels[sp]);
      } else {
        const std::uint8_t init = init_labels->labels[p];
        out.labels[p] = init == kUnlabeled ? 0 : init;
      }
    }
    for (std::uint32_t i = 0; i < graph.n; ++i)
      if (seeds.labels[i] < 0) result.source[i] = NodeSource::kPredicted;
    result.corrected = std::move(out);
    return result;
  }

  result.corrected = project_to_pixels(result.node_labels, partition, num_classes);
  return result;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_failure, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 6 || cols.size() > 7)
      raise(Errc::config_error, path.string() + ":" + std::to_string(lineno) +
                                    ": expected 6 or 7 tab-separated columns");
    ManifestRow row;
    row.id = cols[0];
    row.image = base / cols[1];
    row.scores = base / cols[2];
    row.probs = base / cols[3];
    row.features = cols[4];
    if (row.features != "HANDCRAFTED")
      row.features = (base / cols[4]).string();
    std::stringstream rs(cols[5]);
    std::string tok;
    while (std::getline(rs, tok, ','))
      if (!tok.empty()) row.relevant.push_back(parse_u32("relevant", tok));
    if (cols.size() == 7 && !cols[6].empty() && cols[6] != "-") {
      row.gt = base / cols[6];
      row.has_gt = true;
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].id == rows[i - 1].id)
      raise(Errc::config_error,
            "duplicate manifest id '" + rows[i].id + "' would collide in the output");
  return rows;
}

namespace {

struct LoadedImage {
  ImageRGB image;
  ScoreMapSet scores;
  TensorF32 probs;
  std::optional<LabelMap> gt;
  std::uint32_t num_classes = 0;
};

LoadedImage load_row(const ManifestRow& row) {
  LoadedImage li;
  li.image = read_image_ppm(row.image);
  li.scores = scores_from_tensor(read_tensor(row.scores), row.relevant);
  li.probs = read_tensor(row.probs);
  validate_probability_map(li.probs);
  li.num_classes = li.scores.num_classes;
  if (li.probs.dim(0) != li.num_classes)
    raise(Errc::shape_mismatch, "probability classes differ from score classes");
  if (li.scores.height != li.image.height || li.scores.width != li.image.width)
    raise(Errc::shape_mismatch, "score extent differs from image");
  if (row.has_gt) li.gt = read_label_map(row.gt, li.num_classes);
  return li;
}

}  // namespace

PipelineSummary run_pipeline(const std::filesystem::path& manifest_path,
                             const PipelineConfig& config,
                             const std::filesystem::path& outdir) {
  const auto rows = read_manifest(manifest_path);
  std::filesystem::create_directories(outdir);

  PipelineSummary summary;
  summary.images.resize(rows.size());
  if (rows.empty()) {
    write_summary(summary, outdir / "summary.tsv");
    return summary;
  }

  const std::vector<double> grid = config.theta_grid();
  double theta;
  if (config.theta) {
    theta = *config.theta;
  } else {
    // pick the threshold against the strongly-annotated rows
    summary.theta_auto = true;
    ThetaCounts total;
    std::size_t with_gt = 0;
    for (const auto& row : rows) {
      if (!row.has_gt) continue;
      ++with_gt;
      const LoadedImage li = load_row(row);
      const LabelMap init = assign_labels(li.scores, config.bg_thresh, config.fg_thresh);
      const TensorF32 losses = pixel_loss(li.probs, init);
      total.add(theta_counts(losses, init, *li.gt, grid));
    }
    if (with_gt == 0)
      raise(Errc::missing_ground_truth,
            "theta is 'auto' but no manifest row has ground truth");
    const ThetaReport report = finalize_theta(grid, total, config.target_precision);
    if (report.unmet_precision)
      log_warn("no threshold candidate met the precision target; using the smallest");
    theta = report.chosen;
  }
  summary.theta = theta;

  int workers = config.workers;
#ifdef _OPENMP
  if (workers <= 0) workers = omp_get_max_threads();
#else
  workers = 1;
#endif

#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (long long idx = 0; idx < static_cast<long long>(rows.size()); ++idx) {
    const ManifestRow& row = rows[idx];
    ImageSummary& img = summary.images[idx];
    img.id = row.id;
    try {
      const LoadedImage li = load_row(row);
      const LabelMap init = assign_labels(li.scores, config.bg_thresh, config.fg_thresh);
      const TensorF32 losses = pixel_loss(li.probs, init);
      const CleanMask clean = detect_clean(losses, theta);

      SlicOptions slic_opt;
      slic_opt.target_count =
          std::min<std::uint32_t>(config.superpixel_count,
                                  static_cast<std::uint32_t>(init.size()));
      slic_opt.compactness = config.compactness;
      slic_opt.iters = config.slic_iters;
      const SuperpixelPartition part = slic(li.image, slic_opt);

      NodeFeatures features =
          row.features == "HANDCRAFTED"
              ? handcrafted_features(li.image, part)
              : pool_features(read_tensor(row.features), part);
      const ImageGraph graph = build_graph(features, part, config.edge_symmetrize);

      const NodeLabelAssignment seeds =
          embed_clean(clean, init, part, li.num_classes);

      CorrectOptions opt;
      opt.heads = config.gat_heads;
      opt.d_hidden = config.gat_hidden;
      opt.d_att = config.gat_att;
      opt.trust_gat_everywhere = config.trust_gat_everywhere;
      opt.train = config.train_config(config.seed ^ fnv1a64(row.id));
      const CorrectionResult result =
          correct_image(graph, features, seeds, part, li.num_classes, opt, &init);

      write_label_map(init, outdir / (row.id + "_init.pgm"));
      write_label_map(result.corrected, outdir / (row.id + "_corrected.pgm"));
      write_bytes(write_color_overlay(result.corrected, default_palette(li.num_classes)),
                  outdir / (row.id + "_overlay.ppm"));
      if (config.save_models && result.trained)
        write_model(result.model, outdir / (row.id + "_model.lmw"));

      img.nodes = part.count;
      img.seeded = seeds.seeded_count;
      img.final_loss = result.final_loss;
      img.trained = result.trained;
      img.diverged = result.diverged;
      if (li.gt) {
        img.corruption = corruption_rate(init, *li.gt);
        const bool init_unbanded =
            std::find(init.labels.begin(), init.labels.end(), kUnlabeled) ==
            init.labels.end();
        if (init_unbanded) {
          const IoUReport before = iou(init, *li.gt);
          img.init_accuracy = before.pixel_accuracy;
          img.init_miou = before.mean_iou;
        }
        const IoUReport after = iou(result.corrected, *li.gt);
        img.corrected_accuracy = after.pixel_accuracy;
        img.corrected_miou = after.mean_iou;
        const SeedQuality sq = seed_quality(clean, init, *li.gt);
        img.seed_precision = sq.precision;
        img.seed_coverage = sq.coverage;
      }
    } catch (const std::exception& e) {
      img.status = e.what();
    }
  }

  for (const auto& img : summary.images)
    if (img.status != "ok") ++summary.failures;
  write_summary(summary, outdir / "summary.tsv");
  return summary;
}

void write_summary(const PipelineSummary& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::io_failure, "cannot write " + path.string());
  out << "# theta=" << s.theta << (s.theta_auto ? " (auto)" : "") << "\n";
  out << "id\tstatus\tnodes\tseeded\ttrained\tdiverged\tfinal_loss\tcorruption\t"
         "init_acc\tcorr_acc\tinit_miou\tcorr_miou\tseed_precision\tseed_coverage\n";
  for (const auto& img : s.images) {
    out << img.id << '\t' << img.status << '\t' << img.nodes << '\t' << img.seeded
        << '\t' << (img.trained ? 1 : 0) << '\t' << (img.diverged ? 1 : 0) << '\t'
        << img.final_loss << '\t' << img.corruption << '\t' << img.init_accuracy
        << '\t' << img.corrected_accuracy << '\t' << img.init_miou << '\t'
        << img.corrected_miou << '\t' << img.seed_precision << '\t'
        << img.seed_coverage << '\n';
  }
}

}  // namespace labelmend
