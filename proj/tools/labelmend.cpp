#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "labelmend/cam.hpp"
#include "labelmend/config.hpp"
#include "labelmend/corrector.hpp"
#include "labelmend/detector.hpp"
#include "labelmend/error.hpp"
#include "labelmend/eval.hpp"
#include "labelmend/graph.hpp"
#include "labelmend/log.hpp"
#include "labelmend/slic.hpp"
#include "labelmend/synth.hpp"
#include "labelmend/tensor.hpp"

namespace fs = std::filesystem;
using namespace labelmend;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::uint32_t> parse_class_list(const std::string& s) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(parse_u32("relevant", tok));
  return out;
}

int cmd_label(const std::string& features_path, const std::string& weights_path,
              const std::string& relevant_csv, double bg, double fg,
              const std::string& out_path, const std::string& scores_out) {
  const TensorF32 features = read_tensor(features_path);
  const TensorF32 wt = read_tensor(weights_path);
  if (wt.dims.size() != 2) raise(Errc::shape_mismatch, "weights must be [C-1,K]");
  ClassifierWeights weights;
  weights.w = Mat<float>(wt.dim(0), wt.dim(1));
  weights.w.v = wt.data;
  const ScoreMapSet scores =
      compute_cam(features, weights, parse_class_list(relevant_csv));
  for (auto c : scores.degenerate)
    log_warn("activation plane for class " + std::to_string(c) +
             " is constant; zeroed");
  std::optional<float> fg_opt;
  if (fg > 0) fg_opt = static_cast<float>(fg);
  const LabelMap labels = assign_labels(scores, static_cast<float>(bg), fg_opt);
  write_label_map(labels, out_path);
  if (!scores_out.empty()) write_tensor(scores_to_tensor(scores), scores_out);
  return 0;
}

int cmd_detect(const std::string& probs_path, const std::string& init_path,
               double theta, const std::string& out_path) {
  const TensorF32 probs = read_tensor(probs_path);
  validate_probability_map(probs);
  const LabelMap init = read_label_map(init_path, probs.dim(0));
  const TensorF32 losses = pixel_loss(probs, init);
  const CleanMask clean = detect_clean(losses, theta);
  if (clean.empty_warning) log_warn("no pixel fell below theta; clean set is empty");
  write_clean_mask(clean, out_path);
  return 0;
}

int cmd_select_theta(const std::string& manifest_path, double target,
                     const std::string& report_path, double grid_min,
                     double grid_max, int grid_size) {
  std::ifstream in(manifest_path);
  if (!in) raise(Errc::io_failure, "cannot open manifest " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  struct Row {
    std::string id;
    fs::path probs, init, gt;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string id, probs, init, gt;
    if (!std::getline(ss, id, '\t') || !std::getline(ss, probs, '\t') ||
        !std::getline(ss, init, '\t') || !std::getline(ss, gt, '\t'))
      raise(Errc::config_error, "manifest rows need: id, probs, init, gt");
    rows.push_back({id, base / probs, base / init, base / gt});
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.id < b.id; });

  PipelineConfig grid_cfg;
  grid_cfg.grid_min = grid_min;
  grid_cfg.grid_max = grid_max;
  grid_cfg.grid_size = grid_size;
  const std::vector<double> grid = grid_cfg.theta_grid();

  ThetaCounts total;
  for (const Row& row : rows) {
    const TensorF32 probs = read_tensor(row.probs);
    validate_probability_map(probs);
    const LabelMap init = read_label_map(row.init, probs.dim(0));
    const LabelMap gt = read_label_map(row.gt, probs.dim(0));
    const TensorF32 losses = pixel_loss(probs, init);
    total.add(theta_counts(losses, init, gt, grid));
  }
  if (rows.empty()) raise(Errc::missing_ground_truth, "manifest has no rows");
  const ThetaReport report = finalize_theta(grid, total, target);

  std::ofstream out(report_path);
  if (!out) raise(Errc::io_failure, "cannot write " + report_path);
  out << "# chosen=" << report.chosen << " target_precision=" << target
      << (report.unmet_precision ? " UNMET" : "") << "\n";
  out << "theta\tprecision\tselected_fraction\tselected\n";
  for (const auto& c : report.candidates)
    out << c.theta << '\t' << c.precision << '\t' << c.selected_fraction << '\t'
        << c.selected << '\n';
  std::cout << "chosen theta: " << report.chosen
            << (report.unmet_precision ? " (precision target unmet)" : "") << "\n";
  return 0;
}

int cmd_superpixels(const std::string& image_path, std::uint32_t count,
                    double compactness, int iters, const std::string& out_path) {
  const ImageRGB image = read_image_ppm(image_path);
  SlicOptions opt;
  opt.target_count = count;
  opt.compactness = static_cast<float>(compactness);
  opt.iters = iters;
  const SuperpixelPartition part = slic(image, opt);
  write_tensor(partition_to_tensor(part), out_path);
  std::cout << part.count << " superpixels\n";
  return 0;
}

int cmd_graph(const std::string& image_path, const std::string& sp_path,
              const std::string& features_path, bool handcrafted,
              const std::string& symmetrize, const std::string& out_path) {
  if (handcrafted != features_path.empty())
    raise(Errc::usage_error, "pass exactly one of --features or --handcrafted");
  const ImageRGB image = read_image_ppm(image_path);
  const SuperpixelPartition part = partition_from_tensor(read_tensor(sp_path));
  if (part.height != image.height || part.width != image.width)
    raise(Errc::shape_mismatch, "superpixel map extent differs from image");
  const NodeFeatures v = handcrafted
                             ? handcrafted_features(image, part)
                             : pool_features(read_tensor(features_path), part);
  EdgeSymmetrize mode = EdgeSymmetrize::kOr;
  if (symmetrize == "and") mode = EdgeSymmetrize::kAnd;
  else if (symmetrize != "or")
    raise(Errc::usage_error, "--edge-symmetrize must be 'or' or 'and'");
  const ImageGraph g = build_graph(v, part, mode);
  write_graph(g, v, out_path);
  std::size_t kept = 0;
  for (const auto& e : g.edges) kept += e.keep;
  std::cout << g.n << " nodes, " << g.edges.size() << " adjacent pairs, " << kept
            << " kept, gamma " << g.gamma << "\n";
  return 0;
}

int cmd_correct(const std::string& manifest, const std::string& config_path,
                const std::string& outdir,
                const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = PipelineConfig::from_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      raise(Errc::usage_error, "--set expects key=value, got '" + kv + "'");
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const PipelineSummary summary = run_pipeline(manifest, cfg, outdir);
  std::cout << "theta " << summary.theta << (summary.theta_auto ? " (auto)" : "")
            << ", " << summary.images.size() << " images, " << summary.failures
            << " failures\n";
  return summary.failures == 0 ? 0 : 1;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& report_path, std::uint32_t num_classes,
             bool fixed_classes) {
  struct Pair {
    std::string id;
    fs::path pred, gt;
  };
  std::vector<Pair> pairs;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = "_gt.pgm";
    if (name.size() <= suffix.size() ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    Pair p;
    p.id = name.substr(0, name.size() - suffix.size());
    p.gt = entry.path();
    const fs::path corrected = fs::path(pred_dir) / (p.id + "_corrected.pgm");
    const fs::path plain = fs::path(pred_dir) / (p.id + ".pgm");
    if (fs::exists(corrected)) p.pred = corrected;
    else if (fs::exists(plain)) p.pred = plain;
    else continue;
    pairs.push_back(std::move(p));
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.id < b.id; });
  if (pairs.empty()) {
    log_warn("no prediction/ground-truth pairs found");
    return 1;
  }

  std::ofstream out(report_path);
  if (!out) raise(Errc::io_failure, "cannot write " + report_path);
  out << "id\tpixel_acc\tmean_iou\tper_class_iou\n";
  std::vector<std::uint32_t> class_list;
  if (fixed_classes) {
    if (num_classes == 0)
      raise(Errc::usage_error, "--fixed-classes needs --num-classes");
    for (std::uint32_t c = 0; c < num_classes; ++c) class_list.push_back(c);
  }
  IoUReport total;
  for (const auto& p : pairs) {
    LabelMap pred = read_label_map(p.pred, num_classes ? num_classes : 255);
    LabelMap gt = read_label_map(p.gt, num_classes ? num_classes : 255);
    if (num_classes == 0) {
      std::uint8_t hi = 0;
      for (auto v : pred.labels)
        if (v != kUnlabeled) hi = std::max(hi, v);
      for (auto v : gt.labels)
        if (v != kUnlabeled) hi = std::max(hi, v);
      pred.num_classes = gt.num_classes = static_cast<std::uint32_t>(hi) + 1;
    }
    const IoUReport r = iou(pred, gt);
    total.merge(r);
    const double miou = fixed_classes ? mean_iou_fixed(r, class_list) : r.mean_iou;
    out << p.id << '\t' << r.pixel_accuracy << '\t' << miou << '\t';
    for (std::uint32_t c = 0; c < r.num_classes; ++c)
      out << (c ? "," : "") << r.iou[c];
    out << '\n';
  }
  total.finalize();
  out << "ALL\t" << total.pixel_accuracy << '\t' << total.mean_iou << '\t';
  for (std::uint32_t c = 0; c < total.num_classes; ++c)
    out << (c ? "," : "") << total.iou[c];
  out << '\n';
  std::cout << "aggregate: acc " << total.pixel_accuracy << ", mIoU "
            << total.mean_iou << " over " << pairs.size() << " images\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& outdir) {
  const SuiteSpec suite = parse_suite_file(spec_path);
  const fs::path manifest = write_suite(suite, outdir);
  std::cout << "wrote " << suite.images << " scenes and " << manifest.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy-label detection and graph-based correction pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // label
  auto* label = app.add_subcommand("label", "activation maps -> initial label map");
  std::string features_path, weights_path, relevant_csv, out_path, scores_out;
  double bg = 0.05, fg = 0.0;
  label->add_option("--features", features_path, "feature stack [K,H,W] .lmt")->required();
  label->add_option("--weights", weights_path, "classifier weights [C-1,K] .lmt")->required();
  label->add_option("--relevant", relevant_csv, "comma list of present classes")->required();
  label->add_option("--bg-thresh", bg, "background threshold");
  label->add_option("--fg-thresh", fg, "optional confidence band: below it, unlabeled");
  label->add_option("--out", out_path, "output label map .pgm")->required();
  label->add_option("--scores-out", scores_out, "also write normalized scores .lmt");

  // detect
  auto* detect = app.add_subcommand("detect", "small-loss clean/noisy split");
  std::string probs_path, init_path, clean_out;
  double theta = 0.001;
  detect->add_option("--probs", probs_path, "clean-model probabilities .lmt")->required();
  detect->add_option("--init", init_path, "initial label map .pgm")->required();
  detect->add_option("--theta", theta, "loss threshold");
  detect->add_option("--out", clean_out, "clean mask .pgm")->required();

  // select-theta
  auto* sel = app.add_subcommand("select-theta", "pick theta from annotated images");
  std::string sel_manifest, sel_report;
  double target = 0.97, grid_min = 1e-5, grid_max = 1e-1;
  int grid_size = 40;
  sel->add_option("--manifest", sel_manifest, "TSV: id, probs, init, gt")->required();
  sel->add_option("--target-precision", target, "required selection precision");
  sel->add_option("--grid-min", grid_min, "smallest candidate");
  sel->add_option("--grid-max", grid_max, "largest candidate");
  sel->add_option("--grid-size", grid_size, "candidate count (log-spaced)");
  sel->add_option("--report", sel_report, "per-candidate report .tsv")->required();

  // superpixels
  auto* sp = app.add_subcommand("superpixels", "SLIC over-segmentation");
  std::string sp_image, sp_out;
  std::uint32_t sp_count = 1000;
  double sp_compact = 10.0;
  int sp_iters = 10;
  sp->add_option("--image", sp_image, "input .ppm")->required();
  sp->add_option("--count", sp_count, "target superpixel count");
  sp->add_option("--compactness", sp_compact, "spatial weight m");
  sp->add_option("--iters", sp_iters, "k-means iterations");
  sp->add_option("--out", sp_out, "assignment .lmt")->required();

  // graph
  auto* gr = app.add_subcommand("graph", "superpixel graph construction");
  std::string gr_image, gr_sp, gr_features, gr_sym = "or", gr_out;
  bool gr_handcrafted = false;
  gr->add_option("--image", gr_image, "input .ppm")->required();
  gr->add_option("--superpixels", gr_sp, "assignment .lmt")->required();
  gr->add_option("--features", gr_features, "dense feature stack .lmt");
  gr->add_flag("--handcrafted", gr_handcrafted, "use built-in color features");
  gr->add_option("--edge-symmetrize", gr_sym, "or|and");
  gr->add_option("--out", gr_out, "graph .lmg")->required();

  // correct
  auto* corr = app.add_subcommand("correct", "full detection+correction pipeline");
  std::string corr_manifest, corr_config, corr_outdir;
  std::vector<std::string> corr_sets;
  bool corr_trust = false, corr_save_models = false;
  std::string corr_theta, corr_lr, corr_epochs, corr_wd, corr_patience, corr_init_scale;
  std::string corr_seed, corr_workers;
  corr->add_option("--manifest", corr_manifest, "pipeline manifest .tsv")->required();
  corr->add_option("--config", corr_config, "config file");
  corr->add_option("--outdir", corr_outdir, "output directory")->required();
  corr->add_option("--set", corr_sets, "override: key=value (repeatable)");
  corr->add_option("--theta", corr_theta, "loss threshold or 'auto'");
  corr->add_option("--gat-lr", corr_lr, "learning rate");
  corr->add_option("--gat-epochs", corr_epochs, "training epochs");
  corr->add_option("--gat-weight-decay", corr_wd, "weight decay");
  corr->add_option("--gat-patience", corr_patience, "early-stop patience");
  corr->add_option("--gat-init-scale", corr_init_scale, "parameter init scale");
  corr->add_option("--seed", corr_seed, "global seed");
  corr->add_option("--workers", corr_workers, "worker count (0 = all cores)");
  corr->add_flag("--save-models", corr_save_models, "write per-image checkpoints");
  corr->add_flag("--trust-gat-everywhere", corr_trust,
                 "let predictions overwrite seeded superpixels");

  // eval
  auto* ev = app.add_subcommand("eval", "IoU / accuracy report");
  std::string ev_pred, ev_gt, ev_report;
  std::uint32_t ev_classes = 0;
  ev->add_option("--pred", ev_pred, "directory with predictions")->required();
  ev->add_option("--gt", ev_gt, "directory with <id>_gt.pgm maps")->required();
  ev->add_option("--report", ev_report, "output .tsv")->required();
  ev->add_option("--num-classes", ev_classes, "class count (default: infer)");
  bool ev_fixed = false;
  ev->add_flag("--fixed-classes", ev_fixed,
               "average mIoU over the full class list, not just present classes");

  // synth
  auto* sy = app.add_subcommand("synth", "generate a synthetic scene suite");
  std::string sy_spec, sy_outdir;
  sy->add_option("--spec", sy_spec, "scene suite description file")->required();
  sy->add_option("--outdir", sy_outdir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(label))
      return cmd_label(features_path, weights_path, relevant_csv, bg, fg, out_path,
                       scores_out);
    if (app.got_subcommand(detect))
      return cmd_detect(probs_path, init_path, theta, clean_out);
    if (app.got_subcommand(sel))
      return cmd_select_theta(sel_manifest, target, sel_report, grid_min, grid_max,
                              grid_size);
    if (app.got_subcommand(sp))
      return cmd_superpixels(sp_image, sp_count, sp_compact, sp_iters, sp_out);
    if (app.got_subcommand(gr))
      return cmd_graph(gr_image, gr_sp, gr_features, gr_handcrafted, gr_sym, gr_out);
    if (app.got_subcommand(corr)) {
      std::vector<std::string> overrides = corr_sets;
      if (!corr_theta.empty()) overrides.push_back("theta=" + corr_theta);
      if (!corr_lr.empty()) overrides.push_back("gat.lr=" + corr_lr);
      if (!corr_epochs.empty()) overrides.push_back("gat.epochs=" + corr_epochs);
      if (!corr_wd.empty()) overrides.push_back("gat.weight_decay=" + corr_wd);
      if (!corr_patience.empty()) overrides.push_back("gat.patience=" + corr_patience);
      if (!corr_init_scale.empty())
        overrides.push_back("gat.init_scale=" + corr_init_scale);
      if (!corr_seed.empty()) overrides.push_back("seed=" + corr_seed);
      if (!corr_workers.empty()) overrides.push_back("workers=" + corr_workers);
      if (corr_save_models) overrides.push_back("save_models=true");
      if (corr_trust) overrides.push_back("trust_gat_everywhere=true");
      return cmd_correct(corr_manifest, corr_config, corr_outdir, overrides);
    }
    if (app.got_subcommand(ev))
      return cmd_eval(ev_pred, ev_gt, ev_report, ev_classes, ev_fixed);
    if (app.got_subcommand(sy)) return cmd_synth(sy_spec, sy_outdir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::usage_error || e.code() == Errc::config_error ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
