#include "labelmend/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "labelmend/config.hpp"
#include "labelmend/eqcore.hpp"
#include "labelmend/error.hpp"
#include "labelmend/rng.hpp"

namespace labelmend {

namespace {

bool inside_shape(const SceneShape& s, double x, double y) {
  const double nx = (x - s.cx) / s.rx;
  const double ny = (y - s.cy) / s.ry;
  switch (s.kind) {
    case ShapeKind::kEllipse:
      return nx * nx + ny * ny <= 1.0;
    case ShapeKind::kRect:
      return std::abs(x - s.cx) <= s.rx && std::abs(y - s.cy) <= s.ry;
    case ShapeKind::kBlob: {
      const double r2 = nx * nx + ny * ny;
      if (r2 > 1.69) return false;  // wobble never exceeds 1.3x
      const double phi = std::atan2(ny, nx);
      const double r = 1.0 + 0.3 * std::sin(3.0 * phi + s.phase);
      return r2 <= r * r;
    }
  }
  return false;
}

double shape_extent(const SceneShape& s) {
  return s.kind == ShapeKind::kBlob ? 1.3 : 1.0;
}

void check_in_canvas(const SceneSpec& spec, const SceneShape& s) {
  const double ext = shape_extent(s);
  if (s.cx - s.rx * ext < 0 || s.cx + s.rx * ext > spec.width - 1 ||
      s.cy - s.ry * ext < 0 || s.cy + s.ry * ext > spec.height - 1)
    raise(Errc::shape_out_of_canvas, "shape exceeds canvas bounds");
  if (s.cls == 0 || s.cls >= spec.num_classes)
    raise(Errc::index_out_of_range, "shape class outside foreground range");
}

// Chebyshev (square window) morphology; radius 0 is the identity.
std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& mask,
                                 std::uint32_t h, std::uint32_t w, int radius) {
  if (radius <= 0) return mask;
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
      const std::uint32_t y0 = y >= static_cast<std::uint32_t>(radius) ? y - radius : 0;
      const std::uint32_t x0 = x >= static_cast<std::uint32_t>(radius) ? x - radius : 0;
      const std::uint32_t y1 = std::min(y + radius, h - 1);
      const std::uint32_t x1 = std::min(x + radius, w - 1);
      for (std::uint32_t yy = y0; yy <= y1; ++yy)
        for (std::uint32_t xx = x0; xx <= x1; ++xx)
          out[static_cast<std::size_t>(yy) * w + xx] = 1;
    }
  return out;
}

std::vector<std::uint8_t> erode(const std::vector<std::uint8_t>& mask,
                                std::uint32_t h, std::uint32_t w, int radius) {
  if (radius <= 0) return mask;
  std::vector<std::uint8_t> inv(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = mask[i] ? 0 : 1;
  const auto grown = dilate(inv, h, w, radius);
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = grown[i] ? 0 : 1;
  return out;
}

std::vector<std::uint8_t> shift_x(const std::vector<std::uint8_t>& mask,
                                  std::uint32_t h, std::uint32_t w, int dx) {
  if (dx == 0) return mask;
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const long long sx = static_cast<long long>(x) - dx;
      if (sx < 0 || sx >= static_cast<long long>(w)) continue;
      out[static_cast<std::size_t>(y) * w + x] =
          mask[static_cast<std::size_t>(y) * w + sx];
    }
  return out;
}

void flip_tiles(std::vector<std::uint8_t>& mask, std::uint32_t h, std::uint32_t w,
                double fraction, Rng& rng) {
  if (fraction <= 0) return;
  constexpr std::uint32_t kTile = 4;
  for (std::uint32_t ty = 0; ty < h; ty += kTile)
    for (std::uint32_t tx = 0; tx < w; tx += kTile) {
      if (rng.next_double() >= fraction) continue;
      for (std::uint32_t y = ty; y < std::min(ty + kTile, h); ++y)
        for (std::uint32_t x = tx; x < std::min(tx + kTile, w); ++x) {
          auto& v = mask[static_cast<std::size_t>(y) * w + x];
          v = v ? 0 : 1;
        }
    }
}

std::vector<float> box_blur5(const std::vector<std::uint8_t>& mask, std::uint32_t h,
                             std::uint32_t w) {
  std::vector<float> out(mask.size());
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      int sum = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const long long yy = static_cast<long long>(y) + dy;
          const long long xx = static_cast<long long>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          sum += mask[static_cast<std::size_t>(yy) * w + xx];
        }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(sum) / 25.f;
    }
  return out;
}

}  // namespace

Scene generate(const SceneSpec& spec) {
  if (spec.height == 0 || spec.width == 0) raise(Errc::empty_image, "zero canvas");
  if (spec.num_classes < 2 || spec.num_classes > 255)
    raise(Errc::config_error, "num_classes must be in [2,255]");
  for (const auto& s : spec.shapes) check_in_canvas(spec, s);

  const std::uint32_t h = spec.height, w = spec.width;
  const std::size_t npx = static_cast<std::size_t>(h) * w;

  Scene scene;
  scene.gt = LabelMap(h, w, spec.num_classes, 0);
  scene.image = ImageRGB(h, w);
  for (std::size_t i = 0; i < npx; ++i) {
    scene.image.r[i] = spec.background_color[0];
    scene.image.g[i] = spec.background_color[1];
    scene.image.b[i] = spec.background_color[2];
  }
  for (const auto& s : spec.shapes) {
    for (std::uint32_t y = 0; y < h; ++y)
      for (std::uint32_t x = 0; x < w; ++x) {
        if (!inside_shape(s, x, y)) continue;
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        scene.gt.labels[i] = static_cast<std::uint8_t>(s.cls);
        scene.image.r[i] = s.color[0];
        scene.image.g[i] = s.color[1];
        scene.image.b[i] = s.color[2];
      }
  }

  Rng rng(spec.seed);
  if (spec.color_jitter > 0.f) {
    for (std::size_t i = 0; i < npx; ++i) {
      const float jr = static_cast<float>(rng.uniform(-spec.color_jitter, spec.color_jitter));
      const float jg = static_cast<float>(rng.uniform(-spec.color_jitter, spec.color_jitter));
      const float jb = static_cast<float>(rng.uniform(-spec.color_jitter, spec.color_jitter));
      scene.image.r[i] = std::clamp(scene.image.r[i] + jr, 0.f, 1.f);
      scene.image.g[i] = std::clamp(scene.image.g[i] + jg, 0.f, 1.f);
      scene.image.b[i] = std::clamp(scene.image.b[i] + jb, 0.f, 1.f);
    }
  }

  // score planes from the corrupted class masks
  scene.scores.num_classes = spec.num_classes;
  scene.scores.height = h;
  scene.scores.width = w;
  scene.scores.planes.assign(static_cast<std::size_t>(spec.num_classes) * npx, 0.f);
  for (const auto& s : spec.shapes)
    if (std::find(scene.scores.relevant.begin(), scene.scores.relevant.end(), s.cls) ==
        scene.scores.relevant.end())
      scene.scores.relevant.push_back(s.cls);
  std::sort(scene.scores.relevant.begin(), scene.scores.relevant.end());

  for (std::uint32_t cls : scene.scores.relevant) {
    std::vector<std::uint8_t> mask(npx, 0);
    for (std::size_t i = 0; i < npx; ++i) mask[i] = scene.gt.labels[i] == cls ? 1 : 0;
    mask = dilate(mask, h, w, spec.noise.dilate_px);
    mask = erode(mask, h, w, spec.noise.erode_px);
    mask = shift_x(mask, h, w, spec.noise.shift_px);
    flip_tiles(mask, h, w, spec.noise.flip_fraction, rng);
    std::vector<float> plane = box_blur5(mask, h, w);
    float* dst = scene.scores.plane(cls);
    std::copy(plane.begin(), plane.end(), dst);
    if (!clamp_and_normalize(dst, npx)) scene.scores.degenerate.push_back(cls);
  }

  // what the pipeline's default assignment will label each pixel, used to
  // split the fidelity of the synthetic clean model
  const LabelMap est_init = assign_labels(scene.scores, 0.05f);

  const std::uint32_t c = spec.num_classes;
  std::vector<float> probs(static_cast<std::size_t>(c) * npx);
  for (std::size_t p = 0; p < npx; ++p) {
    const bool right = est_init.labels[p] == scene.gt.labels[p];
    const double fid = right ? spec.fidelity.correct : spec.fidelity.incorrect;
    const double base = (1.0 - fid) / c;
    for (std::uint32_t ch = 0; ch < c; ++ch)
      probs[static_cast<std::size_t>(ch) * npx + p] = static_cast<float>(base);
    probs[static_cast<std::size_t>(scene.gt.labels[p]) * npx + p] =
        static_cast<float>(fid + base);
  }
  scene.probs = TensorF32({c, h, w}, std::move(probs));
  return scene;
}

double corruption_rate(const LabelMap& init, const LabelMap& gt) {
  if (init.size() != gt.size() || init.width != gt.width)
    raise(Errc::shape_mismatch, "label maps differ in extent");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < init.size(); ++i)
    diff += init.labels[i] != gt.labels[i] ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(init.size());
}

std::vector<SceneSpec> make_suite(const SuiteSpec& suite) {
  if (suite.num_classes < 2)
    raise(Errc::config_error, "suite needs at least one foreground class");
  std::vector<SceneSpec> specs;
  specs.reserve(suite.images);
  const Palette palette = default_palette(suite.num_classes);
  for (std::uint32_t idx = 0; idx < suite.images; ++idx) {
    SceneSpec spec;
    spec.height = suite.height;
    spec.width = suite.width;
    spec.num_classes = suite.num_classes;
    spec.noise = suite.noise;
    spec.fidelity = suite.fidelity;
    spec.seed = suite.seed * 0x9e3779b97f4a7c15ULL + idx + 1;
    Rng rng(spec.seed ^ 0x5eedULL);

    // anchor shapes on a jittered ring so they stay apart and in-canvas
    const double margin = 1.3 * suite.max_radius + 2;
    for (std::uint32_t k = 0; k < suite.shapes_per_image; ++k) {
      SceneShape s;
      s.kind = static_cast<ShapeKind>(rng.next_below(3));
      s.cls = 1 + (k % (suite.num_classes - 1));
      const double angle =
          2.0 * 3.14159265358979 * (k + rng.uniform(0.0, 0.35)) / suite.shapes_per_image;
      const double ring = 0.55 + 0.2 * rng.next_double();
      const double cx0 = suite.width / 2.0, cy0 = suite.height / 2.0;
      s.cx = cx0 + std::cos(angle) * (cx0 - margin) * ring;
      s.cy = cy0 + std::sin(angle) * (cy0 - margin) * ring;
      s.rx = rng.uniform(suite.min_radius, suite.max_radius);
      s.ry = rng.uniform(suite.min_radius, suite.max_radius);
      s.phase = rng.uniform(0.0, 6.28);
      const auto& rgb = palette[s.cls];
      // per-image tint keeps scenes from being carbon copies
      s.color[0] = std::clamp(rgb[0] / 255.f + static_cast<float>(rng.uniform(-0.06, 0.06)), 0.05f, 1.f);
      s.color[1] = std::clamp(rgb[1] / 255.f + static_cast<float>(rng.uniform(-0.06, 0.06)), 0.05f, 1.f);
      s.color[2] = std::clamp(rgb[2] / 255.f + static_cast<float>(rng.uniform(-0.06, 0.06)), 0.05f, 1.f);
      spec.shapes.push_back(s);
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

SuiteSpec parse_suite_file(const std::filesystem::path& path) {
  SuiteSpec s;
  for (const auto& [key, value] : read_kv_file(path)) {
    if (key == "suite.images") s.images = parse_u32(key, value);
    else if (key == "suite.seed") s.seed = parse_u64(key, value);
    else if (key == "canvas.height") s.height = parse_u32(key, value);
    else if (key == "canvas.width") s.width = parse_u32(key, value);
    else if (key == "canvas.classes") s.num_classes = parse_u32(key, value);
    else if (key == "shapes.count") s.shapes_per_image = parse_u32(key, value);
    else if (key == "shapes.min_radius") s.min_radius = parse_f64(key, value);
    else if (key == "shapes.max_radius") s.max_radius = parse_f64(key, value);
    else if (key == "noise.dilate") s.noise.dilate_px = static_cast<int>(parse_u32(key, value));
    else if (key == "noise.erode") s.noise.erode_px = static_cast<int>(parse_u32(key, value));
    else if (key == "noise.shift") s.noise.shift_px = static_cast<int>(parse_u32(key, value));
    else if (key == "noise.flip") s.noise.flip_fraction = parse_f64(key, value);
    else if (key == "fidelity.correct") s.fidelity.correct = parse_f64(key, value);
    else if (key == "fidelity.incorrect") s.fidelity.incorrect = parse_f64(key, value);
    else raise(Errc::config_error, "unknown scene key: " + key);
  }
  return s;
}

std::filesystem::path write_suite(const SuiteSpec& suite,
                                  const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  const auto specs = make_suite(suite);
  std::string manifest;
  for (std::uint32_t i = 0; i < specs.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "img%04u", i);
    const Scene scene = generate(specs[i]);
    write_image_ppm(scene.image, outdir / (std::string(id) + ".ppm"));
    write_tensor(scores_to_tensor(scene.scores), outdir / (std::string(id) + "_scores.lmt"));
    write_tensor(scene.probs, outdir / (std::string(id) + "_probs.lmt"));
    write_label_map(scene.gt, outdir / (std::string(id) + "_gt.pgm"));
    std::string relevant;
    for (std::uint32_t c : scene.scores.relevant) {
      if (!relevant.empty()) relevant += ',';
      relevant += std::to_string(c);
    }
    manifest += std::string(id) + "\t" + id + ".ppm\t" + id + "_scores.lmt\t" + id +
                "_probs.lmt\tHANDCRAFTED\t" + relevant + "\t" + id + "_gt.pgm\n";
  }
  const auto manifest_path = outdir / "manifest.tsv";
  std::ofstream out(manifest_path);
  if (!out) raise(Errc::io_failure, "cannot write " + manifest_path.string());
  out << manifest;
  return manifest_path;
}

}  // namespace labelmend
