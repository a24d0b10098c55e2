#include "labelmend/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "labelmend/error.hpp"

namespace labelmend {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::bad_magic: return "BadMagic";
    case Errc::truncated_payload: return "TruncatedPayload";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::io_failure: return "IoFailure";
    case Errc::bad_header: return "BadHeader";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::palette_size_mismatch: return "PaletteSizeMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::empty_relevant_set: return "EmptyRelevantSet";
    case Errc::non_positive_theta: return "NonPositiveTheta";
    case Errc::missing_ground_truth: return "MissingGroundTruth";
    case Errc::empty_candidate_grid: return "EmptyCandidateGrid";
    case Errc::target_too_large: return "TargetTooLarge";
    case Errc::empty_image: return "EmptyImage";
    case Errc::empty_seed_set: return "EmptySeedSet";
    case Errc::diverged_loss: return "DivergedLoss";
    case Errc::shape_out_of_canvas: return "ShapeOutOfCanvas";
    case Errc::config_error: return "ConfigError";
    case Errc::usage_error: return "UsageError";
  }
  return "UnknownError";
}

namespace {

constexpr char kTensorMagic[4] = {'L', 'M', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) raise(Errc::io_failure, "read failed on " + path.string());
  return bytes;
}

}  // namespace

void write_bytes(const std::vector<std::uint8_t>& bytes,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_failure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::io_failure, "write failed on " + path.string());
}

TensorF32::TensorF32(std::vector<std::uint32_t> d, std::vector<float> values)
    : dims(std::move(d)), data(std::move(values)) {
  if (dims.empty() || dims.size() > 4)
    raise(Errc::shape_mismatch, "tensor rank must be 1..4");
  std::size_t n = 1;
  for (auto e : dims) n *= e;
  if (n != data.size()) raise(Errc::shape_mismatch, "dims do not match payload size");
}

LabelMap::LabelMap(std::uint32_t h, std::uint32_t w, std::uint32_t classes,
                   std::uint8_t fill)
    : height(h), width(w), num_classes(classes),
      labels(static_cast<std::size_t>(h) * w, fill) {}

ImageRGB::ImageRGB(std::uint32_t h, std::uint32_t w)
    : height(h), width(w),
      r(static_cast<std::size_t>(h) * w, 0.f),
      g(static_cast<std::size_t>(h) * w, 0.f),
      b(static_cast<std::size_t>(h) * w, 0.f) {}

std::vector<std::uint8_t> encode_tensor(const TensorF32& t) {
  if (t.dims.empty() || t.dims.size() > 4)
    raise(Errc::shape_mismatch, "tensor rank must be 1..4");
  std::vector<std::uint8_t> out;
  out.reserve(5 + 4 * t.dims.size() + 4 * t.data.size());
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  for (float f : t.data) put_f32(out, f);
  return out;
}

TensorF32 decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    raise(Errc::bad_magic, "missing LMT1 magic", 0);
  if (bytes.size() < 5) raise(Errc::truncated_payload, "missing rank byte", 4);
  const std::uint8_t ndim = bytes[4];
  if (ndim < 1 || ndim > 4) raise(Errc::bad_header, "rank out of range 1..4", 4);
  std::size_t off = 5;
  if (bytes.size() < off + 4u * ndim)
    raise(Errc::truncated_payload, "truncated dim list", bytes.size());
  TensorF32 t;
  std::size_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    const std::uint32_t d = get_u32(bytes.data() + off);
    if (d == 0) raise(Errc::bad_header, "zero extent", off);
    t.dims.push_back(d);
    count *= d;
    off += 4;
  }
  if (bytes.size() < off + 4 * count)
    raise(Errc::truncated_payload,
          "payload ends before declared extent", bytes.size());
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = get_f32(bytes.data() + off);
    if (!std::isfinite(f))
      raise(Errc::non_finite_value, "payload value is not finite", off);
    t.data[i] = f;
    off += 4;
  }
  return t;
}

TensorF32 read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file(path));
}

void write_tensor(const TensorF32& t, const std::filesystem::path& path) {
  write_bytes(encode_tensor(t), path);
}

namespace {

// netpbm header scanning: whitespace separates tokens, '#' starts a
// comment running to end of line.
std::size_t skip_ws_comments(const std::vector<std::uint8_t>& b, std::size_t i) {
  while (i < b.size()) {
    const char c = static_cast<char>(b[i]);
    if (c == '#') {
      while (i < b.size() && b[i] != '\n') ++i;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f') {
      ++i;
    } else {
      break;
    }
  }
  return i;
}

std::uint32_t parse_num(const std::vector<std::uint8_t>& b, std::size_t& i) {
  i = skip_ws_comments(b, i);
  if (i >= b.size() || b[i] < '0' || b[i] > '9')
    raise(Errc::bad_header, "expected decimal field", i);
  std::uint64_t v = 0;
  while (i < b.size() && b[i] >= '0' && b[i] <= '9') {
    v = v * 10 + (b[i] - '0');
    if (v > 0xffffffffULL) raise(Errc::bad_header, "field overflows u32", i);
    ++i;
  }
  return static_cast<std::uint32_t>(v);
}

struct PnmHeader {
  std::uint32_t width, height;
  std::size_t raster_offset;
};

PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& b, char kind) {
  if (b.size() < 2 || b[0] != 'P' || static_cast<char>(b[1]) != kind)
    raise(Errc::bad_header, std::string("expected P") + kind + " magic", 0);
  std::size_t i = 2;
  const std::uint32_t w = parse_num(b, i);
  const std::uint32_t h = parse_num(b, i);
  const std::uint32_t maxval = parse_num(b, i);
  if (w == 0 || h == 0) raise(Errc::bad_header, "zero image extent", i);
  if (maxval != 255) raise(Errc::bad_header, "maxval must be 255", i);
  if (i >= b.size()) raise(Errc::truncated_payload, "missing raster", i);
  ++i;  // single whitespace byte after maxval
  return {w, h, i};
}

}  // namespace

LabelMap read_label_map(const std::filesystem::path& path,
                        std::uint32_t num_classes) {
  const auto bytes = read_file(path);
  const PnmHeader hdr = parse_pnm_header(bytes, '5');
  const std::size_t n = static_cast<std::size_t>(hdr.width) * hdr.height;
  if (bytes.size() < hdr.raster_offset + n)
    raise(Errc::truncated_payload, "raster ends early", bytes.size());
  LabelMap m(hdr.height, hdr.width, num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t v = bytes[hdr.raster_offset + i];
    if (v != kUnlabeled && v >= num_classes)
      raise(Errc::index_out_of_range,
            "label " + std::to_string(v) + " >= num_classes",
            hdr.raster_offset + i);
    m.labels[i] = v;
  }
  return m;
}

void write_label_map(const LabelMap& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  const std::string header =
      "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), m.labels.begin(), m.labels.end());
  write_bytes(out, path);
}

ImageRGB read_image_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const PnmHeader hdr = parse_pnm_header(bytes, '6');
  const std::size_t n = static_cast<std::size_t>(hdr.width) * hdr.height;
  if (bytes.size() < hdr.raster_offset + 3 * n)
    raise(Errc::truncated_payload, "raster ends early", bytes.size());
  ImageRGB img(hdr.height, hdr.width);
  const std::uint8_t* p = bytes.data() + hdr.raster_offset;
  for (std::size_t i = 0; i < n; ++i) {
    img.r[i] = static_cast<float>(p[3 * i + 0]) / 255.f;
    img.g[i] = static_cast<float>(p[3 * i + 1]) / 255.f;
    img.b[i] = static_cast<float>(p[3 * i + 2]) / 255.f;
  }
  return img;
}

namespace {
std::uint8_t to_byte(float v) {
  if (v <= 0.f) return 0;
  if (v >= 1.f) return 255;
  return static_cast<std::uint8_t>(v * 255.f + 0.5f);
}
}  // namespace

void write_image_ppm(const ImageRGB& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + 3 * img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.push_back(to_byte(img.r[i]));
    out.push_back(to_byte(img.g[i]));
    out.push_back(to_byte(img.b[i]));
  }
  write_bytes(out, path);
}

std::vector<std::uint8_t> write_color_overlay(const LabelMap& labels,
                                              const Palette& palette) {
  if (palette.size() != labels.num_classes)
    raise(Errc::palette_size_mismatch,
          "palette has " + std::to_string(palette.size()) + " entries, label map has " +
              std::to_string(labels.num_classes) + " classes");
  std::vector<std::uint8_t> out;
  const std::string header = "P6\n" + std::to_string(labels.width) + " " +
                             std::to_string(labels.height) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + 3 * labels.size());
  for (std::uint8_t v : labels.labels) {
    if (v == kUnlabeled) {
      out.push_back(128);
      out.push_back(128);
      out.push_back(128);
    } else {
      out.push_back(palette[v][0]);
      out.push_back(palette[v][1]);
      out.push_back(palette[v][2]);
    }
  }
  return out;
}

Palette default_palette(std::uint32_t num_classes) {
  Palette p(num_classes);
  if (num_classes == 0) return p;
  p[0] = {0, 0, 0};
  for (std::uint32_t c = 1; c < num_classes; ++c) {
    // golden-angle hue steps keep neighbors visually distinct
    const double hue = std::fmod(137.5 * c, 360.0);
    const double s = 0.85, v = 0.95;
    const double hh = hue / 60.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double pq = v * (1 - s), qq = v * (1 - s * f), tq = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = v; g = tq; b = pq; break;
      case 1: r = qq; g = v; b = pq; break;
      case 2: r = pq; g = v; b = tq; break;
      case 3: r = pq; g = qq; b = v; break;
      case 4: r = tq; g = pq; b = v; break;
      default: r = v; g = pq; b = qq; break;
    }
    p[c] = {static_cast<std::uint8_t>(r * 255 + 0.5),
            static_cast<std::uint8_t>(g * 255 + 0.5),
            static_cast<std::uint8_t>(b * 255 + 0.5)};
  }
  return p;
}

}  // namespace labelmend
