#include "labelmend/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "labelmend/eqcore.hpp"
#include "labelmend/error.hpp"

namespace labelmend {

namespace {

// row-major pixel lists per superpixel; scan order fixes the accumulation
// order inside every later per-superpixel reduction
std::vector<std::vector<std::uint32_t>> pixel_lists(const SuperpixelPartition& p) {
  std::vector<std::vector<std::uint32_t>> lists(p.count);
  for (std::uint32_t px = 0; px < p.assignment.size(); ++px)
    lists[p.assignment[px]].push_back(px);
  for (const auto& l : lists)
    if (l.empty()) raise(Errc::index_out_of_range, "partition has an empty superpixel");
  return lists;
}

struct BilinearAxis {
  std::vector<std::uint32_t> lo, hi;
  std::vector<float> frac;
};

BilinearAxis make_axis(std::uint32_t dst, std::uint32_t src) {
  BilinearAxis ax;
  ax.lo.resize(dst);
  ax.hi.resize(dst);
  ax.frac.resize(dst);
  for (std::uint32_t d = 0; d < dst; ++d) {
    float s = (d + 0.5f) * static_cast<float>(src) / dst - 0.5f;
    s = std::clamp(s, 0.f, static_cast<float>(src - 1));
    const std::uint32_t l = static_cast<std::uint32_t>(s);
    ax.lo[d] = l;
    ax.hi[d] = std::min(l + 1, src - 1);
    ax.frac[d] = s - static_cast<float>(l);
  }
  return ax;
}

NodeFeatures pool_features_impl(const TensorF32& dense,
                                const SuperpixelPartition& partition, bool parallel) {
  if (dense.dims.size() != 3)
    raise(Errc::shape_mismatch, "dense features must be [C,h,w]");
  const std::uint32_t c = dense.dim(0), sh = dense.dim(1), sw = dense.dim(2);
  const std::uint32_t h = partition.height, w = partition.width;
  if (sh > h || sw > w)
    raise(Errc::shape_mismatch, "feature stack is larger than the image");
  const auto lists = pixel_lists(partition);
  const BilinearAxis ay = make_axis(h, sh);
  const BilinearAxis ax = make_axis(w, sw);
  const std::size_t src_px = static_cast<std::size_t>(sh) * sw;

  NodeFeatures v(partition.count, c);
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (long long sp = 0; sp < static_cast<long long>(partition.count); ++sp) {
    std::vector<double> acc(c, 0.0);
    for (std::uint32_t px : lists[sp]) {
      const std::uint32_t x = px % w, y = px / w;
      const float fy = ay.frac[y], fx = ax.frac[x];
      const std::size_t i00 = static_cast<std::size_t>(ay.lo[y]) * sw + ax.lo[x];
      const std::size_t i01 = static_cast<std::size_t>(ay.lo[y]) * sw + ax.hi[x];
      const std::size_t i10 = static_cast<std::size_t>(ay.hi[y]) * sw + ax.lo[x];
      const std::size_t i11 = static_cast<std::size_t>(ay.hi[y]) * sw + ax.hi[x];
      const float w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
      const float w10 = fy * (1 - fx), w11 = fy * fx;
      for (std::uint32_t ch = 0; ch < c; ++ch) {
        const float* plane = dense.data.data() + static_cast<std::size_t>(ch) * src_px;
        acc[ch] += static_cast<double>(w00 * plane[i00] + w01 * plane[i01] +
                                       w10 * plane[i10] + w11 * plane[i11]);
      }
    }
    const double inv = 1.0 / static_cast<double>(lists[sp].size());
    for (std::uint32_t ch = 0; ch < c; ++ch)
      v.at(static_cast<std::size_t>(sp), ch) = static_cast<float>(acc[ch] * inv);
  }
  return v;
}

}  // namespace

NodeFeatures pool_features(const TensorF32& dense, const SuperpixelPartition& partition) {
  return pool_features_impl(dense, partition, true);
}

namespace serial {
NodeFeatures pool_features(const TensorF32& dense, const SuperpixelPartition& partition) {
  return pool_features_impl(dense, partition, false);
}
}  // namespace serial

NodeFeatures handcrafted_features(const ImageRGB& image,
                                  const SuperpixelPartition& partition) {
  if (image.height != partition.height || image.width != partition.width)
    raise(Errc::shape_mismatch, "partition does not cover the image");
  const auto lists = pixel_lists(partition);
  const TensorF32 lab = rgb_to_lab(image);
  const std::size_t npx = image.size();
  const float* lp = lab.data.data();
  const float* ap = lp + npx;
  const float* bp = lp + 2 * npx;

  constexpr std::uint32_t kHueBins = 8;
  NodeFeatures v(partition.count, 16);
#pragma omp parallel for schedule(dynamic, 8)
  for (long long sp = 0; sp < static_cast<long long>(partition.count); ++sp) {
    const auto& pixels = lists[sp];
    const double inv = 1.0 / static_cast<double>(pixels.size());
    double ml = 0, ma = 0, mb = 0, cx = 0, cy = 0;
    for (std::uint32_t px : pixels) {
      ml += lp[px];
      ma += ap[px];
      mb += bp[px];
      cx += px % image.width;
      cy += px / image.width;
    }
    ml *= inv;
    ma *= inv;
    mb *= inv;
    double vl = 0, va = 0, vb = 0;
    double hist[kHueBins] = {0};
    for (std::uint32_t px : pixels) {
      vl += (lp[px] - ml) * (lp[px] - ml);
      va += (ap[px] - ma) * (ap[px] - ma);
      vb += (bp[px] - mb) * (bp[px] - mb);
      const float r = image.r[px], g = image.g[px], b = image.b[px];
      const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
      const float delta = mx - mn;
      if (delta > 1e-6f) {
        float hue;
        if (mx == r)
          hue = std::fmod((g - b) / delta + 6.f, 6.f);
        else if (mx == g)
          hue = (b - r) / delta + 2.f;
        else
          hue = (r - g) / delta + 4.f;
        const std::uint32_t bin =
            std::min(static_cast<std::uint32_t>(hue / 6.f * kHueBins), kHueBins - 1);
        hist[bin] += 1.0;
      }
    }
    float* row = v.row(static_cast<std::size_t>(sp));
    auto unit = [](double x) { return static_cast<float>(std::clamp(x, 0.0, 1.0)); };
    row[0] = unit(ml / 100.0);
    row[1] = unit((ma + 110.0) / 220.0);
    row[2] = unit((mb + 110.0) / 220.0);
    row[3] = unit(std::sqrt(vl * inv) / 50.0);
    row[4] = unit(std::sqrt(va * inv) / 110.0);
    row[5] = unit(std::sqrt(vb * inv) / 110.0);
    for (std::uint32_t bin = 0; bin < kHueBins; ++bin)
      row[6 + bin] = unit(hist[bin] * inv);
    row[14] = image.width > 1 ? unit(cx * inv / (image.width - 1)) : 0.5f;
    row[15] = image.height > 1 ? unit(cy * inv / (image.height - 1)) : 0.5f;
  }
  return v;
}

AdjacentPairs spatial_weights(const SuperpixelPartition& p) {
  AdjacentPairs pairs;
  for (std::uint32_t y = 0; y < p.height; ++y)
    for (std::uint32_t x = 0; x < p.width; ++x) {
      const std::uint32_t a = p.at(y, x);
      if (x + 1 < p.width) {
        const std::uint32_t b = p.at(y, x + 1);
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < p.height) {
        const std::uint32_t b = p.at(y + 1, x);
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

std::vector<float> semantic_weights(const NodeFeatures& v, const AdjacentPairs& pairs) {
  std::vector<float> w(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e)
    w[e] = semantic_weight<float>(v.row(pairs[e].first), v.row(pairs[e].second), v.cols);
  return w;
}

ImageGraph build_adjacency(const AdjacentPairs& pairs, const std::vector<float>& w_s,
                           std::uint32_t n, EdgeSymmetrize mode) {
  if (pairs.size() != w_s.size())
    raise(Errc::shape_mismatch, "pair list and weight list disagree");
  for (const auto& [i, j] : pairs)
    if (i >= n || j >= n || i >= j)
      raise(Errc::index_out_of_range, "edge endpoints must satisfy i < j < n");
  if (n > 1 && pairs.empty())
    raise(Errc::shape_mismatch, "spatial adjacency is empty for n > 1");

  double gamma = 0.0;
  const auto keep =
      filter_edges<float>(pairs, w_s, n, mode == EdgeSymmetrize::kAnd, &gamma);
  ImageGraph g;
  g.n = n;
  g.gamma = static_cast<float>(gamma);
  g.edges.resize(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e)
    g.edges[e] = {pairs[e].first, pairs[e].second, w_s[e], keep[e]};
  return g;
}

ImageGraph build_graph(const NodeFeatures& v, const SuperpixelPartition& partition,
                       EdgeSymmetrize mode) {
  if (v.rows != partition.count)
    raise(Errc::shape_mismatch, "feature rows do not match superpixel count");
  const AdjacentPairs pairs = spatial_weights(partition);
  return build_adjacency(pairs, semantic_weights(v, pairs), partition.count, mode);
}

Csr adjacency_csr(const ImageGraph& g) {
  Csr csr;
  csr.n = g.n;
  std::vector<std::vector<std::uint32_t>> nbrs(g.n);
  for (std::uint32_t i = 0; i < g.n; ++i) nbrs[i].push_back(i);
  for (const auto& e : g.edges) {
    if (!e.keep) continue;
    nbrs[e.i].push_back(e.j);
    nbrs[e.j].push_back(e.i);
  }
  csr.row_ptr.resize(g.n + 1, 0);
  for (std::uint32_t i = 0; i < g.n; ++i) {
    std::sort(nbrs[i].begin(), nbrs[i].end());
    csr.row_ptr[i + 1] = csr.row_ptr[i] + static_cast<std::uint32_t>(nbrs[i].size());
  }
  csr.col.reserve(csr.row_ptr.back());
  for (auto& row : nbrs) csr.col.insert(csr.col.end(), row.begin(), row.end());
  return csr;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}
void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

constexpr char kGraphMagic[4] = {'L', 'M', 'G', '1'};

}  // namespace

void write_graph(const ImageGraph& g, const NodeFeatures& v,
                 const std::filesystem::path& path) {
  if (v.rows != g.n) raise(Errc::shape_mismatch, "feature rows do not match node count");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kGraphMagic, kGraphMagic + 4);
  put_u32(out, g.n);
  put_u32(out, static_cast<std::uint32_t>(v.cols));
  for (float f : v.v) put_f32(out, f);
  put_u32(out, static_cast<std::uint32_t>(g.edges.size()));
  for (const auto& e : g.edges) {
    put_u32(out, e.i);
    put_u32(out, e.j);
    out.push_back(1);  // spatial weight: every stored edge is adjacent
    put_f32(out, e.w_s);
    out.push_back(e.keep);
  }
  put_f32(out, g.gamma);
  write_bytes(out, path);
}

std::pair<ImageGraph, NodeFeatures> read_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() < off + n)
      raise(Errc::truncated_payload, "graph file ends early", bytes.size());
  };
  need(4);
  if (std::memcmp(bytes.data(), kGraphMagic, 4) != 0)
    raise(Errc::bad_magic, "missing LMG1 magic", 0);
  off = 4;
  need(8);
  ImageGraph g;
  g.n = get_u32(bytes.data() + off);
  const std::uint32_t h = get_u32(bytes.data() + off + 4);
  off += 8;
  NodeFeatures v(g.n, h);
  need(4ull * g.n * h);
  for (auto& f : v.v) {
    f = get_f32(bytes.data() + off);
    off += 4;
  }
  need(4);
  const std::uint32_t ecount = get_u32(bytes.data() + off);
  off += 4;
  g.edges.resize(ecount);
  need(14ull * ecount + 4);
  for (auto& e : g.edges) {
    e.i = get_u32(bytes.data() + off);
    e.j = get_u32(bytes.data() + off + 4);
    e.w_s = get_f32(bytes.data() + off + 9);
    e.keep = bytes[off + 13];
    if (e.i >= e.j || e.j >= g.n)
      raise(Errc::index_out_of_range, "edge endpoints out of order", off);
    off += 14;
  }
  g.gamma = get_f32(bytes.data() + off);
  return {std::move(g), std::move(v)};
}

}  // namespace labelmend
