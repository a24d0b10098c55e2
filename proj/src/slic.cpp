#include "labelmend/slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "labelmend/error.hpp"

namespace labelmend {

namespace {

float srgb_to_linear(float c) {
  return c <= 0.04045f ? c / 12.92f
                       : std::pow((c + 0.055f) / 1.055f, 2.4f);
}

float lab_f(float t) {
  constexpr float eps = 216.f / 24389.f;
  constexpr float kappa = 24389.f / 27.f;
  return t > eps ? std::cbrt(t) : (kappa * t + 16.f) / 116.f;
}

void pixel_to_lab(float r, float g, float b, float* out) {
  const float rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  const float x = 0.4124564f * rl + 0.3575761f * gl + 0.1804375f * bl;
  const float y = 0.2126729f * rl + 0.7151522f * gl + 0.0721750f * bl;
  const float z = 0.0193339f * rl + 0.1191920f * gl + 0.9503041f * bl;
  const float fx = lab_f(x / 0.95047f);
  const float fy = lab_f(y);
  const float fz = lab_f(z / 1.08883f);
  out[0] = 116.f * fy - 16.f;
  out[1] = 500.f * (fx - fy);
  out[2] = 200.f * (fy - fz);
}

template <bool Parallel>
TensorF32 rgb_to_lab_impl(const ImageRGB& image) {
  const std::size_t n = image.size();
  std::vector<float> planes(3 * n);
#pragma omp parallel for schedule(static) if (Parallel)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    float lab[3];
    pixel_to_lab(image.r[i], image.g[i], image.b[i], lab);
    planes[i] = lab[0];
    planes[n + i] = lab[1];
    planes[2 * n + i] = lab[2];
  }
  return TensorF32({3, image.height, image.width}, std::move(planes));
}

struct Grid {
  std::uint32_t nx = 1, ny = 1;
};

Grid choose_grid(std::uint32_t h, std::uint32_t w, std::uint32_t target) {
  Grid g;
  const double aspect = static_cast<double>(h) / static_cast<double>(w);
  g.ny = static_cast<std::uint32_t>(std::clamp<long long>(
      std::llround(std::sqrt(static_cast<double>(target) * aspect)), 1, h));
  g.nx = static_cast<std::uint32_t>(std::clamp<long long>(
      std::llround(static_cast<double>(target) / g.ny), 1, w));
  return g;
}

struct Accum {
  double l = 0, a = 0, b = 0, x = 0, y = 0;
  std::uint64_t n = 0;
};

struct BBox {
  std::uint32_t x0, y0, x1, y1;  // inclusive
};

template <bool Parallel>
SuperpixelPartition slic_impl(const ImageRGB& image, const SlicOptions& opt) {
  const std::uint32_t h = image.height, w = image.width;
  if (h == 0 || w == 0) raise(Errc::empty_image, "image has zero extent");
  const std::size_t npx = static_cast<std::size_t>(h) * w;
  if (opt.target_count < 1 || opt.target_count > npx)
    raise(Errc::target_too_large, "superpixel target outside [1, pixel count]");
  if (!(opt.compactness > 0.f)) raise(Errc::config_error, "compactness must be > 0");

  const TensorF32 lab = rgb_to_lab_impl<Parallel>(image);
  const float* lp = lab.data.data();
  const float* ap = lp + npx;
  const float* bp = lp + 2 * npx;

  const float s = std::sqrt(static_cast<float>(npx) / opt.target_count);
  const float spatial_scale = opt.compactness / s;
  const Grid grid = choose_grid(h, w, opt.target_count);
  const std::uint32_t k = grid.nx * grid.ny;

  // seed centers at grid cell midpoints, nudged to the lowest-gradient
  // pixel of the surrounding 3x3 patch
  std::vector<SuperpixelPartition::Center> centers(k);
  auto gradient_at = [&](std::uint32_t x, std::uint32_t y) {
    const std::uint32_t xl = x > 0 ? x - 1 : x, xr = x + 1 < w ? x + 1 : x;
    const std::uint32_t yu = y > 0 ? y - 1 : y, yd = y + 1 < h ? y + 1 : y;
    const std::size_t il = static_cast<std::size_t>(y) * w + xl;
    const std::size_t ir = static_cast<std::size_t>(y) * w + xr;
    const std::size_t iu = static_cast<std::size_t>(yu) * w + x;
    const std::size_t id = static_cast<std::size_t>(yd) * w + x;
    const float dxl = lp[ir] - lp[il], dxa = ap[ir] - ap[il], dxb = bp[ir] - bp[il];
    const float dyl = lp[id] - lp[iu], dya = ap[id] - ap[iu], dyb = bp[id] - bp[iu];
    return dxl * dxl + dxa * dxa + dxb * dxb + dyl * dyl + dya * dya + dyb * dyb;
  };
  for (std::uint32_t gy = 0; gy < grid.ny; ++gy) {
    for (std::uint32_t gx = 0; gx < grid.nx; ++gx) {
      const float fx = (gx + 0.5f) * static_cast<float>(w) / grid.nx - 0.5f;
      const float fy = (gy + 0.5f) * static_cast<float>(h) / grid.ny - 0.5f;
      std::uint32_t cx = static_cast<std::uint32_t>(
          std::clamp<long>(std::lround(fx), 0, static_cast<long>(w) - 1));
      std::uint32_t cy = static_cast<std::uint32_t>(
          std::clamp<long>(std::lround(fy), 0, static_cast<long>(h) - 1));
      float best = gradient_at(cx, cy);
      std::uint32_t bx = cx, by = cy;
      for (std::uint32_t y = cy > 0 ? cy - 1 : cy; y <= std::min(cy + 1, h - 1); ++y)
        for (std::uint32_t x = cx > 0 ? cx - 1 : cx; x <= std::min(cx + 1, w - 1); ++x) {
          const float gval = gradient_at(x, y);
          if (gval < best) {
            best = gval;
            bx = x;
            by = y;
          }
        }
      const std::size_t idx = static_cast<std::size_t>(by) * w + bx;
      centers[gy * grid.nx + gx] = {lp[idx], ap[idx], bp[idx],
                                    static_cast<float>(bx), static_cast<float>(by)};
    }
  }

  std::vector<std::uint32_t> assignment(npx, 0);
  const std::uint32_t ncx = static_cast<std::uint32_t>(std::ceil(w / s)) + 1;
  const std::uint32_t ncy = static_cast<std::uint32_t>(std::ceil(h / s)) + 1;
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(ncx) * ncy);

  auto distance = [&](std::uint32_t center, std::size_t px, float x, float y) {
    const SuperpixelPartition::Center& c = centers[center];
    const float dl = lp[px] - c.l, da = ap[px] - c.a, db = bp[px] - c.b;
    const float dx = x - c.x, dy = y - c.y;
    const float color2 = dl * dl + da * da + db * db;
    const float spatial2 = dx * dx + dy * dy;
    return std::sqrt(color2 + spatial_scale * spatial_scale * spatial2);
  };

  for (int iter = 0; iter < opt.iters; ++iter) {
    for (auto& bin : bins) bin.clear();
    for (std::uint32_t c = 0; c < k; ++c) {
      const std::uint32_t bx = std::min(
          static_cast<std::uint32_t>(std::max(0.f, centers[c].x) / s), ncx - 1);
      const std::uint32_t by = std::min(
          static_cast<std::uint32_t>(std::max(0.f, centers[c].y) / s), ncy - 1);
      bins[static_cast<std::size_t>(by) * ncx + bx].push_back(c);
    }

    // assignment: each pixel scans centers whose 2S x 2S window reaches it;
    // ties resolve by (distance, id), so the result is order-independent
#pragma omp parallel for schedule(static) if (Parallel)
    for (long long p = 0; p < static_cast<long long>(npx); ++p) {
      const std::uint32_t x = static_cast<std::uint32_t>(p % w);
      const std::uint32_t y = static_cast<std::uint32_t>(p / w);
      const float fx = static_cast<float>(x), fy = static_cast<float>(y);
      float best = std::numeric_limits<float>::infinity();
      std::uint32_t best_id = std::numeric_limits<std::uint32_t>::max();
      const std::uint32_t pbx = std::min(static_cast<std::uint32_t>(fx / s), ncx - 1);
      const std::uint32_t pby = std::min(static_cast<std::uint32_t>(fy / s), ncy - 1);
      for (std::uint32_t by = pby > 0 ? pby - 1 : 0; by <= std::min(pby + 1, ncy - 1); ++by)
        for (std::uint32_t bx = pbx > 0 ? pbx - 1 : 0; bx <= std::min(pbx + 1, ncx - 1); ++bx)
          for (std::uint32_t c : bins[static_cast<std::size_t>(by) * ncx + bx]) {
            if (std::abs(centers[c].x - fx) > s || std::abs(centers[c].y - fy) > s)
              continue;
            const float d = distance(c, static_cast<std::size_t>(p), fx, fy);
            if (d < best || (d == best && c < best_id)) {
              best = d;
              best_id = c;
            }
          }
      if (best_id == std::numeric_limits<std::uint32_t>::max()) {
        for (std::uint32_t c = 0; c < k; ++c) {
          const float d = distance(c, static_cast<std::size_t>(p), fx, fy);
          if (d < best || (d == best && c < best_id)) {
            best = d;
            best_id = c;
          }
        }
      }
      assignment[p] = best_id;
    }

    // per-center bounding boxes of the assigned pixels (exact int min/max)
    std::vector<BBox> boxes(k, {w, h, 0, 0});
    for (std::uint32_t y = 0; y < h; ++y)
      for (std::uint32_t x = 0; x < w; ++x) {
        BBox& bb = boxes[assignment[static_cast<std::size_t>(y) * w + x]];
        bb.x0 = std::min(bb.x0, x);
        bb.y0 = std::min(bb.y0, y);
        bb.x1 = std::max(bb.x1, x);
        bb.y1 = std::max(bb.y1, y);
      }

    // center update scans each center's own box in row-major order, which
    // keeps the accumulation order fixed no matter how many threads run
#pragma omp parallel for schedule(static) if (Parallel)
    for (long long c = 0; c < static_cast<long long>(k); ++c) {
      const BBox& bb = boxes[c];
      if (bb.x0 > bb.x1 || bb.y0 > bb.y1) continue;  // no pixels: keep center
      Accum acc;
      for (std::uint32_t y = bb.y0; y <= bb.y1; ++y)
        for (std::uint32_t x = bb.x0; x <= bb.x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          if (assignment[p] != static_cast<std::uint32_t>(c)) continue;
          acc.l += lp[p];
          acc.a += ap[p];
          acc.b += bp[p];
          acc.x += x;
          acc.y += y;
          ++acc.n;
        }
      if (acc.n > 0) {
        centers[c] = {static_cast<float>(acc.l / acc.n), static_cast<float>(acc.a / acc.n),
                      static_cast<float>(acc.b / acc.n), static_cast<float>(acc.x / acc.n),
                      static_cast<float>(acc.y / acc.n)};
      }
    }
  }

  // connectivity: flood-fill components, keep each label's largest one,
  // fold the rest into the biggest adjacent superpixel
  constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> comp(npx, kUnvisited);
  struct Component {
    std::uint32_t label;
    std::uint32_t first;  // first pixel in row-major order
    std::uint32_t size;
  };
  std::vector<Component> comps;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t p0 = 0; p0 < npx; ++p0) {
    if (comp[p0] != kUnvisited) continue;
    const std::uint32_t cid = static_cast<std::uint32_t>(comps.size());
    const std::uint32_t label = assignment[p0];
    comps.push_back({label, p0, 0});
    stack.assign(1, p0);
    comp[p0] = cid;
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      ++comps[cid].size;
      const std::uint32_t x = p % w, y = p / w;
      const std::uint32_t nbr[4] = {x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                    y > 0 ? p - w : p, y + 1 < h ? p + w : p};
      for (std::uint32_t q : nbr) {
        if (q == p || comp[q] != kUnvisited || assignment[q] != label) continue;
        comp[q] = cid;
        stack.push_back(q);
      }
    }
  }

  std::vector<std::uint32_t> main_comp(k, kUnvisited);
  for (std::uint32_t cid = 0; cid < comps.size(); ++cid) {
    const Component& c = comps[cid];
    if (main_comp[c.label] == kUnvisited ||
        c.size > comps[main_comp[c.label]].size)
      main_comp[c.label] = cid;
  }

  std::vector<std::vector<std::uint32_t>> comp_pixels(comps.size());
  for (std::uint32_t cid = 0; cid < comps.size(); ++cid)
    comp_pixels[cid].reserve(comps[cid].size);
  for (std::uint32_t p = 0; p < npx; ++p) comp_pixels[comp[p]].push_back(p);

  std::vector<std::uint64_t> area(k, 0);
  for (std::uint32_t p = 0; p < npx; ++p) ++area[assignment[p]];

  // Orphans may only merge toward already-settled regions (a label's main
  // component or an orphan resolved earlier); that keeps every finished
  // label 4-connected. An orphan walled in by unresolved ones waits for a
  // later pass; each pass settles at least one, so this terminates.
  std::vector<std::uint8_t> settled(comps.size(), 0);
  std::size_t unresolved = 0;
  for (std::uint32_t cid = 0; cid < comps.size(); ++cid) {
    settled[cid] = (main_comp[comps[cid].label] == cid);
    unresolved += settled[cid] ? 0 : 1;
  }
  while (unresolved > 0) {
    std::size_t progressed = 0;
    for (std::uint32_t cid = 0; cid < comps.size(); ++cid) {
      if (settled[cid]) continue;
      std::uint64_t best_area = 0;
      std::uint32_t best_label = kUnvisited;
      for (std::uint32_t p : comp_pixels[cid]) {
        const std::uint32_t x = p % w, y = p / w;
        const std::uint32_t nbr[4] = {x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                      y > 0 ? p - w : p, y + 1 < h ? p + w : p};
        for (std::uint32_t q : nbr) {
          if (q == p || comp[q] == cid || !settled[comp[q]]) continue;
          const std::uint32_t lab_q = assignment[q];
          if (area[lab_q] > best_area ||
              (area[lab_q] == best_area && lab_q < best_label)) {
            best_area = area[lab_q];
            best_label = lab_q;
          }
        }
      }
      if (best_label == kUnvisited) continue;  // no settled neighbor yet
      area[comps[cid].label] -= comp_pixels[cid].size();
      area[best_label] += comp_pixels[cid].size();
      for (std::uint32_t p : comp_pixels[cid]) assignment[p] = best_label;
      settled[cid] = 1;
      --unresolved;
      ++progressed;
    }
    if (progressed == 0) break;  // single-label image; nothing adjacent
  }

  // compact surviving labels and rebuild centroids
  std::vector<std::uint32_t> remap(k, kUnvisited);
  std::uint32_t next = 0;
  for (std::uint32_t c = 0; c < k; ++c)
    if (area[c] > 0) remap[c] = next++;
  SuperpixelPartition out;
  out.height = h;
  out.width = w;
  out.count = next;
  out.assignment.resize(npx);
  for (std::size_t p = 0; p < npx; ++p) out.assignment[p] = remap[assignment[p]];

  std::vector<Accum> acc(next);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      Accum& a = acc[out.assignment[p]];
      a.l += lp[p];
      a.a += ap[p];
      a.b += bp[p];
      a.x += x;
      a.y += y;
      ++a.n;
    }
  out.centers.resize(next);
  for (std::uint32_t c = 0; c < next; ++c) {
    const Accum& a = acc[c];
    out.centers[c] = {static_cast<float>(a.l / a.n), static_cast<float>(a.a / a.n),
                      static_cast<float>(a.b / a.n), static_cast<float>(a.x / a.n),
                      static_cast<float>(a.y / a.n)};
  }
  return out;
}

}  // namespace

TensorF32 rgb_to_lab(const ImageRGB& image) { return rgb_to_lab_impl<true>(image); }

SuperpixelPartition slic(const ImageRGB& image, const SlicOptions& opt) {
  return slic_impl<true>(image, opt);
}

namespace serial {
TensorF32 rgb_to_lab(const ImageRGB& image) { return rgb_to_lab_impl<false>(image); }

SuperpixelPartition slic(const ImageRGB& image, const SlicOptions& opt) {
  return slic_impl<false>(image, opt);
}
}  // namespace serial

TensorF32 partition_to_tensor(const SuperpixelPartition& p) {
  std::vector<float> data(p.assignment.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<float>(p.assignment[i]);
  return TensorF32({p.height, p.width}, std::move(data));
}

SuperpixelPartition partition_from_tensor(const TensorF32& t) {
  if (t.dims.size() != 2) raise(Errc::shape_mismatch, "partition tensor must be [H,W]");
  SuperpixelPartition p;
  p.height = t.dim(0);
  p.width = t.dim(1);
  p.assignment.resize(t.size());
  std::uint32_t maxid = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float v = t.data[i];
    if (v < 0.f || v != std::floor(v))
      raise(Errc::index_out_of_range, "assignment id must be a non-negative integer");
    p.assignment[i] = static_cast<std::uint32_t>(v);
    maxid = std::max(maxid, p.assignment[i]);
  }
  p.count = maxid + 1;
  // centroid metadata is not stored in the tensor form; positions only
  std::vector<Accum> acc(p.count);
  for (std::uint32_t y = 0; y < p.height; ++y)
    for (std::uint32_t x = 0; x < p.width; ++x) {
      Accum& a = acc[p.assignment[static_cast<std::size_t>(y) * p.width + x]];
      a.x += x;
      a.y += y;
      ++a.n;
    }
  p.centers.resize(p.count);
  for (std::uint32_t c = 0; c < p.count; ++c) {
    if (acc[c].n == 0)
      raise(Errc::index_out_of_range, "assignment ids are not dense");
    p.centers[c] = {0.f, 0.f, 0.f, static_cast<float>(acc[c].x / acc[c].n),
                    static_cast<float>(acc[c].y / acc[c].n)};
  }
  return p;
}

}  // namespace labelmend
