#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "labelmend/error.hpp"
#include "labelmend/graph.hpp"
#include "labelmend/mat.hpp"
#include "labelmend/rng.hpp"

namespace labelmend {

// Bilinear attention head: scores e_ij = (Wq v_i) . (Wk v_j) on graph
// edges, softmax-normalized per node, then a weighted sum of value
// projections. Scalar type is a template parameter so the training path
// runs in float while gradient checks run in double.
template <typename T>
struct AttentionHead {
  Mat<T> w_query;  // [d_att, d_in]
  Mat<T> w_key;    // [d_att, d_in]
  Mat<T> w_value;  // [d_out, d_in]
};

template <typename T>
struct GatModel {
  std::vector<AttentionHead<T>> layer1;  // heads concatenated, then ReLU
  AttentionHead<T> layer2;               // single head producing class logits
  std::uint32_t d_in = 0, d_hidden = 0, d_att = 0, num_classes = 0;

  std::uint32_t heads() const { return static_cast<std::uint32_t>(layer1.size()); }

  template <typename U>
  GatModel<U> cast() const {
    GatModel<U> m;
    m.d_in = d_in;
    m.d_hidden = d_hidden;
    m.d_att = d_att;
    m.num_classes = num_classes;
    for (const auto& h : layer1)
      m.layer1.push_back({h.w_query.template cast<U>(), h.w_key.template cast<U>(),
                          h.w_value.template cast<U>()});
    m.layer2 = {layer2.w_query.template cast<U>(), layer2.w_key.template cast<U>(),
                layer2.w_value.template cast<U>()};
    return m;
  }
};

struct TrainConfig {
  double learning_rate = 5e-3;
  int epochs = 300;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  int patience = 50;
  double init_scale = 1.0;

  void validate() const {
    if (!(learning_rate > 0)) raise(Errc::config_error, "learning rate must be > 0");
    if (epochs < 1) raise(Errc::config_error, "epochs must be >= 1");
    if (patience < 1) raise(Errc::config_error, "patience must be >= 1");
  }
};

// Incoming-edge view of a symmetric Csr: for node j, the (source node,
// csr slot) pairs sorted by source. Gives transpose accumulations a fixed
// per-node order without atomics.
struct CsrTranspose {
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> slot;
};

inline CsrTranspose transpose_csr(const Csr& a) {
  CsrTranspose t;
  t.row_ptr.assign(a.n + 1, 0);
  for (std::uint32_t s = 0; s < a.col.size(); ++s) ++t.row_ptr[a.col[s] + 1];
  for (std::uint32_t j = 0; j < a.n; ++j) t.row_ptr[j + 1] += t.row_ptr[j];
  t.src.resize(a.col.size());
  t.slot.resize(a.col.size());
  std::vector<std::uint32_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::uint32_t i = 0; i < a.n; ++i)
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s) {
      const std::uint32_t j = a.col[s];
      t.src[fill[j]] = i;
      t.slot[fill[j]] = s;
      ++fill[j];
    }
  return t;
}

template <typename T>
struct HeadTrace {
  Mat<T> q, k, vv;        // projections
  std::vector<T> e;       // attention score per csr slot
  std::vector<T> alpha;   // normalized coefficient per csr slot
  Mat<T> out;             // pre-activation node outputs
};

template <typename T>
struct ForwardTrace {
  std::vector<HeadTrace<T>> layer1;
  Mat<T> hidden_pre;  // concatenated head outputs before ReLU
  Mat<T> hidden;
  HeadTrace<T> layer2;
  Mat<T> logits;
  Mat<T> z;  // row-softmax of logits
};

namespace gat_detail {

template <typename T>
void attention_scores(const Mat<T>& q, const Mat<T>& k, const Csr& a,
                      std::vector<T>& e) {
  e.resize(a.col.size());
#pragma omp parallel for schedule(static) if (a.n > 256)
  for (long long i = 0; i < static_cast<long long>(a.n); ++i) {
    const T* qi = q.row(static_cast<std::size_t>(i));
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s) {
      const T* kj = k.row(a.col[s]);
      T acc = T(0);
      for (std::size_t d = 0; d < q.cols; ++d) acc += qi[d] * kj[d];
      e[s] = acc;
    }
  }
}

// max-shifted softmax over each node's incident slots
template <typename T>
void attention_softmax(const std::vector<T>& e, const Csr& a, std::vector<T>& alpha) {
  alpha.resize(e.size());
#pragma omp parallel for schedule(static) if (a.n > 256)
  for (long long i = 0; i < static_cast<long long>(a.n); ++i) {
    const std::uint32_t lo = a.row_ptr[i], hi = a.row_ptr[i + 1];
    T m = e[lo];
    for (std::uint32_t s = lo + 1; s < hi; ++s) m = std::max(m, e[s]);
    double denom = 0.0;
    for (std::uint32_t s = lo; s < hi; ++s) {
      const T x = std::exp(e[s] - m);
      alpha[s] = x;
      denom += static_cast<double>(x);
    }
    const T inv = static_cast<T>(1.0 / denom);
    for (std::uint32_t s = lo; s < hi; ++s) alpha[s] *= inv;
  }
}

template <typename T>
void weighted_neighbor_sum(const std::vector<T>& alpha, const Mat<T>& vv,
                           const Csr& a, Mat<T>& out) {
  out = Mat<T>(a.n, vv.cols);
#pragma omp parallel for schedule(static) if (a.n > 256)
  for (long long i = 0; i < static_cast<long long>(a.n); ++i) {
    T* oi = out.row(static_cast<std::size_t>(i));
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s) {
      const T w = alpha[s];
      const T* vj = vv.row(a.col[s]);
      for (std::size_t d = 0; d < vv.cols; ++d) oi[d] += w * vj[d];
    }
  }
}

template <typename T>
HeadTrace<T> head_forward(const Mat<T>& x, const AttentionHead<T>& head, const Csr& a) {
  HeadTrace<T> t;
  t.q = gemm_nt(x, head.w_query);
  t.k = gemm_nt(x, head.w_key);
  t.vv = gemm_nt(x, head.w_value);
  attention_scores(t.q, t.k, a, t.e);
  attention_softmax(t.e, a, t.alpha);
  weighted_neighbor_sum(t.alpha, t.vv, a, t.out);
  return t;
}

template <typename T>
struct HeadGrads {
  Mat<T> w_query, w_key, w_value;
};

// Backward through one head. dX is accumulated into `dx` when non-null.
template <typename T>
HeadGrads<T> head_backward(const Mat<T>& x, const AttentionHead<T>& head,
                           const Csr& a, const CsrTranspose& at,
                           const HeadTrace<T>& t, const Mat<T>& dout, Mat<T>* dx) {
  const std::uint32_t n = a.n;
  std::vector<T> dalpha(t.alpha.size());
#pragma omp parallel for schedule(static) if (n > 256)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const T* di = dout.row(static_cast<std::size_t>(i));
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s) {
      const T* vj = t.vv.row(a.col[s]);
      T acc = T(0);
      for (std::size_t d = 0; d < t.vv.cols; ++d) acc += di[d] * vj[d];
      dalpha[s] = acc;
    }
  }

  Mat<T> dvv(n, t.vv.cols);
#pragma omp parallel for schedule(static) if (n > 256)
  for (long long j = 0; j < static_cast<long long>(n); ++j) {
    T* dj = dvv.row(static_cast<std::size_t>(j));
    for (std::uint32_t s = at.row_ptr[j]; s < at.row_ptr[j + 1]; ++s) {
      const T w = t.alpha[at.slot[s]];
      const T* di = dout.row(at.src[s]);
      for (std::size_t d = 0; d < t.vv.cols; ++d) dj[d] += w * di[d];
    }
  }

  std::vector<T> de(t.e.size());
#pragma omp parallel for schedule(static) if (n > 256)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    double dot = 0.0;
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s)
      dot += static_cast<double>(t.alpha[s]) * dalpha[s];
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s)
      de[s] = t.alpha[s] * (dalpha[s] - static_cast<T>(dot));
  }

  Mat<T> dq(n, t.q.cols), dk(n, t.k.cols);
#pragma omp parallel for schedule(static) if (n > 256)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    T* di = dq.row(static_cast<std::size_t>(i));
    for (std::uint32_t s = a.row_ptr[i]; s < a.row_ptr[i + 1]; ++s) {
      const T g = de[s];
      const T* kj = t.k.row(a.col[s]);
      for (std::size_t d = 0; d < t.k.cols; ++d) di[d] += g * kj[d];
    }
  }
#pragma omp parallel for schedule(static) if (n > 256)
  for (long long j = 0; j < static_cast<long long>(n); ++j) {
    T* dj = dk.row(static_cast<std::size_t>(j));
    for (std::uint32_t s = at.row_ptr[j]; s < at.row_ptr[j + 1]; ++s) {
      const T g = de[at.slot[s]];
      const T* qi = t.q.row(at.src[s]);
      for (std::size_t d = 0; d < t.q.cols; ++d) dj[d] += g * qi[d];
    }
  }

  HeadGrads<T> grads;
  grads.w_query = gemm_tn(dq, x);
  grads.w_key = gemm_tn(dk, x);
  grads.w_value = gemm_tn(dvv, x);

  if (dx) {
    const Mat<T> dx_q = gemm_nn(dq, head.w_query);
    const Mat<T> dx_k = gemm_nn(dk, head.w_key);
    const Mat<T> dx_v = gemm_nn(dvv, head.w_value);
    for (std::size_t i = 0; i < dx->v.size(); ++i)
      dx->v[i] += dx_q.v[i] + dx_k.v[i] + dx_v.v[i];
  }
  return grads;
}

template <typename T>
void row_softmax(const Mat<T>& logits, Mat<T>& z) {
  z = Mat<T>(logits.rows, logits.cols);
#pragma omp parallel for schedule(static) if (logits.rows > 256)
  for (long long i = 0; i < static_cast<long long>(logits.rows); ++i) {
    const T* li = logits.row(static_cast<std::size_t>(i));
    T* zi = z.row(static_cast<std::size_t>(i));
    T m = li[0];
    for (std::size_t c = 1; c < logits.cols; ++c) m = std::max(m, li[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      zi[c] = std::exp(li[c] - m);
      denom += static_cast<double>(zi[c]);
    }
    const T inv = static_cast<T>(1.0 / denom);
    for (std::size_t c = 0; c < logits.cols; ++c) zi[c] *= inv;
  }
}

}  // namespace gat_detail

// Parameter init: uniform in [-s, s] with s = init_scale * sqrt(6/(fan_in
// + fan_out)), drawn from the project PRNG in declaration order. The
// sequence is part of the determinism contract.
template <typename T>
GatModel<T> init_model(std::uint32_t d_in, std::uint32_t d_hidden, std::uint32_t d_att,
                       std::uint32_t heads, std::uint32_t num_classes,
                       std::uint64_t seed, double init_scale = 1.0) {
  if (heads < 1 || d_in < 1 || d_hidden < 1 || d_att < 1 || num_classes < 2)
    raise(Errc::config_error, "model dimensions must be positive (classes >= 2)");
  Rng rng(seed);
  auto fill = [&](Mat<T>& m, std::uint32_t rows, std::uint32_t cols) {
    m = Mat<T>(rows, cols);
    const double s = init_scale * std::sqrt(6.0 / (rows + cols));
    for (auto& x : m.v) x = static_cast<T>(rng.uniform(-s, s));
  };
  GatModel<T> model;
  model.d_in = d_in;
  model.d_hidden = d_hidden;
  model.d_att = d_att;
  model.num_classes = num_classes;
  model.layer1.resize(heads);
  for (auto& head : model.layer1) {
    fill(head.w_query, d_att, d_in);
    fill(head.w_key, d_att, d_in);
    fill(head.w_value, d_hidden, d_in);
  }
  const std::uint32_t d_mid = heads * d_hidden;
  fill(model.layer2.w_query, d_att, d_mid);
  fill(model.layer2.w_key, d_att, d_mid);
  fill(model.layer2.w_value, num_classes, d_mid);
  return model;
}

template <typename T>
ForwardTrace<T> gat_forward(const GatModel<T>& model, const Mat<T>& v, const Csr& a) {
  if (v.rows != a.n) raise(Errc::shape_mismatch, "feature rows do not match graph");
  if (v.cols != model.d_in) raise(Errc::shape_mismatch, "feature dim does not match model");
  ForwardTrace<T> t;
  t.layer1.reserve(model.layer1.size());
  for (const auto& head : model.layer1)
    t.layer1.push_back(gat_detail::head_forward(v, head, a));

  const std::uint32_t d_mid = model.heads() * model.d_hidden;
  t.hidden_pre = Mat<T>(a.n, d_mid);
  for (std::uint32_t h = 0; h < model.heads(); ++h) {
    const Mat<T>& out = t.layer1[h].out;
    for (std::uint32_t i = 0; i < a.n; ++i)
      std::copy(out.row(i), out.row(i) + model.d_hidden,
                t.hidden_pre.row(i) + static_cast<std::size_t>(h) * model.d_hidden);
  }
  t.hidden = t.hidden_pre;
  for (auto& x : t.hidden.v) x = std::max(x, T(0));

  t.layer2 = gat_detail::head_forward(t.hidden, model.layer2, a);
  t.logits = t.layer2.out;
  gat_detail::row_softmax(t.logits, t.z);
  return t;
}

// Summed cross-entropy over seeded nodes (label >= 0); fills the logit
// gradient (softmax minus one-hot on seeded rows, zero elsewhere).
template <typename T>
double masked_loss(const Mat<T>& z, const std::vector<std::int32_t>& seed_labels,
                   Mat<T>* dlogits) {
  if (z.rows != seed_labels.size())
    raise(Errc::shape_mismatch, "seed labels do not match node count");
  if (dlogits) *dlogits = Mat<T>(z.rows, z.cols);
  double loss = 0.0;
  std::size_t seeded = 0;
  for (std::size_t i = 0; i < z.rows; ++i) {
    const std::int32_t label = seed_labels[i];
    if (label < 0) continue;
    if (static_cast<std::size_t>(label) >= z.cols)
      raise(Errc::index_out_of_range, "seed label exceeds class count");
    ++seeded;
    loss -= std::log(std::max(static_cast<double>(z.at(i, label)), 1e-300));
    if (dlogits) {
      for (std::size_t c = 0; c < z.cols; ++c) dlogits->at(i, c) = z.at(i, c);
      dlogits->at(i, static_cast<std::size_t>(label)) -= T(1);
    }
  }
  if (seeded == 0) raise(Errc::empty_seed_set, "no seeded nodes");
  return loss;
}

template <typename T>
struct GatGrads {
  std::vector<gat_detail::HeadGrads<T>> layer1;
  gat_detail::HeadGrads<T> layer2;
};

template <typename T>
GatGrads<T> gat_backward(const GatModel<T>& model, const Mat<T>& v, const Csr& a,
                         const CsrTranspose& at, const ForwardTrace<T>& t,
                         const Mat<T>& dlogits) {
  GatGrads<T> grads;
  Mat<T> dhidden(a.n, model.heads() * model.d_hidden);
  grads.layer2 =
      gat_detail::head_backward(t.hidden, model.layer2, a, at, t.layer2, dlogits, &dhidden);

  // ReLU gate back to the concatenation
  for (std::size_t i = 0; i < dhidden.v.size(); ++i)
    if (t.hidden_pre.v[i] <= T(0)) dhidden.v[i] = T(0);

  grads.layer1.resize(model.heads());
  for (std::uint32_t h = 0; h < model.heads(); ++h) {
    Mat<T> dout(a.n, model.d_hidden);
    for (std::uint32_t i = 0; i < a.n; ++i)
      std::copy(dhidden.row(i) + static_cast<std::size_t>(h) * model.d_hidden,
                dhidden.row(i) + static_cast<std::size_t>(h + 1) * model.d_hidden,
                dout.row(i));
    grads.layer1[h] = gat_detail::head_backward(v, model.layer1[h], a, at, t.layer1[h],
                                                dout, static_cast<Mat<T>*>(nullptr));
  }
  return grads;
}

template <typename T>
struct TrainOutcome {
  GatModel<T> model;               // best-loss parameters
  std::vector<double> loss_trace;  // one entry per epoch run
  Mat<T> z;                        // predictions under the returned model
  double best_loss = 0.0;
};

// Full-batch optimization with per-parameter first/second moment scaling
// (0.9 / 0.999, eps 1e-8), L2 weight decay folded into the gradient, and
// early stopping on a 1e-5 improvement threshold.
template <typename T>
TrainOutcome<T> train_gat(GatModel<T> model, const Mat<T>& v, const Csr& a,
                          const std::vector<std::int32_t>& seed_labels,
                          const TrainConfig& cfg) {
  cfg.validate();
  const CsrTranspose at = transpose_csr(a);

  auto params = [](GatModel<T>& m) {
    std::vector<Mat<T>*> ps;
    for (auto& h : m.layer1) {
      ps.push_back(&h.w_query);
      ps.push_back(&h.w_key);
      ps.push_back(&h.w_value);
    }
    ps.push_back(&m.layer2.w_query);
    ps.push_back(&m.layer2.w_key);
    ps.push_back(&m.layer2.w_value);
    return ps;
  };
  auto grad_list = [](GatGrads<T>& g) {
    std::vector<Mat<T>*> ps;
    for (auto& h : g.layer1) {
      ps.push_back(&h.w_query);
      ps.push_back(&h.w_key);
      ps.push_back(&h.w_value);
    }
    ps.push_back(&g.layer2.w_query);
    ps.push_back(&g.layer2.w_key);
    ps.push_back(&g.layer2.w_value);
    return ps;
  };

  const auto ps = params(model);
  std::vector<std::vector<double>> m1(ps.size()), m2(ps.size());
  for (std::size_t p = 0; p < ps.size(); ++p) {
    m1[p].assign(ps[p]->v.size(), 0.0);
    m2[p].assign(ps[p]->v.size(), 0.0);
  }

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  constexpr double kImproveTol = 1e-5;

  TrainOutcome<T> out;
  out.model = model;
  double best_exact = std::numeric_limits<double>::infinity();
  double best_streak = std::numeric_limits<double>::infinity();
  int stale = 0;
  double beta1_t = 1.0, beta2_t = 1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ForwardTrace<T> trace = gat_forward(model, v, a);
    Mat<T> dlogits;
    const double loss = masked_loss(trace.z, seed_labels, &dlogits);
    if (!std::isfinite(loss)) {
      out.loss_trace.push_back(loss);
      std::string tail;
      const std::size_t from =
          out.loss_trace.size() > 5 ? out.loss_trace.size() - 5 : 0;
      for (std::size_t i = from; i < out.loss_trace.size(); ++i)
        tail += (tail.empty() ? "" : ", ") + std::to_string(out.loss_trace[i]);
      raise(Errc::diverged_loss, "loss became non-finite at epoch " +
                                     std::to_string(epoch) + "; trace tail: " + tail);
    }
    out.loss_trace.push_back(loss);
    if (loss < best_exact) {
      best_exact = loss;
      out.model = model;
      out.best_loss = loss;
    }
    if (loss < best_streak - kImproveTol) {
      best_streak = loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }

    GatGrads<T> grads = gat_backward(model, v, a, at, trace, dlogits);
    const auto gs = grad_list(grads);
    beta1_t *= kBeta1;
    beta2_t *= kBeta2;
    for (std::size_t p = 0; p < ps.size(); ++p) {
      auto& w = ps[p]->v;
      auto& g = gs[p]->v;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double grad = static_cast<double>(g[i]) +
                            cfg.weight_decay * static_cast<double>(w[i]);
        m1[p][i] = kBeta1 * m1[p][i] + (1 - kBeta1) * grad;
        m2[p][i] = kBeta2 * m2[p][i] + (1 - kBeta2) * grad * grad;
        const double mhat = m1[p][i] / (1 - beta1_t);
        const double vhat = m2[p][i] / (1 - beta2_t);
        w[i] = static_cast<T>(static_cast<double>(w[i]) -
                              cfg.learning_rate * mhat / (std::sqrt(vhat) + kEps));
      }
    }
  }

  out.z = gat_forward(out.model, v, a).z;
  return out;
}

// LMW1 checkpoint: magic, u32 heads/d_in/d_hidden/d_att/num_classes, then
// parameter tensors in declaration order as f32 little-endian.
void write_model(const GatModel<float>& model, const std::filesystem::path& path);
GatModel<float> read_model(const std::filesystem::path& path);

}  // namespace labelmend
