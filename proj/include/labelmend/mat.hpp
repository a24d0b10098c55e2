#pragma once

#include <cstddef>
#include <vector>

#include "labelmend/error.hpp"

namespace labelmend {

// Dense row-major matrix. The gemm kernels below keep a fixed inner
// summation order, so results are identical for any OpenMP thread count
// and bitwise-equal to the serial:: reference versions.
template <typename T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), v(r * c, fill) {}

  T* row(std::size_t i) { return v.data() + i * cols; }
  const T* row(std::size_t i) const { return v.data() + i * cols; }
  T& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

  template <typename U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

namespace detail {
inline void check_dims(bool ok, const char* what) {
  if (!ok) raise(Errc::shape_mismatch, what);
}
}  // namespace detail

// C = A * B^T, A:[n,k] B:[m,k] -> C:[n,m]
template <typename T>
Mat<T> gemm_nt(const Mat<T>& a, const Mat<T>& b) {
  detail::check_dims(a.cols == b.cols, "gemm_nt inner dims");
  Mat<T> c(a.rows, b.rows);
#pragma omp parallel for schedule(static) if (a.rows * b.rows > 4096)
  for (long long i = 0; i < static_cast<long long>(a.rows); ++i) {
    const T* ai = a.row(static_cast<std::size_t>(i));
    T* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows; ++j) {
      const T* bj = b.row(j);
      T acc = T(0);
      for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return c;
}

// C = A^T * B, A:[n,r] B:[n,c] -> C:[r,c]
template <typename T>
Mat<T> gemm_tn(const Mat<T>& a, const Mat<T>& b) {
  detail::check_dims(a.rows == b.rows, "gemm_tn inner dims");
  Mat<T> c(a.cols, b.cols);
#pragma omp parallel for schedule(static) if (a.cols * b.cols > 4096)
  for (long long i = 0; i < static_cast<long long>(a.cols); ++i) {
    T* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t n = 0; n < a.rows; ++n) {
      const T ain = a.at(n, static_cast<std::size_t>(i));
      const T* bn = b.row(n);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += ain * bn[j];
    }
  }
  return c;
}

// C = A * B, A:[n,k] B:[k,m] -> C:[n,m]
template <typename T>
Mat<T> gemm_nn(const Mat<T>& a, const Mat<T>& b) {
  detail::check_dims(a.cols == b.rows, "gemm_nn inner dims");
  Mat<T> c(a.rows, b.cols);
#pragma omp parallel for schedule(static) if (a.rows * b.cols > 4096)
  for (long long i = 0; i < static_cast<long long>(a.rows); ++i) {
    const T* ai = a.row(static_cast<std::size_t>(i));
    T* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T aik = ai[k];
      const T* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

namespace serial {

// Reference kernels without OpenMP, kept for race checks and benchmarks.
template <typename T>
Mat<T> gemm_nt(const Mat<T>& a, const Mat<T>& b) {
  detail::check_dims(a.cols == b.cols, "gemm_nt inner dims");
  Mat<T> c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      T acc = T(0);
      for (std::size_t k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(j, k);
      c.at(i, j) = acc;
    }
  return c;
}

template <typename T>
Mat<T> gemm_tn(const Mat<T>& a, const Mat<T>& b) {
  detail::check_dims(a.rows == b.rows, "gemm_tn inner dims");
  Mat<T> c(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i)
    for (std::size_t n = 0; n < a.rows; ++n)
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += a.at(n, i) * b.at(n, j);
  return c;
}

template <typename T>
Mat<T> gemm_nn(const Mat<T>& a, const Mat<T>& b) {
  detail::check_dims(a.cols == b.rows, "gemm_nn inner dims");
  Mat<T> c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

}  // namespace serial
}  // namespace labelmend
