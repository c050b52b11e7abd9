#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mmda::kernels {

// Runtime switch for the OpenMP paths. The parallel kernels split work by
// output element only, keeping each element's summation order identical to
// the serial reference, so results are bitwise equal in either mode.
void set_parallel(bool on);
bool parallel_enabled();
int thread_count();

// Work below this many multiply-adds is not worth forking for.
inline constexpr std::size_t kParallelGrain = 16 * 1024;

// ---------------------------------------------------------------------------
// Serial reference implementations. Kept as the ground truth the OpenMP
// kernels are tested against.
// ---------------------------------------------------------------------------
namespace serial {

// y = W x, W row-major [rows x cols]
template <typename T>
void matvec(const T* w, const T* x, T* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T acc = T(0);
    const T* row = w + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// y += W x
template <typename T>
void matvec_acc(const T* w, const T* x, T* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T acc = T(0);
    const T* row = w + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// out += W^T v, W [rows x cols], v [rows], out [cols]
template <typename T>
void matvec_t_acc(const T* w, const T* v, T* out, int rows, int cols) {
  for (int j = 0; j < cols; ++j) {
    T acc = T(0);
    for (int i = 0; i < rows; ++i) acc += w[static_cast<std::size_t>(i) * cols + j] * v[i];
    out[j] += acc;
  }
}

// W += g v^T (rank-1 update), g [rows], v [cols]
template <typename T>
void ger_acc(const T* g, const T* v, T* w, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T* row = w + static_cast<std::size_t>(i) * cols;
    const T gi = g[i];
    for (int j = 0; j < cols; ++j) row[j] += gi * v[j];
  }
}

// C = A B^T, A [m x k], B [n x k], C [m x n]
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

// C += A B, A [m x k], B [k x n], C [m x n]
template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * b[static_cast<std::size_t>(p) * n + j];
      crow[j] += acc;
    }
  }
}

// C += A^T B, A [m x ca], B [m x cb], C [ca x cb]
template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int m, int ca, int cb) {
  for (int i = 0; i < ca; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * cb;
    for (int j = 0; j < cb; ++j) {
      T acc = T(0);
      for (int p = 0; p < m; ++p)
        acc += a[static_cast<std::size_t>(p) * ca + i] * b[static_cast<std::size_t>(p) * cb + j];
      crow[j] += acc;
    }
  }
}

// out += column sums of A [m x n]
template <typename T>
void colsum_acc(const T* a, T* out, int m, int n) {
  for (int j = 0; j < n; ++j) {
    T acc = T(0);
    for (int i = 0; i < m; ++i) acc += a[static_cast<std::size_t>(i) * n + j];
    out[j] += acc;
  }
}

// Same-length cross-correlation with zero padding; klen odd.
template <typename T>
void conv1d(const T* x, const T* k, T* y, int n, int klen) {
  const int half = (klen - 1) / 2;
  for (int t = 0; t < n; ++t) {
    T acc = T(0);
    for (int p = 0; p < klen; ++p) {
      const int s = t + p - half;
      if (s >= 0 && s < n) acc += x[s] * k[p];
    }
    y[t] = acc;
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Each output element is owned by exactly one thread and
// computed with the serial inner loop, so the result matches serial::
// bitwise for any thread count.
// ---------------------------------------------------------------------------

template <typename T>
void matvec(const T* w, const T* x, T* y, int rows, int cols) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::matvec(w, x, y, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    T acc = T(0);
    const T* row = w + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

template <typename T>
void matvec_acc(const T* w, const T* x, T* y, int rows, int cols) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::matvec_acc(w, x, y, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    T acc = T(0);
    const T* row = w + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

template <typename T>
void matvec_t_acc(const T* w, const T* v, T* out, int rows, int cols) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::matvec_t_acc(w, v, out, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) {
    T acc = T(0);
    for (int i = 0; i < rows; ++i) acc += w[static_cast<std::size_t>(i) * cols + j] * v[i];
    out[j] += acc;
  }
}

template <typename T>
void ger_acc(const T* g, const T* v, T* w, int rows, int cols) {
  const std::size_t work = static_cast<std::size_t>(rows) * cols;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::ger_acc(g, v, w, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    T* row = w + static_cast<std::size_t>(i) * cols;
    const T gi = g[i];
    for (int j = 0; j < cols; ++j) row[j] += gi * v[j];
  }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::matmul_nt(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::matmul_nn_acc(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * b[static_cast<std::size_t>(p) * n + j];
      crow[j] += acc;
    }
  }
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int m, int ca, int cb) {
  const std::size_t work = static_cast<std::size_t>(m) * ca * cb;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::matmul_tn_acc(a, b, c, m, ca, cb);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < ca; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * cb;
    for (int j = 0; j < cb; ++j) {
      T acc = T(0);
      for (int p = 0; p < m; ++p)
        acc += a[static_cast<std::size_t>(p) * ca + i] * b[static_cast<std::size_t>(p) * cb + j];
      crow[j] += acc;
    }
  }
}

template <typename T>
void colsum_acc(const T* a, T* out, int m, int n) {
  const std::size_t work = static_cast<std::size_t>(m) * n;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::colsum_acc(a, out, m, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    T acc = T(0);
    for (int i = 0; i < m; ++i) acc += a[static_cast<std::size_t>(i) * n + j];
    out[j] += acc;
  }
}

template <typename T>
void conv1d(const T* x, const T* k, T* y, int n, int klen) {
  const std::size_t work = static_cast<std::size_t>(n) * klen;
  if (!parallel_enabled() || work < kParallelGrain) {
    serial::conv1d(x, k, y, n, klen);
    return;
  }
  const int half = (klen - 1) / 2;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < n; ++t) {
    T acc = T(0);
    for (int p = 0; p < klen; ++p) {
      const int s = t + p - half;
      if (s >= 0 && s < n) acc += x[s] * k[p];
    }
    y[t] = acc;
  }
}

}  // namespace mmda::kernels
