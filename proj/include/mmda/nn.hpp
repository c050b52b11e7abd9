#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mmda/kernels.hpp"
#include "mmda/tensor.hpp"

namespace mmda::nn {

// Ops take the tape by pointer; nullptr means inference (no adjoints are
// recorded and outputs carry no grad). With a tape, the output is tracked
// iff any input is.

namespace detail {

template <typename T>
bool want_grad(Tape<T>* tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape) return false;
  for (const Tensor<T>* t : inputs)
    if (t->tracked()) return true;
  return false;
}

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// y = W x (+ b), W [rows x cols], x [cols]
template <typename T>
Tensor<T> affine(Tape<T>* tape, const Tensor<T>& w, const Tensor<T>& x, const Tensor<T>* b = nullptr) {
  detail::require(w.ndim() == 2 && x.ndim() == 1 && w.cols() == x.dim(0), "affine: shape mismatch");
  if (b) detail::require(b->ndim() == 1 && b->dim(0) == w.rows(), "affine: bias shape mismatch");
  const int rows = w.rows(), cols = w.cols();
  const bool tracked = detail::want_grad(tape, b ? std::initializer_list<const Tensor<T>*>{&w, &x, b}
                                                 : std::initializer_list<const Tensor<T>*>{&w, &x});
  Tensor<T> y = Tensor<T>::zeros({rows}, tracked);
  kernels::matvec(w.ptr(), x.ptr(), y.ptr(), rows, cols);
  if (b)
    for (int i = 0; i < rows; ++i) y.at(i) += b->at(i);
  if (tracked) {
    Tensor<T> bw = b ? *b : Tensor<T>();
    tape->record([w, x, bw, y, rows, cols]() {
      const T* g = y.gptr();
      if (w.tracked()) kernels::ger_acc(g, x.ptr(), w.gptr(), rows, cols);
      if (x.tracked()) kernels::matvec_t_acc(w.ptr(), g, x.gptr(), rows, cols);
      if (bw.data && bw.tracked())
        for (int i = 0; i < rows; ++i) bw.gptr()[i] += g[i];
    });
  }
  return y;
}

// Y = X W^T (+ b per row), X [L x in], W [out x in]
template <typename T>
Tensor<T> linear_seq(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b = nullptr) {
  detail::require(x.ndim() == 2 && w.ndim() == 2 && x.cols() == w.cols(), "linear_seq: shape mismatch");
  const int l = x.rows(), in = x.cols(), out = w.rows();
  if (b) detail::require(b->ndim() == 1 && b->dim(0) == out, "linear_seq: bias shape mismatch");
  const bool tracked = detail::want_grad(tape, b ? std::initializer_list<const Tensor<T>*>{&x, &w, b}
                                                 : std::initializer_list<const Tensor<T>*>{&x, &w});
  Tensor<T> y = Tensor<T>::zeros({l, out}, tracked);
  kernels::matmul_nt(x.ptr(), w.ptr(), y.ptr(), l, in, out);
  if (b)
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < out; ++j) y.at(i, j) += b->at(j);
  if (tracked) {
    Tensor<T> bw = b ? *b : Tensor<T>();
    tape->record([x, w, bw, y, l, in, out]() {
      const T* g = y.gptr();
      if (x.tracked()) kernels::matmul_nn_acc(g, w.ptr(), x.gptr(), l, out, in);
      if (w.tracked()) kernels::matmul_tn_acc(g, x.ptr(), w.gptr(), l, out, in);
      if (bw.data && bw.tracked()) kernels::colsum_acc(g, bw.gptr(), l, out);
    });
  }
  return y;
}

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape == b.shape, "add: shape mismatch");
  const bool tracked = detail::want_grad(tape, {&a, &b});
  Tensor<T> y = Tensor<T>::zeros(a.shape, tracked);
  const std::size_t n = y.numel();
  for (std::size_t i = 0; i < n; ++i) (*y.data)[i] = (*a.data)[i] + (*b.data)[i];
  if (tracked) {
    tape->record([a, b, y, n]() {
      if (a.tracked())
        for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += (*y.grad)[i];
      if (b.tracked())
        for (std::size_t i = 0; i < n; ++i) (*b.grad)[i] += (*y.grad)[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape == b.shape, "mul: shape mismatch");
  const bool tracked = detail::want_grad(tape, {&a, &b});
  Tensor<T> y = Tensor<T>::zeros(a.shape, tracked);
  const std::size_t n = y.numel();
  for (std::size_t i = 0; i < n; ++i) (*y.data)[i] = (*a.data)[i] * (*b.data)[i];
  if (tracked) {
    tape->record([a, b, y, n]() {
      if (a.tracked())
        for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += (*y.grad)[i] * (*b.data)[i];
      if (b.tracked())
        for (std::size_t i = 0; i < n; ++i) (*b.grad)[i] += (*y.grad)[i] * (*a.data)[i];
    });
  }
  return y;
}

// y = c * x with a plain (non-learned) scalar.
template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T c) {
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros(x.shape, tracked);
  const std::size_t n = y.numel();
  for (std::size_t i = 0; i < n; ++i) (*y.data)[i] = c * (*x.data)[i];
  if (tracked) {
    tape->record([x, y, c, n]() {
      for (std::size_t i = 0; i < n; ++i) (*x.grad)[i] += c * (*y.grad)[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros(x.shape, tracked);
  const std::size_t n = y.numel();
  for (std::size_t i = 0; i < n; ++i) (*y.data)[i] = T(1) / (T(1) + std::exp(-(*x.data)[i]));
  if (tracked) {
    tape->record([x, y, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        const T s = (*y.data)[i];
        (*x.grad)[i] += (*y.grad)[i] * s * (T(1) - s);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> tanh_op(Tape<T>* tape, const Tensor<T>& x) {
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros(x.shape, tracked);
  const std::size_t n = y.numel();
  for (std::size_t i = 0; i < n; ++i) (*y.data)[i] = std::tanh((*x.data)[i]);
  if (tracked) {
    tape->record([x, y, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        const T t = (*y.data)[i];
        (*x.grad)[i] += (*y.grad)[i] * (T(1) - t * t);
      }
    });
  }
  return y;
}

// Contiguous 1-D slice [begin, begin+len).
template <typename T>
Tensor<T> slice1d(Tape<T>* tape, const Tensor<T>& x, int begin, int len) {
  detail::require(x.ndim() == 1, "slice1d: 1-D input required");
  detail::require(begin >= 0 && len > 0 && begin + len <= x.dim(0), "slice1d: range out of bounds");
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros({len}, tracked);
  for (int i = 0; i < len; ++i) y.at(i) = x.at(begin + i);
  if (tracked) {
    tape->record([x, y, begin, len]() {
      for (int i = 0; i < len; ++i) (*x.grad)[static_cast<std::size_t>(begin + i)] += (*y.grad)[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat1d(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.ndim() == 1 && b.ndim() == 1, "concat1d: 1-D inputs required");
  const int na = a.dim(0), nb = b.dim(0);
  const bool tracked = detail::want_grad(tape, {&a, &b});
  Tensor<T> y = Tensor<T>::zeros({na + nb}, tracked);
  for (int i = 0; i < na; ++i) y.at(i) = a.at(i);
  for (int i = 0; i < nb; ++i) y.at(na + i) = b.at(i);
  if (tracked) {
    tape->record([a, b, y, na, nb]() {
      if (a.tracked())
        for (int i = 0; i < na; ++i) (*a.grad)[i] += (*y.grad)[i];
      if (b.tracked())
        for (int i = 0; i < nb; ++i) (*b.grad)[i] += (*y.grad)[na + i];
    });
  }
  return y;
}

// Copy of row i of X as a vector.
template <typename T>
Tensor<T> row_of(Tape<T>* tape, const Tensor<T>& x, int i) {
  detail::require(x.ndim() == 2, "row_of: 2-D input required");
  detail::require(i >= 0 && i < x.rows(), "row_of: row out of range");
  const int c = x.cols();
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros({c}, tracked);
  for (int j = 0; j < c; ++j) y.at(j) = x.at(i, j);
  if (tracked) {
    tape->record([x, y, i, c]() {
      for (int j = 0; j < c; ++j) (*x.grad)[static_cast<std::size_t>(i) * c + j] += (*y.grad)[j];
    });
  }
  return y;
}

// Stack L equal-length vectors into an [L x D] matrix.
template <typename T>
Tensor<T> stack_rows(Tape<T>* tape, const std::vector<Tensor<T>>& rows) {
  detail::require(!rows.empty(), "stack_rows: empty sequence");
  const int d = rows.front().dim(0);
  bool tracked = false;
  for (const auto& r : rows) {
    detail::require(r.ndim() == 1 && r.dim(0) == d, "stack_rows: inconsistent row widths");
    if (tape && r.tracked()) tracked = true;
  }
  const int l = static_cast<int>(rows.size());
  Tensor<T> y = Tensor<T>::zeros({l, d}, tracked);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = rows[static_cast<std::size_t>(i)].at(j);
  if (tracked) {
    tape->record([rows, y, l, d]() {
      for (int i = 0; i < l; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (!r.tracked()) continue;
        for (int j = 0; j < d; ++j) (*r.grad)[j] += (*y.grad)[static_cast<std::size_t>(i) * d + j];
      }
    });
  }
  return y;
}

// Y = X + 1 v^T (the vector added to every row).
template <typename T>
Tensor<T> add_rowvec(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& v) {
  detail::require(x.ndim() == 2 && v.ndim() == 1 && x.cols() == v.dim(0), "add_rowvec: shape mismatch");
  const int l = x.rows(), d = x.cols();
  const bool tracked = detail::want_grad(tape, {&x, &v});
  Tensor<T> y = Tensor<T>::zeros({l, d}, tracked);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = x.at(i, j) + v.at(j);
  if (tracked) {
    tape->record([x, v, y, l, d]() {
      if (x.tracked())
        for (std::size_t i = 0; i < static_cast<std::size_t>(l) * d; ++i) (*x.grad)[i] += (*y.grad)[i];
      if (v.tracked()) kernels::colsum_acc(y.gptr(), v.gptr(), l, d);
    });
  }
  return y;
}

// Row gather; the gradient scatters into exactly the gathered rows.
template <typename T>
Tensor<T> embedding_lookup(Tape<T>* tape, const std::vector<int>& ids, const Tensor<T>& table) {
  detail::require(table.ndim() == 2, "embedding_lookup: 2-D table required");
  if (ids.empty()) throw std::invalid_argument("embedding_lookup: empty id sequence");
  const int v = table.rows(), d = table.cols();
  for (int id : ids)
    if (id < 0 || id >= v) throw std::out_of_range("embedding_lookup: id out of range");
  const bool tracked = detail::want_grad(tape, {&table});
  const int l = static_cast<int>(ids.size());
  Tensor<T> y = Tensor<T>::zeros({l, d}, tracked);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = table.at(ids[static_cast<std::size_t>(i)], j);
  if (tracked) {
    tape->record([ids, table, y, l, d]() {
      for (int i = 0; i < l; ++i) {
        const std::size_t row = static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d;
        for (int j = 0; j < d; ++j) (*table.grad)[row + j] += (*y.grad)[static_cast<std::size_t>(i) * d + j];
      }
    });
  }
  return y;
}

// Same-length cross-correlation with zero padding of (K-1)/2 per side.
template <typename T>
Tensor<T> conv1d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& kernel) {
  detail::require(x.ndim() == 1 && kernel.ndim() == 1, "conv1d: 1-D signal and kernel required");
  const int n = x.dim(0), k = kernel.dim(0);
  if (k % 2 == 0) throw std::invalid_argument("conv1d: kernel width must be odd");
  const bool tracked = detail::want_grad(tape, {&x, &kernel});
  Tensor<T> y = Tensor<T>::zeros({n}, tracked);
  kernels::conv1d(x.ptr(), kernel.ptr(), y.ptr(), n, k);
  if (tracked) {
    const int half = (k - 1) / 2;
    tape->record([x, kernel, y, n, k, half]() {
      for (int t = 0; t < n; ++t) {
        const T g = (*y.grad)[t];
        for (int p = 0; p < k; ++p) {
          const int s = t + p - half;
          if (s < 0 || s >= n) continue;
          if (x.tracked()) (*x.grad)[s] += g * kernel.at(p);
          if (kernel.tracked()) (*kernel.grad)[p] += g * x.at(s);
        }
      }
    });
  }
  return y;
}

// c = sum_t w[t] * M[t,:]
template <typename T>
Tensor<T> weighted_sum_rows(Tape<T>* tape, const Tensor<T>& m, const Tensor<T>& w) {
  detail::require(m.ndim() == 2 && w.ndim() == 1 && m.rows() == w.dim(0), "weighted_sum_rows: shape mismatch");
  const int t = m.rows(), d = m.cols();
  const bool tracked = detail::want_grad(tape, {&m, &w});
  Tensor<T> y = Tensor<T>::zeros({d}, tracked);
  kernels::matvec_t_acc(m.ptr(), w.ptr(), y.ptr(), t, d);
  if (tracked) {
    tape->record([m, w, y, t, d]() {
      const T* g = y.gptr();
      if (w.tracked())
        for (int i = 0; i < t; ++i) {
          T acc = T(0);
          for (int j = 0; j < d; ++j) acc += m.at(i, j) * g[j];
          (*w.grad)[i] += acc;
        }
      if (m.tracked()) kernels::ger_acc(w.ptr(), g, m.gptr(), t, d);
    });
  }
  return y;
}

// Numerically stabilized softmax over a vector.
template <typename T>
Tensor<T> softmax(Tape<T>* tape, const Tensor<T>& x) {
  detail::require(x.ndim() == 1, "softmax: 1-D input required");
  const int n = x.dim(0);
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros({n}, tracked);
  T mx = x.at(0);
  for (int i = 1; i < n; ++i) mx = std::max(mx, x.at(i));
  T z = T(0);
  for (int i = 0; i < n; ++i) {
    const T e = std::exp(x.at(i) - mx);
    y.at(i) = e;
    z += e;
  }
  for (int i = 0; i < n; ++i) y.at(i) /= z;
  if (tracked) {
    tape->record([x, y, n]() {
      T dot = T(0);
      for (int i = 0; i < n; ++i) dot += (*y.grad)[i] * (*y.data)[i];
      for (int i = 0; i < n; ++i) (*x.grad)[i] += (*y.data)[i] * ((*y.grad)[i] - dot);
    });
  }
  return y;
}

// loss = -log softmax(logits)[target], as a 1-element tensor.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits, int target) {
  detail::require(logits.ndim() == 1, "softmax_cross_entropy: 1-D logits required");
  const int n = logits.dim(0);
  if (target < 0 || target >= n) throw std::out_of_range("softmax_cross_entropy: target out of range");
  const bool tracked = detail::want_grad(tape, {&logits});
  Tensor<T> loss = Tensor<T>::zeros({1}, tracked);
  T mx = logits.at(0);
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.at(i));
  T z = T(0);
  for (int i = 0; i < n; ++i) z += std::exp(logits.at(i) - mx);
  loss.at(0) = -(logits.at(target) - mx - std::log(z));
  if (tracked) {
    tape->record([logits, loss, target, n, mx, z]() {
      const T g = (*loss.grad)[0];
      for (int i = 0; i < n; ++i) {
        const T p = std::exp(logits.at(i) - mx) / z;
        (*logits.grad)[i] += g * (p - (i == target ? T(1) : T(0)));
      }
    });
  }
  return loss;
}

// Sum of all entries as a 1-element tensor.
template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& x) {
  const bool tracked = detail::want_grad(tape, {&x});
  Tensor<T> y = Tensor<T>::zeros({1}, tracked);
  T acc = T(0);
  for (const T& v : *x.data) acc += v;
  y.at(0) = acc;
  if (tracked) {
    tape->record([x, y]() {
      const T g = (*y.grad)[0];
      for (T& gx : *x.grad) gx += g;
    });
  }
  return y;
}

// Inference-only log softmax (no tape).
template <typename T>
Tensor<T> log_softmax_inference(const Tensor<T>& x) {
  detail::require(x.ndim() == 1, "log_softmax: 1-D input required");
  const int n = x.dim(0);
  Tensor<T> y = Tensor<T>::zeros({n});
  T mx = x.at(0);
  for (int i = 1; i < n; ++i) mx = std::max(mx, x.at(i));
  T z = T(0);
  for (int i = 0; i < n; ++i) z += std::exp(x.at(i) - mx);
  const T lz = std::log(z);
  for (int i = 0; i < n; ++i) y.at(i) = x.at(i) - mx - lz;
  return y;
}

// Seed the scalar loss and replay the tape.
template <typename T>
void backward_scalar(Tape<T>& tape, Tensor<T>& loss) {
  detail::require(loss.numel() == 1, "backward_scalar: scalar loss required");
  if (!loss.tracked()) throw std::logic_error("backward_scalar: loss does not carry grad");
  (*loss.grad)[0] = T(1);
  tape.backward();
}

// ---------------------------------------------------------------------------
// LSTM cell
// ---------------------------------------------------------------------------

template <typename T>
struct LstmCellParams {
  Parameter<T> w_x;  // [4H x D]
  Parameter<T> w_h;  // [4H x H]
  Parameter<T> b;    // [4H]
  int hidden = 0;
  int input = 0;

  LstmCellParams() = default;
  LstmCellParams(const std::string& prefix, int input_dim, int hidden_dim)
      : w_x(prefix + ".w_x", {4 * hidden_dim, input_dim}),
        w_h(prefix + ".w_h", {4 * hidden_dim, hidden_dim}),
        b(prefix + ".b", {4 * hidden_dim}),
        hidden(hidden_dim),
        input(input_dim) {}

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&w_x);
    out.push_back(&w_h);
    out.push_back(&b);
  }
};

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

// Standard gate equations: i, f, o logistic, candidate tanh. Gate blocks are
// packed in w_x/w_h rows as [i; f; g; o].
template <typename T>
LstmState<T> lstm_step(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& h_prev,
                       const Tensor<T>& c_prev, LstmCellParams<T>& p) {
  detail::require(x.ndim() == 1 && x.dim(0) == p.input, "lstm_step: input dim mismatch");
  detail::require(h_prev.ndim() == 1 && h_prev.dim(0) == p.hidden, "lstm_step: hidden dim mismatch");
  detail::require(c_prev.ndim() == 1 && c_prev.dim(0) == p.hidden, "lstm_step: cell dim mismatch");
  const int h = p.hidden;
  Tensor<T> gx = affine(tape, p.w_x.value, x, &p.b.value);
  Tensor<T> gh = affine(tape, p.w_h.value, h_prev);
  Tensor<T> gates = add(tape, gx, gh);
  Tensor<T> ig = sigmoid(tape, slice1d(tape, gates, 0, h));
  Tensor<T> fg = sigmoid(tape, slice1d(tape, gates, h, h));
  Tensor<T> cand = tanh_op(tape, slice1d(tape, gates, 2 * h, h));
  Tensor<T> og = sigmoid(tape, slice1d(tape, gates, 3 * h, h));
  Tensor<T> c = add(tape, mul(tape, fg, c_prev), mul(tape, ig, cand));
  Tensor<T> out_h = mul(tape, og, tanh_op(tape, c));
  return {out_h, c};
}

// Left-to-right and right-to-left passes concatenated per timestep: [L x 2H].
template <typename T>
struct BiLstmParams {
  LstmCellParams<T> fwd;
  LstmCellParams<T> bwd;

  BiLstmParams() = default;
  BiLstmParams(const std::string& prefix, int input_dim, int hidden_dim)
      : fwd(prefix + ".fwd", input_dim, hidden_dim), bwd(prefix + ".bwd", input_dim, hidden_dim) {}

  void collect(std::vector<Parameter<T>*>& out) {
    fwd.collect(out);
    bwd.collect(out);
  }
};

template <typename T>
Tensor<T> bilstm_layer(Tape<T>* tape, const Tensor<T>& x, BiLstmParams<T>& p) {
  detail::require(x.ndim() == 2, "bilstm_layer: 2-D input required");
  const int l = x.rows();
  const int h = p.fwd.hidden;
  std::vector<Tensor<T>> fwd_h(static_cast<std::size_t>(l));
  std::vector<Tensor<T>> bwd_h(static_cast<std::size_t>(l));
  LstmState<T> st{Tensor<T>::zeros({h}), Tensor<T>::zeros({h})};
  for (int t = 0; t < l; ++t) {
    st = lstm_step(tape, row_of(tape, x, t), st.h, st.c, p.fwd);
    fwd_h[static_cast<std::size_t>(t)] = st.h;
  }
  st = {Tensor<T>::zeros({h}), Tensor<T>::zeros({h})};
  for (int t = l - 1; t >= 0; --t) {
    st = lstm_step(tape, row_of(tape, x, t), st.h, st.c, p.bwd);
    bwd_h[static_cast<std::size_t>(t)] = st.h;
  }
  std::vector<Tensor<T>> rows(static_cast<std::size_t>(l));
  for (int t = 0; t < l; ++t)
    rows[static_cast<std::size_t>(t)] =
        concat1d(tape, fwd_h[static_cast<std::size_t>(t)], bwd_h[static_cast<std::size_t>(t)]);
  return stack_rows(tape, rows);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

// Adadelta: decayed squared-grad average, RMS-ratio scaling, decayed
// squared-update average. A zero gradient leaves the value untouched.
template <typename T>
void adadelta_update(Parameter<T>& p, T rho, T eps) {
  const std::size_t n = p.value.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const T g = (*p.value.grad)[i];
    T& eg = (*p.acc_grad.data)[i];
    T& eu = (*p.acc_update.data)[i];
    eg = rho * eg + (T(1) - rho) * g * g;
    const T delta = -std::sqrt((eu + eps) / (eg + eps)) * g;
    (*p.value.data)[i] += delta;
    eu = rho * eu + (T(1) - rho) * delta * delta;
  }
}

// Returns the pre-clip global norm. max_norm <= 0 disables clipping.
template <typename T>
double clip_global_norm(const std::vector<Parameter<T>*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter<T>* p : params)
    for (const T& g : *p->value.grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (Parameter<T>* p : params)
      for (T& g : *p->value.grad) g *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

// loss_with_grad must zero grads, run a fresh forward+backward and return the
// loss. Central differences are compared on a seeded sample of coordinates;
// the relative-error denominator is floored at 1e-6 so coordinates whose true
// gradient sits below fd noise do not dominate.
template <typename T>
double gradient_check(const std::function<T()>& loss_with_grad,
                      const std::vector<Parameter<T>*>& params, double epsilon,
                      int max_coords_per_param = 40, std::uint64_t seed = 1234) {
  static_assert(std::is_floating_point_v<T>, "gradient_check: floating point only");
  if (!std::is_same_v<T, double>)
    throw std::logic_error("gradient_check requires the 64-bit precision mode");

  const T l1 = loss_with_grad();
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (Parameter<T>* p : params) analytic.push_back(*p->value.grad);

  const T l2 = loss_with_grad();
  if (std::memcmp(&l1, &l2, sizeof(T)) != 0)
    throw std::runtime_error("gradient_check: loss function is not deterministic");

  Rng rng(seed);
  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<T>* p = params[pi];
    const std::size_t n = p->value.numel();
    std::vector<std::size_t> coords;
    if (static_cast<int>(n) <= max_coords_per_param) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (int i = 0; i < max_coords_per_param; ++i) coords.push_back(rng.below(n));
    }
    for (std::size_t ci : coords) {
      T& v = (*p->value.data)[ci];
      const T orig = v;
      v = orig + static_cast<T>(epsilon);
      const T lp = loss_with_grad();
      v = orig - static_cast<T>(epsilon);
      const T lm = loss_with_grad();
      v = orig;
      const double fd = (static_cast<double>(lp) - static_cast<double>(lm)) / (2.0 * epsilon);
      const double an = static_cast<double>(analytic[pi][ci]);
      double rel = 0.0;
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      if (std::abs(fd) > 1e-12 || std::abs(an) > 1e-12) rel = std::abs(fd - an) / denom;
      max_rel = std::max(max_rel, rel);
    }
  }
  // restore analytic grads for callers that inspect them afterwards
  loss_with_grad();
  return max_rel;
}

}  // namespace mmda::nn
