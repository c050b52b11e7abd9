#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmda/rng.hpp"

namespace mmda {

// Dense 1-D/2-D numeric array. Storage is shared so autograd closures can
// hold cheap copies; values are written once per forward pass and treated as
// immutable afterwards. `grad` is allocated only for tensors that take part
// in differentiation.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<T>> data;
  std::shared_ptr<std::vector<T>> grad;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shp, bool tracked = false) {
    Tensor t;
    t.shape = std::move(shp);
    std::size_t n = 1;
    for (int d : t.shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
      n *= static_cast<std::size_t>(d);
    }
    t.data = std::make_shared<std::vector<T>>(n, T(0));
    if (tracked) t.grad = std::make_shared<std::vector<T>>(n, T(0));
    return t;
  }

  static Tensor from(std::vector<int> shp, std::vector<T> values, bool tracked = false) {
    Tensor t = zeros(std::move(shp), tracked);
    if (values.size() != t.data->size())
      throw std::invalid_argument("Tensor: value count does not match shape");
    *t.data = std::move(values);
    return t;
  }

  bool tracked() const { return grad != nullptr; }
  std::size_t numel() const { return data ? data->size() : 0; }
  int ndim() const { return static_cast<int>(shape.size()); }

  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  // Storage is shared; const Tensor copies held by adjoint closures still
  // write gradients through it.
  T* ptr() const { return data->data(); }
  T* gptr() const { return grad->data(); }

  T& at(int i) const { return (*data)[static_cast<std::size_t>(i)]; }
  T& at(int i, int j) const { return (*data)[static_cast<std::size_t>(i) * cols() + j]; }

  bool all_finite() const {
    for (const T& v : *data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// Record of the primitive ops of one forward pass. backward() replays the
// recorded adjoints in exact reverse order of creation; running it twice
// without a fresh forward pass is an error.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> adjoint) {
    records_.push_back(std::move(adjoint));
  }

  void backward() {
    if (spent_) throw std::logic_error("Tape::backward called twice on one forward pass");
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    spent_ = true;
  }

  void reset() {
    records_.clear();
    spent_ = false;
  }

  std::size_t size() const { return records_.size(); }
  bool spent() const { return spent_; }

 private:
  std::vector<std::function<void()>> records_;
  bool spent_ = false;
};

// Trainable tensor plus its Adadelta accumulators (squared-gradient and
// squared-update running averages). The gradient lives inside value.grad
// and always matches the value shape.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> acc_grad;
  Tensor<T> acc_update;

  Parameter() = default;

  Parameter(std::string n, std::vector<int> shape)
      : name(std::move(n)),
        value(Tensor<T>::zeros(shape, true)),
        acc_grad(Tensor<T>::zeros(shape)),
        acc_update(Tensor<T>::zeros(shape)) {}

  void init_uniform(Rng& rng, double scale) {
    for (T& v : *value.data) v = static_cast<T>(rng.uniform(-scale, scale));
  }

  void zero_grad() {
    for (T& g : *value.grad) g = T(0);
  }

  Tensor<T>& tensor() { return value; }
  const Tensor<T>& tensor() const { return value; }
  std::size_t numel() const { return value.numel(); }
};

}  // namespace mmda
