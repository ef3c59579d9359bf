#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "latentnav/util/common.hpp"

namespace latentnav::core {

using Real = double;

// Dense row-major tensor with shared storage. Copies are shallow; use clone()
// for a deep copy. view() reinterprets the shape without touching data.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    numel_ = 1;
    for (int d : shape_) {
      LN_CHECK(d > 0, "tensor dims must be positive");
      numel_ *= d;
    }
    store_ = std::make_shared<std::vector<Real>>(static_cast<size_t>(numel_), Real(0));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, Real v) {
    Tensor t(std::move(shape));
    for (auto& x : *t.store_) x = v;
    return t;
  }

  static Tensor scalar(Real v) { return full({1}, v); }

  static Tensor from(std::vector<int> shape, std::vector<Real> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = 1;
    for (int d : t.shape_) t.numel_ *= d;
    LN_CHECK(t.numel_ == static_cast<int64_t>(data.size()), "shape/data size mismatch");
    t.store_ = std::make_shared<std::vector<Real>>(std::move(data));
    return t;
  }

  bool defined() const { return store_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return numel_; }

  Real* data() { return store_->data(); }
  const Real* data() const { return store_->data(); }
  Real& operator[](int64_t i) { return (*store_)[static_cast<size_t>(i)]; }
  Real operator[](int64_t i) const { return (*store_)[static_cast<size_t>(i)]; }

  Real value() const {
    LN_CHECK(numel_ == 1, "value() requires a scalar tensor");
    return (*store_)[0];
  }

  // Shares storage; element count must be preserved.
  Tensor view(std::vector<int> new_shape) const {
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.numel_ = 1;
    for (int d : t.shape_) t.numel_ *= d;
    LN_CHECK(t.numel_ == numel_, "view must preserve element count");
    t.store_ = store_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.numel_ = numel_;
    t.store_ = std::make_shared<std::vector<Real>>(*store_);
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (Real x : *store_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  void fill(Real v) {
    for (auto& x : *store_) x = v;
  }

  void add_(const Tensor& o) {
    LN_CHECK(numel_ == o.numel_, "add_: size mismatch");
    Real* a = data();
    const Real* b = o.data();
    for (int64_t i = 0; i < numel_; ++i) a[i] += b[i];
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> shape_;
  int64_t numel_ = 0;
  std::shared_ptr<std::vector<Real>> store_;
};

}  // namespace latentnav::core
