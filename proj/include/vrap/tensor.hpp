#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace vrap {

// Dense rank-3 array in height x width x channel order, double precision.
// The whole library works on normalized pixel values in [0, 1]; the tensor
// itself does not enforce the range.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, double fill = 0.0)
      : h_(height), w_(width), c_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    assert(height >= 0 && width >= 0 && channels >= 0);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& other) const {
    return h_ == other.h_ && w_ == other.w_ && c_ == other.c_;
  }

  double& operator()(int i, int j, int k) {
    assert(i >= 0 && i < h_ && j >= 0 && j < w_ && k >= 0 && k < c_);
    return data_[(static_cast<std::size_t>(i) * w_ + j) * c_ + k];
  }
  double operator()(int i, int j, int k) const {
    assert(i >= 0 && i < h_ && j >= 0 && j < w_ && k >= 0 && k < c_);
    return data_[(static_cast<std::size_t>(i) * w_ + j) * c_ + k];
  }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  double min_value() const {
    assert(!data_.empty());
    return *std::min_element(data_.begin(), data_.end());
  }
  double max_value() const {
    assert(!data_.empty());
    return *std::max_element(data_.begin(), data_.end());
  }
  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  bool all_in(double lo, double hi) const {
    return std::all_of(data_.begin(), data_.end(),
                       [&](double v) { return v >= lo && v <= hi; });
  }

  Tensor& clamp_in_place(double lo, double hi) {
    for (double& v : data_) v = std::clamp(v, lo, hi);
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.h_ == b.h_ && a.w_ == b.w_ && a.c_ == b.c_ && a.data_ == b.data_;
  }

 private:
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<double> data_;
};

inline double linf_distance(const Tensor& a, const Tensor& b) {
  assert(a.same_shape(b));
  double m = 0.0;
  for (std::size_t idx = 0; idx < a.size(); ++idx)
    m = std::max(m, std::abs(a[idx] - b[idx]));
  return m;
}

}  // namespace vrap
