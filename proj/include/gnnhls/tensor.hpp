#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gnnhls/error.hpp"
#include "gnnhls/rng.hpp"

namespace gnnhls {

struct FeatureTag {};
struct WeightTag {};
struct EdgeTag {};

// Row-major float matrix. The tag keeps node features, weights and
// per-edge features from being mixed up at call sites.
template <class Tag>
class BasicMatrix {
 public:
  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
  }

  template <class Other>
  explicit BasicMatrix(const BasicMatrix<Other>& o)
      : rows_(o.rows()), cols_(o.cols()), data_(o.data().begin(), o.data().end()) {}

  static BasicMatrix identity(std::size_t d) {
    BasicMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0f;
    return m;
  }

  // Uniform in [-0.5, 0.5), row-major fill order.
  static BasicMatrix random(std::size_t rows, std::size_t cols, SplitMix64& rng) {
    BasicMatrix m(rows, cols);
    for (auto& v : m.data_) v = rng.centered();
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<float> row(std::size_t r) noexcept {
    return std::span<float>(data_).subspan(r * cols_, cols_);
  }
  std::span<const float> row(std::size_t r) const noexcept {
    return std::span<const float>(data_).subspan(r * cols_, cols_);
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

using FeatureMatrix = BasicMatrix<FeatureTag>;
using DenseMatrix = BasicMatrix<WeightTag>;
using EdgeFeatures = BasicMatrix<EdgeTag>;

// out[r] = sum_c M(r,c) * x[c], ascending c then ascending r, accumulated
// in double and rounded once.
inline void vmm(std::span<const float> x, const DenseMatrix& M, std::span<float> out) {
  if (x.size() != M.cols() || out.size() != M.rows())
    throw DimensionError("vmm: " + std::to_string(M.rows()) + "x" +
                         std::to_string(M.cols()) + " matrix, input " +
                         std::to_string(x.size()) + ", output " +
                         std::to_string(out.size()));
  for (std::size_t r = 0; r < M.rows(); ++r) {
    const auto mr = M.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c)
      acc += static_cast<double>(mr[c]) * static_cast<double>(x[c]);
    out[r] = static_cast<float>(acc);
  }
}

inline std::vector<float> vmm(std::span<const float> x, const DenseMatrix& M) {
  std::vector<float> out(M.rows());
  vmm(x, M, out);
  return out;
}

// Normwise relative error: max_e |a_e - b_e| / max_e |b_e|. Falls back to
// the absolute error when b is identically zero.
inline double max_relative_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw DimensionError("compared tensors differ in size");
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    if (std::isnan(d)) return std::numeric_limits<double>::infinity();
    diff = std::max(diff, d);
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  return scale > 0.0 ? diff / scale : diff;
}

template <class Tag>
double max_relative_error(const BasicMatrix<Tag>& a, const BasicMatrix<Tag>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("compared matrices differ in shape");
  return max_relative_error(a.data(), b.data());
}

}  // namespace gnnhls
