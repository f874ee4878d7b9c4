#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fitvid {

using Scalar = double;
using Index = Eigen::Index;
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

/// Dense row-major tensor of dynamic rank, backed by a flat Eigen array.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(ArrayX::Zero(shape_size(shape_))) {}
  Tensor(Shape shape, ArrayX data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape " +
                                  shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Scalar v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }
  static Tensor scalar(Scalar v) { return full({1}, v); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index i) const { return shape_.at(static_cast<size_t>(i)); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  ArrayX& array() { return data_; }
  const ArrayX& array() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Row-major multi-index access; intended for tests and small tensors.
  Scalar& at(std::initializer_list<Index> idx) { return data_[flat_index(idx)]; }
  Scalar at(std::initializer_list<Index> idx) const { return data_[flat_index(idx)]; }

  /// Same storage viewed under a different shape (copies the buffer).
  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size())
      throw std::invalid_argument("reshape: size mismatch " + shape_str(shape_) +
                                  " -> " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// View as a (rows, cols) row-major matrix over the flat buffer.
  MatMap as_matrix(Index rows, Index cols) {
    if (rows * cols != size())
      throw std::invalid_argument("as_matrix: size mismatch");
    return MatMap(data_.data(), rows, cols);
  }
  ConstMatMap as_matrix(Index rows, Index cols) const {
    if (rows * cols != size())
      throw std::invalid_argument("as_matrix: size mismatch");
    return ConstMatMap(data_.data(), rows, cols);
  }

  /// Leading dimensions collapsed so the last axis is the column axis.
  MatMap as_matrix_by_last() {
    Index cols = shape_.empty() ? 1 : shape_.back();
    return as_matrix(size() / cols, cols);
  }
  ConstMatMap as_matrix_by_last() const {
    Index cols = shape_.empty() ? 1 : shape_.back();
    return as_matrix(size() / cols, cols);
  }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Index flat_index(std::initializer_list<Index> idx) const {
    if (static_cast<Index>(idx.size()) != rank())
      throw std::invalid_argument("at: rank mismatch");
    Index flat = 0;
    auto it = idx.begin();
    for (size_t i = 0; i < shape_.size(); ++i, ++it) {
      if (*it < 0 || *it >= shape_[i]) throw std::out_of_range("at: index out of range");
      flat = flat * shape_[i] + *it;
    }
    return flat;
  }

  Shape shape_;
  ArrayX data_;
};

/// Rank-5 frame container (batch, time, height, width, channels), values in [0,1].
struct VideoTensor {
  Tensor data;

  VideoTensor() = default;
  explicit VideoTensor(Tensor t) : data(std::move(t)) {
    if (data.rank() != 5)
      throw std::invalid_argument("VideoTensor: expected rank 5, got " +
                                  shape_str(data.shape()));
  }
  static VideoTensor zeros(Index b, Index t, Index h, Index w, Index c) {
    return VideoTensor(Tensor({b, t, h, w, c}));
  }

  Index batch() const { return data.dim(0); }
  Index frames() const { return data.dim(1); }
  Index height() const { return data.dim(2); }
  Index width() const { return data.dim(3); }
  Index channels() const { return data.dim(4); }

  bool valid_range() const {
    return data.all_finite() && (data.array() >= 0.0).all() && (data.array() <= 1.0).all();
  }
};

/// Rank-3 action container (batch, time, action_dim). action_dim may be 0.
struct ActionTensor {
  Tensor data;

  ActionTensor() = default;
  explicit ActionTensor(Tensor t) : data(std::move(t)) {
    if (data.rank() != 3)
      throw std::invalid_argument("ActionTensor: expected rank 3, got " +
                                  shape_str(data.shape()));
  }
  static ActionTensor zeros(Index b, Index t, Index dim) {
    return ActionTensor(Tensor({b, t, dim}));
  }

  Index batch() const { return data.dim(0); }
  Index steps() const { return data.dim(1); }
  Index action_dim() const { return data.dim(2); }
};

}  // namespace fitvid
