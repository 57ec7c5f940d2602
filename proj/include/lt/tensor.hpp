#ifndef LT_TENSOR_HPP
#define LT_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lt/log_math.hpp"

namespace lt {

// Dense row-major f64 tensor. The only container the lattice code needs:
// rank 1..3, no views, no broadcasting.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// T x V matrix of per-frame log-probabilities over the vocabulary
// (blank included). Rows are normalized: logsumexp of each row is 0.
class LogProbGrid {
 public:
  LogProbGrid() = default;
  LogProbGrid(std::size_t frames, std::size_t vocab)
      : data_({frames, vocab}, kLogZero) {}
  explicit LogProbGrid(Tensor data) : data_(std::move(data)) {}

  std::size_t frames() const { return data_.rank() ? data_.dim(0) : 0; }
  std::size_t vocab() const { return data_.rank() ? data_.dim(1) : 0; }

  double& operator()(std::size_t t, std::size_t v) { return data_(t, v); }
  double operator()(std::size_t t, std::size_t v) const { return data_(t, v); }

  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }

 private:
  Tensor data_;
};

// Padded batch of grids: N x T_max x V plus per-item valid frame counts.
// Entries beyond an item's length are never read by any consumer.
struct BatchGrid {
  Tensor data;  // N x T_max x V
  std::vector<std::size_t> lengths;

  std::size_t batch() const { return data.rank() ? data.dim(0) : 0; }
  std::size_t max_frames() const { return data.rank() ? data.dim(1) : 0; }
  std::size_t vocab() const { return data.rank() ? data.dim(2) : 0; }

  // Copy of item b's valid T x V slice.
  LogProbGrid item(std::size_t b) const;
};

// Row-wise log-softmax: each output row is a normalized log-distribution.
// Throws on non-finite input.
LogProbGrid log_softmax_rows(const Tensor& logits);

// In-place variant over a raw row; used by the model's heads.
void log_softmax_row(std::span<double> row);

}  // namespace lt

#endif  // LT_TENSOR_HPP
