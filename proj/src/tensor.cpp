#include "lt/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lt/error.hpp"

namespace lt {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (std::size_t d : shape_) n *= d;
  data_.assign(n, fill);
}

LogProbGrid BatchGrid::item(std::size_t b) const {
  std::size_t t_valid = lengths[b];
  std::size_t v = vocab();
  Tensor out({t_valid, v});
  const double* src = data.data() + b * max_frames() * v;
  std::copy(src, src + t_valid * v, out.data());
  return LogProbGrid(std::move(out));
}

void log_softmax_row(std::span<double> row) {
  double max = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double v : row) sum += std::exp(v - max);
  double norm = max + std::log(sum);
  for (double& v : row) v -= norm;
}

LogProbGrid log_softmax_rows(const Tensor& logits) {
  for (double v : logits.values()) {
    if (!std::isfinite(v)) throw Error("non-finite logits");
  }
  Tensor out = logits;
  std::size_t t_count = out.dim(0);
  std::size_t v_count = out.dim(1);
  for (std::size_t t = 0; t < t_count; ++t) {
    log_softmax_row({out.data() + t * v_count, v_count});
  }
  return LogProbGrid(std::move(out));
}

}  // namespace lt
