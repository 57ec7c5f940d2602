#ifndef LT_NN_OPS_HPP
#define LT_NN_OPS_HPP

#include <cmath>
#include <cstddef>

namespace lt::nn {

// Dense primitives the model blocks are built from. Backward variants
// accumulate (+=) so call sites can fan in gradients from several
// consumers; pass nullptr to skip an output.

// y = W x + b, with W stored row-major (rows x cols), x: cols, y: rows.
inline void linear(const double* w, const double* b, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = b ? b[i] : 0.0;
    const double* wi = w + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += wi[j] * x[j];
    y[i] = acc;
  }
}

inline void linear_backward(const double* w, const double* x, const double* dy,
                            double* dw, double* db, double* dx, std::size_t rows,
                            std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double g = dy[i];
    if (db) db[i] += g;
    double* dwi = dw ? dw + i * cols : nullptr;
    const double* wi = w + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (dwi) dwi[j] += g * x[j];
      if (dx) dx[j] += g * wi[j];
    }
  }
}

inline void tanh_inplace(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

// dx += dy * (1 - y^2), where y = tanh(pre-activation).
inline void tanh_backward(const double* y, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Given log-probabilities lp = log_softmax(logits) over n classes and the
// loss gradient g w.r.t. lp, accumulate the gradient w.r.t. the logits:
//   dlogit_i += g_i - exp(lp_i) * sum_j g_j
inline void log_softmax_backward(const double* lp, const double* g, double* dlogit,
                                 std::size_t n) {
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += g[j];
  for (std::size_t i = 0; i < n; ++i) dlogit[i] += g[i] - std::exp(lp[i]) * total;
}

}  // namespace lt::nn

#endif  // LT_NN_OPS_HPP
