#ifndef LT_LOG_MATH_HPP
#define LT_LOG_MATH_HPP

#include <cmath>
#include <limits>
#include <span>

namespace lt {

// Log-probability in nats. -inf encodes "impossible" and is absorbing
// under log-space multiplication (i.e. addition of values).
using LogProb = double;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow. Never produces NaN from
// -inf inputs: if both are -inf the result is -inf.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;  // also covers a == b == -inf
  return a + std::log1p(std::exp(b - a));
}

inline double log_add(double a, double b, double c) {
  return log_add(log_add(a, b), c);
}

// log(sum_i exp(v_i)) with max-subtraction stability.
// Exact for a single element. Throws on an empty span.
double log_sum_exp(std::span<const double> values);

}  // namespace lt

#endif  // LT_LOG_MATH_HPP
