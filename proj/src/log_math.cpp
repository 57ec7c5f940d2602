#include "lt/log_math.hpp"

#include <algorithm>

#include "lt/error.hpp"

namespace lt {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error("empty reduction");
  if (values.size() == 1) return values[0];
  double max = *std::max_element(values.begin(), values.end());
  if (max == kLogZero) return kLogZero;  // all terms impossible
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  return max + std::log(sum);
}

}  // namespace lt
