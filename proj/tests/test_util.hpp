#ifndef LT_TESTS_TEST_UTIL_HPP
#define LT_TESTS_TEST_UTIL_HPP

#include <cstddef>
#include <span>

#include "lt/labels.hpp"
#include "lt/rng.hpp"
#include "lt/tensor.hpp"

namespace test_util {

// Random normalized T x V log-probability grid.
inline lt::LogProbGrid random_grid(lt::Rng& rng, std::size_t frames, std::size_t vocab) {
  lt::Tensor logits({frames, vocab});
  for (auto& x : logits.values()) x = rng.uniform(-2.0, 2.0);
  return lt::log_softmax_rows(logits);
}

// Random T x (U+1) x V joint tensor with every (t, u) slice normalized.
inline lt::Tensor random_joint(lt::Rng& rng, std::size_t frames, std::size_t states,
                               std::size_t vocab) {
  lt::Tensor joint({frames, states, vocab});
  for (auto& x : joint.values()) x = rng.uniform(-2.0, 2.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t u = 0; u < states; ++u)
      lt::log_softmax_row(std::span<double>(&joint(t, u, 0), vocab));
  return joint;
}

// Random blank-free transcript over token ids 1..vocab-1.
inline lt::TokenSeq random_labels(lt::Rng& rng, std::size_t len, std::size_t vocab) {
  lt::TokenSeq y;
  y.reserve(len);
  for (std::size_t i = 0; i < len; ++i)
    y.push_back(static_cast<lt::TokenId>(rng.range(1, static_cast<std::int64_t>(vocab) - 1)));
  return y;
}

}  // namespace test_util

#endif  // LT_TESTS_TEST_UTIL_HPP
