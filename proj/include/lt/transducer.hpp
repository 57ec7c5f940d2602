#ifndef LT_TRANSDUCER_HPP
#define LT_TRANSDUCER_HPP

#include <cstdint>

#include "lt/labels.hpp"
#include "lt/tensor.hpp"

namespace lt {

// Full-lattice transducer forward pass over a precomputed joint tensor
// joint(t, u, k) = log Pr(k | t, u), shape T x (U+1) x V with each (t, u)
// slice normalized. Used as the correctness and memory baseline.

// loss = -(forward(T-1, U) + blank(T-1, U)) with
//   forward(t, u) = lse(forward(t-1, u) + blank(t-1, u),
//                       forward(t, u-1) + emit(t, u-1))
// where blank(t, u) = joint(t, u, blank) and emit(t, u) = joint(t, u, y_{u+1}).
// Every path consumes all T frames, emits all of y, and ends with the
// final blank at (T-1, U).
double transducer_forward(const Tensor& joint, const TokenSeq& y, TokenId blank = kBlank);

// d loss / d joint(t, u, k); log-softmax Jacobian composition is the
// model's job, as with the CTC gradient.
Tensor transducer_grad(const Tensor& joint, const TokenSeq& y, TokenId blank = kBlank);

// Enumeration oracle over all C(T-1+U, U) monotone lattice paths.
double brute_force_transducer(const Tensor& joint, const TokenSeq& y, TokenId blank = kBlank);

struct MemoryReport {
  std::uint64_t full_activations = 0;   // N * T * (U+1) * V
  std::uint64_t frame_activations = 0;  // N * T * V
  std::uint64_t ratio = 0;              // U + 1
};

// Joint-output activation counts for the full-lattice and frame-level
// pairings, and their ratio.
MemoryReport memory_footprint_report(std::uint64_t n, std::uint64_t t, std::uint64_t u,
                                     std::uint64_t v);

}  // namespace lt

#endif  // LT_TRANSDUCER_HPP
