#ifndef LT_CTC_HPP
#define LT_CTC_HPP

#include "lt/labels.hpp"
#include "lt/tensor.hpp"

namespace lt {

// Forward trellis over the expanded label: scores(t, s) is the log-mass of
// all legal prefixes ending in expanded state s at frame t.
struct CtcTrellis {
  Tensor scores;  // T x (2U+1)
  ExpandedLabel expanded;

  std::size_t frames() const { return scores.dim(0); }
  std::size_t states() const { return scores.dim(1); }
};

struct CtcResult {
  double loss = 0.0;  // nats
  CtcTrellis trellis;
};

// Smallest frame count that admits any legal path:
// U plus the number of adjacent equal label pairs.
std::size_t ctc_min_frames(const TokenSeq& y);

// Full-sum CTC loss. Trellis recursion:
//   c(t,s) = logp(t, y'_s) + lse(c(t-1,s), c(t-1,s-1) [, c(t-1,s-2)])
// with the skip term allowed only when y'_s is non-blank and differs from
// y'_{s-2}. loss = -lse(c(T-1, 2U), c(T-1, 2U-1)).
// Throws InfeasibleError("label too long for input") when T < ctc_min_frames.
CtcResult ctc_forward(const LogProbGrid& grid, const TokenSeq& y, TokenId blank = kBlank);

// d loss / d grid(t,v), taken with respect to the log-probabilities
// themselves (the log-softmax Jacobian is composed by the model, not here).
Tensor ctc_grad(const LogProbGrid& grid, const TokenSeq& y, TokenId blank = kBlank);

// Enumeration oracle: sums path scores of every length-T token sequence
// whose collapse (merge repeats, then drop blanks) equals y. Only valid
// for V^T up to ~1e7; throws OracleLimitError beyond that.
double brute_force_ctc(const LogProbGrid& grid, const TokenSeq& y, TokenId blank = kBlank);

}  // namespace lt

#endif  // LT_CTC_HPP
