#include "lt/ctc.hpp"

#include <cmath>

#include "lt/error.hpp"
#include "lt/log_math.hpp"

namespace lt {

namespace {

// Skip transition s-2 -> s is legal only into a non-blank state that
// differs from the state two back.
bool skip_allowed(const ExpandedLabel& expanded, std::size_t s) {
  if (s < 2) return false;
  TokenId cur = expanded.tokens[s];
  return cur != expanded.blank && cur != expanded.tokens[s - 2];
}

void check_feasible(const LogProbGrid& grid, const TokenSeq& y, TokenId blank) {
  for (TokenId tok : y) {
    if (tok == blank) throw Error("blank inside label");
    if (tok < 0 || static_cast<std::size_t>(tok) >= grid.vocab()) {
      throw Error("label token out of vocabulary");
    }
  }
  if (grid.frames() < ctc_min_frames(y)) {
    throw InfeasibleError("label too long for input");
  }
}

}  // namespace

std::size_t ctc_min_frames(const TokenSeq& y) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (y[i] == y[i - 1]) ++repeats;
  }
  return y.size() + repeats;
}

CtcResult ctc_forward(const LogProbGrid& grid, const TokenSeq& y, TokenId blank) {
  check_feasible(grid, y, blank);
  const std::size_t frames = grid.frames();
  ExpandedLabel expanded = expand_with_blanks(y, blank);
  const std::size_t states = expanded.size();

  CtcResult result;
  result.trellis.expanded = expanded;
  Tensor& c = result.trellis.scores;
  c = Tensor({frames, states}, kLogZero);

  c(0, 0) = grid(0, blank);
  if (states > 1) c(0, 1) = grid(0, expanded.tokens[1]);

  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = c(t - 1, s);
      if (s >= 1) acc = log_add(acc, c(t - 1, s - 1));
      if (skip_allowed(expanded, s)) acc = log_add(acc, c(t - 1, s - 2));
      c(t, s) = acc + grid(t, expanded.tokens[s]);
    }
  }

  double final_mass = c(frames - 1, states - 1);
  if (states > 1) final_mass = log_add(final_mass, c(frames - 1, states - 2));
  result.loss = -final_mass;
  return result;
}

Tensor ctc_grad(const LogProbGrid& grid, const TokenSeq& y, TokenId blank) {
  CtcResult fwd = ctc_forward(grid, y, blank);
  const ExpandedLabel& expanded = fwd.trellis.expanded;
  const std::size_t frames = grid.frames();
  const std::size_t states = expanded.size();
  const Tensor& c = fwd.trellis.scores;
  const double log_z = -fwd.loss;
  if (!std::isfinite(log_z)) throw Error("ctc mass underflowed; gradient undefined");

  // Backward mass: completion score from state s at frame t, excluding the
  // emission at frame t itself (the forward scores already carry it).
  Tensor back({frames, states}, kLogZero);
  back(frames - 1, states - 1) = 0.0;
  if (states > 1) back(frames - 1, states - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = back(t + 1, s) + grid(t + 1, expanded.tokens[s]);
      if (s + 1 < states) {
        acc = log_add(acc, back(t + 1, s + 1) + grid(t + 1, expanded.tokens[s + 1]));
      }
      if (s + 2 < states && skip_allowed(expanded, s + 2)) {
        acc = log_add(acc, back(t + 1, s + 2) + grid(t + 1, expanded.tokens[s + 2]));
      }
      back(t, s) = acc;
    }
  }

  // d loss / d logp(t,v) = -gamma(t,v), the posterior state occupancy
  // summed over expanded states carrying token v.
  Tensor grad({frames, grid.vocab()}, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double occ = c(t, s) + back(t, s) - log_z;
      if (occ == kLogZero) continue;
      grad(t, static_cast<std::size_t>(expanded.tokens[s])) -= std::exp(occ);
    }
  }
  return grad;
}

double brute_force_ctc(const LogProbGrid& grid, const TokenSeq& y, TokenId blank) {
  check_feasible(grid, y, blank);
  const std::size_t frames = grid.frames();
  const std::size_t vocab = grid.vocab();

  double paths = std::pow(static_cast<double>(vocab), static_cast<double>(frames));
  if (paths > 1e7) throw OracleLimitError("oracle limit");

  std::vector<TokenId> seq(frames, 0);
  std::vector<double> survivors;
  // Odometer over all V^T frame sequences.
  while (true) {
    // Collapse: merge repeats, then drop blanks.
    TokenSeq collapsed;
    TokenId prev = -1;
    double score = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      score += grid(t, static_cast<std::size_t>(seq[t]));
      if (seq[t] != prev && seq[t] != blank) collapsed.push_back(seq[t]);
      prev = seq[t];
    }
    if (collapsed == y) survivors.push_back(score);

    std::size_t pos = 0;
    while (pos < frames && ++seq[pos] == static_cast<TokenId>(vocab)) {
      seq[pos] = 0;
      ++pos;
    }
    if (pos == frames) break;
  }
  if (survivors.empty()) throw InfeasibleError("label too long for input");
  return -log_sum_exp(survivors);
}

}  // namespace lt
