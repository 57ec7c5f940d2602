#include "lt/forced_align.hpp"

#include <algorithm>
#include <string>

#include "lt/ctc.hpp"
#include "lt/error.hpp"
#include "lt/log_math.hpp"

namespace lt {

namespace {

bool skip_allowed(const ExpandedLabel& expanded, std::size_t s) {
  if (s < 2) return false;
  TokenId cur = expanded.tokens[s];
  return cur != expanded.blank && cur != expanded.tokens[s - 2];
}

struct ItemAlign {
  std::vector<std::size_t> state_path;  // expanded state per frame
  double score = 0.0;
};

// Single-item trellis + backtrack. Candidate order is stay, advance-1,
// advance-2; argmax keeps the first of tied candidates.
ItemAlign align_item(const LogProbGrid& grid, const ExpandedLabel& expanded, AlignMode mode) {
  const std::size_t frames = grid.frames();
  const std::size_t states = expanded.size();
  Tensor dp({frames, states}, kLogZero);
  // bp(t, s) = expanded state at frame t-1 on the chosen path into (t, s).
  std::vector<std::size_t> bp(frames * states);
  for (std::size_t s = 0; s < states; ++s) bp[s] = s;  // frame 0: identity

  dp(0, 0) = grid(0, expanded.tokens[0]);
  if (states > 1) dp(0, 1) = grid(0, expanded.tokens[1]);

  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double cand[3];
      std::size_t n_cand = 1;
      cand[0] = dp(t - 1, s);
      if (s >= 1) cand[n_cand++] = dp(t - 1, s - 1);
      if (skip_allowed(expanded, s)) cand[n_cand++] = dp(t - 1, s - 2);

      std::size_t best = 0;
      for (std::size_t i = 1; i < n_cand; ++i) {
        if (cand[i] > cand[best]) best = i;
      }
      double acc = cand[best];
      if (mode == AlignMode::kReference) {
        acc = log_sum_exp({cand, n_cand});
      }
      dp(t, s) = acc + grid(t, expanded.tokens[s]);
      bp[t * states + s] = s - best;
    }
  }

  ItemAlign out;
  out.state_path.resize(frames);
  const double* final_row = dp.data() + (frames - 1) * states;
  std::size_t s = backtrack_choose_final({final_row, states});
  out.score = final_row[s];
  for (std::size_t t = frames; t-- > 0;) {
    out.state_path[t] = s;
    s = bp[t * states + s];
  }
  return out;
}

AlignmentSpans spans_from_path(const std::vector<std::size_t>& path, std::size_t label_len) {
  AlignmentSpans spans(label_len);
  std::vector<bool> seen(label_len, false);
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] % 2 == 0) continue;  // blank state
    std::size_t u = path[t] / 2;
    if (!seen[u]) {
      spans[u].first = t;
      seen[u] = true;
    }
    spans[u].last = t;
  }
  for (bool s_seen : seen) {
    if (!s_seen) throw Error("invalid alignment");  // unreachable for a legal path
  }
  return spans;
}

}  // namespace

TokenBatch TokenBatch::from_sequences(const std::vector<TokenSeq>& seqs) {
  TokenBatch out;
  out.batch = seqs.size();
  for (const TokenSeq& s : seqs) out.max_len = std::max(out.max_len, s.size());
  out.data.assign(out.batch * out.max_len, kPadToken);
  for (std::size_t b = 0; b < out.batch; ++b) {
    std::copy(seqs[b].begin(), seqs[b].end(), out.data.begin() + b * out.max_len);
  }
  return out;
}

TokenSeq TokenBatch::item(std::size_t b) const {
  TokenSeq out;
  for (std::size_t u = 0; u < max_len; ++u) {
    TokenId tok = at(b, u);
    if (tok == kPadToken) break;
    out.push_back(tok);
  }
  return out;
}

AlignmentSpans BatchAlignment::item_spans(std::size_t b) const {
  AlignmentSpans spans(label_lengths[b]);
  for (std::size_t u = 0; u < label_lengths[b]; ++u) {
    bool seen = false;
    for (std::size_t t = 0; t < frame_lengths[b]; ++t) {
      if (a(b, u, t) == 0.0) continue;
      if (!seen) {
        spans[u].first = t;
        seen = true;
      }
      spans[u].last = t;
    }
    if (!seen) throw Error("invalid alignment");
  }
  return spans;
}

std::size_t backtrack_choose_final(std::span<const double> final_scores) {
  const std::size_t states = final_scores.size();
  if (states == 1) return 0;
  // 2U vs 2U-1; strict > so ties go to the last token state.
  return final_scores[states - 1] > final_scores[states - 2] ? states - 1 : states - 2;
}

AlignResult forced_align_batch(const BatchGrid& batch, const TokenBatch& labels, TokenId blank,
                               AlignMode mode) {
  const std::size_t n = batch.batch();
  if (labels.batch != n) throw Error("label batch does not match grid batch");

  AlignResult result;
  result.alignment.a = Tensor({n, labels.max_len, batch.max_frames()}, 0.0);
  result.alignment.frame_lengths = batch.lengths;
  result.alignment.label_lengths.resize(n);
  result.scores.resize(n);

  for (std::size_t b = 0; b < n; ++b) {
    TokenSeq y = labels.item(b);
    const std::size_t frames = batch.lengths[b];
    result.alignment.label_lengths[b] = y.size();

    LogProbGrid grid = batch.item(b);
    if (y.empty()) {
      // Empty transcript: the lone legal path stays in the blank state.
      double score = 0.0;
      for (std::size_t t = 0; t < frames; ++t) score += grid(t, blank);
      result.scores[b] = score;
      continue;
    }
    for (TokenId tok : y) {
      if (tok == blank) throw Error("blank inside label (item " + std::to_string(b) + ")");
    }
    if (frames < ctc_min_frames(y)) {
      throw InfeasibleError("label too long for input (item " + std::to_string(b) + ")",
                            static_cast<long>(b));
    }

    ExpandedLabel expanded = expand_with_blanks(y, blank);
    ItemAlign item = align_item(grid, expanded, mode);
    result.scores[b] = item.score;
    AlignmentSpans spans = spans_from_path(item.state_path, y.size());
    for (std::size_t u = 0; u < spans.size(); ++u) {
      for (std::size_t t = spans[u].first; t <= spans[u].last; ++t) {
        result.alignment.a(b, u, t) = 1.0;
      }
    }
  }
  return result;
}

AlignResult forced_align(const LogProbGrid& grid, const TokenSeq& y, TokenId blank,
                         AlignMode mode) {
  BatchGrid batch;
  batch.data = Tensor({1, grid.frames(), grid.vocab()});
  std::copy(grid.tensor().values().begin(), grid.tensor().values().end(), batch.data.data());
  batch.lengths = {grid.frames()};
  return forced_align_batch(batch, TokenBatch::from_sequences({y}), blank, mode);
}

double alignment_path_score(const LogProbGrid& grid, const TokenSeq& y,
                            const AlignmentSpans& spans, TokenId blank) {
  std::vector<TokenId> frame_token(grid.frames(), blank);
  for (std::size_t u = 0; u < spans.size(); ++u) {
    for (std::size_t t = spans[u].first; t <= spans[u].last; ++t) frame_token[t] = y[u];
  }
  double score = 0.0;
  for (std::size_t t = 0; t < grid.frames(); ++t) {
    score += grid(t, static_cast<std::size_t>(frame_token[t]));
  }
  return score;
}

BestPath brute_force_best_path(const LogProbGrid& grid, const TokenSeq& y, TokenId blank) {
  const std::size_t frames = grid.frames();
  if (frames > 12 || y.size() > 4) throw OracleLimitError("oracle limit");
  if (frames < ctc_min_frames(y)) throw InfeasibleError("label too long for input");

  ExpandedLabel expanded = expand_with_blanks(y, blank);
  const std::size_t states = expanded.size();

  std::vector<std::size_t> path(frames);
  std::vector<std::size_t> best_path;
  std::vector<std::size_t> best_emit;
  double best_score = kLogZero;
  bool found = false;

  // Emission frame per label: first frame spent in the label's state.
  auto emissions = [&](const std::vector<std::size_t>& p) {
    std::vector<std::size_t> emit(y.size(), frames);
    for (std::size_t t = frames; t-- > 0;) {
      if (p[t] % 2 == 1) emit[p[t] / 2] = t;
    }
    return emit;
  };

  // DFS in lexicographic state-sequence order, so the first of fully tied
  // candidates is the lexicographically smallest sequence.
  auto dfs = [&](auto&& self, std::size_t t, std::size_t s, double score) -> void {
    path[t] = s;
    double acc = score + grid(t, expanded.tokens[s]);
    if (t + 1 == frames) {
      bool valid_end = states == 1 ? s == 0 : (s == states - 1 || s == states - 2);
      if (!valid_end) return;
      if (!found || acc > best_score) {
        found = true;
        best_score = acc;
        best_path = path;
        best_emit = emissions(path);
      } else if (acc == best_score) {
        std::vector<std::size_t> emit = emissions(path);
        if (emit < best_emit) {
          best_path = path;
          best_emit = std::move(emit);
        }
      }
      return;
    }
    self(self, t + 1, s, acc);
    if (s + 1 < states) self(self, t + 1, s + 1, acc);
    if (s + 2 < states && skip_allowed(expanded, s + 2)) self(self, t + 1, s + 2, acc);
  };

  dfs(dfs, 0, 0, 0.0);
  if (states > 1) dfs(dfs, 0, 1, 0.0);
  if (!found) throw InfeasibleError("label too long for input");

  BestPath out;
  out.score = best_score;
  out.spans = spans_from_path(best_path, y.size());
  return out;
}

}  // namespace lt
