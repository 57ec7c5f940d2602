#include "lt/labels.hpp"

#include <algorithm>
#include <utility>

#include "lt/error.hpp"

namespace lt {

ExpandedLabel expand_with_blanks(const TokenSeq& y, TokenId blank) {
  ExpandedLabel out;
  out.blank = blank;
  out.tokens.reserve(2 * y.size() + 1);
  out.tokens.push_back(blank);
  for (TokenId tok : y) {
    if (tok == blank) throw Error("blank inside label");
    out.tokens.push_back(tok);
    out.tokens.push_back(blank);
  }
  return out;
}

TokenSeq strip_blanks(const ExpandedLabel& expanded) {
  TokenSeq out;
  for (TokenId tok : expanded.tokens) {
    if (tok != expanded.blank) out.push_back(tok);
  }
  return out;
}

FrameLabels collapse_alignment(const AlignmentSpans& spans, const TokenSeq& y,
                               std::size_t frames, TokenId blank) {
  if (spans.size() != y.size()) throw Error("invalid alignment");
  FrameLabels labels(frames, blank);
  std::size_t prev_end = 0;
  bool first = true;
  for (std::size_t u = 0; u < spans.size(); ++u) {
    const LabelSpan& span = spans[u];
    if (span.last < span.first || span.last >= frames) throw Error("invalid alignment");
    if (!first && span.first <= prev_end) throw Error("invalid alignment");
    labels[span.first] = y[u];  // first frame of the run carries the token
    prev_end = span.last;
    first = false;
  }
  return labels;
}

EditCounts edit_distance(const TokenSeq& ref, const TokenSeq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // Cell = (total cost, ins+del), minimized lexicographically. The second
  // key realizes the substitution-over-ins+del tie-break; together with
  // ins - del == |hyp| - |ref| it pins the full count triple.
  using Cell = std::pair<std::size_t, std::size_t>;
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, i};
    for (std::size_t j = 1; j <= m; ++j) {
      Cell best = prev[j - 1];
      if (ref[i - 1] != hyp[j - 1]) best.first += 1;  // substitution
      Cell del{prev[j].first + 1, prev[j].second + 1};
      Cell ins{cur[j - 1].first + 1, cur[j - 1].second + 1};
      best = std::min(best, std::min(del, ins));
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  auto [cost, insdel] = prev[m];
  EditCounts counts;
  counts.ins = (insdel + m - n) / 2;
  counts.del = insdel - counts.ins;
  counts.sub = cost - insdel;
  return counts;
}

}  // namespace lt
