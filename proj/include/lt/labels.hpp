#ifndef LT_LABELS_HPP
#define LT_LABELS_HPP

#include <cstdint>
#include <vector>

namespace lt {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Blank symbol id used across the artifact unless a config overrides it.
inline constexpr TokenId kBlank = 0;
// Batch-level padding marker for token matrices.
inline constexpr TokenId kPadToken = -1;

// Label with blanks interleaved: [b, y_1, b, y_2, ..., b], length 2U+1.
// Even positions hold the blank, odd positions hold y in order.
struct ExpandedLabel {
  std::vector<TokenId> tokens;
  TokenId blank = kBlank;

  std::size_t size() const { return tokens.size(); }
  std::size_t label_len() const { return tokens.size() / 2; }
};

ExpandedLabel expand_with_blanks(const TokenSeq& y, TokenId blank = kBlank);

// Inverse direction used by property tests: drop blanks, keep order.
TokenSeq strip_blanks(const ExpandedLabel& expanded);

// Length-T frame target: each frame a token id or the blank.
// Removing blanks yields exactly the source transcript in order.
using FrameLabels = std::vector<TokenId>;

// Frame spans per original label, [first, last] inclusive. This is the
// row-set view of one item of the N x U x T alignment matrix.
struct LabelSpan {
  std::size_t first = 0;
  std::size_t last = 0;
};
using AlignmentSpans = std::vector<LabelSpan>;

// Multi-frame runs become a single emission: the run's first frame keeps
// the token, every other frame becomes blank.
FrameLabels collapse_alignment(const AlignmentSpans& spans, const TokenSeq& y,
                               std::size_t frames, TokenId blank = kBlank);

struct EditCounts {
  std::size_t ins = 0;
  std::size_t del = 0;
  std::size_t sub = 0;

  std::size_t total() const { return ins + del + sub; }
  double rate(std::size_t ref_len) const {
    return ref_len == 0 ? static_cast<double>(total())
                        : static_cast<double>(total()) / static_cast<double>(ref_len);
  }
};

// Levenshtein-minimal counts; on cost ties substitution is preferred over
// an insertion+deletion pair so the Ins/Del/Sub split is deterministic.
EditCounts edit_distance(const TokenSeq& ref, const TokenSeq& hyp);

// Slot of a non-blank token in a (V-1)-way classifier that skips the blank.
inline std::size_t nonblank_class(TokenId tok, TokenId blank = kBlank) {
  return static_cast<std::size_t>(tok > blank ? tok - 1 : tok);
}
inline TokenId nonblank_token(std::size_t cls, TokenId blank = kBlank) {
  auto c = static_cast<TokenId>(cls);
  return c >= blank ? c + 1 : c;
}

}  // namespace lt

#endif  // LT_LABELS_HPP
