#ifndef LT_FORCED_ALIGN_HPP
#define LT_FORCED_ALIGN_HPP

#include <span>
#include <vector>

#include "lt/labels.hpp"
#include "lt/tensor.hpp"

namespace lt {

// Padded token matrix, one row per batch item, -1 marks padding.
struct TokenBatch {
  std::vector<TokenId> data;  // batch * max_len
  std::size_t batch = 0;
  std::size_t max_len = 0;

  static TokenBatch from_sequences(const std::vector<TokenSeq>& seqs);
  TokenId at(std::size_t b, std::size_t u) const { return data[b * max_len + u]; }
  // Row b with padding stripped.
  TokenSeq item(std::size_t b) const;
};

// Batched binary alignment: a(b, u, t) = 1 iff label u of item b is aligned
// to frame t. Per item, label rows are non-empty runs of consecutive frames,
// disjoint and ordered; frames outside every row are blank-aligned.
struct BatchAlignment {
  Tensor a;  // N x U_max x T_max
  std::vector<std::size_t> frame_lengths;
  std::vector<std::size_t> label_lengths;

  std::size_t batch() const { return frame_lengths.size(); }
  // Item b as [first, last] frame spans, one per label.
  AlignmentSpans item_spans(std::size_t b) const;
};

enum class AlignMode {
  // Max-accumulated trellis: the returned path maximizes the summed
  // frame log-probabilities over all legal paths.
  kViterbi,
  // Fidelity mode for the reference batch algorithm: scores accumulate by
  // log-sum-exp while backpointers take the argmax over the same
  // transition candidates, and the final state is chosen by a strict
  // comparison of the last two trellis entries.
  kReference,
};

struct AlignResult {
  BatchAlignment alignment;
  // Trellis score at the chosen final state, one per item. In viterbi
  // mode this is the best path score.
  std::vector<double> scores;
};

// Final expanded-state choice at the last frame: 2U when its score is
// strictly larger than the score of state 2U-1, else 2U-1. The state 2U-2
// is never selected because the expanded label ends in a blank.
// U = 0 degenerates to the lone blank state 0.
std::size_t backtrack_choose_final(std::span<const double> final_scores);

// Batched forced alignment over padded grids and labels. All-padding label
// rows are treated as empty transcripts (all-blank alignment). An
// infeasible item raises InfeasibleError naming the item index.
AlignResult forced_align_batch(const BatchGrid& batch, const TokenBatch& labels,
                               TokenId blank = kBlank, AlignMode mode = AlignMode::kViterbi);

// Single-item convenience wrapper.
AlignResult forced_align(const LogProbGrid& grid, const TokenSeq& y, TokenId blank = kBlank,
                         AlignMode mode = AlignMode::kViterbi);

// Summed frame log-probability of the path an alignment describes
// (labels over their spans, blank elsewhere).
double alignment_path_score(const LogProbGrid& grid, const TokenSeq& y,
                            const AlignmentSpans& spans, TokenId blank = kBlank);

// Exhaustive oracle: enumerates every legal expanded-state path and takes
// the max. Ties prefer the path that emits earliest (smallest emission
// frame per label, in order), then the lexicographically smallest state
// sequence. Bounded to small instances; throws OracleLimitError beyond.
struct BestPath {
  AlignmentSpans spans;
  double score = 0.0;
};
BestPath brute_force_best_path(const LogProbGrid& grid, const TokenSeq& y,
                               TokenId blank = kBlank);

}  // namespace lt

#endif  // LT_FORCED_ALIGN_HPP
