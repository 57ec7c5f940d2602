#ifndef LT_FRAME_CRITERION_HPP
#define LT_FRAME_CRITERION_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "lt/labels.hpp"

namespace lt {

// "No symbol emitted yet" marker for the last-emission index.
inline constexpr std::size_t kNoEmission = static_cast<std::size_t>(-1);

// Per-frame pairing derived from frame labels:
//   decoder_state(t) = number of non-blank frame labels strictly before t,
//   last_emit(t)     = most recent non-blank frame strictly before t,
//                      or kNoEmission.
// Frame t is paired with the decoder output conditioned on the first
// decoder_state(t) labels.
struct PairedFrames {
  std::vector<std::size_t> decoder_state;
  std::vector<std::size_t> last_emit;

  std::size_t frames() const { return decoder_state.size(); }
};

PairedFrames pair_frames(const FrameLabels& labels, TokenId blank = kBlank);

// Blank/non-blank interpolation: combined[blank] = p_blank and
// combined[k] = p_nonblank[k] * (1 - p_blank) for the non-blank classes.
// p_nonblank is indexed by non-blank class (token id 1..V-1 maps to
// entry id-1 when blank is 0); combined is indexed by token id.
std::vector<double> combine_distribution(double p_blank, std::span<const double> p_nonblank,
                                         TokenId blank = kBlank);

// Mean binary cross-entropy over all frames; target 1 where the frame
// label is the blank.
double blank_loss(std::span<const double> p_blank, const FrameLabels& labels,
                  TokenId blank = kBlank);

struct NonBlankLoss {
  double value = 0.0;
  // True when the utterance had no non-blank frame (empty mean).
  bool degenerate = false;
};

// Mean cross-entropy over non-blank frames only, across the V-1 non-blank
// classes. p_nonblank is T x (V-1), row t used only when labels[t] != blank.
NonBlankLoss nonblank_loss(std::span<const double> p_nonblank, std::size_t nonblank_classes,
                           const FrameLabels& labels, TokenId blank = kBlank);

struct LossConfig {
  double lambda = 0.3;          // CTC weight in the composite loss
  double ctc_gate = 2.0;        // nats; frame losses only engage below this
  double blank_threshold = 0.5; // decode-time blank decision on p_blank
  bool blank_decision_combined_argmax = false;
};

struct CompositeLoss {
  double total = 0.0;
  double ctc = 0.0;
  double blank = 0.0;
  double nonblank = 0.0;
  bool gated = false;  // total == ctc when set
};

// Gated composite: full weighted sum while the CTC loss is below the gate,
// the bare CTC loss otherwise (strict <; the boundary value gates).
CompositeLoss composite_loss(double ctc, double blank, double nonblank,
                             const LossConfig& config);

// Marks the training-time gradient boundary in front of the blank
// classifier: forward values pass through unchanged; the backward pass
// must not propagate the blank loss into anything upstream of the marked
// values. The bookkeeping lives in the model's hand-written backward;
// this identity is the documented seam.
inline double stop_gradient(double value) { return value; }

}  // namespace lt

#endif  // LT_FRAME_CRITERION_HPP
