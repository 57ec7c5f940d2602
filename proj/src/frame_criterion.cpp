#include "lt/frame_criterion.hpp"

#include <cmath>

#include "lt/error.hpp"

namespace lt {

PairedFrames pair_frames(const FrameLabels& labels, TokenId blank) {
  PairedFrames out;
  out.decoder_state.resize(labels.size());
  out.last_emit.resize(labels.size());
  std::size_t emitted = 0;
  std::size_t last = kNoEmission;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    out.decoder_state[t] = emitted;
    out.last_emit[t] = last;
    if (labels[t] != blank) {
      ++emitted;
      last = t;
    }
  }
  return out;
}

std::vector<double> combine_distribution(double p_blank, std::span<const double> p_nonblank,
                                         TokenId blank) {
  if (p_blank < 0.0 || p_blank > 1.0) throw Error("p_blank outside [0,1]");
  double sum = 0.0;
  for (double p : p_nonblank) sum += p;
  if (std::abs(sum - 1.0) > 1e-6) throw Error("non-blank distribution not normalized");

  std::vector<double> combined(p_nonblank.size() + 1);
  const std::size_t blank_idx = static_cast<std::size_t>(blank);
  combined[blank_idx] = p_blank;
  std::size_t k = 0;
  for (std::size_t i = 0; i < combined.size(); ++i) {
    if (i == blank_idx) continue;
    combined[i] = p_nonblank[k++] * (1.0 - p_blank);
  }
  return combined;
}

double blank_loss(std::span<const double> p_blank, const FrameLabels& labels, TokenId blank) {
  if (p_blank.size() != labels.size()) throw Error("frame count mismatch");
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    sum -= labels[t] == blank ? std::log(p_blank[t]) : std::log(1.0 - p_blank[t]);
  }
  return sum / static_cast<double>(labels.size());
}

NonBlankLoss nonblank_loss(std::span<const double> p_nonblank, std::size_t nonblank_classes,
                           const FrameLabels& labels, TokenId blank) {
  if (p_nonblank.size() != labels.size() * nonblank_classes) {
    throw Error("frame count mismatch");
  }
  NonBlankLoss out;
  std::size_t count = 0;
  double sum = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == blank) continue;
    std::size_t cls = nonblank_class(labels[t], blank);
    if (cls >= nonblank_classes) throw Error("label token out of vocabulary");
    sum -= std::log(p_nonblank[t * nonblank_classes + cls]);
    ++count;
  }
  if (count == 0) {
    out.degenerate = true;  // empty mean convention: zero loss, flagged
    return out;
  }
  out.value = sum / static_cast<double>(count);
  return out;
}

CompositeLoss composite_loss(double ctc, double blank, double nonblank,
                             const LossConfig& config) {
  CompositeLoss out;
  out.ctc = ctc;
  out.blank = blank;
  out.nonblank = nonblank;
  if (ctc < config.ctc_gate) {
    out.total = config.lambda * ctc + (1.0 - config.lambda) * nonblank + blank;
  } else {
    out.gated = true;
    out.total = ctc;
  }
  return out;
}

}  // namespace lt
