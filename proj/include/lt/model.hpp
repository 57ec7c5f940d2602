#ifndef LT_MODEL_HPP
#define LT_MODEL_HPP

#include <functional>
#include <span>
#include <string>

#include "lt/forced_align.hpp"
#include "lt/frame_criterion.hpp"
#include "lt/labels.hpp"
#include "lt/params.hpp"
#include "lt/tensor.hpp"

namespace lt {

enum class Criterion {
  kLightweight,  // frame-level criterion on forced-alignment labels
  kTransducer,   // full-lattice reference loss, the memory/accuracy baseline
};

struct ModelConfig {
  std::size_t feature_dim = 16;
  std::size_t hidden_dim = 20;  // encoder/decoder width
  std::size_t vocab = 12;       // includes blank
  std::size_t encoder_layers = 1;
  std::size_t encoder_stride = 1;  // 1, or 2 for a pair-averaging stage
  std::size_t blank_hidden = 16;
  TokenId blank = kBlank;
  bool enhanced_blank = true;       // feed the last-emission frame to the blank net
  bool decouple_blank = true;       // blank classifier + (V-1)-way softmax
  bool truncate_blank_grad = true;  // blank loss stops at the main network
  Criterion criterion = Criterion::kLightweight;
  AlignMode align_mode = AlignMode::kViterbi;
  LossConfig loss;
  std::uint64_t seed = 1;

  std::size_t nonblank_classes() const { return vocab - 1; }
  // Class count of the frame classifier head (V-1 decoupled, V otherwise;
  // the transducer head always includes the blank).
  std::size_t joint_classes() const {
    return criterion == Criterion::kTransducer || !decouple_blank ? vocab : vocab - 1;
  }
};

struct Model {
  ModelConfig config;
  ParamStore params;
};

// Builds all parameter tensors and seeds them deterministically.
Model make_model(const ModelConfig& config);

struct Sample {
  Tensor features;  // T x F
  TokenSeq transcript;
};

// Which loss terms the backward pass propagates; forward always computes
// everything it needs for diagnostics.
enum TermMask : unsigned {
  kTermCtc = 1u,
  kTermNonBlank = 2u,
  kTermBlank = 4u,
  kTermAll = 7u,
};

struct StepDiagnostics {
  double loss = 0.0;
  double ctc = 0.0;       // per-token nats, mean over utterances
  double blank = 0.0;
  double nonblank = 0.0;  // holds the lattice loss for kTransducer runs
  double gated_frac = 0.0;
  std::size_t infeasible = 0;  // items excluded from this step
  std::uint64_t joint_activations = 0;  // output slots materialized by the joint
};

// Full training step: forward, composite loss, analytic backward into
// params.grad (zeroed first). Alignment targets are recomputed from the
// current CTC head without gradient tracking; pass `fixed_spans` (one
// entry per batch item) to reuse earlier targets instead, and `spans_out`
// to capture the targets a step used. `threads` > 1 splits the batch
// across workers and sums per-worker gradients in worker order.
StepDiagnostics forward_backward_step(Model& model, std::span<const Sample> batch,
                                      unsigned terms = kTermAll, std::size_t threads = 1,
                                      const std::vector<AlignmentSpans>* fixed_spans = nullptr,
                                      std::vector<AlignmentSpans>* spans_out = nullptr);

// Encoder applied to one utterance; returns h (T' x D).
Tensor encode(const Model& model, const Tensor& features);

// CTC head output for one utterance: T' x V normalized log-probabilities.
LogProbGrid ctc_log_probs(const Model& model, const Tensor& features);

// Frame-synchronous greedy decode over encoder output h: one blank /
// emit decision per frame, so the output never exceeds the frame count.
TokenSeq greedy_decode(const Model& model, const Tensor& h);
TokenSeq decode_features(const Model& model, const Tensor& features);

// Central-difference check of a hand-written backward. `forward_loss`
// must be deterministic; `backward` zeroes and fills params.grad.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
};
GradCheckReport grad_check(Model& model, const std::function<double(Model&)>& forward_loss,
                           const std::function<void(Model&)>& backward, double eps = 1e-5);

}  // namespace lt

#endif  // LT_MODEL_HPP
