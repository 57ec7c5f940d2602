#ifndef LT_TRAINING_HPP
#define LT_TRAINING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lt/model.hpp"
#include "lt/optimizer.hpp"
#include "lt/synth.hpp"

namespace lt {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::size_t threads = 1;
  // Recompute alignment targets every k steps; 1 = every step, 0 freezes
  // each utterance's targets after their first computation. A few steps of
  // target stability lets the blank classifier actually fit the emission
  // convention instead of chasing it.
  std::size_t align_refresh = 5;
  bool shuffle = true;
  std::uint64_t shuffle_seed = 99;
  AdamConfig adam{.lr = 5e-3};
  std::string metrics_path;    // per-epoch CSV; empty disables
  std::string checkpoint_dir;  // written after the final epoch; empty disables
};

// One row per epoch, scored on the dev split after that epoch's updates.
struct MetricsRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double ctc = 0.0;
  double blank = 0.0;
  double nonblank = 0.0;
  double gated_frac = 0.0;
  double ter = 0.0;
  std::size_t ins = 0;
  std::size_t del = 0;
  std::size_t sub = 0;
};

inline constexpr const char* kMetricsHeader =
    "step,epoch,L,L_ctc,L_b,L_nb,gated_frac,ter,ins,del,sub";

// Fixed-width formatting so identical runs serialize identically.
std::string format_metrics_row(const MetricsRow& row);

struct EvalResult {
  EditCounts edits;
  std::size_t ref_tokens = 0;
  std::size_t utterances = 0;
  double ter() const { return edits.rate(ref_tokens); }
};

EvalResult evaluate(const Model& model, const std::vector<Utterance>& data);

// Fraction of tokens whose forced-alignment emission frame falls inside
// the generator's true duration window (windows are mapped through the
// encoder stride). Utterances the aligner cannot handle are skipped.
double alignment_sanity(const Model& model, const std::vector<Utterance>& data);

struct TrainResult {
  std::vector<MetricsRow> history;
  std::size_t steps = 0;
  bool diverged = false;  // loss left the finite range; loop stopped early
};

// Epoch loop: shuffled minibatches, Adam updates, one dev evaluation and
// metrics row per epoch. `align_refresh` > 1 reuses each utterance's last
// alignment targets between refresh steps.
TrainResult run_training(Model& model, Adam& opt, const std::vector<Utterance>& train,
                         const std::vector<Utterance>& dev, const TrainConfig& config);

struct ConcatRow {
  std::size_t cat = 1;  // utterances spliced per evaluation item
  std::size_t items = 0;
  EditCounts edits;
  std::size_t ref_tokens = 0;
  double ter() const { return edits.rate(ref_tokens); }
};

// Splices consecutive groups of `cat` utterances, optionally separated by
// all-zero gap frames, and decodes each splice against the concatenated
// transcript. Long-form stress test: inputs grow, transcripts grow, the
// decoder must not fall over.
std::vector<ConcatRow> run_concat_eval(const Model& model, const std::vector<Utterance>& data,
                                       const std::vector<std::size_t>& cats,
                                       std::size_t gap_frames = 0);

}  // namespace lt

#endif  // LT_TRAINING_HPP
