#ifndef LT_SYNTH_HPP
#define LT_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lt/labels.hpp"
#include "lt/tensor.hpp"

namespace lt {

// Synthetic utterance generator. Every non-blank token gets a fixed
// random embedding; an utterance is a sequence of token segments with
// optional silence segments between them, rendered as the segment
// embedding plus Gaussian noise. Repeated adjacent tokens always get a
// silence separator so every transcript stays alignable. The generator
// records which frames rendered each token, so alignment quality can be
// scored against the truth.
struct SynthConfig {
  std::size_t vocab = 12;  // includes the blank/silence id 0
  std::size_t feature_dim = 16;
  std::size_t min_tokens = 2;
  std::size_t max_tokens = 5;
  std::size_t min_token_frames = 2;
  std::size_t max_token_frames = 4;
  std::size_t min_silence_frames = 1;
  std::size_t max_silence_frames = 3;
  double silence_prob = 0.5;  // chance of a silence segment at each gap
  double noise = 0.3;         // feature noise stddev
  std::uint64_t seed = 7;     // fixes the token embeddings
};

struct Utterance {
  std::string id;
  Tensor features;       // T x F
  TokenSeq transcript;   // non-blank token ids, in order
  AlignmentSpans truth;  // frames each token was rendered on
};

// Token embeddings are a deterministic function of (seed, vocab,
// feature_dim); row 0 holds the silence rendering.
Tensor synth_embeddings(const SynthConfig& config);

// `content_seed` drives transcripts/durations/noise independently of the
// embeddings, so several splits can share one rendering of the vocabulary.
std::vector<Utterance> gen_synth(const SynthConfig& config, std::size_t count,
                                 const std::string& id_prefix, std::uint64_t content_seed);

// Dataset on disk: <dir>/<split>.jsonl, one line per utterance
// {"id","transcript","truth","features"} with the feature matrix in a
// tensor file referenced relative to <dir>.
void write_dataset(const std::vector<Utterance>& data, const std::filesystem::path& dir,
                   const std::string& split);
std::vector<Utterance> read_dataset(const std::filesystem::path& dir, const std::string& split);

}  // namespace lt

#endif  // LT_SYNTH_HPP
