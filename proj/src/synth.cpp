#include "lt/synth.hpp"

#include <cstdio>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "lt/error.hpp"
#include "lt/rng.hpp"
#include "lt/tensor_io.hpp"

namespace fs = std::filesystem;

namespace lt {

Tensor synth_embeddings(const SynthConfig& config) {
  Rng rng(config.seed);
  Tensor emb({config.vocab, config.feature_dim});
  for (double& v : emb.values()) v = rng.gaussian();
  return emb;
}

std::vector<Utterance> gen_synth(const SynthConfig& config, std::size_t count,
                                 const std::string& id_prefix, std::uint64_t content_seed) {
  if (config.vocab < 2) throw Error("synth vocab must hold silence plus one token");
  if (config.feature_dim == 0) throw Error("synth feature dim must be positive");
  if (config.min_tokens > config.max_tokens ||
      config.min_token_frames > config.max_token_frames ||
      config.min_silence_frames > config.max_silence_frames)
    throw Error("synth range bounds out of order");
  if (config.min_token_frames == 0) throw Error("tokens need at least one frame");

  const Tensor emb = synth_embeddings(config);
  Rng rng(content_seed);
  const std::size_t F = config.feature_dim;

  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Utterance utt;
    char id_buf[64];
    std::snprintf(id_buf, sizeof id_buf, "%s%05zu", id_prefix.c_str(), n);
    utt.id = id_buf;

    const auto n_tokens = static_cast<std::size_t>(
        rng.range(static_cast<std::int64_t>(config.min_tokens),
                  static_cast<std::int64_t>(config.max_tokens)));
    utt.transcript.reserve(n_tokens);
    for (std::size_t u = 0; u < n_tokens; ++u)
      utt.transcript.push_back(static_cast<TokenId>(
          rng.range(1, static_cast<std::int64_t>(config.vocab) - 1)));

    std::vector<std::pair<TokenId, std::size_t>> segments;
    auto gap = [&](bool required) {
      auto frames = static_cast<std::size_t>(
          rng.range(static_cast<std::int64_t>(config.min_silence_frames),
                    static_cast<std::int64_t>(config.max_silence_frames)));
      if (!required && rng.uniform() >= config.silence_prob) frames = 0;
      if (required && frames == 0) frames = 1;  // repeats need a separator
      if (frames) segments.emplace_back(kBlank, frames);
    };

    gap(false);
    for (std::size_t u = 0; u < n_tokens; ++u) {
      segments.emplace_back(utt.transcript[u],
                            static_cast<std::size_t>(rng.range(
                                static_cast<std::int64_t>(config.min_token_frames),
                                static_cast<std::int64_t>(config.max_token_frames))));
      const bool last = u + 1 == n_tokens;
      gap(!last && utt.transcript[u + 1] == utt.transcript[u]);
    }
    if (segments.empty()) gap(true);  // an empty transcript still needs audio

    std::size_t total = 0;
    for (const auto& [tok, frames] : segments) total += frames;
    utt.features = Tensor({total, F});
    std::size_t t = 0;
    for (const auto& [tok, frames] : segments) {
      if (tok != kBlank) utt.truth.push_back({t, t + frames - 1});
      const double* e = emb.data() + static_cast<std::size_t>(tok) * F;
      for (std::size_t k = 0; k < frames; ++k, ++t)
        for (std::size_t f = 0; f < F; ++f)
          utt.features(t, f) = e[f] + config.noise * rng.gaussian();
    }
    out.push_back(std::move(utt));
  }
  return out;
}

void write_dataset(const std::vector<Utterance>& data, const fs::path& dir,
                   const std::string& split) {
  fs::create_directories(dir / split);
  std::ofstream manifest(dir / (split + ".jsonl"), std::ios::binary | std::ios::trunc);
  if (!manifest) throw Error("cannot write manifest for split " + split);
  for (const Utterance& utt : data) {
    const std::string rel = split + "/" + utt.id + ".ltt";
    write_tensor(utt.features, dir / rel);
    nlohmann::json line;
    line["id"] = utt.id;
    line["transcript"] = utt.transcript;
    nlohmann::json spans = nlohmann::json::array();
    for (const LabelSpan& s : utt.truth) spans.push_back({s.first, s.last});
    line["truth"] = std::move(spans);
    line["features"] = rel;
    manifest << line.dump() << "\n";
  }
  manifest.flush();
  if (!manifest) throw Error("manifest write failed for split " + split);
}

std::vector<Utterance> read_dataset(const fs::path& dir, const std::string& split) {
  const fs::path manifest_path = dir / (split + ".jsonl");
  std::ifstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw Error("cannot open manifest: " + manifest_path.string());
  std::vector<Utterance> out;
  std::string text;
  while (std::getline(manifest, text)) {
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error("corrupt manifest line in " + manifest_path.string() + ": " + e.what());
    }
    try {
      Utterance utt;
      utt.id = j.at("id").get<std::string>();
      utt.transcript = j.at("transcript").get<TokenSeq>();
      for (const auto& s : j.at("truth"))
        utt.truth.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
      utt.features = read_tensor(dir / j.at("features").get<std::string>()).data;
      out.push_back(std::move(utt));
    } catch (const nlohmann::json::exception& e) {
      throw Error("bad manifest entry in " + manifest_path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lt
