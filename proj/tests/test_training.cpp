#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lt/error.hpp"
#include "lt/synth.hpp"
#include "lt/training.hpp"

namespace {

namespace fs = std::filesystem;

lt::SynthConfig clean_synth() {
  lt::SynthConfig cfg;
  cfg.vocab = 6;
  cfg.feature_dim = 8;
  cfg.noise = 0.0;  // perfectly separable frames
  cfg.seed = 31;
  return cfg;
}

lt::ModelConfig small_model() {
  lt::ModelConfig cfg;
  cfg.feature_dim = 8;
  cfg.vocab = 6;
  cfg.hidden_dim = 16;
  cfg.blank_hidden = 8;
  cfg.seed = 2;
  return cfg;
}

lt::TrainConfig short_run() {
  lt::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.adam.lr = 5e-3;
  return cfg;
}

struct Fixture {
  std::vector<lt::Utterance> train = lt::gen_synth(clean_synth(), 48, "tr-", 101);
  std::vector<lt::Utterance> dev = lt::gen_synth(clean_synth(), 16, "dv-", 102);
  lt::Model model = lt::make_model(small_model());
  lt::TrainResult result;

  Fixture() {
    lt::Adam opt(short_run().adam);
    result = lt::run_training(model, opt, train, dev, short_run());
  }
};

// Trained once, shared by the read-only cases below.
const Fixture& fixture() {
  static Fixture f;
  return f;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("training reduces the loss and the dev error") {
  const Fixture& f = fixture();
  REQUIRE(f.result.history.size() == short_run().epochs);
  CHECK(!f.result.diverged);
  CHECK(f.result.history.back().loss < f.result.history.front().loss);
  CHECK(f.result.history.back().ter < f.result.history.front().ter);
  // Noise-free data at this scale should be essentially solved.
  CHECK(f.result.history.back().ter <= 0.1);
  // The gate disengages once the CTC head finds its footing.
  CHECK(f.result.history.back().gated_frac < f.result.history.front().gated_frac);
}

TEST_CASE("reported error rate is consistent with the edit counts") {
  const Fixture& f = fixture();
  std::size_t ref_tokens = 0;
  for (const lt::Utterance& utt : f.dev) ref_tokens += utt.transcript.size();
  for (const lt::MetricsRow& row : f.result.history) {
    const double recomputed = static_cast<double>(row.ins + row.del + row.sub) /
                              static_cast<double>(ref_tokens);
    CHECK(std::abs(row.ter - recomputed) <= 1e-12);
  }
}

TEST_CASE("forced alignment lands inside the true windows on clean data") {
  const Fixture& f = fixture();
  CHECK(lt::alignment_sanity(f.model, f.dev) >= 0.95);
}

TEST_CASE("metrics files are byte-identical across reruns") {
  const fs::path dir = fs::temp_directory_path() / ("lt_train_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  const auto run = [&](const std::string& name) {
    lt::TrainConfig cfg = short_run();
    cfg.epochs = 4;
    cfg.metrics_path = (dir / name).string();
    lt::Model model = lt::make_model(small_model());
    lt::Adam opt(cfg.adam);
    lt::run_training(model, opt, fixture().train, fixture().dev, cfg);
    return slurp(dir / name);
  };

  const std::string first = run("a.csv");
  const std::string second = run("b.csv");
  fs::remove_all(dir);
  CHECK(first == second);

  // Header plus one row per epoch.
  std::size_t lines = 0;
  for (char ch : first) lines += ch == '\n';
  CHECK(lines == 5);
  CHECK(first.rfind(lt::kMetricsHeader, 0) == 0);
}

TEST_CASE("frozen alignment targets still converge") {
  lt::TrainConfig cfg = short_run();
  cfg.align_refresh = 0;  // freeze after the first computation
  lt::Model model = lt::make_model(small_model());
  lt::Adam opt(cfg.adam);
  const lt::TrainResult frozen =
      lt::run_training(model, opt, fixture().train, fixture().dev, cfg);
  CHECK(!frozen.diverged);
  // Targets frozen from an untrained head cap the achievable error, but
  // the loss and the error still have to move in the right direction.
  CHECK(frozen.history.back().loss < frozen.history.front().loss);
  CHECK(frozen.history.back().ter < frozen.history.front().ter);
  // The frozen schedule is a genuinely different trajectory.
  CHECK(frozen.history.back().loss != fixture().result.history.back().loss);
}

TEST_CASE("concatenated evaluation at cat 1 equals plain evaluation") {
  const Fixture& f = fixture();
  const lt::EvalResult plain = lt::evaluate(f.model, f.dev);
  const auto rows = lt::run_concat_eval(f.model, f.dev, {1, 2, 4});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].cat == 1);
  CHECK(rows[0].items == f.dev.size());
  CHECK(rows[0].edits.ins == plain.edits.ins);
  CHECK(rows[0].edits.del == plain.edits.del);
  CHECK(rows[0].edits.sub == plain.edits.sub);
  CHECK(rows[0].ref_tokens == plain.ref_tokens);
  CHECK(rows[0].ter() == plain.ter());
  // Larger cats group the same utterances into fewer, longer items.
  CHECK(rows[1].items == f.dev.size() / 2);
  CHECK(rows[2].items == f.dev.size() / 4);
  CHECK(rows[1].ref_tokens == plain.ref_tokens);
}

TEST_CASE("gap frames between splices change only the acoustics") {
  const Fixture& f = fixture();
  const auto gapped = lt::run_concat_eval(f.model, f.dev, {2}, 3);
  REQUIRE(gapped.size() == 1);
  CHECK(gapped[0].items == f.dev.size() / 2);
  CHECK(gapped[0].ref_tokens > 0);
}

TEST_CASE("training rejects degenerate configurations") {
  lt::Model model = lt::make_model(small_model());
  lt::Adam opt({});
  const std::vector<lt::Utterance> empty;
  CHECK_THROWS_WITH_AS(lt::run_training(model, opt, empty, empty, {}), "empty training set",
                       lt::Error);
  lt::TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_WITH_AS(lt::run_training(model, opt, fixture().train, fixture().dev, cfg),
                       "batch size must be positive", lt::Error);
  CHECK_THROWS_AS(lt::run_concat_eval(model, empty, {1}), lt::Error);
  CHECK_THROWS_AS(lt::run_concat_eval(model, fixture().dev, {0}), lt::Error);
}
