#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "lt/error.hpp"
#include "lt/model.hpp"
#include "lt/optimizer.hpp"
#include "lt/rng.hpp"
#include "lt/serialize.hpp"

#include "fd_check.hpp"

namespace {

using test_fd::random_features;
using test_fd::small_batch;
using test_fd::tiny_config;

double fd_error(const lt::ModelConfig& cfg, unsigned terms) {
  const lt::GradCheckReport report = test_fd::fd_report(cfg, terms);
  INFO("worst parameter: ", report.worst_param);
  return report.max_rel_err;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences per term") {
  CHECK(fd_error(tiny_config(), lt::kTermCtc) <= 1e-4);
  CHECK(fd_error(tiny_config(), lt::kTermNonBlank) <= 1e-4);
  CHECK(fd_error(tiny_config(), lt::kTermBlank) <= 1e-4);
  CHECK(fd_error(tiny_config(), lt::kTermAll) <= 1e-4);
}

TEST_CASE("gradients stay correct across architecture variants") {
  lt::ModelConfig strided = tiny_config();
  strided.encoder_stride = 2;
  strided.encoder_layers = 2;
  CHECK(fd_error(strided, lt::kTermAll) <= 1e-4);

  lt::ModelConfig plain_blank = tiny_config();
  plain_blank.enhanced_blank = false;
  CHECK(fd_error(plain_blank, lt::kTermAll) <= 1e-4);

  lt::ModelConfig single_softmax = tiny_config();
  single_softmax.decouple_blank = false;
  CHECK(fd_error(single_softmax, lt::kTermAll) <= 1e-4);

  lt::ModelConfig transducer = tiny_config();
  transducer.criterion = lt::Criterion::kTransducer;
  CHECK(fd_error(transducer, lt::kTermCtc) <= 1e-4);
  CHECK(fd_error(transducer, lt::kTermNonBlank) <= 1e-4);
  CHECK(fd_error(transducer, lt::kTermAll) <= 1e-4);
}

TEST_CASE("blank loss alone reaches no main-network parameter") {
  const lt::ModelConfig cfg = tiny_config();  // truncation on by default
  lt::Model model = lt::make_model(cfg);
  lt::Rng rng(13);
  const std::vector<lt::Sample> batch = small_batch(rng, cfg);

  lt::forward_backward_step(model, batch, lt::kTermBlank);

  double blank_norm = 0.0;
  for (const lt::Param& p : model.params.all()) {
    const bool blank_param = p.name.rfind("blank.", 0) == 0;
    for (double g : p.grad.values()) {
      if (blank_param) {
        blank_norm += g * g;
      } else {
        // Exactly zero, not merely small: the truncation is structural.
        CHECK(g == 0.0);
      }
    }
  }
  CHECK(blank_norm > 0.0);
}

TEST_CASE("without truncation the blank loss reaches the encoder") {
  lt::ModelConfig cfg = tiny_config();
  cfg.truncate_blank_grad = false;
  lt::Model model = lt::make_model(cfg);
  lt::Rng rng(13);
  const std::vector<lt::Sample> batch = small_batch(rng, cfg);

  lt::forward_backward_step(model, batch, lt::kTermBlank);

  double enc_norm = 0.0;
  for (double g : model.params.at("enc.in.w").grad.values()) enc_norm += g * g;
  CHECK(enc_norm > 0.0);
}

TEST_CASE("worker split does not change gradients") {
  const lt::ModelConfig cfg = tiny_config();
  lt::Rng rng(29);
  std::vector<lt::Sample> batch;
  for (int i = 0; i < 5; ++i)
    batch.push_back({random_features(rng, 6 + i % 3, cfg.feature_dim),
                     {static_cast<lt::TokenId>(1 + i % 3)}});

  lt::Model one = lt::make_model(cfg);
  lt::Model reread = lt::make_model(cfg);
  lt::Model four = lt::make_model(cfg);

  const lt::StepDiagnostics d1 = lt::forward_backward_step(one, batch, lt::kTermAll, 1);
  const lt::StepDiagnostics d1b = lt::forward_backward_step(reread, batch, lt::kTermAll, 1);
  const lt::StepDiagnostics d4 = lt::forward_backward_step(four, batch, lt::kTermAll, 4);

  CHECK(d1.loss == d1b.loss);  // same worker count: bit-identical
  CHECK(d1.loss == doctest::Approx(d4.loss).epsilon(1e-12));
  for (std::size_t i = 0; i < one.params.count(); ++i) {
    const auto& a = one.params.all()[i].grad.values();
    const auto& b = reread.params.all()[i].grad.values();
    const auto& c = four.params.all()[i].grad.values();
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(a[j] == b[j]);
      CHECK(std::abs(a[j] - c[j]) <= 1e-10);
    }
  }
}

TEST_CASE("infeasible items are excluded and counted") {
  const lt::ModelConfig cfg = tiny_config();
  lt::Rng rng(41);
  const lt::Sample good{random_features(rng, 8, cfg.feature_dim), {1, 2}};
  const lt::Sample bad{random_features(rng, 2, cfg.feature_dim), {1, 2, 3, 1, 2}};

  lt::Model both = lt::make_model(cfg);
  const std::vector<lt::Sample> batch{good, bad};
  const lt::StepDiagnostics d = lt::forward_backward_step(both, batch);
  CHECK(d.infeasible == 1);
  CHECK(std::isfinite(d.loss));

  // The surviving item alone reproduces the same step exactly.
  lt::Model solo = lt::make_model(cfg);
  const std::vector<lt::Sample> only_good{good};
  const lt::StepDiagnostics ds = lt::forward_backward_step(solo, only_good);
  CHECK(d.loss == ds.loss);
  for (std::size_t i = 0; i < both.params.count(); ++i) {
    const auto& a = both.params.all()[i].grad.values();
    const auto& b = solo.params.all()[i].grad.values();
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
  }

  // A batch of nothing but infeasible items degrades to a no-op step.
  lt::Model none = lt::make_model(cfg);
  const std::vector<lt::Sample> only_bad{bad};
  const lt::StepDiagnostics dn = lt::forward_backward_step(none, only_bad);
  CHECK(dn.infeasible == 1);
  CHECK(dn.loss == 0.0);
}

TEST_CASE("transcript validation") {
  const lt::ModelConfig cfg = tiny_config();
  lt::Model model = lt::make_model(cfg);
  lt::Rng rng(43);
  const std::vector<lt::Sample> with_blank{{random_features(rng, 4, cfg.feature_dim), {1, 0}}};
  CHECK_THROWS_WITH_AS(lt::forward_backward_step(model, with_blank),
                       "transcript contains the blank", lt::Error);
  const std::vector<lt::Sample> oob{{random_features(rng, 4, cfg.feature_dim), {9}}};
  CHECK_THROWS_WITH_AS(lt::forward_backward_step(model, oob), "token id out of range",
                       lt::Error);
}

TEST_CASE("model construction validation") {
  lt::ModelConfig cfg = tiny_config();
  cfg.vocab = 1;
  CHECK_THROWS_AS(lt::make_model(cfg), lt::Error);
  cfg = tiny_config();
  cfg.encoder_stride = 3;
  CHECK_THROWS_WITH_AS(lt::make_model(cfg), "encoder stride must be 1 or 2", lt::Error);
  cfg = tiny_config();
  cfg.encoder_layers = 0;
  CHECK_THROWS_AS(lt::make_model(cfg), lt::Error);
  cfg = tiny_config();
  cfg.blank = 9;
  CHECK_THROWS_WITH_AS(lt::make_model(cfg), "blank id out of range", lt::Error);
}

TEST_CASE("encoder stride halves the frame count, rounding up") {
  lt::ModelConfig cfg = tiny_config();
  cfg.encoder_stride = 2;
  const lt::Model model = lt::make_model(cfg);
  lt::Rng rng(3);
  CHECK(lt::encode(model, random_features(rng, 7, cfg.feature_dim)).dim(0) == 4);
  CHECK(lt::encode(model, random_features(rng, 8, cfg.feature_dim)).dim(0) == 4);
  CHECK(lt::encode(model, random_features(rng, 1, cfg.feature_dim)).dim(0) == 1);
}

TEST_CASE("ctc head rows are normalized log-probabilities") {
  const lt::Model model = lt::make_model(tiny_config());
  lt::Rng rng(9);
  const lt::LogProbGrid grid = lt::ctc_log_probs(model, random_features(rng, 5, 3));
  REQUIRE(grid.frames() == 5);
  REQUIRE(grid.vocab() == 4);
  for (std::size_t t = 0; t < 5; ++t) {
    double sum = 0.0;
    for (std::size_t v = 0; v < 4; ++v) sum += std::exp(grid(t, v));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("decoded token count never exceeds the frame count") {
  lt::Rng rng(2718);
  const auto run = [&](lt::ModelConfig cfg) {
    const lt::Model model = lt::make_model(cfg);
    for (int i = 0; i < 20; ++i) {
      const std::size_t frames = 1 + rng.below(12);
      const lt::TokenSeq hyp =
          lt::decode_features(model, random_features(rng, frames, cfg.feature_dim));
      const std::size_t out_frames =
          cfg.encoder_stride == 2 ? (frames + 1) / 2 : frames;
      CHECK(hyp.size() <= out_frames);
      for (lt::TokenId tok : hyp) {
        CHECK(tok != cfg.blank);
        CHECK(tok > 0);
        CHECK(tok < static_cast<lt::TokenId>(cfg.vocab));
      }
    }
  };

  run(tiny_config());  // blank head with threshold decision

  lt::ModelConfig combined = tiny_config();
  combined.loss.blank_decision_combined_argmax = true;
  run(combined);

  lt::ModelConfig single = tiny_config();
  single.decouple_blank = false;
  run(single);

  lt::ModelConfig transducer = tiny_config();
  transducer.criterion = lt::Criterion::kTransducer;
  run(transducer);

  lt::ModelConfig strided = tiny_config();
  strided.encoder_stride = 2;
  run(strided);
}

TEST_CASE("activation accounting per criterion") {
  lt::Rng rng(1234);

  lt::ModelConfig light = tiny_config();
  lt::Model lm = lt::make_model(light);
  std::vector<lt::Sample> batch;
  batch.push_back({random_features(rng, 6, light.feature_dim), {1, 2}});
  batch.push_back({random_features(rng, 9, light.feature_dim), {3}});
  const lt::StepDiagnostics dl = lt::forward_backward_step(lm, batch);
  // (V-1)-way head plus one blank posterior per frame: T * V slots total.
  CHECK(dl.joint_activations == (6 + 9) * light.vocab);

  lt::ModelConfig full = tiny_config();
  full.criterion = lt::Criterion::kTransducer;
  lt::Model fm = lt::make_model(full);
  const lt::StepDiagnostics df = lt::forward_backward_step(fm, batch);
  CHECK(df.joint_activations ==
        6u * (2 + 1) * full.vocab + 9u * (1 + 1) * full.vocab);
}

TEST_CASE("checkpoints restore the model and optimizer bit for bit") {
  namespace fs = std::filesystem;
  const lt::ModelConfig cfg = tiny_config();
  lt::Model model = lt::make_model(cfg);
  lt::Adam opt({.lr = 1e-2});
  lt::Rng rng(55);
  const std::vector<lt::Sample> batch = small_batch(rng, cfg);
  for (int i = 0; i < 3; ++i) {
    lt::forward_backward_step(model, batch);
    opt.step(model.params);
  }

  const fs::path dir =
      fs::temp_directory_path() / ("lt_ckpt_test_" + std::to_string(::getpid()));
  lt::save_checkpoint(model, opt, dir.string());

  lt::Adam opt2({.lr = 1e-2});
  const lt::Model back = lt::load_checkpoint(dir.string(), &opt2);
  fs::remove_all(dir);

  CHECK(back.config.vocab == cfg.vocab);
  CHECK(back.config.loss.ctc_gate == cfg.loss.ctc_gate);
  CHECK(opt2.steps() == opt.steps());
  REQUIRE(back.params.count() == model.params.count());
  for (std::size_t i = 0; i < model.params.count(); ++i) {
    const lt::Param& a = model.params.all()[i];
    const lt::Param& b = back.params.all()[i];
    CHECK(a.name == b.name);
    REQUIRE(a.value.shape() == b.value.shape());
    for (std::size_t j = 0; j < a.value.size(); ++j) CHECK(a.value(j) == b.value(j));
  }
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    for (std::size_t j = 0; j < opt.first_moments()[i].size(); ++j) {
      CHECK(opt.first_moments()[i](j) == opt2.first_moments()[i](j));
      CHECK(opt.second_moments()[i](j) == opt2.second_moments()[i](j));
    }
  }

  // The restored model decodes identically.
  const lt::Tensor probe = random_features(rng, 10, cfg.feature_dim);
  CHECK(lt::decode_features(model, probe) == lt::decode_features(back, probe));
}

TEST_CASE("corrupt checkpoints are rejected") {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("lt_ckpt_bad_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::FILE* f = std::fopen((dir / "checkpoint.json").string().c_str(), "wb");
    REQUIRE(f);
    std::fputs("{ not json", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(lt::load_checkpoint(dir.string()), lt::Error);
  fs::remove_all(dir);
  CHECK_THROWS_AS(lt::load_checkpoint((dir / "missing").string()), lt::Error);
}

TEST_CASE("model config json round-trip rejects unknown keys") {
  lt::ModelConfig cfg = tiny_config();
  cfg.encoder_stride = 2;
  cfg.criterion = lt::Criterion::kTransducer;
  cfg.align_mode = lt::AlignMode::kReference;
  cfg.loss.lambda = 0.4;

  const nlohmann::json j = lt::model_config_to_json(cfg);
  const lt::ModelConfig back = lt::model_config_from_json(j);
  CHECK(back.encoder_stride == 2);
  CHECK(back.criterion == lt::Criterion::kTransducer);
  CHECK(back.align_mode == lt::AlignMode::kReference);
  CHECK(back.loss.lambda == 0.4);

  nlohmann::json bad = j;
  bad["hidden_dims"] = 7;
  CHECK_THROWS_AS(lt::model_config_from_json(bad), lt::Error);
  nlohmann::json bad_nested = j;
  bad_nested["loss"]["lamda"] = 0.5;
  CHECK_THROWS_AS(lt::model_config_from_json(bad_nested), lt::Error);
}

TEST_CASE("fixed alignment targets are honored and exported") {
  const lt::ModelConfig cfg = tiny_config();
  lt::Model model = lt::make_model(cfg);
  lt::Rng rng(66);
  const std::vector<lt::Sample> batch{{random_features(rng, 6, cfg.feature_dim), {1, 2}}};

  std::vector<lt::AlignmentSpans> got;
  lt::forward_backward_step(model, batch, lt::kTermAll, 1, nullptr, &got);
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].size() == 2);

  // Feed back a deliberately different alignment; the step must use it.
  std::vector<lt::AlignmentSpans> moved = got;
  moved[0][0] = {0, 0};
  moved[0][1] = {5, 5};
  lt::Model a = lt::make_model(cfg);
  lt::Model b = lt::make_model(cfg);
  const lt::StepDiagnostics da = lt::forward_backward_step(a, batch, lt::kTermAll, 1, &got);
  const lt::StepDiagnostics db = lt::forward_backward_step(b, batch, lt::kTermAll, 1, &moved);
  CHECK(da.nonblank != db.nonblank);

  std::vector<lt::AlignmentSpans> wrong_size(2);
  CHECK_THROWS_WITH_AS(lt::forward_backward_step(model, batch, lt::kTermAll, 1, &wrong_size),
                       "fixed alignment count does not match the batch", lt::Error);
}
