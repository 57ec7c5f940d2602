// Command-line front end: data generation, training, alignment dumps,
// decoding, evaluation and the joint-memory report.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lt/ctc.hpp"
#include "lt/error.hpp"
#include "lt/forced_align.hpp"
#include "lt/model.hpp"
#include "lt/serialize.hpp"
#include "lt/synth.hpp"
#include "lt/tensor_io.hpp"
#include "lt/training.hpp"
#include "lt/transducer.hpp"

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lt::Error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw lt::Error("cannot parse " + path + ": " + e.what());
  }
}

std::vector<lt::Utterance> load_split(const std::string& data_dir, const std::string& split) {
  return lt::read_dataset(data_dir, split);
}

void print_spans(std::size_t item, const lt::TokenSeq& y, const lt::AlignmentSpans& spans) {
  std::printf("item %zu: %zu tokens\n", item, y.size());
  for (std::size_t u = 0; u < spans.size(); ++u)
    std::printf("  token %zu (id %d): frames [%zu..%zu]\n", u, y[u], spans[u].first,
                spans[u].last);
}

// Labels file: either one token list or a list of token lists.
std::vector<lt::TokenSeq> read_labels_file(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  if (!j.is_array()) throw lt::Error("labels file must hold a JSON array");
  std::vector<lt::TokenSeq> out;
  if (j.empty() || !j.front().is_array()) {
    out.push_back(j.get<lt::TokenSeq>());
  } else {
    for (const auto& row : j) out.push_back(row.get<lt::TokenSeq>());
  }
  return out;
}

// Grid file: a single T x V matrix, or a padded N x T_max x V batch with
// per-item lengths.
lt::BatchGrid read_grid_file(const std::string& path) {
  lt::StoredTensor st = lt::read_tensor(path);
  if (st.data.rank() == 2) {
    const std::size_t frames = st.data.dim(0);
    const std::size_t vocab = st.data.dim(1);
    lt::BatchGrid grid;
    grid.data = lt::Tensor({1, frames, vocab});
    grid.data.values() = st.data.values();
    grid.lengths = {frames};
    return grid;
  }
  if (st.data.rank() == 3) {
    if (!st.lengths) throw lt::Error("batched grid file is missing per-item lengths");
    return lt::BatchGrid{std::move(st.data), std::move(*st.lengths)};
  }
  throw lt::Error("grid file must hold a rank-2 or rank-3 tensor");
}

struct GenOpts {
  std::string out;
  std::size_t train_count = 500;
  std::size_t dev_count = 100;
  std::size_t test_count = 100;
  lt::SynthConfig synth;
};

void run_gen(const GenOpts& o) {
  namespace fs = std::filesystem;
  fs::create_directories(o.out);
  const struct {
    const char* split;
    std::size_t count;
    std::uint64_t seed_offset;
  } splits[] = {{"train", o.train_count, 1}, {"dev", o.dev_count, 2}, {"test", o.test_count, 3}};
  for (const auto& s : splits) {
    const auto data = lt::gen_synth(o.synth, s.count, std::string(s.split) + "-",
                                    o.synth.seed + s.seed_offset);
    lt::write_dataset(data, o.out, s.split);
    std::printf("wrote %zu %s utterances\n", data.size(), s.split);
  }
  nlohmann::json meta;
  meta["vocab"] = o.synth.vocab;
  meta["feature_dim"] = o.synth.feature_dim;
  meta["seed"] = o.synth.seed;
  meta["noise"] = o.synth.noise;
  std::ofstream out(fs::path(o.out) / "dataset.json", std::ios::binary);
  out << meta.dump(2) << "\n";
  if (!out) throw lt::Error("cannot write dataset.json");
}

struct TrainOpts {
  std::string data;
  std::string config_path;
  std::string checkpoint_dir;
  std::string metrics_path;
  lt::ModelConfig model;
  lt::TrainConfig train;
  bool no_shuffle = false;
  bool no_truncate = false;
  bool no_enhanced = false;
  bool no_decouple = false;
};

void run_train(TrainOpts o, const CLI::App& cmd) {
  // Precedence: defaults < config file < explicit flags.
  if (!o.config_path.empty()) {
    const nlohmann::json cfg = read_json_file(o.config_path);
    for (const auto& item : cfg.items())
      if (item.key() != "model" && item.key() != "train")
        throw lt::Error("unknown config key: " + item.key());
    lt::ModelConfig from_file = o.model;
    if (cfg.contains("model")) from_file = lt::model_config_from_json(cfg.at("model"));
    const nlohmann::json t = cfg.value("train", nlohmann::json::object());
    for (const auto& item : t.items()) {
      const std::string& k = item.key();
      if (k != "epochs" && k != "batch_size" && k != "threads" && k != "align_refresh" &&
          k != "shuffle" && k != "shuffle_seed" && k != "lr" && k != "clip_norm" &&
          k != "warmup_steps")
        throw lt::Error("unknown config key: train." + k);
    }
    lt::TrainConfig tc = o.train;
    tc.epochs = t.value("epochs", tc.epochs);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.threads = t.value("threads", tc.threads);
    tc.align_refresh = t.value("align_refresh", tc.align_refresh);
    tc.shuffle = t.value("shuffle", tc.shuffle);
    tc.shuffle_seed = t.value("shuffle_seed", tc.shuffle_seed);
    tc.adam.lr = t.value("lr", tc.adam.lr);
    tc.adam.clip_norm = t.value("clip_norm", tc.adam.clip_norm);
    tc.adam.warmup_steps = t.value("warmup_steps", tc.adam.warmup_steps);

    // Re-apply any flag the user passed explicitly on top of the file.
    auto keep = [&](const std::string& flag) { return cmd.count(flag) > 0; };
    if (!keep("--hidden")) o.model.hidden_dim = from_file.hidden_dim;
    if (!keep("--layers")) o.model.encoder_layers = from_file.encoder_layers;
    if (!keep("--stride")) o.model.encoder_stride = from_file.encoder_stride;
    if (!keep("--blank-hidden")) o.model.blank_hidden = from_file.blank_hidden;
    if (!keep("--criterion")) o.model.criterion = from_file.criterion;
    if (!keep("--align-mode")) o.model.align_mode = from_file.align_mode;
    if (!keep("--seed")) o.model.seed = from_file.seed;
    if (!keep("--lambda")) o.model.loss.lambda = from_file.loss.lambda;
    if (!keep("--ctc-gate")) o.model.loss.ctc_gate = from_file.loss.ctc_gate;
    if (!keep("--blank-threshold")) o.model.loss.blank_threshold = from_file.loss.blank_threshold;
    if (!keep("--combined-argmax"))
      o.model.loss.blank_decision_combined_argmax = from_file.loss.blank_decision_combined_argmax;
    if (!keep("--no-truncate-gradient")) o.model.truncate_blank_grad = from_file.truncate_blank_grad;
    if (!keep("--no-enhanced-blank")) o.model.enhanced_blank = from_file.enhanced_blank;
    if (!keep("--no-decouple-blank")) o.model.decouple_blank = from_file.decouple_blank;
    if (!keep("--epochs")) o.train.epochs = tc.epochs;
    if (!keep("--batch-size")) o.train.batch_size = tc.batch_size;
    if (!keep("--threads")) o.train.threads = tc.threads;
    if (!keep("--freeze-align-every")) o.train.align_refresh = tc.align_refresh;
    if (!keep("--shuffle-seed")) o.train.shuffle_seed = tc.shuffle_seed;
    if (!keep("--lr")) o.train.adam.lr = tc.adam.lr;
    if (!keep("--clip")) o.train.adam.clip_norm = tc.adam.clip_norm;
    if (!keep("--warmup")) o.train.adam.warmup_steps = tc.adam.warmup_steps;
    if (!keep("--no-shuffle")) o.train.shuffle = tc.shuffle;
  }
  if (o.no_shuffle) o.train.shuffle = false;
  if (o.no_truncate) o.model.truncate_blank_grad = false;
  if (o.no_enhanced) o.model.enhanced_blank = false;
  if (o.no_decouple) o.model.decouple_blank = false;

  const nlohmann::json meta = read_json_file((std::filesystem::path(o.data) / "dataset.json").string());
  o.model.vocab = meta.at("vocab").get<std::size_t>();
  o.model.feature_dim = meta.at("feature_dim").get<std::size_t>();

  const auto train_set = load_split(o.data, "train");
  const auto dev_set = load_split(o.data, "dev");
  o.train.metrics_path = o.metrics_path;
  o.train.checkpoint_dir = o.checkpoint_dir;
  if (!o.metrics_path.empty()) {
    const auto parent = std::filesystem::path(o.metrics_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  if (!o.checkpoint_dir.empty()) std::filesystem::create_directories(o.checkpoint_dir);

  lt::Model model = lt::make_model(o.model);
  lt::Adam opt(o.train.adam);
  std::printf("%s\n", lt::kMetricsHeader);
  lt::TrainResult result = lt::run_training(model, opt, train_set, dev_set, o.train);
  for (const lt::MetricsRow& row : result.history)
    std::printf("%s\n", lt::format_metrics_row(row).c_str());
  if (result.diverged) throw lt::Error("training diverged (loss is not finite)");
  std::printf("alignment_sanity,%.6f\n", lt::alignment_sanity(model, dev_set));
}

struct ItemSelect {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  long item = -1;  // -1 = all
};

void for_each_selected(const ItemSelect& sel,
                       const std::function<void(std::size_t, const lt::Utterance&)>& fn) {
  const auto data = load_split(sel.data, sel.split);
  if (sel.item >= 0) {
    const auto idx = static_cast<std::size_t>(sel.item);
    if (idx >= data.size()) throw lt::Error("item index out of range");
    fn(idx, data[idx]);
    return;
  }
  for (std::size_t i = 0; i < data.size(); ++i) fn(i, data[i]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frame-paired transducer training and evaluation toolkit"};
  app.require_subcommand(1);

  // gen-data ---------------------------------------------------------------
  auto gen = std::make_shared<GenOpts>();
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_cmd->add_option("--out", gen->out, "output directory")->required();
  gen_cmd->add_option("--train-count", gen->train_count, "training utterances");
  gen_cmd->add_option("--dev-count", gen->dev_count, "dev utterances");
  gen_cmd->add_option("--test-count", gen->test_count, "test utterances");
  gen_cmd->add_option("--seed", gen->synth.seed, "generator seed");
  gen_cmd->add_option("--vocab", gen->synth.vocab, "vocabulary size incl. blank");
  gen_cmd->add_option("--feature-dim", gen->synth.feature_dim, "feature dimension");
  gen_cmd->add_option("--min-tokens", gen->synth.min_tokens, "min tokens per utterance");
  gen_cmd->add_option("--max-tokens", gen->synth.max_tokens, "max tokens per utterance");
  gen_cmd->add_option("--min-token-frames", gen->synth.min_token_frames, "min frames per token");
  gen_cmd->add_option("--max-token-frames", gen->synth.max_token_frames, "max frames per token");
  gen_cmd->add_option("--min-silence-frames", gen->synth.min_silence_frames,
                      "min frames per silence segment");
  gen_cmd->add_option("--max-silence-frames", gen->synth.max_silence_frames,
                      "max frames per silence segment");
  gen_cmd->add_option("--silence-prob", gen->synth.silence_prob,
                      "chance of a silence segment at each gap");
  gen_cmd->add_option("--noise", gen->synth.noise, "feature noise stddev");
  gen_cmd->callback([gen] { run_gen(*gen); });

  // train ------------------------------------------------------------------
  auto tr = std::make_shared<TrainOpts>();
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write metrics");
  train_cmd->add_option("--data", tr->data, "dataset directory")->required();
  train_cmd->add_option("--config", tr->config_path, "JSON config with model/train sections");
  train_cmd->add_option("--out", tr->checkpoint_dir, "checkpoint directory");
  train_cmd->add_option("--metrics", tr->metrics_path, "metrics CSV path");
  train_cmd->add_option("--epochs", tr->train.epochs, "training epochs");
  train_cmd->add_option("--batch-size", tr->train.batch_size, "utterances per step");
  train_cmd->add_option("--threads", tr->train.threads, "worker threads per step");
  train_cmd->add_option("--lr", tr->train.adam.lr, "Adam learning rate");
  train_cmd->add_option("--clip", tr->train.adam.clip_norm, "global gradient-norm clip");
  train_cmd->add_option("--warmup", tr->train.adam.warmup_steps, "linear warmup steps");
  train_cmd->add_option("--shuffle-seed", tr->train.shuffle_seed, "epoch shuffle seed");
  train_cmd->add_flag("--no-shuffle", tr->no_shuffle, "keep dataset order every epoch");
  train_cmd->add_option("--freeze-align-every", tr->train.align_refresh,
                        "recompute alignment targets every k steps (0 = freeze after first)");
  train_cmd->add_option("--seed", tr->model.seed, "model init seed");
  train_cmd->add_option("--hidden", tr->model.hidden_dim, "encoder/decoder width");
  train_cmd->add_option("--layers", tr->model.encoder_layers, "encoder recurrent layers");
  train_cmd->add_option("--stride", tr->model.encoder_stride, "encoder stride (1 or 2)");
  train_cmd->add_option("--blank-hidden", tr->model.blank_hidden, "blank head hidden width");
  train_cmd
      ->add_option("--criterion",
                   [tr](const std::vector<std::string>& v) {
                     if (v[0] == "lightweight")
                       tr->model.criterion = lt::Criterion::kLightweight;
                     else if (v[0] == "transducer")
                       tr->model.criterion = lt::Criterion::kTransducer;
                     else
                       throw CLI::ValidationError("--criterion",
                                                  "expected lightweight or transducer");
                     return true;
                   },
                   "training criterion: lightweight | transducer")
      ->expected(1);
  train_cmd
      ->add_option("--align-mode",
                   [tr](const std::vector<std::string>& v) {
                     if (v[0] == "viterbi")
                       tr->model.align_mode = lt::AlignMode::kViterbi;
                     else if (v[0] == "reference")
                       tr->model.align_mode = lt::AlignMode::kReference;
                     else
                       throw CLI::ValidationError("--align-mode", "expected viterbi or reference");
                     return true;
                   },
                   "alignment trellis mode: viterbi | reference")
      ->expected(1);
  train_cmd->add_option("--lambda", tr->model.loss.lambda, "CTC weight in the composite loss");
  train_cmd->add_option("--ctc-gate", tr->model.loss.ctc_gate,
                        "per-token CTC gate for the frame losses (nats)");
  train_cmd->add_option("--blank-threshold", tr->model.loss.blank_threshold,
                        "decode-time blank decision threshold");
  train_cmd->add_flag("--combined-argmax", tr->model.loss.blank_decision_combined_argmax,
                      "decide blank by argmax of the combined distribution");
  train_cmd->add_flag("--no-truncate-gradient", tr->no_truncate,
                      "let the blank loss reach the encoder/decoder");
  train_cmd->add_flag("--no-enhanced-blank", tr->no_enhanced,
                      "drop the last-emission input of the blank head");
  train_cmd->add_flag("--no-decouple-blank", tr->no_decouple,
                      "single softmax over the full vocabulary");
  train_cmd->callback([tr, train_cmd] { run_train(*tr, *train_cmd); });

  // align ------------------------------------------------------------------
  auto al = std::make_shared<ItemSelect>();
  auto al_grid = std::make_shared<std::string>();
  auto al_labels = std::make_shared<std::string>();
  auto al_mode = std::make_shared<std::string>("viterbi");
  auto al_out = std::make_shared<std::string>();
  CLI::App* align_cmd = app.add_subcommand("align", "forced alignment dump");
  align_cmd->add_option("--grid", *al_grid, "log-probability grid tensor file");
  align_cmd->add_option("--labels", *al_labels, "JSON token list (or list of lists)");
  align_cmd->add_option("--checkpoint", al->checkpoint, "model checkpoint directory");
  align_cmd->add_option("--data", al->data, "dataset directory");
  align_cmd->add_option("--split", al->split, "dataset split");
  align_cmd->add_option("--item", al->item, "utterance index (default: all)");
  align_cmd->add_option("--mode", *al_mode, "viterbi | reference");
  align_cmd->add_option("--out", *al_out, "write the N x U x T alignment tensor here");
  align_cmd->callback([al, al_grid, al_labels, al_mode, al_out] {
    lt::AlignMode mode;
    if (*al_mode == "viterbi")
      mode = lt::AlignMode::kViterbi;
    else if (*al_mode == "reference")
      mode = lt::AlignMode::kReference;
    else
      throw lt::Error("unknown align mode: " + *al_mode);

    lt::BatchGrid grid;
    std::vector<lt::TokenSeq> labels;
    if (!al_grid->empty()) {
      if (al_labels->empty()) throw lt::Error("--grid needs --labels");
      grid = read_grid_file(*al_grid);
      labels = read_labels_file(*al_labels);
    } else {
      if (al->checkpoint.empty() || al->data.empty())
        throw lt::Error("align needs either --grid/--labels or --checkpoint/--data");
      const lt::Model model = lt::load_checkpoint(al->checkpoint);
      std::vector<lt::LogProbGrid> grids;
      for_each_selected(*al, [&](std::size_t, const lt::Utterance& utt) {
        grids.push_back(lt::ctc_log_probs(model, utt.features));
        labels.push_back(utt.transcript);
      });
      std::size_t t_max = 0;
      for (const auto& g : grids) t_max = std::max(t_max, g.frames());
      grid.data = lt::Tensor({grids.size(), t_max, model.config.vocab}, lt::kLogZero);
      for (std::size_t n = 0; n < grids.size(); ++n) {
        const std::size_t frames = grids[n].frames();
        std::copy(grids[n].tensor().data(),
                  grids[n].tensor().data() + frames * model.config.vocab,
                  grid.data.data() + n * t_max * model.config.vocab);
        grid.lengths.push_back(frames);
      }
    }
    if (labels.size() != grid.batch())
      throw lt::Error("label count does not match the grid batch");
    const lt::AlignResult result =
        lt::forced_align_batch(grid, lt::TokenBatch::from_sequences(labels), lt::kBlank, mode);
    for (std::size_t b = 0; b < grid.batch(); ++b)
      print_spans(b, labels[b], result.alignment.item_spans(b));
    if (!al_out->empty()) lt::write_tensor(result.alignment.a, *al_out);
  });

  // ctc-loss ---------------------------------------------------------------
  auto cl = std::make_shared<ItemSelect>();
  auto cl_grid = std::make_shared<std::string>();
  auto cl_labels = std::make_shared<std::string>();
  CLI::App* ctc_cmd = app.add_subcommand("ctc-loss", "per-utterance CTC loss");
  ctc_cmd->add_option("--grid", *cl_grid, "log-probability grid tensor file");
  ctc_cmd->add_option("--labels", *cl_labels, "JSON token list (or list of lists)");
  ctc_cmd->add_option("--checkpoint", cl->checkpoint, "model checkpoint directory");
  ctc_cmd->add_option("--data", cl->data, "dataset directory");
  ctc_cmd->add_option("--split", cl->split, "dataset split");
  ctc_cmd->add_option("--item", cl->item, "utterance index (default: all)");
  ctc_cmd->callback([cl, cl_grid, cl_labels] {
    double total = 0.0;
    std::size_t count = 0;
    auto report = [&](const std::string& name, const lt::LogProbGrid& grid,
                      const lt::TokenSeq& y) {
      const double loss = lt::ctc_forward(grid, y).loss;
      std::printf("%s\t%.9f\n", name.c_str(), loss);
      total += loss;
      ++count;
    };
    if (!cl_grid->empty()) {
      if (cl_labels->empty()) throw lt::Error("--grid needs --labels");
      const lt::BatchGrid grid = read_grid_file(*cl_grid);
      const auto labels = read_labels_file(*cl_labels);
      if (labels.size() != grid.batch())
        throw lt::Error("label count does not match the grid batch");
      for (std::size_t b = 0; b < grid.batch(); ++b)
        report("item " + std::to_string(b), grid.item(b), labels[b]);
    } else {
      if (cl->checkpoint.empty() || cl->data.empty())
        throw lt::Error("ctc-loss needs either --grid/--labels or --checkpoint/--data");
      const lt::Model model = lt::load_checkpoint(cl->checkpoint);
      for_each_selected(*cl, [&](std::size_t, const lt::Utterance& utt) {
        report(utt.id, lt::ctc_log_probs(model, utt.features), utt.transcript);
      });
    }
    if (count) std::printf("mean\t%.9f\n", total / static_cast<double>(count));
  });

  // decode -----------------------------------------------------------------
  auto dc = std::make_shared<ItemSelect>();
  CLI::App* decode_cmd = app.add_subcommand("decode", "greedy decode a split");
  decode_cmd->add_option("--checkpoint", dc->checkpoint, "model checkpoint directory")
      ->required();
  decode_cmd->add_option("--data", dc->data, "dataset directory")->required();
  decode_cmd->add_option("--split", dc->split, "dataset split");
  decode_cmd->add_option("--item", dc->item, "utterance index (default: all)");
  decode_cmd->callback([dc] {
    const lt::Model model = lt::load_checkpoint(dc->checkpoint);
    for_each_selected(*dc, [&](std::size_t, const lt::Utterance& utt) {
      const lt::TokenSeq hyp = lt::decode_features(model, utt.features);
      std::printf("%s\t", utt.id.c_str());
      for (std::size_t i = 0; i < hyp.size(); ++i)
        std::printf("%s%d", i ? " " : "", hyp[i]);
      std::printf("\n");
    });
  });

  // eval -------------------------------------------------------------------
  auto ev = std::make_shared<ItemSelect>();
  CLI::App* eval_cmd = app.add_subcommand("eval", "token error rate on a split");
  eval_cmd->add_option("--checkpoint", ev->checkpoint, "model checkpoint directory")->required();
  eval_cmd->add_option("--data", ev->data, "dataset directory")->required();
  eval_cmd->add_option("--split", ev->split, "dataset split");
  eval_cmd->callback([ev] {
    const lt::Model model = lt::load_checkpoint(ev->checkpoint);
    const auto data = load_split(ev->data, ev->split);
    const lt::EvalResult r = lt::evaluate(model, data);
    std::printf("ter,ins,del,sub,ref_tokens,utterances\n");
    std::printf("%.6f,%zu,%zu,%zu,%zu,%zu\n", r.ter(), r.edits.ins, r.edits.del, r.edits.sub,
                r.ref_tokens, r.utterances);
    std::printf("alignment_sanity,%.6f\n", lt::alignment_sanity(model, data));
  });

  // memreport --------------------------------------------------------------
  auto mem = std::make_shared<std::vector<std::uint64_t>>(std::vector<std::uint64_t>{1, 1, 0, 2});
  CLI::App* mem_cmd = app.add_subcommand("memreport", "joint-output activation accounting");
  mem_cmd->add_option("--n", (*mem)[0], "batch size")->required();
  mem_cmd->add_option("--t", (*mem)[1], "frames per utterance")->required();
  mem_cmd->add_option("--u", (*mem)[2], "labels per utterance")->required();
  mem_cmd->add_option("--v", (*mem)[3], "vocabulary size")->required();
  mem_cmd->callback([mem] {
    const lt::MemoryReport r =
        lt::memory_footprint_report((*mem)[0], (*mem)[1], (*mem)[2], (*mem)[3]);
    std::printf("full_activations,frame_activations,ratio\n");
    std::printf("%llu,%llu,%llu\n", static_cast<unsigned long long>(r.full_activations),
                static_cast<unsigned long long>(r.frame_activations),
                static_cast<unsigned long long>(r.ratio));
  });

  // concat-eval ------------------------------------------------------------
  auto ce = std::make_shared<ItemSelect>();
  auto ce_cats = std::make_shared<std::vector<std::size_t>>(std::vector<std::size_t>{1, 2, 4, 8});
  auto ce_gap = std::make_shared<std::size_t>(0);
  CLI::App* concat_cmd = app.add_subcommand("concat-eval", "long-form splice evaluation");
  concat_cmd->add_option("--checkpoint", ce->checkpoint, "model checkpoint directory")
      ->required();
  concat_cmd->add_option("--data", ce->data, "dataset directory")->required();
  concat_cmd->add_option("--split", ce->split, "dataset split");
  concat_cmd->add_option("--cats", *ce_cats, "utterances per splice (repeatable)");
  concat_cmd->add_option("--gap-frames", *ce_gap, "all-zero frames inserted between splices");
  concat_cmd->callback([ce, ce_cats, ce_gap] {
    const lt::Model model = lt::load_checkpoint(ce->checkpoint);
    const auto data = load_split(ce->data, ce->split);
    const auto rows = lt::run_concat_eval(model, data, *ce_cats, *ce_gap);
    std::printf("cat,items,ter,ins,del,sub,ref_tokens\n");
    for (const lt::ConcatRow& r : rows)
      std::printf("%zu,%zu,%.6f,%zu,%zu,%zu,%zu\n", r.cat, r.items, r.ter(), r.edits.ins,
                  r.edits.del, r.edits.sub, r.ref_tokens);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const lt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
