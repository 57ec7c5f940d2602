#include "lt/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>

#include "lt/error.hpp"
#include "lt/tensor_io.hpp"

namespace fs = std::filesystem;

namespace lt {
namespace {

const char* criterion_name(Criterion c) {
  return c == Criterion::kTransducer ? "transducer" : "lightweight";
}

Criterion criterion_from(const std::string& s) {
  if (s == "lightweight") return Criterion::kLightweight;
  if (s == "transducer") return Criterion::kTransducer;
  throw Error("unknown criterion: " + s);
}

const char* align_mode_name(AlignMode m) {
  return m == AlignMode::kReference ? "reference" : "viterbi";
}

AlignMode align_mode_from(const std::string& s) {
  if (s == "viterbi") return AlignMode::kViterbi;
  if (s == "reference") return AlignMode::kReference;
  throw Error("unknown align mode: " + s);
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* scope) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw Error(std::string("unknown config key: ") + scope + item.key());
  }
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& config) {
  nlohmann::json j;
  j["feature_dim"] = config.feature_dim;
  j["hidden_dim"] = config.hidden_dim;
  j["vocab"] = config.vocab;
  j["encoder_layers"] = config.encoder_layers;
  j["encoder_stride"] = config.encoder_stride;
  j["blank_hidden"] = config.blank_hidden;
  j["blank"] = config.blank;
  j["enhanced_blank"] = config.enhanced_blank;
  j["decouple_blank"] = config.decouple_blank;
  j["truncate_blank_grad"] = config.truncate_blank_grad;
  j["criterion"] = criterion_name(config.criterion);
  j["align_mode"] = align_mode_name(config.align_mode);
  j["seed"] = config.seed;
  j["loss"] = {{"lambda", config.loss.lambda},
               {"ctc_gate", config.loss.ctc_gate},
               {"blank_threshold", config.loss.blank_threshold},
               {"blank_decision_combined_argmax", config.loss.blank_decision_combined_argmax}};
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"feature_dim", "hidden_dim", "vocab", "encoder_layers", "encoder_stride",
              "blank_hidden", "blank", "enhanced_blank", "decouple_blank", "truncate_blank_grad",
              "criterion", "align_mode", "seed", "loss"},
             "");
  ModelConfig c;
  try {
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.vocab = j.value("vocab", c.vocab);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.encoder_stride = j.value("encoder_stride", c.encoder_stride);
    c.blank_hidden = j.value("blank_hidden", c.blank_hidden);
    c.blank = j.value("blank", c.blank);
    c.enhanced_blank = j.value("enhanced_blank", c.enhanced_blank);
    c.decouple_blank = j.value("decouple_blank", c.decouple_blank);
    c.truncate_blank_grad = j.value("truncate_blank_grad", c.truncate_blank_grad);
    if (j.contains("criterion")) c.criterion = criterion_from(j.at("criterion"));
    if (j.contains("align_mode")) c.align_mode = align_mode_from(j.at("align_mode"));
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss")) {
      const nlohmann::json& l = j.at("loss");
      check_keys(l, {"lambda", "ctc_gate", "blank_threshold", "blank_decision_combined_argmax"},
                 "loss.");
      c.loss.lambda = l.value("lambda", c.loss.lambda);
      c.loss.ctc_gate = l.value("ctc_gate", c.loss.ctc_gate);
      c.loss.blank_threshold = l.value("blank_threshold", c.loss.blank_threshold);
      c.loss.blank_decision_combined_argmax =
          l.value("blank_decision_combined_argmax", c.loss.blank_decision_combined_argmax);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad model config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Model& model, const Adam& opt, const std::string& dir) {
  fs::create_directories(dir);
  const bool moments = !opt.first_moments().empty();
  if (moments && opt.first_moments().size() != model.params.count())
    throw Error("optimizer state does not match the model");

  nlohmann::json manifest;
  manifest["format"] = "lt-checkpoint-1";
  manifest["config"] = model_config_to_json(model.config);
  manifest["step"] = opt.steps();
  manifest["moments"] = moments;
  nlohmann::json names = nlohmann::json::array();
  for (const Param& p : model.params.all()) names.push_back(p.name);
  manifest["params"] = std::move(names);

  for (std::size_t i = 0; i < model.params.count(); ++i) {
    const Param& p = model.params.all()[i];
    write_tensor(p.value, fs::path(dir) / (p.name + ".ltt"));
    if (moments) {
      write_tensor(opt.first_moments()[i], fs::path(dir) / (p.name + ".m.ltt"));
      write_tensor(opt.second_moments()[i], fs::path(dir) / (p.name + ".v.ltt"));
    }
  }

  std::ofstream out(fs::path(dir) / "checkpoint.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
  if (!out) throw Error("cannot write checkpoint manifest in " + dir);
}

Model load_checkpoint(const std::string& dir, Adam* opt) {
  std::ifstream in(fs::path(dir) / "checkpoint.json", std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", std::string()) != "lt-checkpoint-1")
    throw Error("unrecognized checkpoint format");

  Model model = make_model(model_config_from_json(manifest.at("config")));
  const nlohmann::json& names = manifest.at("params");
  if (names.size() != model.params.count())
    throw Error("checkpoint parameter list does not match the model");
  for (std::size_t i = 0; i < model.params.count(); ++i)
    if (names[i].get<std::string>() != model.params.all()[i].name)
      throw Error("checkpoint parameter order does not match the model");

  const bool moments = manifest.value("moments", false);
  if (opt) {
    opt->first_moments().clear();
    opt->second_moments().clear();
    opt->set_steps(manifest.value("step", static_cast<std::size_t>(0)));
  }
  for (Param& p : model.params.all()) {
    StoredTensor st = read_tensor(fs::path(dir) / (p.name + ".ltt"));
    if (st.data.shape() != p.value.shape())
      throw Error("checkpoint tensor shape mismatch: " + p.name);
    p.value = std::move(st.data);
    if (opt && moments) {
      opt->first_moments().push_back(read_tensor(fs::path(dir) / (p.name + ".m.ltt")).data);
      opt->second_moments().push_back(read_tensor(fs::path(dir) / (p.name + ".v.ltt")).data);
    }
  }
  return model;
}

}  // namespace lt
