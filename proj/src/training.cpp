#include "lt/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lt/ctc.hpp"
#include "lt/error.hpp"
#include "lt/rng.hpp"
#include "lt/serialize.hpp"

namespace lt {

std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu,%zu", r.step,
                r.epoch, r.loss, r.ctc, r.blank, r.nonblank, r.gated_frac, r.ter, r.ins, r.del,
                r.sub);
  return buf;
}

EvalResult evaluate(const Model& model, const std::vector<Utterance>& data) {
  EvalResult result;
  for (const Utterance& utt : data) {
    const TokenSeq hyp = decode_features(model, utt.features);
    const EditCounts e = edit_distance(utt.transcript, hyp);
    result.edits.ins += e.ins;
    result.edits.del += e.del;
    result.edits.sub += e.sub;
    result.ref_tokens += utt.transcript.size();
    ++result.utterances;
  }
  return result;
}

double alignment_sanity(const Model& model, const std::vector<Utterance>& data) {
  const std::size_t stride = model.config.encoder_stride;
  std::size_t total = 0;
  std::size_t inside = 0;
  for (const Utterance& utt : data) {
    const LogProbGrid grid = ctc_log_probs(model, utt.features);
    if (grid.frames() < ctc_min_frames(utt.transcript)) continue;
    const AlignResult ar =
        forced_align(grid, utt.transcript, model.config.blank, model.config.align_mode);
    const AlignmentSpans spans = ar.alignment.item_spans(0);
    for (std::size_t u = 0; u < spans.size(); ++u) {
      const std::size_t emit = spans[u].first;
      const std::size_t lo = utt.truth[u].first / stride;
      const std::size_t hi = utt.truth[u].last / stride;
      ++total;
      inside += emit >= lo && emit <= hi;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

TrainResult run_training(Model& model, Adam& opt, const std::vector<Utterance>& train,
                         const std::vector<Utterance>& dev, const TrainConfig& config) {
  if (train.empty()) throw Error("empty training set");
  if (config.batch_size == 0) throw Error("batch size must be positive");

  std::vector<Sample> samples;
  samples.reserve(train.size());
  for (const Utterance& utt : train) samples.push_back({utt.features, utt.transcript});

  std::ofstream metrics;
  if (!config.metrics_path.empty()) {
    metrics.open(config.metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw Error("cannot write metrics: " + config.metrics_path);
    metrics << kMetricsHeader << "\n";
  }

  Rng shuffle_rng(config.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const bool lightweight = model.config.criterion == Criterion::kLightweight;
  const std::size_t refresh = config.align_refresh;
  std::vector<AlignmentSpans> span_cache(train.size());
  std::vector<char> span_known(train.size(), 0);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs && !result.diverged; ++epoch) {
    if (config.shuffle)
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);

    MetricsRow row;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      std::vector<Sample> batch;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(samples[order[i]]);

      bool reuse =
          lightweight && refresh != 1 && (refresh == 0 || result.steps % refresh != 0);
      if (reuse)
        for (std::size_t i = lo; i < hi && reuse; ++i) reuse = span_known[order[i]];

      StepDiagnostics diag;
      if (reuse) {
        std::vector<AlignmentSpans> fixed;
        fixed.reserve(batch.size());
        for (std::size_t i = lo; i < hi; ++i) fixed.push_back(span_cache[order[i]]);
        diag = forward_backward_step(model, batch, kTermAll, config.threads, &fixed, nullptr);
      } else {
        std::vector<AlignmentSpans> got;
        diag = forward_backward_step(model, batch, kTermAll, config.threads, nullptr,
                                     lightweight ? &got : nullptr);
        if (lightweight)
          for (std::size_t i = lo; i < hi; ++i) {
            span_cache[order[i]] = got[i - lo];
            span_known[order[i]] = 1;
          }
      }
      opt.step(model.params);
      ++result.steps;
      ++batches;
      row.loss += diag.loss;
      row.ctc += diag.ctc;
      row.blank += diag.blank;
      row.nonblank += diag.nonblank;
      row.gated_frac += diag.gated_frac;
      if (!std::isfinite(diag.loss)) {
        result.diverged = true;
        break;
      }
    }

    const double inv = 1.0 / static_cast<double>(batches);
    row.loss *= inv;
    row.ctc *= inv;
    row.blank *= inv;
    row.nonblank *= inv;
    row.gated_frac *= inv;
    row.step = result.steps;
    row.epoch = epoch + 1;
    const EvalResult ev = evaluate(model, dev);
    row.ter = ev.ter();
    row.ins = ev.edits.ins;
    row.del = ev.edits.del;
    row.sub = ev.edits.sub;
    result.history.push_back(row);
    if (metrics.is_open()) metrics << format_metrics_row(row) << "\n";
  }

  if (metrics.is_open()) {
    metrics.flush();
    if (!metrics) throw Error("metrics write failed: " + config.metrics_path);
  }
  if (!config.checkpoint_dir.empty()) save_checkpoint(model, opt, config.checkpoint_dir);
  return result;
}

std::vector<ConcatRow> run_concat_eval(const Model& model, const std::vector<Utterance>& data,
                                       const std::vector<std::size_t>& cats,
                                       std::size_t gap_frames) {
  if (data.empty()) throw Error("empty evaluation set");
  const std::size_t F = data.front().features.dim(1);

  std::vector<ConcatRow> rows;
  rows.reserve(cats.size());
  for (const std::size_t cat : cats) {
    if (cat == 0) throw Error("cat must be positive");
    ConcatRow row;
    row.cat = cat;
    for (std::size_t lo = 0; lo + cat <= data.size(); lo += cat) {
      std::size_t total = gap_frames * (cat - 1);
      for (std::size_t k = 0; k < cat; ++k) total += data[lo + k].features.dim(0);
      Tensor features({total, F});
      TokenSeq ref;
      std::size_t t = 0;
      for (std::size_t k = 0; k < cat; ++k) {
        const Utterance& utt = data[lo + k];
        if (utt.features.dim(1) != F) throw Error("feature dim mismatch in evaluation set");
        const std::size_t frames = utt.features.dim(0);
        std::copy(utt.features.data(), utt.features.data() + frames * F,
                  features.data() + t * F);
        t += frames + (k + 1 < cat ? gap_frames : 0);
        ref.insert(ref.end(), utt.transcript.begin(), utt.transcript.end());
      }
      const TokenSeq hyp = decode_features(model, features);
      const EditCounts e = edit_distance(ref, hyp);
      row.edits.ins += e.ins;
      row.edits.del += e.del;
      row.edits.sub += e.sub;
      row.ref_tokens += ref.size();
      ++row.items;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lt
