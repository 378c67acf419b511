#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "affinecrack/corpus.hpp"
#include "affinecrack/errors.hpp"
#include "affinecrack/network.hpp"
#include "affinecrack/rng.hpp"
#include "affinecrack/tensor.hpp"

namespace affinecrack {

struct AdamState {
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  ModelParams m;
  ModelParams v;
};

inline AdamState make_adam_state(const ModelConfig& cfg, double lr = 1e-3, double beta1 = 0.9,
                                 double beta2 = 0.999, double eps = 1e-8) {
  AdamState state;
  state.lr = lr;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.eps = eps;
  state.m = make_param_shapes(cfg);
  state.v = make_param_shapes(cfg);
  return state;
}

// One Adam update with bias correction:
//   m' = b1 m + (1-b1) g,  v' = b2 v + (1-b2) g^2,  t' = t+1
//   theta' = theta - lr * (m'/(1-b1^t')) / (sqrt(v'/(1-b2^t')) + eps)
inline void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state) {
  std::vector<Matrix*> ps, ms, vs;
  std::vector<const Matrix*> gs;
  visit_params(params, [&](const char*, Matrix& x) { ps.push_back(&x); });
  visit_params(const_cast<ParamGrads&>(grads), [&](const char*, Matrix& x) { gs.push_back(&x); });
  visit_params(state.m, [&](const char*, Matrix& x) { ms.push_back(&x); });
  visit_params(state.v, [&](const char*, Matrix& x) { vs.push_back(&x); });

  state.step += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t a = 0; a < ps.size(); ++a) {
    if (!ps[a]->same_shape(*gs[a]) || !ps[a]->same_shape(*ms[a])) {
      throw ShapeError("adam_step: parameter/gradient/state shapes disagree");
    }
    double* p = ps[a]->data.data();
    const double* g = gs[a]->data.data();
    double* m = ms[a]->data.data();
    double* v = vs[a]->data.data();
    const std::size_t n = ps[a]->size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("adam_step: non-finite gradient");
      }
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

struct TrainConfig {
  std::uint32_t epochs = 30;
  std::uint32_t batch_size = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;
  bool best_val = false;  // keep best-validation weights instead of final-epoch
};

inline void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs == 0 || cfg.batch_size == 0) {
    throw ConfigError("epochs and batch_size must be positive");
  }
  if (!(cfg.lr > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
}

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  ModelConfig model;
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double total_seconds = 0.0;
};

namespace detail {

// Gathers samples[indices[begin..end)] into a contiguous token buffer plus
// frequency and label arrays.
struct Batch {
  std::vector<std::uint8_t> tokens;
  Matrix freqs;
  std::vector<std::uint16_t> labels;
};

inline Batch make_batch(std::span<const Sample> samples, std::span<const std::uint32_t> indices,
                        std::uint32_t seq_len) {
  Batch b;
  b.tokens.resize(indices.size() * seq_len);
  b.freqs = Matrix(indices.size(), kAlphabetSize);
  b.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Sample& s = samples[indices[i]];
    if (s.ciphertext.size() != seq_len) {
      throw ShapeError("sample length differs from model seq_len");
    }
    std::copy(s.ciphertext.begin(), s.ciphertext.end(), b.tokens.begin() + static_cast<std::ptrdiff_t>(i * seq_len));
    const auto freq = letter_frequencies(s.ciphertext);
    std::copy(freq.begin(), freq.end(), b.freqs.row(i));
    b.labels[i] = s.key_index;
  }
  return b;
}

}  // namespace detail

// Loss and accuracy over a partition without parameter updates.
inline std::pair<double, double> evaluate(const ModelParams& params, const ModelConfig& cfg,
                                          std::span<const Sample> partition,
                                          std::uint32_t batch_size = 256) {
  if (partition.empty()) {
    throw EmptyDataError("evaluate: empty partition");
  }
  std::vector<std::uint32_t> indices(partition.size());
  std::iota(indices.begin(), indices.end(), 0u);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < indices.size(); at += batch_size) {
    const std::size_t take = std::min<std::size_t>(batch_size, indices.size() - at);
    const auto batch = detail::make_batch(partition, std::span(indices).subspan(at, take), cfg.seq_len);
    auto [logits, cache] = forward(params, cfg, batch.tokens, batch.freqs);
    const auto lg = softmax_cross_entropy(logits, batch.labels);
    loss_sum += lg.loss * static_cast<double>(take);
    const auto preds = predict_from_logits(logits);
    for (std::size_t i = 0; i < take; ++i) {
      correct += preds[i] == batch.labels[i];
    }
  }
  const double n = static_cast<double>(partition.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

// One pass over the partition in shuffled mini-batches; the final short batch
// is included and weighted by its true size.
inline std::pair<double, double> run_epoch(ModelParams& params, AdamState& state,
                                           std::span<const Sample> partition,
                                           const ModelConfig& mcfg, const TrainConfig& tcfg,
                                           Rng& rng) {
  if (partition.empty()) {
    throw EmptyDataError("run_epoch: empty partition");
  }
  std::vector<std::uint32_t> order(partition.size());
  std::iota(order.begin(), order.end(), 0u);
  if (tcfg.shuffle_each_epoch) {
    rng.shuffle(order);
  }
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < order.size(); at += tcfg.batch_size) {
    const std::size_t take = std::min<std::size_t>(tcfg.batch_size, order.size() - at);
    const auto batch = detail::make_batch(partition, std::span(order).subspan(at, take), mcfg.seq_len);
    auto [logits, cache] = forward(params, mcfg, batch.tokens, batch.freqs);
    const auto lg = softmax_cross_entropy(logits, batch.labels);
    loss_sum += lg.loss * static_cast<double>(take);
    const auto preds = predict_from_logits(logits);
    for (std::size_t i = 0; i < take; ++i) {
      correct += preds[i] == batch.labels[i];
    }
    const ParamGrads grads = backward(params, mcfg, cache, lg.dlogits);
    adam_step(params, grads, state);
  }
  const double n = static_cast<double>(partition.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

// Full training run: epochs over train, validation after every epoch, test
// exactly once at the end. Returns final-epoch parameters unless
// tcfg.best_val asked for the best-validation snapshot.
inline std::pair<ModelParams, TrainReport> train(
    const SplitDataset& dataset, const ModelConfig& mcfg, const TrainConfig& tcfg,
    const std::function<void(const EpochRecord&)>& on_epoch = nullptr) {
  validate_config(mcfg);
  validate_config(tcfg);
  if (dataset.config.seq_len != mcfg.seq_len) {
    throw ConfigError("dataset seq_len " + std::to_string(dataset.config.seq_len) +
                      " != model seq_len " + std::to_string(mcfg.seq_len));
  }
  if (dataset.train.empty() || dataset.validation.empty() || dataset.test.empty()) {
    throw EmptyDataError("train: every partition must be non-empty");
  }

  const auto t_start = std::chrono::steady_clock::now();
  Rng rng(tcfg.seed);
  ModelParams params = init_params(mcfg, rng);
  AdamState state = make_adam_state(mcfg, tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps);

  TrainReport report;
  report.model = mcfg;
  report.config = tcfg;
  report.epochs.reserve(tcfg.epochs);

  ModelParams best_params = params;
  double best_val_acc = -1.0;
  for (std::uint32_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    const auto [train_loss, train_acc] = run_epoch(params, state, dataset.train, mcfg, tcfg, rng);
    const auto [val_loss, val_acc] = evaluate(params, mcfg, dataset.validation);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.train_acc = train_acc;
    rec.val_loss = val_loss;
    rec.val_acc = val_acc;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    report.epochs.push_back(rec);
    if (on_epoch) {
      on_epoch(rec);
    }
    if (tcfg.best_val && val_acc > best_val_acc) {
      best_val_acc = val_acc;
      best_params = params;
    }
  }
  if (tcfg.best_val) {
    params = std::move(best_params);
  }

  const auto [test_loss, test_acc] = evaluate(params, mcfg, dataset.test);
  report.test_loss = test_loss;
  report.test_accuracy = test_acc;
  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(params), std::move(report)};
}

// 6 significant digits, the learning-curve CSV number format.
inline std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline constexpr const char* kCurvesCsvHeader = "epoch,train_loss,train_acc,val_loss,val_acc";

inline std::string curves_csv_row(const EpochRecord& rec) {
  return std::to_string(rec.epoch) + "," + format_g6(rec.train_loss) + "," +
         format_g6(rec.train_acc) + "," + format_g6(rec.val_loss) + "," + format_g6(rec.val_acc);
}

inline void write_curves_csv(const std::vector<EpochRecord>& records, std::ostream& out) {
  out << kCurvesCsvHeader << '\n';
  for (const EpochRecord& rec : records) {
    out << curves_csv_row(rec) << '\n';
  }
}

inline nlohmann::ordered_json report_to_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["model"] = {{"seq_len", report.model.seq_len},
                {"embed_dim", report.model.embed_dim},
                {"hidden_dim", report.model.hidden_dim},
                {"vocab_size", report.model.vocab_size},
                {"num_classes", report.model.num_classes}};
  j["train"] = {{"epochs", report.config.epochs},
                {"batch_size", report.config.batch_size},
                {"lr", report.config.lr},
                {"beta1", report.config.beta1},
                {"beta2", report.config.beta2},
                {"eps", report.config.eps},
                {"seed", report.config.seed},
                {"shuffle_each_epoch", report.config.shuffle_each_epoch},
                {"best_val", report.config.best_val}};
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const EpochRecord& rec : report.epochs) {
    epochs.push_back({{"epoch", rec.epoch},
                      {"train_loss", rec.train_loss},
                      {"train_acc", rec.train_acc},
                      {"val_loss", rec.val_loss},
                      {"val_acc", rec.val_acc},
                      {"seconds", rec.seconds}});
  }
  j["epochs"] = epochs;
  j["test_loss"] = report.test_loss;
  j["test_accuracy"] = report.test_accuracy;
  j["total_seconds"] = report.total_seconds;
  return j;
}

}  // namespace affinecrack
