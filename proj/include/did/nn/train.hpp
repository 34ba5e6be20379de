#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "did/errors.hpp"
#include "did/nn/model.hpp"
#include "did/rng.hpp"

namespace did::nn {

/// A labeled matrix viewed as flat row-major floats.
struct Sample {
  std::span<const float> values;
  int label = 0;
};

/// Mean categorical cross-entropy over the batch, gradients accumulated by
/// backpropagation through time into model.grads(). Train-mode forward
/// (dropout active).
template <typename T>
double loss_and_grads(Model<T>& model, std::span<const Sample> batch) {
  if (batch.empty()) throw Error("empty batch");
  const std::size_t n_classes = model.config().n_classes;
  model.zero_grads();
  double loss = 0;
  ForwardCache<T> cache;
  std::vector<T> dlogits(n_classes);
  for (const Sample& s : batch) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_classes)
      throw LabelOutOfRange("label " + std::to_string(s.label));
    auto probs = model.forward_cached(s.values, Mode::Train, cache);
    double p = static_cast<double>(probs[static_cast<std::size_t>(s.label)]);
    loss += -std::log(std::max(p, 1e-30));
    for (std::size_t k = 0; k < n_classes; ++k) dlogits[k] = probs[k];
    dlogits[static_cast<std::size_t>(s.label)] -= T(1);
    model.backward(cache, dlogits);
  }
  loss /= static_cast<double>(batch.size());
  model.scale_grads(T(1) / static_cast<T>(batch.size()));
  if (!std::isfinite(loss)) throw NaNLoss("non-finite loss");
  for (const T& g : model.grads())
    if (!std::isfinite(static_cast<double>(g)))
      throw NaNLoss("non-finite gradient");
  return loss;
}

/// Mean cross-entropy in inference mode (no dropout, no gradients).
template <typename T>
double dataset_loss(Model<T>& model, std::span<const Sample> samples) {
  double loss = 0;
  for (const Sample& s : samples) {
    auto probs = model.forward(s.values, Mode::Infer);
    double p = static_cast<double>(probs[static_cast<std::size_t>(s.label)]);
    loss += -std::log(std::max(p, 1e-30));
  }
  return samples.empty() ? 0.0 : loss / static_cast<double>(samples.size());
}

struct EpochStats {
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;  // one entry per completed epoch
  std::size_t best_epoch = 0;       // 1-based
  double best_val_loss = std::numeric_limits<double>::infinity();
};

/// Minibatch training with per-epoch seeded shuffling, early stopping on
/// validation loss, and restoration of the best-validation parameters
/// (including optimizer state).
template <typename T>
TrainResult train(Model<T>& model, std::span<const Sample> train_set,
                  std::span<const Sample> val_set) {
  if (train_set.empty()) throw Error("empty training set");
  const ModelConfig& cfg = model.config();

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<T> best_params, best_m, best_v;
  std::size_t best_step = 0;
  std::size_t since_best = 0;

  std::vector<Sample> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng::shuffle(order, model.rng());
    double epoch_loss = 0;
    std::size_t n_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = at; i < std::min(at + cfg.batch_size, order.size());
           ++i)
        batch.push_back(train_set[order[i]]);
      epoch_loss += loss_and_grads(model, batch);
      model.adam_step();
      ++n_batches;
    }
    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(n_batches);
    stats.val_loss = dataset_loss(model, val_set);
    result.history.push_back(stats);

    if (val_set.empty() || stats.val_loss < result.best_val_loss) {
      result.best_val_loss = stats.val_loss;
      result.best_epoch = epoch;
      best_params = model.params().data;
      best_m = model.adam_m();
      best_v = model.adam_v();
      best_step = model.step();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  if (!best_params.empty()) {
    model.params().data = std::move(best_params);
    model.adam_m() = std::move(best_m);
    model.adam_v() = std::move(best_v);
    model.step() = best_step;
  }
  return result;
}

/// Argmax prediction in inference mode.
template <typename T>
int predict(Model<T>& model, std::span<const float> matrix) {
  auto probs = model.forward(matrix, Mode::Infer);
  return static_cast<int>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace did::nn
