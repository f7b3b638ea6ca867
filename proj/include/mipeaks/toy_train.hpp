#pragma once

// Next-token cross-entropy training by gradient descent with momentum.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "mipeaks/error.hpp"
#include "mipeaks/toy_model.hpp"
#include "mipeaks/toy_task.hpp"

namespace mipeaks::toy {

// A training sequence; positions >= first_target are predicted from the
// prefix before them.
struct Example {
  std::vector<TokenId> tokens;
  std::size_t first_target = 1;
};

inline Example to_example(const TaskInstance& inst) { return {inst.full(), inst.prompt.size()}; }

// Mean cross-entropy over every target position of the batch. When grad is
// non-empty it receives the gradient (overwritten, same layout as params).
inline double batch_loss(const ToyTransformer& m, std::span<const Example> batch, std::span<double> grad = {}) {
  const std::size_t V = m.config().vocab_size;
  std::size_t targets = 0;
  for (const auto& ex : batch) {
    if (ex.first_target < 1 || ex.first_target >= ex.tokens.size()) throw InvalidInput("bad example target range");
    targets += ex.tokens.size() - ex.first_target;
  }
  if (targets == 0) throw InvalidInput("batch has no target positions");
  const double inv = 1.0 / static_cast<double>(targets);
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  const auto order = plain_order(m.config());
  double loss = 0.0;
  for (const auto& ex : batch) {
    // The last token is never an input.
    std::span<const TokenId> input(ex.tokens.data(), ex.tokens.size() - 1);
    ForwardCache cache;
    const ForwardResult fr = forward_with_order(m, input, order, grad.empty() ? nullptr : &cache);
    MatrixD dlogits(input.size(), V, 0.0);
    for (std::size_t pos = ex.first_target - 1; pos < input.size(); ++pos) {
      const TokenId target = ex.tokens[pos + 1];
      const auto p = softmax(fr.logits.row(pos));
      loss -= std::log(p[target]) * inv;
      for (std::size_t v = 0; v < V; ++v) dlogits(pos, v) = p[v] * inv;
      dlogits(pos, target) -= inv;
    }
    if (!grad.empty()) backward(m, input, fr, cache, dlogits, grad);
  }
  return loss;
}

struct TrainOptions {
  std::size_t steps = 1500;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::uint64_t seed = 7;
  std::size_t monitor_size = 256;
};

struct TrainResult {
  ToyTransformer model;
  double initial_loss = 0.0;  // on the fixed monitor batch, before any update
  double final_loss = 0.0;    // on the same batch after the last update
  std::vector<double> batch_losses;
};

inline TrainResult train_toy(const ToyConfig& config, const TaskSpec& task, const TrainOptions& opt) {
  if (config.vocab_size < TaskSpec::kVocabSize) throw ConfigError("model vocabulary is smaller than the task's");
  if (task.sequence_length() > config.context + 1) throw ConfigError("task sequences exceed the model context");
  if (opt.batch_size < 1) throw ConfigError("batch size must be at least 1");
  ToyTransformer model = ToyTransformer::initialized(config);

  std::vector<Example> monitor;
  for (const auto& inst : sample_instances(task, opt.monitor_size, opt.seed ^ 0x9e3779b97f4a7c15ull)) {
    monitor.push_back(to_example(inst));
  }
  TrainResult result{model, 0.0, 0.0, {}};
  result.initial_loss = batch_loss(model, monitor);
  if (opt.steps == 0) {
    result.final_loss = result.initial_loss;
    return result;
  }

  std::mt19937_64 rng(opt.seed);
  std::vector<double> grad(model.params().size(), 0.0);
  std::vector<double> velocity(model.params().size(), 0.0);
  std::vector<Example> batch(opt.batch_size);
  for (std::size_t step = 0; step < opt.steps; ++step) {
    for (auto& ex : batch) ex = to_example(sample_instance(task, rng));
    const double loss = batch_loss(model, batch, grad);
    if (!std::isfinite(loss)) {
      throw TrainingDiverged(static_cast<std::int64_t>(step),
                             "training diverged at step " + std::to_string(step) + " (non-finite loss)");
    }
    result.batch_losses.push_back(loss);
    double scale = 1.0;
    if (opt.clip_norm > 0.0) {
      double sq = 0.0;
      for (double g : grad) sq += g * g;
      const double norm = std::sqrt(sq);
      if (norm > opt.clip_norm) scale = opt.clip_norm / norm;
    }
    // Cosine decay to 10% of the base rate.
    const double progress = static_cast<double>(step) / static_cast<double>(opt.steps);
    const double lr = opt.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity[i] = opt.momentum * velocity[i] + scale * grad[i];
      params[i] -= lr * velocity[i];
    }
  }
  result.final_loss = batch_loss(model, monitor);
  if (!std::isfinite(result.final_loss)) {
    throw TrainingDiverged(static_cast<std::int64_t>(opt.steps), "training diverged (non-finite final loss)");
  }
  result.model = std::move(model);
  return result;
}

}  // namespace mipeaks::toy
