#pragma once

// Desk-scale intervention experiments on the chain-add task: suppression of
// thinking markers vs. random tokens, representation recycling, and
// thinking-token test-time scaling.

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "mipeaks/hsic.hpp"
#include "mipeaks/toy_generate.hpp"
#include "mipeaks/toy_model.hpp"
#include "mipeaks/toy_task.hpp"
#include "mipeaks/trace.hpp"
#include "mipeaks/trajectory.hpp"

namespace mipeaks::toy {

inline InterventionConfig task_defaults(const TaskSpec& task) {
  InterventionConfig c;
  c.end_token = TaskSpec::kEnd;
  c.token_budget = task.sequence_length() - task.chain_length;
  c.ttts_token = TaskSpec::kThink;
  c.rr_trigger_set = {TaskSpec::kThink};
  return c;
}

struct AccuracyResult {
  double accuracy = 0.0;
  double mean_length = 0.0;
  std::size_t max_length = 0;
  std::size_t forced_tokens = 0;
};

inline AccuracyResult evaluate(const ToyTransformer& model, std::span<const TaskInstance> instances,
                               const InterventionConfig& config) {
  AccuracyResult r;
  if (instances.empty()) return r;
  std::size_t correct = 0;
  std::size_t total_len = 0;
  for (const auto& inst : instances) {
    const auto s = generate(model, inst.prompt, config);
    correct += answer_correct(inst, s.generated) ? 1 : 0;
    total_len += s.generated.size();
    r.max_length = std::max(r.max_length, s.generated.size());
    r.forced_tokens += s.forced_positions.size();
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(instances.size());
  r.mean_length = static_cast<double>(total_len) / static_cast<double>(instances.size());
  return r;
}

// Hidden-state trace of a generation. The gold rows are the last-layer
// representations of the gold answer tokens fed on their own.
inline RepresentationTrace generation_trace(const ToyTransformer& model, const GenerationSession& s,
                                            std::span<const TokenId> gold_tokens) {
  const std::size_t d = model.config().model_dim;
  RepresentationTrace t;
  t.vocab_size = static_cast<std::uint32_t>(model.config().vocab_size);
  MatrixF steps(s.representations.size(), d);
  for (std::size_t i = 0; i < s.representations.size(); ++i) {
    for (std::size_t e = 0; e < d; ++e) steps(i, e) = static_cast<float>(s.representations[i][e]);
  }
  const ForwardResult gold = forward(model, gold_tokens);
  MatrixF g(gold.final.rows(), d);
  for (std::size_t i = 0; i < gold.final.rows(); ++i) {
    for (std::size_t e = 0; e < d; ++e) g(i, e) = static_cast<float>(gold.final(i, e));
  }
  t.steps = std::move(steps);
  t.gold = std::move(g);
  t.token_ids = std::vector<std::uint32_t>(s.generated.begin(), s.generated.end());
  std::vector<std::string> names;
  for (std::uint32_t id = 0; id < model.config().vocab_size; ++id) names.push_back(token_name(id));
  t.token_strings = std::move(names);
  return t;
}

struct ThinkingRanking {
  std::vector<TokenId> ranking;  // THINK first, then MI-peak tokens by frequency, then remaining digits
  std::vector<TokenFrequency> histogram;
  MiSequence mi;
  PeakReport peaks;
};

// Runs the MI-peak pipeline on the model's own generations and ranks the
// candidate thinking tokens. Structural markers (ANS, END, PAD) are never
// candidates.
inline ThinkingRanking rank_thinking_tokens(const ToyTransformer& model, const TaskSpec& task,
                                            std::span<const TaskInstance> instances, const KernelConfig& kernel,
                                            const PeakConfig& peak_config = {}) {
  const InterventionConfig plain = task_defaults(task);
  std::vector<RepresentationTrace> traces;
  traces.reserve(instances.size());
  for (const auto& inst : instances) {
    const auto s = generate(model, inst.prompt, plain);
    traces.push_back(generation_trace(model, s, inst.gold));
  }
  ThinkingRanking r;
  r.mi = mi_trajectory(traces, kernel, MiMode::batch_anchored);
  r.peaks = detect_peaks(r.mi.values, peak_config);
  std::vector<PeakReport> reports(traces.size(), r.peaks);
  // Peaks index steps; traces shorter than the sequence simply lack them.
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto& idx = reports[i].indices;
    idx.erase(std::remove_if(idx.begin(), idx.end(), [&](std::size_t t) { return t >= traces[i].length(); }),
              idx.end());
  }
  r.histogram = peak_token_histogram(traces, reports, model.config().vocab_size);
  auto push = [&](TokenId t) {
    if (t == TaskSpec::kAns || t == TaskSpec::kEnd || t == TaskSpec::kPad) return;
    if (std::find(r.ranking.begin(), r.ranking.end(), t) == r.ranking.end()) r.ranking.push_back(t);
  };
  push(TaskSpec::kThink);
  for (const auto& row : r.histogram) push(row.token_id);
  for (TokenId d = 0; d < 10; ++d) push(d);
  return r;
}

struct SuppressionRow {
  std::size_t n = 0;
  double thinking_accuracy = 0.0;
  double random_accuracy = 0.0;  // mean over the random draws
  std::vector<TokenId> thinking_set;
  std::vector<std::vector<TokenId>> random_sets;
};

// For each N: suppress the top-N ranked thinking tokens vs. N random digit
// tokens (averaged over `draws` seeded draws).
inline std::vector<SuppressionRow> suppression_experiment(const ToyTransformer& model, const TaskSpec& task,
                                                          std::span<const TaskInstance> instances,
                                                          std::span<const TokenId> ranking,
                                                          std::span<const std::size_t> top_n, std::size_t draws,
                                                          std::uint64_t seed) {
  std::vector<SuppressionRow> rows;
  std::mt19937_64 rng(seed);
  for (std::size_t n : top_n) {
    if (n > ranking.size() || n > 9) throw ConfigError("top-n " + std::to_string(n) + " is too large");
    SuppressionRow row;
    row.n = n;
    InterventionConfig c = task_defaults(task);
    row.thinking_set.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n));
    c.suppress_set = row.thinking_set;
    row.thinking_accuracy = evaluate(model, instances, c).accuracy;
    double acc = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
      std::vector<TokenId> digits(10);
      for (TokenId dgt = 0; dgt < 10; ++dgt) digits[dgt] = dgt;
      std::shuffle(digits.begin(), digits.end(), rng);
      digits.resize(n);
      std::sort(digits.begin(), digits.end());
      c.suppress_set = digits;
      acc += evaluate(model, instances, c).accuracy;
      row.random_sets.push_back(std::move(digits));
    }
    row.random_accuracy = draws ? acc / static_cast<double>(draws) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct RecyclingResult {
  std::size_t layer = 0;
  double baseline_accuracy = 0.0;
  double rr_accuracy = 0.0;
};

inline RecyclingResult recycling_experiment(const ToyTransformer& model, const TaskSpec& task,
                                            std::span<const TaskInstance> instances, std::size_t layer) {
  InterventionConfig c = task_defaults(task);
  RecyclingResult r;
  r.layer = layer;
  r.baseline_accuracy = evaluate(model, instances, c).accuracy;
  c.rr_enabled = true;
  c.rr_layer = layer;
  r.rr_accuracy = evaluate(model, instances, c).accuracy;
  return r;
}

struct BudgetRow {
  std::size_t budget = 0;
  AccuracyResult plain;
  AccuracyResult ttts;
};

inline std::vector<BudgetRow> ttts_experiment(const ToyTransformer& model, const TaskSpec& task,
                                              std::span<const TaskInstance> instances,
                                              std::span<const std::size_t> budgets) {
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] < budgets[i - 1]) throw ConfigError("budget schedule must be ascending");
  }
  std::vector<BudgetRow> rows;
  for (std::size_t b : budgets) {
    InterventionConfig c = task_defaults(task);
    c.token_budget = b;
    BudgetRow row;
    row.budget = b;
    row.plain = evaluate(model, instances, c);
    c.ttts_enabled = true;
    row.ttts = evaluate(model, instances, c);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mipeaks::toy
