#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "mipeaks/model_io.hpp"
#include "mipeaks/toy_experiments.hpp"
#include "mipeaks/toy_generate.hpp"
#include "mipeaks/toy_task.hpp"
#include "mipeaks/toy_train.hpp"

using namespace mipeaks;
using namespace mipeaks::toy;

namespace {

// Zero weights plus a head bias: every position emits the same logits.
ToyTransformer constant_model(TokenId favourite, TokenId runner_up) {
  ToyConfig c;
  c.model_dim = 8;
  c.context = 32;
  ToyTransformer m(c);
  auto b = m.param(m.layout().b_out, c.vocab_size);
  b[favourite] = 2.0;
  b[runner_up] = 1.0;
  return m;
}

std::string render(const std::vector<TokenId>& s) {
  std::string out;
  for (TokenId t : s) out += (out.empty() ? "" : " ") + token_name(t);
  return out;
}

}  // namespace

TEST(Task, ChainAddInstances) {
  const auto two = make_task("chain-add", 2);
  EXPECT_EQ(render(make_instance(two, std::vector<TokenId>{3, 4}).full()), "3 4 THINK 7 ANS 7 END");
  const auto three = make_task("chain-add", 3);
  const auto nines = make_instance(three, std::vector<TokenId>{9, 9, 9});
  EXPECT_EQ(render(nines.full()), "9 9 9 THINK 8 THINK 7 ANS 7 END");
  EXPECT_EQ(nines.answer, 7u);
  EXPECT_EQ(nines.gold, std::vector<TokenId>{7});
  const auto one = make_task("chain-add", 1);
  EXPECT_EQ(render(make_instance(one, std::vector<TokenId>{5}).full()), "5 ANS 5 END");
  EXPECT_EQ(three.sequence_length(), nines.full().size());
}

TEST(Task, DeterministicSampling) {
  const auto task = make_task("chain-add", 4);
  const auto a = sample_instances(task, 20, 9);
  const auto b = sample_instances(task, 20, 9);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].full(), b[i].full());
  EXPECT_THROW(make_task("copy"), ConfigError);
}

TEST(Task, AnswerReadAfterLastAns) {
  const auto inst = make_instance(make_task("chain-add", 2), std::vector<TokenId>{3, 4});
  EXPECT_TRUE(answer_correct(inst, std::vector<TokenId>{10, 7, 11, 7, 12}));
  EXPECT_TRUE(answer_correct(inst, std::vector<TokenId>{11, 2, 10, 11, 7}));
  EXPECT_FALSE(answer_correct(inst, std::vector<TokenId>{10, 7, 11}));
  EXPECT_FALSE(answer_correct(inst, std::vector<TokenId>{10, 7}));
}

TEST(Generate, BudgetAccounting) {
  const auto m = constant_model(9, 4);
  InterventionConfig c;
  c.token_budget = 5;
  const auto s = generate(m, std::vector<TokenId>{1, 2}, c);
  EXPECT_EQ(s.generated, std::vector<TokenId>(5, 9));
  EXPECT_EQ(s.representations.size(), 5u);
  EXPECT_FALSE(s.halted);
}

TEST(Generate, SuppressionRemovesToken) {
  const auto m = constant_model(9, 4);
  InterventionConfig c;
  c.token_budget = 5;
  c.suppress_set = {9};
  const auto s = generate(m, std::vector<TokenId>{1, 2}, c);
  EXPECT_EQ(std::count(s.generated.begin(), s.generated.end(), 9u), 0);
  EXPECT_EQ(s.generated, std::vector<TokenId>(5, 4));
}

TEST(Generate, StopsAtEndToken) {
  const auto m = constant_model(TaskSpec::kEnd, 4);
  InterventionConfig c;
  c.end_token = TaskSpec::kEnd;
  const auto s = generate(m, std::vector<TokenId>{1}, c);
  EXPECT_EQ(s.generated, std::vector<TokenId>{TaskSpec::kEnd});
  EXPECT_TRUE(s.halted);
}

TEST(Generate, ContextLimit) {
  const auto m = constant_model(9, 4);
  InterventionConfig c;
  c.token_budget = 100;
  const auto s = generate(m, std::vector<TokenId>(30, 1), c);
  EXPECT_EQ(s.generated.size(), 2u);
  EXPECT_TRUE(s.context_exhausted);
}

TEST(Generate, RecyclingFiresAfterTrigger) {
  ToyConfig cfg;
  cfg.model_dim = 16;
  cfg.seed = 4;
  const auto m = ToyTransformer::initialized(cfg);
  InterventionConfig plain;
  plain.token_budget = 12;
  const std::vector<TokenId> prompt{3, 1, 4};
  const auto base = generate(m, prompt, plain);
  // Use whatever the model emits first as the trigger so recycling must fire.
  InterventionConfig rr = plain;
  rr.rr_enabled = true;
  rr.rr_layer = 0;
  rr.rr_trigger_set = {base.generated.front()};
  const auto s = generate(m, prompt, rr);
  ASSERT_FALSE(s.recycled_steps.empty());
  EXPECT_EQ(s.recycled_steps.front(), 1u);
  EXPECT_NE(s.representations[1], base.representations[1]);
  EXPECT_EQ(s.representations[0], base.representations[0]);
  EXPECT_EQ(generate(m, prompt, rr).generated, s.generated);
}

TEST(Generate, InvalidConfigs) {
  const auto m = constant_model(9, 4);
  InterventionConfig c;
  c.token_budget = 0;
  EXPECT_THROW(generate(m, std::vector<TokenId>{1}, c), ConfigError);
  c.token_budget = 3;
  c.rr_enabled = true;
  c.rr_layer = 5;
  EXPECT_THROW(generate(m, std::vector<TokenId>{1}, c), ConfigError);
  c.rr_enabled = false;
  c.ttts_enabled = true;
  c.ttts_token = 10;
  c.suppress_set = {10};
  EXPECT_THROW(generate(m, std::vector<TokenId>{1}, c), ConfigError);
}

TEST(Ttts, ImmediateHaltIsForcedToThink) {
  const auto m = constant_model(TaskSpec::kEnd, 4);
  InterventionConfig c;
  c.end_token = TaskSpec::kEnd;
  c.ttts_token = TaskSpec::kThink;
  const std::vector<std::size_t> budgets{4};
  const auto out = ttts_generate(m, std::vector<TokenId>{1}, c, budgets);
  ASSERT_EQ(out.size(), 1u);
  const auto& s = out.front();
  ASSERT_FALSE(s.generated.empty());
  EXPECT_EQ(s.generated.front(), TaskSpec::kThink);
  EXPECT_LE(s.generated.size(), 4u);
  for (std::size_t p : s.forced_positions) EXPECT_EQ(s.generated[p], TaskSpec::kThink);
}

TEST(Ttts, NeverHaltingModelMatchesPlain) {
  const auto m = constant_model(9, 4);
  InterventionConfig c;
  c.end_token = TaskSpec::kEnd;
  c.ttts_token = TaskSpec::kThink;
  const std::vector<std::size_t> budgets{8, 16};
  const auto out = ttts_generate(m, std::vector<TokenId>{1}, c, budgets);
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    c.token_budget = budgets[i];
    c.ttts_enabled = false;
    EXPECT_EQ(out[i].generated, generate(m, std::vector<TokenId>{1}, c).generated);
    EXPECT_TRUE(out[i].forced_positions.empty());
  }
}

TEST(Ttts, ScheduleMustAscend) {
  const auto m = constant_model(9, 4);
  const std::vector<std::size_t> budgets{8, 4};
  EXPECT_THROW(ttts_generate(m, std::vector<TokenId>{1}, InterventionConfig{}, budgets), ConfigError);
}

TEST(Train, ZeroStepsReturnsInitialisation) {
  ToyConfig cfg;
  cfg.model_dim = 16;
  TrainOptions o;
  o.steps = 0;
  const auto r = train_toy(cfg, make_task("chain-add"), o);
  EXPECT_EQ(r.model, ToyTransformer::initialized(cfg));
  EXPECT_EQ(r.initial_loss, r.final_loss);
}

TEST(Train, LossDropsAndIsDeterministic) {
  ToyConfig cfg;
  cfg.model_dim = 16;
  TrainOptions o;
  o.steps = 200;
  o.batch_size = 16;
  const auto task = make_task("chain-add");
  const auto a = train_toy(cfg, task, o);
  EXPECT_LT(a.final_loss, a.initial_loss);
  EXPECT_EQ(a.batch_losses.size(), 200u);
  o.steps = 20;
  const auto b = train_toy(cfg, task, o);
  const auto c = train_toy(cfg, task, o);
  EXPECT_EQ(b.model, c.model);
}

TEST(Train, DivergenceReportsStep) {
  ToyConfig cfg;
  cfg.model_dim = 8;
  TrainOptions o;
  o.steps = 50;
  o.learning_rate = 1e300;
  o.clip_norm = 0.0;
  try {
    train_toy(cfg, make_task("chain-add"), o);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_GE(e.step(), 0);
  }
}

TEST(Weights, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "mipeaks_weights_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ToyConfig cfg;
  cfg.model_dim = 16;
  cfg.layers = 3;
  const auto m = ToyTransformer::initialized(cfg);
  const auto bytes = io::save_weights(m, dir / "w.mitw");
  EXPECT_EQ(bytes, std::filesystem::file_size(dir / "w.mitw"));
  EXPECT_TRUE(std::filesystem::exists(dir / "w.json"));
  const auto back = io::load_weights(dir / "w.mitw");
  EXPECT_EQ(back.config().layers, 3u);
  // Stored as 32-bit floats.
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(back.params()[i], static_cast<double>(static_cast<float>(m.params()[i])));
  }
  auto raw = io::read_file_bytes(dir / "w.mitw");
  raw[20] ^= 0x10;
  io::write_file_bytes(dir / "w.mitw", raw);
  EXPECT_THROW(io::load_weights(dir / "w.mitw"), ChecksumMismatch);
}

TEST(Experiments, RowsCoverEveryArm) {
  ToyConfig cfg;
  cfg.model_dim = 16;
  TrainOptions o;
  o.steps = 100;
  const auto task = make_task("chain-add");
  const auto model = train_toy(cfg, task, o).model;
  const auto eval = sample_instances(task, 12, 5);
  KernelConfig kernel;
  kernel.mode = BandwidthMode::median_heuristic;
  const auto ranking = rank_thinking_tokens(model, task, eval, kernel);
  ASSERT_FALSE(ranking.ranking.empty());
  EXPECT_EQ(ranking.ranking.front(), TaskSpec::kThink);
  for (TokenId t : ranking.ranking) EXPECT_LT(t, TaskSpec::kAns);
  const std::vector<std::size_t> top_n{1, 2};
  const auto rows = suppression_experiment(model, task, eval, ranking.ranking, top_n, 3, 1);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.thinking_set.size(), r.n);
    EXPECT_EQ(r.random_sets.size(), 3u);
    for (const auto& s : r.random_sets) {
      EXPECT_EQ(s.size(), r.n);
      for (TokenId t : s) EXPECT_LT(t, 10u);
    }
  }
  const std::vector<std::size_t> budgets{4, 8};
  for (const auto& r : ttts_experiment(model, task, eval, budgets)) {
    EXPECT_LE(r.plain.max_length, r.budget);
    EXPECT_LE(r.ttts.max_length, r.budget);
  }
  const auto rr = recycling_experiment(model, task, eval, 1);
  EXPECT_GE(rr.rr_accuracy, 0.0);
  EXPECT_LE(rr.rr_accuracy, 1.0);
}
