// mipeaks: MI-trajectory analysis, bound verification and toy-model
// interventions from the command line.

#include <iostream>

#include "commands.hpp"

using namespace mipeaks::cli;

namespace {

void add_toy_common(CLI::App* sub, ToyArgs& a) {
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--weights", a.weights, "Load a trained MITW weights file instead of training");
  sub->add_option("--seed", a.seed, "Seed for initialisation, data and evaluation (default: $MIPEAKS_SEED or 1)");
  sub->add_option("--dim", a.dim, "Model dimension")->capture_default_str();
  sub->add_option("--layers", a.layers, "Number of transformer blocks")->capture_default_str();
  sub->add_option("--heads", a.heads, "Attention heads")->capture_default_str();
  sub->add_option("--context", a.context, "Context length")->capture_default_str();
  sub->add_option("--chain", a.chain, "Chain-add prompt length k")->capture_default_str();
  sub->add_option("--steps", a.steps, "Training steps")->capture_default_str();
  sub->add_option("--lr", a.lr, "Learning rate")->capture_default_str();
  sub->add_option("--momentum", a.momentum, "Momentum")->capture_default_str();
  sub->add_option("--batch", a.batch, "Batch size")->capture_default_str();
}

void add_eval(CLI::App* sub, ToyArgs& a) {
  sub->add_option("--eval-count", a.eval_count, "Number of evaluation prompts")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mipeaks: mutual-information peaks in reasoning traces"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "MI trajectories, peak reports and CSVs from MITC traces");
  an->add_option("traces", analyze.inputs, "MITC trace files")->required();
  an->add_option("--mode", analyze.mode, "batch | single")
      ->check(CLI::IsMember({"batch", "single"}))
      ->capture_default_str();
  an->add_option("--sigma", analyze.sigma, "auto (grid search) | median | <positive value>")->capture_default_str();
  an->add_option("--tau", analyze.tau, "Peak threshold scale")->capture_default_str();
  an->add_option("--out", analyze.out, "Output directory")->required();
  an->add_option("--window", analyze.window, "Window length for single mode")->capture_default_str();
  an->add_option("--n-min", analyze.n_min, "Minimum contributing traces per step in batch mode")
      ->capture_default_str();
  an->add_option("--pooling", analyze.pooling, "Override gold pooling: last_token | mean")
      ->check(CLI::IsMember({"last_token", "mean"}));
  an->add_option("--top-k", analyze.top_k, "Rows in the peak-token histogram")->capture_default_str();
  an->add_option("--threads", analyze.threads, "Worker threads for per-step HSIC")->capture_default_str();

  BoundsArgs bounds;
  bounds.seed = default_seed(42);
  auto* bd = app.add_subcommand("bounds", "Error-bound verification");
  bd->require_subcommand(1);
  auto* bv = bd->add_subcommand("verify", "Verify the lower and upper error bounds on random joints");
  bv->add_option("--trials", bounds.trials, "Random joints to draw")->capture_default_str();
  bv->add_option("--seed", bounds.seed, "Base seed (default: $MIPEAKS_SEED or 42)");
  bv->add_option("--y-card", bounds.y_card, "Label alphabet size range a..b")->capture_default_str();
  bv->add_option("--t", bounds.steps, "Number of h variables, range a..b")->capture_default_str();
  bv->add_option("--h-card", bounds.h_card, "h alphabet size range a..b")->capture_default_str();
  bv->add_option("--predictors", bounds.predictors, "Random predictors per joint")->capture_default_str();
  bv->add_option("--out", bounds.out, "Output directory for bounds_report.json")->required();
  bv->add_flag("--debug-zero-upper-bound", bounds.zero_upper_bound,
               "Negative control: check against a zero upper bound");

  ToyArgs toy;
  toy.seed = default_seed(1);
  auto* ty = app.add_subcommand("toy", "Toy transformer: training, generation and intervention experiments");
  ty->require_subcommand(1);

  auto* train = ty->add_subcommand("train", "Train on chain-add and write weights");
  add_toy_common(train, toy);
  add_eval(train, toy);

  auto* gen = ty->add_subcommand("generate", "Greedy generation with interventions; writes JSON and an MITC trace");
  add_toy_common(gen, toy);
  gen->add_option("--prompt", toy.prompt, "Prompt tokens, e.g. \"3 4 5\"")->required();
  gen->add_option("--gold", toy.gold, "Gold answer tokens (default: chain-add answer of the prompt)");
  gen->add_option("--budget", toy.budget, "Token budget (default: task completion length)");
  gen->add_option("--suppress", toy.suppress, "Token ids/names to suppress, comma separated");
  gen->add_option("--rr-layer", toy.rr_layer, "Enable representation recycling at this block");
  gen->add_option("--rr-trigger", toy.rr_trigger, "Tokens that trigger recycling on the next step")
      ->capture_default_str();
  gen->add_flag("--ttts", toy.ttts, "Force the thinking token when the model halts early");
  gen->add_option("--ttts-token", toy.ttts_token, "Thinking token for TTTS")->capture_default_str();

  auto* sup = ty->add_subcommand("suppress-exp", "Accuracy vs. number of suppressed thinking vs. random tokens");
  add_toy_common(sup, toy);
  add_eval(sup, toy);
  sup->add_option("--top-n", toy.top_n, "Suppression counts, comma separated")->capture_default_str();
  sup->add_option("--draws", toy.draws, "Random control draws per count")->capture_default_str();

  auto* rr = ty->add_subcommand("rr-exp", "Accuracy with and without representation recycling");
  add_toy_common(rr, toy);
  add_eval(rr, toy);
  rr->add_option("--layer", toy.layer, "Recycled block index")->capture_default_str();

  auto* tt = ty->add_subcommand("ttts-exp", "Accuracy vs. token budget with and without TTTS");
  add_toy_common(tt, toy);
  add_eval(tt, toy);
  tt->add_option("--budgets", toy.budgets, "Ascending budgets, comma separated")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  if (an->parsed()) return run_analyze(analyze);
  if (bv->parsed()) return run_bounds(bounds);
  for (auto* sub : {train, gen, sup, rr, tt}) {
    if (sub->parsed()) {
      toy.command = sub->get_name();
      return run_toy(toy);
    }
  }
  std::cerr << app.help();
  return kInputError;
}
