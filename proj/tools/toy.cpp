#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "mipeaks/model_io.hpp"
#include "mipeaks/toy_experiments.hpp"
#include "mipeaks/toy_train.hpp"
#include "mipeaks/trace_io.hpp"

namespace mipeaks::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mipeaks::toy;
using io::config_json;
using io::load_weights;
using io::save_weights;

// Evaluation prompts never share a seed with the training stream.
constexpr std::uint64_t kEvalSeedOffset = 1000003;

TokenId parse_token(const std::string& s) {
  for (TokenId t = 0; t < TaskSpec::kVocabSize; ++t) {
    if (s == token_name(t)) return t;
  }
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != s.size() || v >= TaskSpec::kVocabSize) throw InvalidInput("unknown token '" + s + "'");
  return static_cast<TokenId>(v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::string norm = s;
  for (char& c : norm) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(norm);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<TokenId> parse_tokens(const std::string& s) {
  std::vector<TokenId> out;
  for (const auto& w : split_list(s)) out.push_back(parse_token(w));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const char* flag) {
  std::vector<std::size_t> out;
  for (const auto& w : split_list(s)) {
    std::size_t used = 0;
    try {
      out.push_back(std::stoul(w, &used));
    } catch (...) {
      used = 0;
    }
    if (used != w.size()) throw ConfigError(std::string(flag) + " expects a comma-separated list of integers");
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " is empty");
  return out;
}

json names_of(std::span<const TokenId> ids) {
  json a = json::array();
  for (TokenId t : ids) a.push_back(token_name(t));
  return a;
}

ToyConfig model_config(const ToyArgs& a) {
  ToyConfig c;
  c.model_dim = a.dim;
  c.layers = a.layers;
  c.heads = a.heads;
  c.context = a.context;
  c.seed = a.seed;
  c.validate();
  return c;
}

struct Loaded {
  ToyTransformer model;
  std::optional<TrainResult> training;
};

Loaded obtain_model(const ToyArgs& a, const TaskSpec& task) {
  if (!a.weights.empty()) return {load_weights(a.weights), std::nullopt};
  TrainOptions opt;
  opt.steps = a.steps;
  opt.learning_rate = a.lr;
  opt.momentum = a.momentum;
  opt.batch_size = a.batch;
  opt.seed = a.seed;
  std::cerr << "training " << a.steps << " steps (d=" << a.dim << ", L=" << a.layers << ", seed " << a.seed
            << ")...\n";
  TrainResult r = train_toy(model_config(a), task, opt);
  std::cerr << "loss " << r.initial_loss << " -> " << r.final_loss << "\n";
  ToyTransformer m = r.model;
  return {std::move(m), std::move(r)};
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  io::write_file_text(dir / name, text);
}

int cmd_train(const ToyArgs& a, const TaskSpec& task, const fs::path& out) {
  Loaded l = obtain_model(a, task);
  const auto eval = sample_instances(task, a.eval_count, a.seed + kEvalSeedOffset);
  const auto acc = evaluate(l.model, eval, task_defaults(task));
  fs::create_directories(out);
  save_weights(l.model, out / "weights.mitw");
  json j;
  j["config"] = config_json(l.model.config());
  j["task"] = {{"kind", task.kind}, {"chain_length", task.chain_length}};
  j["eval_count"] = eval.size();
  j["accuracy"] = acc.accuracy;
  if (l.training) {
    j["steps"] = a.steps;
    j["learning_rate"] = a.lr;
    j["momentum"] = a.momentum;
    j["batch_size"] = a.batch;
    j["initial_loss"] = l.training->initial_loss;
    j["final_loss"] = l.training->final_loss;
    j["batch_losses"] = l.training->batch_losses;
  }
  write_text(out, "train.json", j.dump(2) + "\n");
  std::printf("accuracy %.4f on %zu prompts; weights written to %s\n", acc.accuracy, eval.size(),
              (out / "weights.mitw").string().c_str());
  return kOk;
}

int cmd_generate(const ToyArgs& a, const TaskSpec& task, const fs::path& out) {
  const auto prompt = parse_tokens(a.prompt);
  if (prompt.empty()) throw InvalidInput("--prompt is empty");
  std::vector<TokenId> gold;
  if (!a.gold.empty()) {
    gold = parse_tokens(a.gold);
  } else {
    if (prompt.size() != task.chain_length) {
      throw InvalidInput("--gold is required when the prompt is not a chain-add prompt of length " +
                         std::to_string(task.chain_length));
    }
    gold = make_instance(task, prompt).gold;
  }
  if (gold.empty()) throw InvalidInput("gold answer is empty");

  InterventionConfig c = task_defaults(task);
  if (a.budget > 0) c.token_budget = a.budget;
  c.suppress_set = parse_tokens(a.suppress);
  if (a.rr_layer) {
    c.rr_enabled = true;
    c.rr_layer = *a.rr_layer;
    c.rr_trigger_set = parse_tokens(a.rr_trigger);
  }
  if (a.ttts) {
    c.ttts_enabled = true;
    const auto t = parse_tokens(a.ttts_token);
    if (t.size() != 1) throw InvalidInput("--ttts-token must name exactly one token");
    c.ttts_token = t.front();
  }

  Loaded l = obtain_model(a, task);
  c.validate(l.model.config());
  const GenerationSession s = generate(l.model, prompt, c);
  const RepresentationTrace trace = generation_trace(l.model, s, gold);

  json j;
  j["prompt"] = names_of(s.prompt);
  j["generated"] = names_of(s.generated);
  j["generated_ids"] = s.generated;
  j["gold"] = names_of(gold);
  j["forced_positions"] = s.forced_positions;
  j["recycled_steps"] = s.recycled_steps;
  j["budget"] = s.budget;
  j["halted"] = s.halted;
  j["context_exhausted"] = s.context_exhausted;
  if (prompt.size() == task.chain_length && a.gold.empty()) {
    j["correct"] = answer_correct(make_instance(task, prompt), s.generated);
  }
  write_text(out, "generation.json", j.dump(2) + "\n");
  if (s.generated.empty()) {
    std::cerr << "warning: nothing was generated; no trace written\n";
  } else {
    io::write_trace(trace, out / "trace.mitc");
  }
  std::string line;
  for (TokenId t : s.generated) line += token_name(t) + " ";
  std::printf("%s\n", line.c_str());
  return kOk;
}

int cmd_suppress(const ToyArgs& a, const TaskSpec& task, const fs::path& out) {
  const auto top_n = parse_sizes(a.top_n, "--top-n");
  Loaded l = obtain_model(a, task);
  const auto eval = sample_instances(task, a.eval_count, a.seed + kEvalSeedOffset);
  KernelConfig kernel;
  kernel.mode = BandwidthMode::grid_search;
  const auto ranking = rank_thinking_tokens(l.model, task, eval, kernel);
  const double base = evaluate(l.model, eval, task_defaults(task)).accuracy;
  const auto rows = suppression_experiment(l.model, task, eval, ranking.ranking, top_n, a.draws, a.seed);

  std::string csv = "n,thinking_accuracy,random_accuracy,thinking_set\n";
  json jr = json::array();
  char buf[256];
  std::printf("baseline accuracy %.4f\n%4s %10s %10s  %s\n", base, "n", "thinking", "random", "suppressed");
  for (const auto& r : rows) {
    std::string set;
    for (TokenId t : r.thinking_set) set += (set.empty() ? "" : " ") + token_name(t);
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%s\n", r.n, r.thinking_accuracy, r.random_accuracy, set.c_str());
    csv += buf;
    std::printf("%4zu %10.4f %10.4f  %s\n", r.n, r.thinking_accuracy, r.random_accuracy, set.c_str());
    json rs = json::array();
    for (const auto& d : r.random_sets) rs.push_back(names_of(d));
    jr.push_back({{"n", r.n},
                  {"thinking_accuracy", r.thinking_accuracy},
                  {"random_accuracy", r.random_accuracy},
                  {"thinking_set", names_of(r.thinking_set)},
                  {"random_sets", rs}});
  }
  json hist = json::array();
  for (const auto& h : ranking.histogram) {
    hist.push_back({{"token", token_name(h.token_id)}, {"count", h.count}, {"frequency", h.frequency}});
  }
  json j{{"baseline_accuracy", base},
         {"eval_count", eval.size()},
         {"ranking", names_of(ranking.ranking)},
         {"mi_peaks", ranking.peaks.indices},
         {"sigma", ranking.mi.sigma},
         {"peak_tokens", hist},
         {"rows", jr}};
  write_text(out, "suppression.csv", csv);
  write_text(out, "suppression.json", j.dump(2) + "\n");
  return kOk;
}

int cmd_recycle(const ToyArgs& a, const TaskSpec& task, const fs::path& out) {
  Loaded l = obtain_model(a, task);
  if (a.layer >= l.model.config().layers) {
    throw ConfigError("--layer " + std::to_string(a.layer) + " outside [0, " +
                      std::to_string(l.model.config().layers - 1) + "]");
  }
  const auto eval = sample_instances(task, a.eval_count, a.seed + kEvalSeedOffset);
  const auto r = recycling_experiment(l.model, task, eval, a.layer);
  char buf[128];
  std::snprintf(buf, sizeof buf, "layer,baseline_accuracy,rr_accuracy\n%zu,%.6f,%.6f\n", r.layer,
                r.baseline_accuracy, r.rr_accuracy);
  write_text(out, "recycling.csv", buf);
  json j{{"layer", r.layer},
         {"baseline_accuracy", r.baseline_accuracy},
         {"rr_accuracy", r.rr_accuracy},
         {"eval_count", eval.size()}};
  write_text(out, "recycling.json", j.dump(2) + "\n");
  std::printf("layer %zu: baseline %.4f, recycled %.4f\n", r.layer, r.baseline_accuracy, r.rr_accuracy);
  return kOk;
}

int cmd_ttts(const ToyArgs& a, const TaskSpec& task, const fs::path& out) {
  const auto budgets = parse_sizes(a.budgets, "--budgets");
  Loaded l = obtain_model(a, task);
  const auto eval = sample_instances(task, a.eval_count, a.seed + kEvalSeedOffset);
  const auto rows = ttts_experiment(l.model, task, eval, budgets);
  std::string csv = "budget,plain_accuracy,ttts_accuracy,plain_mean_length,ttts_mean_length,ttts_forced\n";
  json jr = json::array();
  char buf[256];
  std::printf("%7s %10s %10s %10s\n", "budget", "plain", "ttts", "forced");
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.4f,%.4f,%zu\n", r.budget, r.plain.accuracy, r.ttts.accuracy,
                  r.plain.mean_length, r.ttts.mean_length, r.ttts.forced_tokens);
    csv += buf;
    std::printf("%7zu %10.4f %10.4f %10zu\n", r.budget, r.plain.accuracy, r.ttts.accuracy, r.ttts.forced_tokens);
    jr.push_back({{"budget", r.budget},
                  {"plain_accuracy", r.plain.accuracy},
                  {"ttts_accuracy", r.ttts.accuracy},
                  {"plain_mean_length", r.plain.mean_length},
                  {"ttts_mean_length", r.ttts.mean_length},
                  {"ttts_max_length", r.ttts.max_length},
                  {"ttts_forced_tokens", r.ttts.forced_tokens}});
  }
  write_text(out, "ttts.csv", csv);
  write_text(out, "ttts.json", json{{"eval_count", eval.size()}, {"rows", jr}}.dump(2) + "\n");
  return kOk;
}

}  // namespace

int run_toy(const ToyArgs& args) {
  try {
    const TaskSpec task = make_task("chain-add", args.chain);
    const fs::path out(args.out);
    if (args.command == "train") return cmd_train(args, task, out);
    if (args.command == "generate") return cmd_generate(args, task, out);
    if (args.command == "suppress-exp") return cmd_suppress(args, task, out);
    if (args.command == "rr-exp") return cmd_recycle(args, task, out);
    if (args.command == "ttts-exp") return cmd_ttts(args, task, out);
    std::cerr << "error: unknown toy command '" << args.command << "'\n";
    return kInputError;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const InsufficientData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInsufficientData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace mipeaks::cli
