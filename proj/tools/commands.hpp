#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace mipeaks::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kInsufficientData = 3,
  kBoundViolation = 4,
  kDiverged = 5,
};

// Seed default: MIPEAKS_SEED when set, otherwise `fallback`.
inline std::uint64_t default_seed(std::uint64_t fallback) {
  if (const char* env = std::getenv("MIPEAKS_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      return fallback;
    }
  }
  return fallback;
}

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string mode = "batch";
  std::string sigma = "auto";
  double tau = 1.5;
  std::string out;
  std::size_t window = 16;
  std::size_t n_min = 8;
  std::string pooling;  // empty: keep what each trace declares
  std::size_t top_k = 30;
  unsigned threads = 1;
};

struct BoundsArgs {
  std::size_t trials = 1000;
  std::uint64_t seed = 42;
  std::string y_card = "3..5";
  std::string steps = "1..3";
  std::string h_card = "2..4";
  std::size_t predictors = 50;
  std::string out;
  bool zero_upper_bound = false;
};

struct ToyArgs {
  std::string command;
  std::string out;
  std::string weights;
  std::uint64_t seed = 1;
  // model + training
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t context = 64;
  std::size_t chain = 3;
  std::size_t steps = 1500;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch = 32;
  // evaluation
  std::size_t eval_count = 200;
  // generate
  std::string prompt;
  std::string gold;
  std::size_t budget = 0;
  std::string suppress;
  std::optional<std::size_t> rr_layer;
  std::string rr_trigger = "THINK";
  bool ttts = false;
  std::string ttts_token = "THINK";
  // experiments
  std::string top_n = "1,2,3";
  std::size_t draws = 5;
  std::size_t layer = 1;
  std::string budgets = "4,8,16,32";
};

int run_analyze(const AnalyzeArgs& args);
int run_bounds(const BoundsArgs& args);
int run_toy(const ToyArgs& args);

}  // namespace mipeaks::cli
