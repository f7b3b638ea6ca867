#pragma once

// Synthetic "chained addition mod 10" reasoning task.
//
//   digits (3, 4)     ->  3 4 THINK 7 ANS 7 END
//   digits (9, 9, 9)  ->  9 9 9 THINK 8 THINK 7 ANS 7 END
//   digit  (5)        ->  5 ANS 5 END

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mipeaks/error.hpp"
#include "mipeaks/toy_model.hpp"

namespace mipeaks::toy {

struct TaskSpec {
  std::string kind = "chain-add";
  std::size_t chain_length = 3;  // k prompt digits

  static constexpr TokenId kThink = 10;
  static constexpr TokenId kAns = 11;
  static constexpr TokenId kEnd = 12;
  static constexpr TokenId kPad = 13;
  static constexpr std::size_t kVocabSize = 14;

  // prompt + (k-1) THINK steps + ANS answer + END
  std::size_t sequence_length() const noexcept { return chain_length + 2 * (chain_length - 1) + 3; }
};

inline TaskSpec make_task(const std::string& kind, std::size_t chain_length = 3) {
  if (kind != "chain-add") throw ConfigError("unknown task kind '" + kind + "'");
  if (chain_length < 1 || chain_length > 32) throw ConfigError("chain length must be in [1, 32]");
  return TaskSpec{kind, chain_length};
}

struct TaskInstance {
  std::vector<TokenId> prompt;      // the k digits
  std::vector<TokenId> completion;  // THINK steps, ANS, answer, END
  std::vector<TokenId> gold;        // answer digit tokens after ANS
  TokenId answer = 0;

  std::vector<TokenId> full() const {
    std::vector<TokenId> s = prompt;
    s.insert(s.end(), completion.begin(), completion.end());
    return s;
  }
};

inline TaskInstance make_instance(const TaskSpec& task, std::span<const TokenId> digits) {
  if (digits.size() != task.chain_length) throw InvalidInput("digit count differs from the task's chain length");
  TaskInstance inst;
  inst.prompt.assign(digits.begin(), digits.end());
  TokenId acc = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] > 9) throw InvalidInput("chain-add digits must be in [0, 9]");
    acc = (acc + digits[i]) % 10;
    if (i > 0) {
      inst.completion.push_back(TaskSpec::kThink);
      inst.completion.push_back(acc);
    }
  }
  inst.answer = acc;
  inst.gold = {acc};
  inst.completion.push_back(TaskSpec::kAns);
  inst.completion.push_back(acc);
  inst.completion.push_back(TaskSpec::kEnd);
  return inst;
}

template <typename Rng>
TaskInstance sample_instance(const TaskSpec& task, Rng& rng) {
  std::uniform_int_distribution<TokenId> digit(0, 9);
  std::vector<TokenId> d(task.chain_length);
  for (auto& v : d) v = digit(rng);
  return make_instance(task, d);
}

// Deterministic evaluation/prompt set.
inline std::vector<TaskInstance> sample_instances(const TaskSpec& task, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_instance(task, rng));
  return out;
}

// The answer read from a generation: the digit after the last ANS marker.
inline bool answer_correct(const TaskInstance& inst, std::span<const TokenId> generated) {
  for (std::size_t i = generated.size(); i-- > 0;) {
    if (generated[i] == TaskSpec::kAns) {
      return i + 1 < generated.size() && generated[i + 1] == inst.answer;
    }
  }
  return false;
}

inline std::string token_name(TokenId t) {
  switch (t) {
    case TaskSpec::kThink: return "THINK";
    case TaskSpec::kAns: return "ANS";
    case TaskSpec::kEnd: return "END";
    case TaskSpec::kPad: return "PAD";
    default: return t < 10 ? std::to_string(t) : "<" + std::to_string(t) + ">";
  }
}

}  // namespace mipeaks::toy
