#pragma once

// Greedy generation with the three inference-time interventions: token
// suppression, representation recycling (RR) and thinking-token test-time
// scaling (TTTS).

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mipeaks/error.hpp"
#include "mipeaks/toy_model.hpp"

namespace mipeaks::toy {

struct InterventionConfig {
  std::vector<TokenId> suppress_set;
  bool rr_enabled = false;
  std::size_t rr_layer = 0;
  std::vector<TokenId> rr_trigger_set;
  bool ttts_enabled = false;
  TokenId ttts_token = 0;
  std::size_t token_budget = 16;
  std::optional<TokenId> end_token;

  void validate(const ToyConfig& c) const {
    if (token_budget < 1) throw ConfigError("token budget must be at least 1");
    for (TokenId t : suppress_set) {
      if (t >= c.vocab_size) throw ConfigError("suppressed id " + std::to_string(t) + " is out of vocabulary");
    }
    if (rr_enabled && rr_layer >= c.layers) {
      throw ConfigError("rr layer " + std::to_string(rr_layer) + " outside [0, " + std::to_string(c.layers - 1) + "]");
    }
    if (ttts_enabled) {
      if (ttts_token >= c.vocab_size) throw ConfigError("ttts token is out of vocabulary");
      if (std::find(suppress_set.begin(), suppress_set.end(), ttts_token) != suppress_set.end()) {
        throw ConfigError("ttts token must not be suppressed");
      }
      if (end_token && *end_token == ttts_token) throw ConfigError("ttts token must differ from the end token");
    }
  }
};

struct GenerationSession {
  std::vector<TokenId> prompt;
  std::vector<TokenId> generated;
  // Last-layer representation (head input, final position) behind each
  // generated token. Forced tokens reuse the representation of the step they
  // replaced.
  std::vector<std::vector<double>> representations;
  std::vector<std::size_t> forced_positions;  // indices into generated
  std::vector<std::size_t> recycled_steps;    // steps computed with RR
  std::size_t budget = 0;
  bool halted = false;             // ended on the end token
  bool context_exhausted = false;  // stopped because the context filled up
};

// Suppressed entries become -inf so their softmax probability is exactly 0.
inline std::vector<double> apply_suppression(std::span<const double> logits, std::span<const TokenId> suppress_set) {
  std::vector<double> out(logits.begin(), logits.end());
  for (TokenId t : suppress_set) {
    if (t >= out.size()) throw ConfigError("suppressed id " + std::to_string(t) + " is out of vocabulary");
    out[t] = -std::numeric_limits<double>::infinity();
  }
  if (std::none_of(out.begin(), out.end(), [](double v) { return v > -std::numeric_limits<double>::infinity(); })) {
    throw ConfigError("suppression removes every token");
  }
  return out;
}

inline GenerationSession generate(const ToyTransformer& model, std::span<const TokenId> prompt,
                                  const InterventionConfig& config) {
  config.validate(model.config());
  detail::check_tokens(model, prompt);
  GenerationSession s;
  s.prompt.assign(prompt.begin(), prompt.end());
  s.budget = config.token_budget;
  std::vector<TokenId> tokens = s.prompt;
  const auto plain = plain_order(model.config());
  const auto recycled = config.rr_enabled ? recycle_order(model.config(), config.rr_layer) : plain;

  while (s.generated.size() < config.token_budget) {
    if (tokens.size() >= model.config().context) {
      s.context_exhausted = true;
      break;
    }
    const bool rr = config.rr_enabled && !s.generated.empty() &&
                    std::find(config.rr_trigger_set.begin(), config.rr_trigger_set.end(), s.generated.back()) !=
                        config.rr_trigger_set.end();
    const ForwardResult fr = forward_with_order(model, tokens, rr ? recycled : plain);
    if (rr) s.recycled_steps.push_back(s.generated.size());
    const std::size_t last = tokens.size() - 1;
    const auto logits = apply_suppression(fr.logits.row(last), config.suppress_set);
    TokenId next = argmax(logits);
    auto h = fr.final.row(last);
    s.representations.emplace_back(h.begin(), h.end());
    if (config.end_token && next == *config.end_token) {
      if (!config.ttts_enabled) {
        s.generated.push_back(next);
        s.halted = true;
        break;
      }
      // Halted with budget left: force the thinking token and keep going.
      next = config.ttts_token;
      s.forced_positions.push_back(s.generated.size());
    }
    s.generated.push_back(next);
    tokens.push_back(next);
  }
  return s;
}

// One TTTS session per budget in an ascending schedule.
inline std::vector<GenerationSession> ttts_generate(const ToyTransformer& model, std::span<const TokenId> prompt,
                                                    InterventionConfig config, std::span<const std::size_t> budgets) {
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] < budgets[i - 1]) throw ConfigError("budget schedule must be ascending");
  }
  config.ttts_enabled = true;
  std::vector<GenerationSession> out;
  out.reserve(budgets.size());
  for (std::size_t b : budgets) {
    config.token_budget = b;
    out.push_back(generate(model, prompt, config));
  }
  return out;
}

}  // namespace mipeaks::toy
