#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mipeaks/matrix.hpp"

namespace mipeaks {

enum class GoldPooling { last_token, mean };

// Hidden states of one generation: one row per generated token (last layer),
// plus the representations of the gold answer tokens.
struct RepresentationTrace {
  MatrixF steps;  // T x d
  MatrixF gold;   // m x d
  GoldPooling gold_pooling = GoldPooling::last_token;
  std::uint32_t vocab_size = 0;  // 0 when unknown
  std::optional<std::vector<std::uint32_t>> token_ids;
  std::optional<std::vector<std::string>> token_strings;
  std::map<std::string, std::string> metadata;

  std::size_t length() const noexcept { return steps.rows(); }
  std::size_t dim() const noexcept { return steps.cols(); }

  friend bool operator==(const RepresentationTrace&, const RepresentationTrace&) = default;
};

// Throws InvalidInput when the trace breaks its invariants.
inline void validate(const RepresentationTrace& t) {
  if (t.steps.rows() < 1 || t.gold.rows() < 1 || t.steps.cols() < 1) {
    throw InvalidInput("trace needs T >= 1, m >= 1 and d >= 1");
  }
  if (t.gold.cols() != t.steps.cols()) {
    throw InvalidInput("gold and step matrices differ in dimension");
  }
  if (!t.steps.all_finite() || !t.gold.all_finite()) {
    throw InvalidInput("trace contains non-finite values");
  }
  if (t.token_ids && t.token_ids->size() != t.steps.rows()) {
    throw InvalidInput("token id count does not match step count");
  }
}

// Single gold vector h_y, widened to double.
inline std::vector<double> pooled_gold(const RepresentationTrace& t) {
  const std::size_t m = t.gold.rows();
  const std::size_t d = t.gold.cols();
  std::vector<double> out(d, 0.0);
  if (m == 0) return out;
  if (t.gold_pooling == GoldPooling::last_token) {
    auto r = t.gold.row(m - 1);
    for (std::size_t k = 0; k < d; ++k) out[k] = r[k];
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) {
    auto r = t.gold.row(i);
    for (std::size_t k = 0; k < d; ++k) out[k] += r[k];
  }
  for (double& v : out) v /= static_cast<double>(m);
  return out;
}

inline const char* to_string(GoldPooling p) {
  return p == GoldPooling::mean ? "mean" : "last_token";
}

inline GoldPooling parse_gold_pooling(const std::string& s) {
  if (s == "mean") return GoldPooling::mean;
  if (s == "last_token" || s == "last") return GoldPooling::last_token;
  throw ConfigError("unknown gold pooling '" + s + "'");
}

}  // namespace mipeaks
