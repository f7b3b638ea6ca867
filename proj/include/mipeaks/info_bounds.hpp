#pragma once

// Exact verification of the Fano-type lower bound and the half-entropy upper
// bound on prediction error, on small finite joint distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mipeaks/error.hpp"

namespace mipeaks::bounds {

inline constexpr std::size_t kMaxStates = 1'000'000;
inline constexpr double kSumTolerance = 1e-12;

enum class LogBase { nats, bits };

inline double in_base(double nats, LogBase base) {
  return base == LogBase::bits ? nats / std::numbers::ln2 : nats;
}

class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw DomainError("empty distribution");
    double s = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("distribution has a negative or non-finite entry");
      s += v;
    }
    if (std::abs(s - 1.0) > kSumTolerance) throw DomainError("distribution does not sum to 1");
  }

  std::span<const double> probabilities() const noexcept { return p_; }
  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const noexcept { return p_[i]; }

 private:
  std::vector<double> p_;
};

namespace detail {

// -sum p ln p over raw masses (no normalisation), with 0 ln 0 = 0.
inline double entropy_nats(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace detail

inline double entropy(const DiscreteDistribution& dist, LogBase base = LogBase::nats) {
  return in_base(detail::entropy_nats(dist.probabilities()), base);
}

inline double binary_entropy(double p, LogBase base = LogBase::nats) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binary entropy needs p in [0, 1]");
  const double q = 1.0 - p;
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (q > 0.0) h -= q * std::log(q);
  return in_base(h, base);
}

// Joint pmf over (y, h_1, ..., h_T). Layout is row-major with y outermost and
// h_T varying fastest.
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t y_card, std::vector<std::size_t> h_cards, std::vector<double> table)
      : y_card_(y_card), h_cards_(std::move(h_cards)), table_(std::move(table)) {
    if (y_card_ < 2) throw DomainError("|Y| must be at least 2");
    if (h_cards_.empty()) throw DomainError("need at least one h variable");
    h_states_ = 1;
    for (std::size_t c : h_cards_) {
      if (c < 1) throw DomainError("h alphabet sizes must be >= 1");
      if (h_states_ > kMaxStates / c) throw ResourceError("joint exceeds the enumeration bound");
      h_states_ *= c;
    }
    if (h_states_ > kMaxStates / y_card_) throw ResourceError("joint exceeds the enumeration bound");
    if (table_.size() != y_card_ * h_states_) throw ShapeError("joint table has the wrong size");
    double s = 0.0;
    for (double v : table_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("joint has a negative or non-finite entry");
      s += v;
    }
    if (std::abs(s - 1.0) > kSumTolerance) throw DomainError("joint does not sum to 1");
  }

  std::size_t y_card() const noexcept { return y_card_; }
  std::span<const std::size_t> h_cards() const noexcept { return h_cards_; }
  std::size_t steps() const noexcept { return h_cards_.size(); }
  std::size_t h_states() const noexcept { return h_states_; }
  std::span<const double> table() const noexcept { return table_; }
  double p(std::size_t y, std::size_t h) const noexcept { return table_[y * h_states_ + h]; }

  std::vector<double> y_marginal() const {
    std::vector<double> out(y_card_, 0.0);
    for (std::size_t y = 0; y < y_card_; ++y) {
      for (std::size_t h = 0; h < h_states_; ++h) out[y] += p(y, h);
    }
    return out;
  }

  // p(y, h_1..h_j) for the first `prefix` h variables, laid out y-major.
  std::vector<double> prefix_marginal(std::size_t prefix) const {
    std::size_t kept = 1;
    for (std::size_t j = 0; j < prefix; ++j) kept *= h_cards_[j];
    const std::size_t folded = h_states_ / kept;
    std::vector<double> out(y_card_ * kept, 0.0);
    for (std::size_t y = 0; y < y_card_; ++y) {
      for (std::size_t a = 0; a < kept; ++a) {
        double s = 0.0;
        const std::size_t base = y * h_states_ + a * folded;
        for (std::size_t b = 0; b < folded; ++b) s += table_[base + b];
        out[y * kept + a] = s;
      }
    }
    return out;
  }

 private:
  std::size_t y_card_;
  std::vector<std::size_t> h_cards_;
  std::vector<double> table_;
  std::size_t h_states_ = 1;
};

// Deterministic map from each joint h configuration to a class label.
struct Predictor {
  enum class Kind { bayes_optimal, explicit_table };
  std::vector<std::size_t> table;
  Kind kind = Kind::explicit_table;
};

namespace detail {

// Sums a y-major (y, a) table over y.
inline std::vector<double> sum_over_y(std::span<const double> yx, std::size_t y_card) {
  const std::size_t n = yx.size() / y_card;
  std::vector<double> out(n, 0.0);
  for (std::size_t y = 0; y < y_card; ++y) {
    for (std::size_t a = 0; a < n; ++a) out[a] += yx[y * n + a];
  }
  return out;
}

inline void check_predictor(const DiscreteJoint& joint, const Predictor& f) {
  if (f.table.size() != joint.h_states()) throw ConfigError("predictor is not total over the h space");
  for (std::size_t v : f.table) {
    if (v >= joint.y_card()) throw ConfigError("predictor maps outside the label set");
  }
}

}  // namespace detail

// Conditional entropy H(y | h_1..h_T) in nats.
inline double conditional_entropy(const DiscreteJoint& joint) {
  const double h_yh = detail::entropy_nats(joint.table());
  const double h_h = detail::entropy_nats(detail::sum_over_y(joint.table(), joint.y_card()));
  return h_yh - h_h;
}

// I(y; h_j | h_<j) for j = 1..T, in nats.
inline std::vector<double> chain_mi_terms(const DiscreteJoint& joint) {
  std::vector<double> terms;
  terms.reserve(joint.steps());
  // H(y | h_<j) - H(y | h_<=j), with H(y | h_<0) = H(y).
  auto cond_entropy_prefix = [&](std::size_t prefix) {
    const std::vector<double> yh = joint.prefix_marginal(prefix);
    return detail::entropy_nats(yh) - detail::entropy_nats(detail::sum_over_y(yh, joint.y_card()));
  };
  double prev = cond_entropy_prefix(0);
  for (std::size_t j = 1; j <= joint.steps(); ++j) {
    const double cur = cond_entropy_prefix(j);
    terms.push_back(prev - cur);
    prev = cur;
  }
  return terms;
}

inline Predictor bayes_predictor(const DiscreteJoint& joint) {
  Predictor f;
  f.kind = Predictor::Kind::bayes_optimal;
  f.table.resize(joint.h_states());
  for (std::size_t h = 0; h < joint.h_states(); ++h) {
    std::size_t best = 0;
    for (std::size_t y = 1; y < joint.y_card(); ++y) {
      if (joint.p(y, h) > joint.p(best, h)) best = y;
    }
    f.table[h] = best;
  }
  return f;
}

inline double bayes_error(const DiscreteJoint& joint) {
  double correct = 0.0;
  for (std::size_t h = 0; h < joint.h_states(); ++h) {
    double best = 0.0;
    for (std::size_t y = 0; y < joint.y_card(); ++y) best = std::max(best, joint.p(y, h));
    correct += best;
  }
  return std::clamp(1.0 - correct, 0.0, 1.0);
}

inline double predictor_error(const DiscreteJoint& joint, const Predictor& f) {
  detail::check_predictor(joint, f);
  double err = 0.0;
  for (std::size_t y = 0; y < joint.y_card(); ++y) {
    for (std::size_t h = 0; h < joint.h_states(); ++h) {
      if (f.table[h] != y) err += joint.p(y, h);
    }
  }
  return std::clamp(err, 0.0, 1.0);
}

// I(y; f(h)) in nats.
inline double predictor_mutual_information(const DiscreteJoint& joint, const Predictor& f) {
  detail::check_predictor(joint, f);
  const std::size_t k = joint.y_card();
  std::vector<double> y_yhat(k * k, 0.0);
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t h = 0; h < joint.h_states(); ++h) y_yhat[y * k + f.table[h]] += joint.p(y, h);
  }
  const double h_joint = detail::entropy_nats(y_yhat);
  const double h_y = detail::entropy_nats(joint.y_marginal());
  const double h_yhat = detail::entropy_nats(detail::sum_over_y(y_yhat, k));
  return h_y + h_yhat - h_joint;
}

struct FanoBound {
  bool applicable = false;
  // [H(y) - sum I - H_b(p_e)], base-independent once divided; reported in nats.
  double numerator = 0.0;
  // numerator / ln(|Y| - 1); NaN when not applicable.
  double bound = std::numeric_limits<double>::quiet_NaN();
};

inline FanoBound fano_lower_bound(const DiscreteJoint& joint, double p_e) {
  if (joint.y_card() < 2) throw DomainError("Fano bound needs |Y| >= 2");
  const auto terms = chain_mi_terms(joint);
  double mi = 0.0;
  for (double t : terms) mi += t;
  FanoBound out;
  out.numerator = detail::entropy_nats(joint.y_marginal()) - mi - binary_entropy(p_e);
  if (joint.y_card() >= 3) {
    out.applicable = true;
    out.bound = out.numerator / std::log(static_cast<double>(joint.y_card() - 1));
  }
  return out;
}

// 1/2 [H(y) - sum_j I(y; h_j | h_<j)].
inline double error_upper_bound(const DiscreteJoint& joint, LogBase base = LogBase::nats) {
  const auto terms = chain_mi_terms(joint);
  double mi = 0.0;
  for (double t : terms) mi += t;
  const double h_y = detail::entropy_nats(joint.y_marginal());
  return in_base(0.5 * (h_y - mi), base);
}

// Grouping axiom residual with the last two entries merged. nullopt when the
// merged mass is zero.
inline std::optional<double> grouping_identity_check(const DiscreteDistribution& dist) {
  const auto p = dist.probabilities();
  if (p.size() < 3) throw DomainError("grouping needs at least 3 entries");
  const double a = p[p.size() - 2];
  const double b = p[p.size() - 1];
  const double merged_mass = a + b;
  if (!(merged_mass > 0.0)) return std::nullopt;
  std::vector<double> merged(p.begin(), p.end() - 2);
  merged.push_back(merged_mass);
  const std::vector<double> pair{a / merged_mass, b / merged_mass};
  const double lhs = detail::entropy_nats(p);
  const double rhs = detail::entropy_nats(merged) + merged_mass * detail::entropy_nats(pair);
  return lhs - rhs;
}

// (1/2) H(p) - (1 - max p), in bits.
inline double half_entropy_lemma_check(const DiscreteDistribution& dist) {
  const auto p = dist.probabilities();
  const double mx = *std::max_element(p.begin(), p.end());
  return 0.5 * entropy(dist, LogBase::bits) - (1.0 - mx);
}

// Range [lo, hi] of a cardinality or step count.
struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

struct VerifyOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 42;
  Range y_card{3, 5};
  Range steps{1, 3};
  Range h_card{2, 4};
  std::size_t predictors_per_trial = 50;
  double tolerance = 1e-9;
  // Negative control: verify against a zero upper bound so any error violates.
  bool corrupt_upper_bound = false;
};

struct VerifyReport {
  std::size_t trials = 0;
  std::size_t fano_checks = 0;
  std::size_t fano_violations = 0;
  std::size_t fano_inapplicable = 0;
  std::size_t upper_checks = 0;
  std::size_t upper_violations = 0;
  std::size_t chain_checks = 0;
  std::size_t chain_violations = 0;
  std::size_t dpi_checks = 0;
  std::size_t dpi_violations = 0;
  // Smallest (p_e - lower bound), (upper bound - Bayes p_e in bits) and
  // (I(y;h) - I(y;f(h))); largest chain-rule residual.
  double worst_fano_slack = std::numeric_limits<double>::infinity();
  double worst_upper_slack = std::numeric_limits<double>::infinity();
  double worst_dpi_slack = std::numeric_limits<double>::infinity();
  double worst_chain_residual = 0.0;

  std::size_t violations() const noexcept {
    return fano_violations + upper_violations + chain_violations + dpi_violations;
  }
  bool passed() const noexcept { return violations() == 0; }
};

// Per-trial generator seeded from (base seed, trial index).
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

// Normalised i.i.d. uniform(0,1) masses over the full state table.
inline DiscreteJoint random_joint(std::mt19937_64& rng, std::size_t y_card, std::vector<std::size_t> h_cards) {
  std::size_t states = y_card;
  for (std::size_t c : h_cards) states *= c;
  if (states > kMaxStates) throw ResourceError("joint exceeds the enumeration bound");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(states);
  double s = 0.0;
  for (double& v : t) {
    v = u(rng);
    s += v;
  }
  for (double& v : t) v /= s;
  return DiscreteJoint(y_card, std::move(h_cards), std::move(t));
}

inline Predictor random_predictor(std::mt19937_64& rng, const DiscreteJoint& joint) {
  std::uniform_int_distribution<std::size_t> pick(0, joint.y_card() - 1);
  Predictor f;
  f.table.resize(joint.h_states());
  for (auto& v : f.table) v = pick(rng);
  return f;
}

// Runs every bound check on one joint and folds the outcome into `report`.
inline void verify_joint(const DiscreteJoint& joint, std::span<const Predictor> predictors,
                         const VerifyOptions& opt, VerifyReport& report) {
  const auto terms = chain_mi_terms(joint);
  double chain_sum = 0.0;
  for (double t : terms) chain_sum += t;
  const double h_y = detail::entropy_nats(joint.y_marginal());
  const double total_mi = h_y - conditional_entropy(joint);
  const double residual = std::abs(chain_sum - total_mi);
  ++report.chain_checks;
  report.worst_chain_residual = std::max(report.worst_chain_residual, residual);
  if (residual > opt.tolerance) ++report.chain_violations;

  const double p_bayes = bayes_error(joint);
  const double upper = opt.corrupt_upper_bound ? 0.0 : error_upper_bound(joint, LogBase::bits);
  ++report.upper_checks;
  report.worst_upper_slack = std::min(report.worst_upper_slack, upper - p_bayes);
  if (p_bayes > upper + opt.tolerance) ++report.upper_violations;

  auto check_fano = [&](double p_e) {
    const FanoBound fb = fano_lower_bound(joint, p_e);
    if (!fb.applicable) {
      ++report.fano_inapplicable;
      return;
    }
    ++report.fano_checks;
    report.worst_fano_slack = std::min(report.worst_fano_slack, p_e - fb.bound);
    if (fb.bound > p_e + opt.tolerance) ++report.fano_violations;
  };
  check_fano(p_bayes);
  for (const auto& f : predictors) {
    check_fano(predictor_error(joint, f));
    const double dpi_slack = total_mi - predictor_mutual_information(joint, f);
    ++report.dpi_checks;
    report.worst_dpi_slack = std::min(report.worst_dpi_slack, dpi_slack);
    if (dpi_slack < -opt.tolerance) ++report.dpi_violations;
  }
}

inline VerifyReport verify_bounds_random(const VerifyOptions& opt) {
  if (opt.y_card.lo < 2 || opt.y_card.lo > opt.y_card.hi || opt.steps.lo < 1 || opt.steps.lo > opt.steps.hi ||
      opt.h_card.lo < 1 || opt.h_card.lo > opt.h_card.hi) {
    throw ConfigError("invalid cardinality ranges");
  }
  VerifyReport report;
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    auto rng = trial_rng(opt.seed, trial);
    std::uniform_int_distribution<std::size_t> ypick(opt.y_card.lo, opt.y_card.hi);
    std::uniform_int_distribution<std::size_t> tpick(opt.steps.lo, opt.steps.hi);
    std::uniform_int_distribution<std::size_t> hpick(opt.h_card.lo, opt.h_card.hi);
    const std::size_t y_card = ypick(rng);
    std::vector<std::size_t> h_cards(tpick(rng));
    for (auto& c : h_cards) c = hpick(rng);
    const DiscreteJoint joint = random_joint(rng, y_card, h_cards);
    std::vector<Predictor> predictors;
    predictors.reserve(opt.predictors_per_trial);
    for (std::size_t k = 0; k < opt.predictors_per_trial; ++k) predictors.push_back(random_predictor(rng, joint));
    verify_joint(joint, predictors, opt, report);
    ++report.trials;
  }
  return report;
}

}  // namespace mipeaks::bounds
