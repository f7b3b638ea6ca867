#pragma once

// MI-peak detection and trajectory statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mipeaks/error.hpp"
#include "mipeaks/trace.hpp"

namespace mipeaks {

struct PeakConfig {
  double tau = 1.5;

  void validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be a finite value >= 0");
  }
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct PeakIntervals {
  double max = 0.0;
  double min = 0.0;
  double avg = 0.0;
};

struct PeakReport {
  std::vector<std::size_t> indices;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double threshold = 0.0;
  double mean = 0.0;
  double std = 0.0;
  // +inf when degenerate (iqr == 0 with peaks present).
  double aom = 0.0;
  double ratio = 0.0;
  std::size_t length = 0;
  std::optional<PeakIntervals> intervals;
  bool degenerate = false;
};

// Type-7 percentile of an already sorted sequence, p in [0, 100].
inline double percentile_sorted(std::span<const double> sorted, double p) {
  const double r = p * static_cast<double>(sorted.size() - 1) / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(r));
  const auto hi = static_cast<std::size_t>(std::ceil(r));
  return sorted[lo] + (r - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Quartiles quartiles(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("quartiles of an empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw InvalidInput("quartiles: non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());
  return {percentile_sorted(sorted, 25.0), percentile_sorted(sorted, 50.0), percentile_sorted(sorted, 75.0)};
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population statistics (divisor T).
inline MeanStd sequence_stats(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("statistics of an empty sequence");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

inline PeakReport detect_peaks(std::span<const double> values, const PeakConfig& config = {}) {
  config.validate();
  const Quartiles q = quartiles(values);
  PeakReport rep;
  rep.length = values.size();
  rep.q1 = q.q1;
  rep.median = q.median;
  rep.q3 = q.q3;
  rep.iqr = q.q3 - q.q1;
  rep.threshold = q.q3 + config.tau * rep.iqr;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (values[t] > rep.threshold) rep.indices.push_back(t);
  }
  const MeanStd s = sequence_stats(values);
  rep.mean = s.mean;
  rep.std = s.std;
  rep.ratio = static_cast<double>(rep.indices.size()) / static_cast<double>(values.size());

  if (!rep.indices.empty()) {
    if (rep.iqr == 0.0) {
      rep.degenerate = true;
      rep.aom = std::numeric_limits<double>::infinity();
    } else {
      double acc = 0.0;
      for (std::size_t i : rep.indices) acc += std::abs(values[i] - rep.median) / rep.iqr;
      rep.aom = acc / static_cast<double>(rep.indices.size());
    }
  }
  if (rep.indices.size() >= 2) {
    PeakIntervals iv{0.0, std::numeric_limits<double>::infinity(), 0.0};
    for (std::size_t k = 1; k < rep.indices.size(); ++k) {
      const auto gap = static_cast<double>(rep.indices[k] - rep.indices[k - 1]);
      iv.max = std::max(iv.max, gap);
      iv.min = std::min(iv.min, gap);
      iv.avg += gap;
    }
    iv.avg /= static_cast<double>(rep.indices.size() - 1);
    rep.intervals = iv;
  }
  return rep;
}

struct TokenFrequency {
  std::uint32_t token_id = 0;
  std::size_t count = 0;
  double frequency = 0.0;

  friend bool operator==(const TokenFrequency&, const TokenFrequency&) = default;
};

// Token ids sitting at MI peaks, most frequent first (ties by ascending id).
// Frequencies are relative to all peak tokens, not only the returned rows.
inline std::vector<TokenFrequency> peak_token_histogram(std::span<const RepresentationTrace> traces,
                                                        std::span<const PeakReport> reports,
                                                        std::size_t top_k) {
  if (traces.size() != reports.size()) {
    throw ShapeError("histogram needs one peak report per trace");
  }
  std::map<std::uint32_t, std::size_t> counts;
  std::size_t total = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (reports[i].indices.empty()) continue;
    if (!traces[i].token_ids) {
      throw MissingAnnotation("trace " + std::to_string(i) + " has no token ids");
    }
    const auto& ids = *traces[i].token_ids;
    for (std::size_t t : reports[i].indices) {
      if (t >= ids.size()) throw ShapeError("peak index beyond trace length");
      ++counts[ids[t]];
      ++total;
    }
  }
  std::vector<TokenFrequency> rows;
  rows.reserve(counts.size());
  for (const auto& [id, c] : counts) {
    rows.push_back({id, c, static_cast<double>(c) / static_cast<double>(total)});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const TokenFrequency& a, const TokenFrequency& b) { return a.count > b.count; });
  if (rows.size() > top_k) rows.resize(top_k);
  return rows;
}

}  // namespace mipeaks
