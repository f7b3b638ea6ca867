#pragma once

// Kernel (HSIC) estimates of the dependence between per-step representations
// and the gold-answer representation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

#include "mipeaks/error.hpp"
#include "mipeaks/matrix.hpp"
#include "mipeaks/trace.hpp"

namespace mipeaks {

enum class BandwidthMode { explicit_value, median_heuristic, grid_search };

struct KernelConfig {
  double bandwidth = 100.0;
  BandwidthMode mode = BandwidthMode::grid_search;
  std::vector<double> grid = {50, 100, 150, 200, 250, 300, 350, 400};

  void validate() const {
    if (mode == BandwidthMode::explicit_value && !(bandwidth > 0.0 && std::isfinite(bandwidth))) {
      throw ConfigError("explicit bandwidth must be positive and finite");
    }
    if (grid.empty()) throw ConfigError("bandwidth grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) {
        throw ConfigError("bandwidth grid entries must be positive");
      }
      if (i > 0 && !(grid[i] > grid[i - 1])) {
        throw ConfigError("bandwidth grid must be strictly increasing");
      }
    }
  }
};

// n paired observations of dimension d, one per row.
class SampleSet {
 public:
  explicit SampleSet(MatrixD samples) : m_(std::move(samples)) {
    if (m_.rows() < 2) throw InvalidInput("a sample set needs at least 2 rows");
    if (m_.cols() < 1) throw InvalidInput("a sample set needs dimension >= 1");
    if (!m_.all_finite()) throw InvalidInput("sample set contains non-finite values");
  }

  std::size_t n() const noexcept { return m_.rows(); }
  std::size_t dim() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }
  const MatrixD& matrix() const noexcept { return m_; }

 private:
  MatrixD m_;
};

enum class MiMode { batch_anchored, single_trace };

struct MiSequence {
  std::vector<double> values;
  MiMode mode = MiMode::batch_anchored;
  KernelConfig kernel;
  double sigma = 0.0;  // bandwidth actually used
  std::vector<std::size_t> coverage;
};

struct TrajectoryParams {
  std::size_t n_min = 8;
  std::size_t window = 16;
  unsigned threads = 1;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

// Double-centres K in place: K <- H K H.
inline void double_center(MatrixD& k) {
  const std::size_t n = k.rows();
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += k(i, j);
    row_mean[i] = s / static_cast<double>(n);
    grand += s;
  }
  grand /= static_cast<double>(n) * static_cast<double>(n);
  // K is symmetric, so column means equal row means.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      k(i, j) = k(i, j) - row_mean[i] - row_mean[j] + grand;
    }
  }
}

inline double type7_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double r = 0.5 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(r));
  const auto hi = static_cast<std::size_t>(std::ceil(r));
  return v[lo] + (r - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// K(i,j) = exp(-|x_i - x_j|^2 / (2 sigma^2)).
inline MatrixD gaussian_kernel_matrix(const SampleSet& samples, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("kernel bandwidth must be positive and finite");
  }
  const std::size_t n = samples.n();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  MatrixD k(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::exp(-detail::squared_distance(samples.row(i), samples.row(j)) * scale);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Biased empirical HSIC: tr(K_X H K_Y H) / (n-1)^2.
inline double hsic_biased(const SampleSet& x, const SampleSet& y, double sigma_x, double sigma_y) {
  if (x.n() != y.n()) throw ShapeError("hsic: x and y have different sample counts");
  MatrixD kx = gaussian_kernel_matrix(x, sigma_x);
  MatrixD ky = gaussian_kernel_matrix(y, sigma_y);
  detail::double_center(kx);
  detail::double_center(ky);
  // tr(A B) for symmetric A, B is the entry-wise inner product. Centring both
  // sides keeps the sum symmetric in (x, y).
  const std::size_t n = x.n();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += kx(i, j) * ky(i, j);
    s += row;
  }
  const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
  return s / denom;
}

// One step's paired sample sets: representations and the matching gold rows.
struct StepSamples {
  SampleSet x;
  SampleSet y;
};

namespace detail {

inline std::vector<double> evaluate_steps(std::span<const StepSamples> steps, double sigma,
                                          unsigned threads) {
  std::vector<double> out(steps.size(), 0.0);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t t = begin; t < steps.size(); t += stride) {
      out[t] = hsic_biased(steps[t].x, steps[t].y, sigma, sigma);
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, steps.size()));
  if (n_threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(work, w, n_threads);
  for (auto& th : pool) th.join();
  return out;
}

inline double coefficient_of_variation(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (!(std::abs(mean) > 0.0)) return 0.0;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return std::sqrt(var) / mean;
}

}  // namespace detail

// Median pairwise Euclidean distance of the given rows (type-7 median).
inline double median_pairwise_distance(std::span<const std::span<const double>> rows) {
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      d.push_back(std::sqrt(detail::squared_distance(rows[i], rows[j])));
    }
  }
  if (d.empty()) throw DegenerateInput("median heuristic needs at least two rows");
  return detail::type7_median(std::move(d));
}

// Cap on pooled rows for the median heuristic; larger pools are strided.
inline constexpr std::size_t kMedianPoolCap = 1024;

inline double select_bandwidth(std::span<const StepSamples> steps, const KernelConfig& config,
                               unsigned threads = 1) {
  config.validate();
  if (steps.empty()) throw InsufficientData("bandwidth selection needs at least one step");
  switch (config.mode) {
    case BandwidthMode::explicit_value:
      return config.bandwidth;
    case BandwidthMode::median_heuristic: {
      std::vector<std::span<const double>> pooled;
      for (const auto& s : steps) {
        for (std::size_t i = 0; i < s.x.n(); ++i) pooled.push_back(s.x.row(i));
        for (std::size_t i = 0; i < s.y.n(); ++i) pooled.push_back(s.y.row(i));
      }
      if (pooled.size() > kMedianPoolCap) {
        std::vector<std::span<const double>> thinned;
        thinned.reserve(kMedianPoolCap);
        for (std::size_t i = 0; i < kMedianPoolCap; ++i) {
          thinned.push_back(pooled[i * pooled.size() / kMedianPoolCap]);
        }
        pooled.swap(thinned);
      }
      const double med = median_pairwise_distance(pooled);
      if (!(med > 0.0)) throw DegenerateInput("median heuristic: all pooled rows are identical");
      return med;
    }
    case BandwidthMode::grid_search: {
      double best_sigma = config.grid.front();
      double best_cv = -1.0;
      for (double sigma : config.grid) {
        const double cv = detail::coefficient_of_variation(detail::evaluate_steps(steps, sigma, threads));
        if (cv > best_cv) {  // strict: ties stay with the smaller sigma
          best_cv = cv;
          best_sigma = sigma;
        }
      }
      return best_sigma;
    }
  }
  return config.bandwidth;
}

namespace detail {

inline MatrixD rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t d = rows.front().size();
  MatrixD m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

inline std::vector<StepSamples> batch_steps(std::span<const RepresentationTrace> traces,
                                            std::size_t n_min, std::vector<std::size_t>& coverage) {
  if (traces.size() < n_min || n_min < 2) {
    throw InsufficientData("batch mode needs at least " + std::to_string(std::max<std::size_t>(n_min, 2)) +
                           " traces, got " + std::to_string(traces.size()));
  }
  const std::size_t d = traces.front().dim();
  std::vector<std::vector<double>> gold;
  gold.reserve(traces.size());
  std::size_t max_len = 0;
  for (const auto& t : traces) {
    validate(t);
    if (t.dim() != d) throw ShapeError("traces differ in representation dimension");
    gold.push_back(pooled_gold(t));
    max_len = std::max(max_len, t.length());
  }
  std::vector<StepSamples> steps;
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> ys;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i].length() > step) {
        auto r = traces[i].steps.row(step);
        xs.emplace_back(r.begin(), r.end());
        ys.push_back(gold[i]);
      }
    }
    if (xs.size() < n_min) break;
    coverage.push_back(xs.size());
    steps.push_back({SampleSet(rows_to_matrix(xs)), SampleSet(rows_to_matrix(ys))});
  }
  if (steps.empty()) throw InsufficientData("no step has enough contributing traces");
  return steps;
}

inline std::vector<StepSamples> single_steps(const RepresentationTrace& trace, std::size_t window,
                                             std::vector<std::size_t>& coverage) {
  validate(trace);
  if (window < 2) throw ConfigError("window must be at least 2");
  if (trace.length() < window) {
    throw InsufficientData("single-trace mode needs T >= window (" + std::to_string(window) +
                           "), got T = " + std::to_string(trace.length()));
  }
  const std::size_t m = trace.gold.rows();
  const std::size_t d = trace.dim();
  MatrixD y(window, d);
  for (std::size_t j = 0; j < window; ++j) {
    const auto src = static_cast<std::size_t>(
        std::llround(static_cast<double>(j) * static_cast<double>(m - 1) / static_cast<double>(window - 1)));
    auto r = trace.gold.row(src);
    std::copy(r.begin(), r.end(), y.row(j).begin());
  }
  const SampleSet ys(y);
  std::vector<StepSamples> steps;
  for (std::size_t end = window - 1; end < trace.length(); ++end) {
    MatrixD x(window, d);
    for (std::size_t j = 0; j < window; ++j) {
      auto r = trace.steps.row(end + 1 - window + j);
      std::copy(r.begin(), r.end(), x.row(j).begin());
    }
    steps.push_back({SampleSet(std::move(x)), ys});
  }
  coverage.assign(trace.length(), window);
  return steps;
}

}  // namespace detail

// MI trajectory m_1..m_T between step representations and the gold answer.
inline MiSequence mi_trajectory(std::span<const RepresentationTrace> traces, const KernelConfig& config,
                                MiMode mode, const TrajectoryParams& params = {}) {
  config.validate();
  MiSequence out;
  out.mode = mode;
  out.kernel = config;
  std::vector<StepSamples> steps;
  if (mode == MiMode::batch_anchored) {
    steps = detail::batch_steps(traces, params.n_min, out.coverage);
  } else {
    if (traces.size() != 1) throw InsufficientData("single-trace mode takes exactly one trace");
    steps = detail::single_steps(traces.front(), params.window, out.coverage);
  }
  out.sigma = select_bandwidth(steps, config, params.threads);
  std::vector<double> values = detail::evaluate_steps(steps, out.sigma, params.threads);
  if (mode == MiMode::single_trace) {
    // Steps before the first full window reuse its value.
    std::vector<double> full(params.window - 1, values.front());
    full.insert(full.end(), values.begin(), values.end());
    values.swap(full);
  }
  out.values = std::move(values);
  return out;
}

inline const char* to_string(MiMode m) {
  return m == MiMode::single_trace ? "single_trace" : "batch_anchored";
}

}  // namespace mipeaks
