#pragma once

// Test oracles written independently of the library internals, plus small
// fixtures shared by the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <cstdlib>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "mipeaks/matrix.hpp"
#include "mipeaks/trace.hpp"

namespace testsupport {

using mipeaks::MatrixD;
using mipeaks::MatrixF;

inline MatrixD random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixD m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = n(rng);
  }
  return m;
}

// exp(-|a-b|^2 / (2 s^2)), one entry at a time.
inline double kernel_entry(const MatrixD& x, std::size_t i, std::size_t j, double sigma) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const double diff = x(i, c) - x(j, c);
    s += diff * diff;
  }
  return std::exp(-s / (2.0 * sigma * sigma));
}

// Empirical HSIC from the triple-expectation definition, summing over every
// index tuple. This is the V-statistic (1/n^2 normalisation); the library's
// trace form divides by (n-1)^2, so callers rescale by n^2/(n-1)^2.
inline double hsic_exhaustive(const MatrixD& x, const MatrixD& y, double sx, double sy) {
  const std::size_t n = x.rows();
  std::vector<double> k(n * n), l(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      k[i * n + j] = kernel_entry(x, i, j, sx);
      l[i * n + j] = kernel_entry(y, i, j, sy);
    }
  }
  const double nn = static_cast<double>(n);
  double t1 = 0.0, t2k = 0.0, t2l = 0.0, t3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      t1 += k[i * n + j] * l[i * n + j];
      t2k += k[i * n + j];
      t2l += l[i * n + j];
      for (std::size_t q = 0; q < n; ++q) t3 += k[i * n + j] * l[i * n + q];
    }
  }
  return t1 / (nn * nn) + (t2k / (nn * nn)) * (t2l / (nn * nn)) - 2.0 * t3 / (nn * nn * nn);
}

inline MatrixF to_float(const MatrixD& m) {
  MatrixF f(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) f(r, c) = static_cast<float>(m(r, c));
  }
  return f;
}

// Random trace with every optional-field combination selected by `variant`.
inline mipeaks::RepresentationTrace random_trace(std::mt19937_64& rng, int variant) {
  std::uniform_int_distribution<std::size_t> len(1, 12), dim(1, 6), gl(1, 4);
  const std::size_t t = len(rng), d = dim(rng), m = gl(rng);
  mipeaks::RepresentationTrace tr;
  tr.steps = to_float(random_matrix(rng, t, d, 3.0));
  tr.gold = to_float(random_matrix(rng, m, d, 3.0));
  tr.vocab_size = (variant & 4) ? 50u : 0u;
  if (variant & 1) {
    std::uniform_int_distribution<std::uint32_t> id(0, 49);
    std::vector<std::uint32_t> ids(t);
    for (auto& v : ids) v = id(rng);
    tr.token_ids = ids;
  }
  if (variant & 2) {
    std::vector<std::string> names;
    for (int i = 0; i < 5; ++i) names.push_back("tok" + std::to_string(rng() % 1000) + (i == 3 ? " \xc3\xa9" : ""));
    names.push_back("");
    tr.token_strings = names;
  }
  return tr;
}

// Eight traces whose step 5 copies the pooled gold row; every other step is
// independent noise at a comparable scale.
inline std::vector<mipeaks::RepresentationTrace> crafted_batch(std::uint64_t seed, std::size_t count = 8,
                                                              std::size_t steps = 20, std::size_t dim = 4,
                                                              std::size_t peak = 5) {
  std::mt19937_64 rng(seed);
  std::vector<mipeaks::RepresentationTrace> out;
  for (std::size_t i = 0; i < count; ++i) {
    mipeaks::RepresentationTrace tr;
    tr.steps = to_float(random_matrix(rng, steps, dim, 100.0));
    tr.gold = to_float(random_matrix(rng, 1, dim, 100.0));
    for (std::size_t c = 0; c < dim; ++c) tr.steps(peak, c) = tr.gold(0, c);
    std::vector<std::uint32_t> ids(steps);
    for (std::size_t t = 0; t < steps; ++t) ids[t] = static_cast<std::uint32_t>(t == peak ? 7 : 1 + t % 5);
    tr.token_ids = ids;
    tr.vocab_size = 10;
    out.push_back(std::move(tr));
  }
  return out;
}

// Runs a shell command and returns its exit status (-1 if it did not exit).
inline int run(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testsupport
