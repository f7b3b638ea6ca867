#pragma once

// A small pre-norm decoder-only transformer in 64-bit arithmetic, with an
// explicit reverse pass for training.
//
// Block l (TF_l):  x_mid = x + Attn(LN1(x));  x_out = x_mid + FFN(LN2(x_mid))
// Head:            logits = W_out . LNf(x_L) + b

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mipeaks/error.hpp"
#include "mipeaks/matrix.hpp"

namespace mipeaks::toy {

using TokenId = std::uint32_t;

struct ToyConfig {
  std::size_t vocab_size = 14;
  std::size_t model_dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t context = 64;
  std::size_t ffn_mult = 4;
  std::uint64_t seed = 1;

  std::size_t head_dim() const noexcept { return model_dim / heads; }
  std::size_t ffn_dim() const noexcept { return model_dim * ffn_mult; }

  void validate() const {
    if (vocab_size < 2 || vocab_size > 512) throw ConfigError("vocab_size must be in [2, 512]");
    if (model_dim < 1 || model_dim > 128) throw ConfigError("model_dim must be in [1, 128]");
    if (layers < 1 || layers > 8) throw ConfigError("layers must be in [1, 8]");
    if (heads < 1 || heads > 8) throw ConfigError("heads must be in [1, 8]");
    if (model_dim % heads != 0) throw ConfigError("model_dim must be divisible by heads");
    if (context < 1 || context > 256) throw ConfigError("context must be in [1, 256]");
    if (ffn_mult < 1 || ffn_mult > 8) throw ConfigError("ffn_mult must be in [1, 8]");
  }

  friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size() const noexcept {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
  }
  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

struct BlockOffsets {
  std::size_t ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  friend bool operator==(const BlockOffsets&, const BlockOffsets&) = default;
};

// Offsets of every tensor inside the flat parameter vector.
struct ParamLayout {
  std::size_t tok_emb = 0, pos_emb = 0;
  std::vector<BlockOffsets> blocks;
  std::size_t lnf_g = 0, lnf_b = 0, w_out = 0, b_out = 0;
  std::size_t total = 0;
  std::vector<TensorInfo> tensors;

  explicit ParamLayout(const ToyConfig& c) {
    const std::size_t d = c.model_dim;
    const std::size_t f = c.ffn_dim();
    auto add = [&](const std::string& name, std::vector<std::size_t> shape) {
      TensorInfo info{name, std::move(shape), total};
      total += info.size();
      tensors.push_back(info);
      return info.offset;
    };
    tok_emb = add("tok_emb", {c.vocab_size, d});
    pos_emb = add("pos_emb", {c.context, d});
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::string p = "block" + std::to_string(l) + ".";
      BlockOffsets b{};
      b.ln1_g = add(p + "ln1.gain", {d});
      b.ln1_b = add(p + "ln1.bias", {d});
      b.wq = add(p + "attn.wq", {d, d});
      b.wk = add(p + "attn.wk", {d, d});
      b.wv = add(p + "attn.wv", {d, d});
      b.wo = add(p + "attn.wo", {d, d});
      b.bo = add(p + "attn.bo", {d});
      b.ln2_g = add(p + "ln2.gain", {d});
      b.ln2_b = add(p + "ln2.bias", {d});
      b.w1 = add(p + "ffn.w1", {d, f});
      b.b1 = add(p + "ffn.b1", {f});
      b.w2 = add(p + "ffn.w2", {f, d});
      b.b2 = add(p + "ffn.b2", {d});
      blocks.push_back(b);
    }
    lnf_g = add("lnf.gain", {d});
    lnf_b = add("lnf.bias", {d});
    w_out = add("head.w_out", {c.vocab_size, d});
    b_out = add("head.bias", {c.vocab_size});
  }
  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

class ToyTransformer {
 public:
  explicit ToyTransformer(const ToyConfig& config) : config_(config), layout_((config.validate(), config)) {
    params_.assign(layout_.total, 0.0);
  }
  ToyTransformer(const ToyConfig& config, std::vector<double> params)
      : config_(config), layout_((config.validate(), config)), params_(std::move(params)) {
    if (params_.size() != layout_.total) throw ShapeError("parameter count does not match the configuration");
  }

  // Seeded random initialisation: N(0, 1/d) projections, residual-branch
  // outputs scaled down by depth, unit LayerNorm gains, zero biases.
  static ToyTransformer initialized(const ToyConfig& config) {
    ToyTransformer m(config);
    std::mt19937_64 rng(config.seed);
    const double d = static_cast<double>(config.model_dim);
    std::normal_distribution<double> emb(0.0, 1.0 / std::sqrt(d));
    std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(d));
    std::normal_distribution<double> down(0.0, 1.0 / std::sqrt(static_cast<double>(config.ffn_dim())) /
                                                    std::sqrt(2.0 * static_cast<double>(config.layers)));
    auto fill = [&](std::size_t off, std::size_t n, auto& dist) {
      for (std::size_t i = 0; i < n; ++i) m.params_[off + i] = dist(rng);
    };
    auto ones = [&](std::size_t off, std::size_t n) { std::fill_n(m.params_.begin() + off, n, 1.0); };
    const auto& L = m.layout_;
    const std::size_t dd = config.model_dim * config.model_dim;
    const std::size_t df = config.model_dim * config.ffn_dim();
    fill(L.tok_emb, config.vocab_size * config.model_dim, emb);
    fill(L.pos_emb, config.context * config.model_dim, emb);
    for (const auto& b : L.blocks) {
      ones(b.ln1_g, config.model_dim);
      fill(b.wq, dd, proj);
      fill(b.wk, dd, proj);
      fill(b.wv, dd, proj);
      fill(b.wo, dd, down);
      ones(b.ln2_g, config.model_dim);
      fill(b.w1, df, proj);
      fill(b.w2, df, down);
    }
    ones(L.lnf_g, config.model_dim);
    fill(L.w_out, config.vocab_size * config.model_dim, proj);
    return m;
  }

  const ToyConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> param(std::size_t offset, std::size_t n) const { return {params_.data() + offset, n}; }
  std::span<double> param(std::size_t offset, std::size_t n) { return {params_.data() + offset, n}; }

  friend bool operator==(const ToyTransformer&, const ToyTransformer&) = default;

 private:
  ToyConfig config_;
  ParamLayout layout_;
  std::vector<double> params_;
};

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

// y[T x out] = x[T x in] . w[in x out] (+ bias)
inline MatrixD matmul(const MatrixD& x, std::span<const double> w, std::size_t out,
                      std::span<const double> bias = {}) {
  const std::size_t in = x.cols();
  MatrixD y(x.rows(), out, 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto yr = y.row(t);
    if (!bias.empty()) std::copy(bias.begin(), bias.end(), yr.begin());
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x(t, i);
      if (xi == 0.0) continue;
      const double* wr = w.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
    }
  }
  return y;
}

// Reverse of matmul: dx += dy . w^T, dw += x^T . dy, db += sum_t dy.
inline void matmul_backward(const MatrixD& x, std::span<const double> w, const MatrixD& dy, MatrixD* dx,
                            std::span<double> dw, std::span<double> db = {}) {
  const std::size_t in = x.cols();
  const std::size_t out = dy.cols();
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto dyr = dy.row(t);
    for (std::size_t i = 0; i < in; ++i) {
      const double* wr = w.data() + i * out;
      double* dwr = dw.data() + i * out;
      const double xi = x(t, i);
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        acc += dyr[o] * wr[o];
        dwr[o] += xi * dyr[o];
      }
      if (dx) (*dx)(t, i) += acc;
    }
    if (!db.empty()) {
      for (std::size_t o = 0; o < out; ++o) db[o] += dyr[o];
    }
  }
}

struct LayerNormCache {
  MatrixD xhat;
  std::vector<double> rstd;
};

inline MatrixD layer_norm(const MatrixD& x, std::span<const double> g, std::span<const double> b,
                          LayerNormCache* cache) {
  const std::size_t n = x.cols();
  MatrixD y(x.rows(), n);
  if (cache) {
    cache->xhat = MatrixD(x.rows(), n);
    cache->rstd.assign(x.rows(), 0.0);
  }
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto xr = x.row(t);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t k = 0; k < n; ++k) {
      const double xh = (xr[k] - mu) * rstd;
      y(t, k) = g[k] * xh + b[k];
      if (cache) cache->xhat(t, k) = xh;
    }
    if (cache) cache->rstd[t] = rstd;
  }
  return y;
}

inline MatrixD layer_norm_backward(const LayerNormCache& c, std::span<const double> g, const MatrixD& dy,
                                   std::span<double> dg, std::span<double> db) {
  const std::size_t n = dy.cols();
  MatrixD dx(dy.rows(), n);
  std::vector<double> dxhat(n);
  for (std::size_t t = 0; t < dy.rows(); ++t) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      dxhat[k] = dy(t, k) * g[k];
      dg[k] += dy(t, k) * c.xhat(t, k);
      db[k] += dy(t, k);
      mean_dxhat += dxhat[k];
      mean_dxhat_xhat += dxhat[k] * c.xhat(t, k);
    }
    mean_dxhat /= static_cast<double>(n);
    mean_dxhat_xhat /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      dx(t, k) = c.rstd[t] * (dxhat[k] - mean_dxhat - c.xhat(t, k) * mean_dxhat_xhat);
    }
  }
  return dx;
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

struct BlockCache {
  LayerNormCache ln1, ln2;
  MatrixD a;        // LN1 output
  MatrixD q, k, v;  // T x d
  std::vector<MatrixD> probs;  // per head, T x T (lower triangle used)
  MatrixD o;        // concatenated head outputs
  MatrixD b;        // LN2 output
  MatrixD z;        // pre-activation
  MatrixD g;        // GELU output
};

inline MatrixD block_forward(const ToyTransformer& m, std::size_t layer, const MatrixD& x, BlockCache* cache) {
  const auto& c = m.config();
  const auto& off = m.layout().blocks[layer];
  const std::size_t d = c.model_dim;
  const std::size_t f = c.ffn_dim();
  const std::size_t T = x.rows();
  const std::size_t H = c.heads;
  const std::size_t dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  BlockCache local;
  BlockCache& bc = cache ? *cache : local;
  bc.a = layer_norm(x, m.param(off.ln1_g, d), m.param(off.ln1_b, d), &bc.ln1);
  bc.q = matmul(bc.a, m.param(off.wq, d * d), d);
  bc.k = matmul(bc.a, m.param(off.wk, d * d), d);
  bc.v = matmul(bc.a, m.param(off.wv, d * d), d);
  bc.o = MatrixD(T, d, 0.0);
  bc.probs.assign(H, MatrixD(T, T, 0.0));
  std::vector<double> s(T);
  for (std::size_t h = 0; h < H; ++h) {
    const std::size_t c0 = h * dh;
    MatrixD& p = bc.probs[h];
    for (std::size_t t = 0; t < T; ++t) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u <= t; ++u) {
        double dot = 0.0;
        for (std::size_t e = 0; e < dh; ++e) dot += bc.q(t, c0 + e) * bc.k(u, c0 + e);
        s[u] = dot * scale;
        mx = std::max(mx, s[u]);
      }
      double z = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        s[u] = std::exp(s[u] - mx);
        z += s[u];
      }
      for (std::size_t u = 0; u <= t; ++u) {
        p(t, u) = s[u] / z;
        for (std::size_t e = 0; e < dh; ++e) bc.o(t, c0 + e) += p(t, u) * bc.v(u, c0 + e);
      }
    }
  }
  MatrixD mid = matmul(bc.o, m.param(off.wo, d * d), d, m.param(off.bo, d));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < d; ++e) mid(t, e) += x(t, e);
  }
  bc.b = layer_norm(mid, m.param(off.ln2_g, d), m.param(off.ln2_b, d), &bc.ln2);
  bc.z = matmul(bc.b, m.param(off.w1, d * f), f, m.param(off.b1, f));
  bc.g = MatrixD(T, f);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < f; ++e) bc.g(t, e) = gelu(bc.z(t, e));
  }
  MatrixD out = matmul(bc.g, m.param(off.w2, f * d), d, m.param(off.b2, d));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < d; ++e) out(t, e) += mid(t, e);
  }
  return out;
}

// Returns d(loss)/d(block input); accumulates parameter gradients into grad.
inline MatrixD block_backward(const ToyTransformer& m, std::size_t layer, const BlockCache& bc,
                              const MatrixD& dout, std::span<double> grad) {
  const auto& c = m.config();
  const auto& off = m.layout().blocks[layer];
  const std::size_t d = c.model_dim;
  const std::size_t f = c.ffn_dim();
  const std::size_t T = dout.rows();
  const std::size_t H = c.heads;
  const std::size_t dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto G = [&](std::size_t o, std::size_t n) { return grad.subspan(o, n); };

  // FFN branch.
  MatrixD dg(T, f, 0.0);
  matmul_backward(bc.g, m.param(off.w2, f * d), dout, &dg, G(off.w2, f * d), G(off.b2, d));
  MatrixD dz(T, f);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < f; ++e) dz(t, e) = dg(t, e) * gelu_grad(bc.z(t, e));
  }
  MatrixD db(T, d, 0.0);
  matmul_backward(bc.b, m.param(off.w1, d * f), dz, &db, G(off.w1, d * f), G(off.b1, f));
  MatrixD dmid = layer_norm_backward(bc.ln2, m.param(off.ln2_g, d), db, G(off.ln2_g, d), G(off.ln2_b, d));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < d; ++e) dmid(t, e) += dout(t, e);
  }

  // Attention branch.
  MatrixD dobuf(T, d, 0.0);
  matmul_backward(bc.o, m.param(off.wo, d * d), dmid, &dobuf, G(off.wo, d * d), G(off.bo, d));
  MatrixD dq(T, d, 0.0), dk(T, d, 0.0), dv(T, d, 0.0);
  std::vector<double> dp(T);
  for (std::size_t h = 0; h < H; ++h) {
    const std::size_t c0 = h * dh;
    const MatrixD& p = bc.probs[h];
    for (std::size_t t = 0; t < T; ++t) {
      double dot_pdp = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        double acc = 0.0;
        for (std::size_t e = 0; e < dh; ++e) {
          acc += dobuf(t, c0 + e) * bc.v(u, c0 + e);
          dv(u, c0 + e) += p(t, u) * dobuf(t, c0 + e);
        }
        dp[u] = acc;
        dot_pdp += p(t, u) * acc;
      }
      for (std::size_t u = 0; u <= t; ++u) {
        const double ds = p(t, u) * (dp[u] - dot_pdp) * scale;
        for (std::size_t e = 0; e < dh; ++e) {
          dq(t, c0 + e) += ds * bc.k(u, c0 + e);
          dk(u, c0 + e) += ds * bc.q(t, c0 + e);
        }
      }
    }
  }
  MatrixD da(T, d, 0.0);
  matmul_backward(bc.a, m.param(off.wq, d * d), dq, &da, G(off.wq, d * d));
  matmul_backward(bc.a, m.param(off.wk, d * d), dk, &da, G(off.wk, d * d));
  matmul_backward(bc.a, m.param(off.wv, d * d), dv, &da, G(off.wv, d * d));
  MatrixD dx = layer_norm_backward(bc.ln1, m.param(off.ln1_g, d), da, G(off.ln1_g, d), G(off.ln1_b, d));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < d; ++e) dx(t, e) += dmid(t, e);
  }
  return dx;
}

inline void check_tokens(const ToyTransformer& m, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw InvalidInput("empty token sequence");
  if (tokens.size() > m.config().context) {
    throw InvalidInput("sequence of length " + std::to_string(tokens.size()) + " exceeds context " +
                       std::to_string(m.config().context));
  }
  for (TokenId t : tokens) {
    if (t >= m.config().vocab_size) throw InvalidInput("token id " + std::to_string(t) + " is out of vocabulary");
  }
}

}  // namespace detail

// Order in which blocks are applied; plain forward is 0..L-1.
inline std::vector<std::size_t> plain_order(const ToyConfig& c) {
  std::vector<std::size_t> order(c.layers);
  for (std::size_t l = 0; l < c.layers; ++l) order[l] = l;
  return order;
}

// Block `layer` applied twice in a row, every other block once.
inline std::vector<std::size_t> recycle_order(const ToyConfig& c, std::size_t layer) {
  if (layer >= c.layers) {
    throw ConfigError("recycle layer " + std::to_string(layer) + " outside [0, " + std::to_string(c.layers - 1) + "]");
  }
  std::vector<std::size_t> order;
  for (std::size_t l = 0; l < c.layers; ++l) {
    order.push_back(l);
    if (l == layer) order.push_back(l);
  }
  return order;
}

struct ForwardResult {
  MatrixD logits;               // T x V
  std::vector<MatrixD> hidden;  // embeddings, then the output of each applied block
  MatrixD final;                // T x d, LNf output read by the head
};

struct ForwardCache {
  std::vector<std::size_t> order;
  std::vector<detail::BlockCache> blocks;
  detail::LayerNormCache lnf;
};

inline ForwardResult forward_with_order(const ToyTransformer& m, std::span<const TokenId> tokens,
                                        std::span<const std::size_t> order, ForwardCache* cache = nullptr) {
  detail::check_tokens(m, tokens);
  const auto& c = m.config();
  const auto& L = m.layout();
  const std::size_t d = c.model_dim;
  const std::size_t T = tokens.size();
  ForwardResult r;
  MatrixD x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    auto te = m.param(L.tok_emb + tokens[t] * d, d);
    auto pe = m.param(L.pos_emb + t * d, d);
    for (std::size_t e = 0; e < d; ++e) x(t, e) = te[e] + pe[e];
  }
  r.hidden.push_back(x);
  if (cache) {
    cache->order.assign(order.begin(), order.end());
    cache->blocks.assign(order.size(), {});
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    x = detail::block_forward(m, order[i], x, cache ? &cache->blocks[i] : nullptr);
    r.hidden.push_back(x);
  }
  r.final = detail::layer_norm(x, m.param(L.lnf_g, d), m.param(L.lnf_b, d), cache ? &cache->lnf : nullptr);
  std::vector<double> wt(d * c.vocab_size);  // W_out is V x d; matmul wants d x V
  auto w = m.param(L.w_out, c.vocab_size * d);
  for (std::size_t v = 0; v < c.vocab_size; ++v) {
    for (std::size_t e = 0; e < d; ++e) wt[e * c.vocab_size + v] = w[v * d + e];
  }
  r.logits = detail::matmul(r.final, wt, c.vocab_size, m.param(L.b_out, c.vocab_size));
  return r;
}

inline ForwardResult forward(const ToyTransformer& m, std::span<const TokenId> tokens) {
  const auto order = plain_order(m.config());
  return forward_with_order(m, tokens, order);
}

// Representation recycling: TF_l* is applied to its own output once more
// before the remaining blocks run.
inline ForwardResult recycle_forward(const ToyTransformer& m, std::span<const TokenId> tokens, std::size_t layer) {
  const auto order = recycle_order(m.config(), layer);
  return forward_with_order(m, tokens, order);
}

// Reverse pass for d(loss)/d(logits) = dlogits; accumulates into grad.
inline void backward(const ToyTransformer& m, std::span<const TokenId> tokens, const ForwardResult& fr,
                     const ForwardCache& cache, const MatrixD& dlogits, std::span<double> grad) {
  const auto& c = m.config();
  const auto& L = m.layout();
  const std::size_t d = c.model_dim;
  const std::size_t V = c.vocab_size;
  const std::size_t T = tokens.size();
  // logits = final . W_out^T + b
  MatrixD dfinal(T, d, 0.0);
  auto w = m.param(L.w_out, V * d);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t v = 0; v < V; ++v) {
      const double g = dlogits(t, v);
      if (g == 0.0) continue;
      grad[L.b_out + v] += g;
      for (std::size_t e = 0; e < d; ++e) {
        dfinal(t, e) += g * w[v * d + e];
        grad[L.w_out + v * d + e] += g * fr.final(t, e);
      }
    }
  }
  MatrixD dx = detail::layer_norm_backward(cache.lnf, m.param(L.lnf_g, d), dfinal, grad.subspan(L.lnf_g, d),
                                           grad.subspan(L.lnf_b, d));
  for (std::size_t i = cache.order.size(); i-- > 0;) {
    dx = detail::block_backward(m, cache.order[i], cache.blocks[i], dx, grad);
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < d; ++e) {
      grad[L.tok_emb + tokens[t] * d + e] += dx(t, e);
      grad[L.pos_emb + t * d + e] += dx(t, e);
    }
  }
}

// Softmax with the maximum subtracted; -inf entries get probability 0.
inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

// Index of the largest entry; ties go to the smallest index.
inline TokenId argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

struct Decoded {
  TokenId token = 0;
  std::vector<double> probs;
};

// Greedy read-out of a representation through the output head.
inline Decoded decode_representation(const ToyTransformer& m, std::span<const double> h) {
  const auto& c = m.config();
  if (h.size() != c.model_dim) throw ShapeError("representation has the wrong dimension");
  for (double v : h) {
    if (!std::isfinite(v)) throw DomainError("representation contains non-finite values");
  }
  const auto& L = m.layout();
  auto w = m.param(L.w_out, c.vocab_size * c.model_dim);
  auto b = m.param(L.b_out, c.vocab_size);
  std::vector<double> logits(c.vocab_size);
  for (std::size_t v = 0; v < c.vocab_size; ++v) {
    double s = b[v];
    for (std::size_t e = 0; e < c.model_dim; ++e) s += w[v * c.model_dim + e] * h[e];
    logits[v] = s;
  }
  Decoded out;
  out.probs = softmax(logits);
  out.token = argmax(out.probs);
  return out;
}

}  // namespace mipeaks::toy
