#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnf/mat.hpp"
#include "cnf/rng.hpp"
#include "cnf/tensor.hpp"

namespace cnf {

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

/// Stack of conv(3x3, same) -> batchnorm -> ELU -> maxpool blocks followed by
/// a linear head on the globally averaged final map. The defaults are the
/// 5-layer, 32-channel tagging network on a 1 x 96 x 1360 input; everything
/// is overridable so tests can run tiny configurations.
struct ArchitectureSpec {
  int n_layers = 5;
  int channels = 32;
  int kernel_h = 3;
  int kernel_w = 3;
  std::vector<std::pair<int, int>> pool_schedule = {{2, 4}, {4, 4}, {4, 5}, {2, 4}, {4, 4}};
  int input_channels = 1;
  int input_h = 96;
  int input_w = 1360;
  int n_outputs = 50;

  static ArchitectureSpec paper_fig1() { return ArchitectureSpec{}; }

  void validate() const {
    if (n_layers < 1 || int(pool_schedule.size()) != n_layers)
      raise(Errc::invalid_argument, "pool schedule must list one pool per layer");
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0 || kernel_h < 1 || kernel_w < 1)
      raise(Errc::invalid_argument, "kernel extents must be odd and positive");
    if (channels < 1 || input_channels < 1 || input_h < 1 || input_w < 1 || n_outputs < 1)
      raise(Errc::invalid_argument, "extents must be positive");
    for (auto [ph, pw] : pool_schedule)
      if (ph < 1 || pw < 1) raise(Errc::invalid_argument, "pool extents must be positive");
  }

  /// Post-pool (h, w) per layer. Pool windows are non-overlapping with
  /// stride = window; a window larger than the remaining extent is clamped
  /// to it, so extents never drop below 1.
  std::vector<std::pair<int, int>> layer_map_shapes() const {
    std::vector<std::pair<int, int>> shapes;
    int h = input_h, w = input_w;
    for (auto [ph, pw] : pool_schedule) {
      h = h >= ph ? h / ph : 1;
      w = w >= pw ? w / pw : 1;
      shapes.emplace_back(h, w);
    }
    return shapes;
  }
};

enum class Mode { train, inference };

template <class Real>
struct LayerParamsT {
  TensorT<Real> conv_w;  // out_ch x in_ch x kh x kw
  std::vector<Real> conv_b;
  std::vector<Real> bn_gamma, bn_beta, bn_running_mean, bn_running_var;
  double bn_eps = 1e-5;
  double bn_momentum = 0.99;
};

template <class Real>
struct ModelStateT {
  ArchitectureSpec spec;
  std::vector<LayerParamsT<Real>> layers;
  std::vector<Real> head_w;  // n_outputs x channels, row-major
  std::vector<Real> head_b;  // n_outputs
  Mode mode = Mode::inference;
};

using ModelState = ModelStateT<float>;

/// Zero-initialized model with the spec's shapes (gamma = 1, running_var = 1).
template <class Real>
ModelStateT<Real> make_model(const ArchitectureSpec& spec) {
  spec.validate();
  ModelStateT<Real> m;
  m.spec = spec;
  m.layers.resize(size_t(spec.n_layers));
  for (int l = 0; l < spec.n_layers; ++l) {
    int ic = l == 0 ? spec.input_channels : spec.channels;
    auto& lp = m.layers[size_t(l)];
    lp.conv_w = TensorT<Real>(spec.channels, ic, spec.kernel_h, spec.kernel_w);
    lp.conv_b.assign(size_t(spec.channels), Real(0));
    lp.bn_gamma.assign(size_t(spec.channels), Real(1));
    lp.bn_beta.assign(size_t(spec.channels), Real(0));
    lp.bn_running_mean.assign(size_t(spec.channels), Real(0));
    lp.bn_running_var.assign(size_t(spec.channels), Real(1));
  }
  m.head_w.assign(size_t(spec.n_outputs) * spec.channels, Real(0));
  m.head_b.assign(size_t(spec.n_outputs), Real(0));
  return m;
}

/// He-normal initialization: conv and head weights ~ N(0, 2/fan_in), biases
/// zero, BN at identity, running stats (0, 1). Bit-deterministic per seed.
template <class Real = float>
ModelStateT<Real> he_normal_init(const ArchitectureSpec& spec, uint32_t seed) {
  ModelStateT<Real> m = make_model<Real>(spec);
  GaussianRng rng(seed);
  for (auto& lp : m.layers) {
    double fan_in = double(lp.conv_w.c) * lp.conv_w.h * lp.conv_w.w;
    double sigma = std::sqrt(2.0 / fan_in);
    for (auto& v : lp.conv_w.data) v = Real(rng.gaussian() * sigma);
  }
  double head_sigma = std::sqrt(2.0 / double(spec.channels));
  for (auto& v : m.head_w) v = Real(rng.gaussian() * head_sigma);
  return m;
}

// ---------------------------------------------------------------------------
// Layer operations
// ---------------------------------------------------------------------------

/// Same-padded 2-D cross-correlation (odd kernel, zero padding, stride 1).
template <class Real>
TensorT<Real> conv2d_same(const TensorT<Real>& in, const TensorT<Real>& w,
                          std::span<const Real> bias) {
  if (w.c != in.c) raise(Errc::shape_mismatch, "conv input channels != kernel channels");
  if (w.h % 2 == 0 || w.w % 2 == 0) raise(Errc::invalid_argument, "kernel must be odd");
  if (int(bias.size()) != w.b) raise(Errc::shape_mismatch, "bias length != out channels");
  const int H = in.h, W = in.w, kh = w.h, kw = w.w;
  const int cy = kh / 2, cx = kw / 2;

  TensorT<Real> out(in.b, w.b, H, W);
  for (int bi = 0; bi < in.b; ++bi) {
    for (int oc = 0; oc < w.b; ++oc) {
      Real* op = out.plane_ptr(bi, oc);
      std::fill(op, op + out.plane(), bias[size_t(oc)]);
      for (int ic = 0; ic < in.c; ++ic) {
        const Real* ip = in.plane_ptr(bi, ic);
        for (int ky = 0; ky < kh; ++ky) {
          const int dy = ky - cy;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          for (int kx = 0; kx < kw; ++kx) {
            const int dx = kx - cx;
            const Real wv = w.at(oc, ic, ky, kx);
            if (wv == Real(0)) continue;
            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
            for (int y = y0; y < y1; ++y) {
              const Real* src = ip + size_t(y + dy) * W + dx;
              Real* dst = op + size_t(y) * W;
              for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <class Real>
inline Real elu_scalar(Real x) {
  return x > Real(0) ? x : Real(std::expm1(double(x)));
}

template <class Real>
TensorT<Real> elu(const TensorT<Real>& t) {
  TensorT<Real> out = t;
  for (auto& v : out.data) v = elu_scalar(v);
  return out;
}

/// Per-channel batch statistics (population variance), 64-bit accumulation.
struct BnStats {
  std::vector<double> mean, var;
};

/// Batch normalization. Train mode standardizes with batch statistics over
/// (batch, h, w) and requires batch >= 2; inference mode uses running stats.
/// Pure: running statistics are updated separately via bn_update_running.
template <class Real>
TensorT<Real> batchnorm(const TensorT<Real>& t, const LayerParamsT<Real>& lp, Mode mode,
                        BnStats* stats_out = nullptr) {
  if (int(lp.bn_gamma.size()) != t.c) raise(Errc::shape_mismatch, "bn params != channels");
  TensorT<Real> out(t.b, t.c, t.h, t.w);
  const size_t plane = t.plane();
  const size_t m = size_t(t.b) * plane;

  BnStats stats;
  if (mode == Mode::train) {
    if (t.b < 2) raise(Errc::invalid_argument, "batchnorm train mode needs batch >= 2");
    stats.mean.resize(size_t(t.c));
    stats.var.resize(size_t(t.c));
    for (int ci = 0; ci < t.c; ++ci) {
      double s = 0.0;
      for (int bi = 0; bi < t.b; ++bi) {
        const Real* p = t.plane_ptr(bi, ci);
        for (size_t i = 0; i < plane; ++i) s += double(p[i]);
      }
      double mean = s / double(m);
      double sq = 0.0;
      for (int bi = 0; bi < t.b; ++bi) {
        const Real* p = t.plane_ptr(bi, ci);
        for (size_t i = 0; i < plane; ++i) {
          double d = double(p[i]) - mean;
          sq += d * d;
        }
      }
      stats.mean[size_t(ci)] = mean;
      stats.var[size_t(ci)] = sq / double(m);
    }
  }

  for (int ci = 0; ci < t.c; ++ci) {
    const double mean =
        mode == Mode::train ? stats.mean[size_t(ci)] : double(lp.bn_running_mean[size_t(ci)]);
    const double var =
        mode == Mode::train ? stats.var[size_t(ci)] : double(lp.bn_running_var[size_t(ci)]);
    const double inv_std = 1.0 / std::sqrt(var + lp.bn_eps);
    const double g = double(lp.bn_gamma[size_t(ci)]);
    const double beta = double(lp.bn_beta[size_t(ci)]);
    for (int bi = 0; bi < t.b; ++bi) {
      const Real* p = t.plane_ptr(bi, ci);
      Real* q = out.plane_ptr(bi, ci);
      for (size_t i = 0; i < plane; ++i) q[i] = Real((double(p[i]) - mean) * inv_std * g + beta);
    }
  }
  if (stats_out) *stats_out = std::move(stats);
  return out;
}

template <class Real>
void bn_update_running(LayerParamsT<Real>& lp, const BnStats& stats) {
  const double mom = lp.bn_momentum;
  for (size_t ci = 0; ci < stats.mean.size(); ++ci) {
    lp.bn_running_mean[ci] = Real(mom * double(lp.bn_running_mean[ci]) + (1.0 - mom) * stats.mean[ci]);
    lp.bn_running_var[ci] = Real(mom * double(lp.bn_running_var[ci]) + (1.0 - mom) * stats.var[ci]);
  }
}

/// Non-overlapping max pooling, stride = window. A window larger than the
/// extent is clamped to it (output extents = max(1, floor(extent/window))).
/// argmax, when given, receives the flat input index of each output element.
template <class Real>
TensorT<Real> maxpool(const TensorT<Real>& t, int ph, int pw, std::vector<size_t>* argmax = nullptr) {
  if (ph < 1 || pw < 1) raise(Errc::invalid_argument, "pool extents must be positive");
  const int oh = t.h >= ph ? t.h / ph : 1;
  const int ow = t.w >= pw ? t.w / pw : 1;
  const int eh = t.h >= ph ? ph : t.h;  // effective window
  const int ew = t.w >= pw ? pw : t.w;

  TensorT<Real> out(t.b, t.c, oh, ow);
  if (argmax) argmax->assign(out.size(), 0);
  size_t oi = 0;
  for (int bi = 0; bi < t.b; ++bi) {
    for (int ci = 0; ci < t.c; ++ci) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          Real best{};
          size_t best_idx = 0;
          bool first = true;
          for (int y = oy * eh; y < oy * eh + eh; ++y) {
            for (int x = ox * ew; x < ox * ew + ew; ++x) {
              Real v = t.at(bi, ci, y, x);
              if (first || v > best) {
                best = v;
                best_idx = ((size_t(bi) * t.c + ci) * t.h + y) * t.w + x;
                first = false;
              }
            }
          }
          out.data[oi] = best;
          if (argmax) (*argmax)[oi] = best_idx;
        }
      }
    }
  }
  return out;
}

/// Mean over (h, w) per (batch, channel); returns b*c values, 64-bit sums.
template <class Real>
std::vector<Real> global_average_pool(const TensorT<Real>& t) {
  std::vector<Real> out(size_t(t.b) * t.c);
  const size_t plane = t.plane();
  for (int bi = 0; bi < t.b; ++bi) {
    for (int ci = 0; ci < t.c; ++ci) {
      double s = 0.0;
      const Real* p = t.plane_ptr(bi, ci);
      for (size_t i = 0; i < plane; ++i) s += double(p[i]);
      out[size_t(bi) * t.c + ci] = Real(s / double(plane));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

template <class Real>
struct ForwardResultT {
  std::vector<TensorT<Real>> layer_maps;  // post-pool map per layer
  std::vector<Real> head_input;           // b x channels (global average of last map)
  std::vector<Real> logits;               // b x n_outputs
};

namespace detail {

template <class Real>
void head_forward(const ModelStateT<Real>& m, const std::vector<Real>& h, int batch,
                  std::vector<Real>& logits) {
  const int C = m.spec.channels, O = m.spec.n_outputs;
  logits.assign(size_t(batch) * O, Real(0));
  for (int bi = 0; bi < batch; ++bi) {
    for (int o = 0; o < O; ++o) {
      double acc = double(m.head_b[size_t(o)]);
      const Real* wrow = m.head_w.data() + size_t(o) * C;
      const Real* hrow = h.data() + size_t(bi) * C;
      for (int ci = 0; ci < C; ++ci) acc += double(wrow[ci]) * double(hrow[ci]);
      logits[size_t(bi) * O + o] = Real(acc);
    }
  }
}

}  // namespace detail

/// Run the whole network, keeping every post-pool map (the transfer surface).
/// Uses the model's mode for batch normalization; never mutates the model.
template <class Real>
ForwardResultT<Real> forward_all(const ModelStateT<Real>& m, const TensorT<Real>& input) {
  if (input.c != m.spec.input_channels || input.h != m.spec.input_h || input.w != m.spec.input_w)
    raise(Errc::shape_mismatch, "input shape does not match architecture spec");
  ForwardResultT<Real> r;
  r.layer_maps.reserve(size_t(m.spec.n_layers));
  TensorT<Real> x = input;
  for (int l = 0; l < m.spec.n_layers; ++l) {
    const auto& lp = m.layers[size_t(l)];
    TensorT<Real> z = conv2d_same(x, lp.conv_w, std::span<const Real>(lp.conv_b));
    z = batchnorm(z, lp, m.mode);
    z = elu(z);
    auto [ph, pw] = m.spec.pool_schedule[size_t(l)];
    x = maxpool(z, ph, pw);
    r.layer_maps.push_back(x);
  }
  r.head_input = global_average_pool(x);
  detail::head_forward(m, r.head_input, input.b, r.logits);
  return r;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy from logits, computed in the stable softplus
/// form; targets must be 0/1.
template <class Real>
double bce_with_logits(std::span<const Real> logits, std::span<const Real> targets) {
  if (logits.size() != targets.size()) raise(Errc::shape_mismatch, "logits/targets length");
  if (logits.empty()) raise(Errc::empty_input, "no logits");
  auto softplus = [](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  };
  double acc = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    double z = double(logits[i]);
    double y = double(targets[i]);
    if (y != 0.0 && y != 1.0) raise(Errc::invalid_argument, "targets must be binary");
    acc += softplus(y > 0.5 ? -z : z);
  }
  return acc / double(logits.size());
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

template <class Real>
struct ParamRef {
  std::string name;
  std::vector<Real>* values;
};

/// Trainable parameters in canonical order: per layer conv_w, conv_b,
/// bn_gamma, bn_beta; then head.w, head.b. (Running stats are state, not
/// parameters.)
template <class Real>
std::vector<ParamRef<Real>> trainable_params(ModelStateT<Real>& m) {
  std::vector<ParamRef<Real>> out;
  for (size_t l = 0; l < m.layers.size(); ++l) {
    std::string p = "layer" + std::to_string(l + 1) + ".";
    out.push_back({p + "conv_w", &m.layers[l].conv_w.data});
    out.push_back({p + "conv_b", &m.layers[l].conv_b});
    out.push_back({p + "bn_gamma", &m.layers[l].bn_gamma});
    out.push_back({p + "bn_beta", &m.layers[l].bn_beta});
  }
  out.push_back({"head.w", &m.head_w});
  out.push_back({"head.b", &m.head_b});
  return out;
}

template <class Real>
struct GradientsT {
  std::vector<std::vector<Real>> g;  // parallel to trainable_params order
  double loss = 0.0;
};

namespace detail {

template <class Real>
struct LayerCacheT {
  TensorT<Real> input;     // conv input
  TensorT<Real> conv_out;  // batchnorm input
  TensorT<Real> bn_out;    // ELU input
  std::vector<size_t> argmax;
  BnStats stats;
  int pool_oh = 0, pool_ow = 0;
};

/// Reverse of batchnorm in train mode (population variance).
template <class Real>
void bn_backward(const TensorT<Real>& x, const BnStats& stats, const LayerParamsT<Real>& lp,
                 const TensorT<Real>& dy, TensorT<Real>& dx, std::vector<Real>& dgamma,
                 std::vector<Real>& dbeta) {
  const size_t plane = x.plane();
  const double m = double(size_t(x.b) * plane);
  dx = TensorT<Real>(x.b, x.c, x.h, x.w);
  dgamma.assign(size_t(x.c), Real(0));
  dbeta.assign(size_t(x.c), Real(0));
  for (int ci = 0; ci < x.c; ++ci) {
    const double mean = stats.mean[size_t(ci)];
    const double inv_std = 1.0 / std::sqrt(stats.var[size_t(ci)] + lp.bn_eps);
    const double g = double(lp.bn_gamma[size_t(ci)]);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int bi = 0; bi < x.b; ++bi) {
      const Real* xp = x.plane_ptr(bi, ci);
      const Real* dp = dy.plane_ptr(bi, ci);
      for (size_t i = 0; i < plane; ++i) {
        double xhat = (double(xp[i]) - mean) * inv_std;
        sum_dy += double(dp[i]);
        sum_dy_xhat += double(dp[i]) * xhat;
      }
    }
    dgamma[size_t(ci)] = Real(sum_dy_xhat);
    dbeta[size_t(ci)] = Real(sum_dy);
    const double mean_dy = sum_dy / m;
    const double mean_dy_xhat = sum_dy_xhat / m;
    for (int bi = 0; bi < x.b; ++bi) {
      const Real* xp = x.plane_ptr(bi, ci);
      const Real* dp = dy.plane_ptr(bi, ci);
      Real* ox = dx.plane_ptr(bi, ci);
      for (size_t i = 0; i < plane; ++i) {
        double xhat = (double(xp[i]) - mean) * inv_std;
        ox[i] = Real(g * inv_std * (double(dp[i]) - mean_dy - xhat * mean_dy_xhat));
      }
    }
  }
}

template <class Real>
void conv_backward(const TensorT<Real>& in, const TensorT<Real>& w, const TensorT<Real>& dout,
                   TensorT<Real>& din, std::vector<Real>& dw, std::vector<Real>& db) {
  const int H = in.h, W = in.w, kh = w.h, kw = w.w;
  const int cy = kh / 2, cx = kw / 2;
  dw.assign(w.size(), Real(0));
  db.assign(size_t(w.b), Real(0));
  din = TensorT<Real>(in.b, in.c, H, W);

  for (int bi = 0; bi < in.b; ++bi) {
    for (int oc = 0; oc < w.b; ++oc) {
      const Real* dp = dout.plane_ptr(bi, oc);
      double bias_acc = 0.0;
      for (size_t i = 0; i < dout.plane(); ++i) bias_acc += double(dp[i]);
      db[size_t(oc)] += Real(bias_acc);

      for (int ic = 0; ic < in.c; ++ic) {
        const Real* ip = in.plane_ptr(bi, ic);
        Real* gp = din.plane_ptr(bi, ic);
        for (int ky = 0; ky < kh; ++ky) {
          const int dy = ky - cy;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          for (int kx = 0; kx < kw; ++kx) {
            const int dx = kx - cx;
            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
            // dW[oc,ic,ky,kx] = sum_{y,x} dout[y,x] * in[y+dy, x+dx]
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
              const Real* src = ip + size_t(y + dy) * W + dx;
              const Real* d = dp + size_t(y) * W;
              for (int x = x0; x < x1; ++x) acc += double(d[x]) * double(src[x]);
            }
            size_t widx = ((size_t(oc) * w.c + ic) * kh + ky) * kw + kx;
            dw[widx] += Real(acc);
            // dIn[y+dy, x+dx] += W * dout[y,x]
            const Real wv = w.data[widx];
            if (wv != Real(0)) {
              for (int y = y0; y < y1; ++y) {
                Real* gi = gp + size_t(y + dy) * W + dx;
                const Real* d = dp + size_t(y) * W;
                for (int x = x0; x < x1; ++x) gi[x] += wv * d[x];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Exact reverse-mode gradients of mean BCE over a training batch; runs its
/// own cached forward pass with batch statistics. Running stats are updated
/// (the training side effect) unless update_running is false.
/// Requires model.mode == train.
template <class Real>
GradientsT<Real> backward(ModelStateT<Real>& m, const TensorT<Real>& input, const Mat& targets,
                          bool update_running = true) {
  if (m.mode != Mode::train) raise(Errc::invalid_argument, "backward requires train mode");
  if (targets.rows != input.b || targets.cols != m.spec.n_outputs)
    raise(Errc::shape_mismatch, "targets shape");

  const int L = m.spec.n_layers;
  const int B = input.b, C = m.spec.channels, O = m.spec.n_outputs;

  // Cached forward in train mode.
  std::vector<detail::LayerCacheT<Real>> caches(size_t(L));
  TensorT<Real> x = input;
  for (int l = 0; l < L; ++l) {
    auto& cache = caches[size_t(l)];
    auto& lp = m.layers[size_t(l)];
    cache.input = x;
    cache.conv_out = conv2d_same(x, lp.conv_w, std::span<const Real>(lp.conv_b));
    cache.bn_out = batchnorm(cache.conv_out, lp, Mode::train, &cache.stats);
    TensorT<Real> act = elu(cache.bn_out);
    auto [ph, pw] = m.spec.pool_schedule[size_t(l)];
    x = maxpool(act, ph, pw, &cache.argmax);
    cache.pool_oh = x.h;
    cache.pool_ow = x.w;
    if (update_running) bn_update_running(lp, cache.stats);
  }
  std::vector<Real> head_in = global_average_pool(x);
  std::vector<Real> logits;
  detail::head_forward(m, head_in, B, logits);

  std::vector<Real> tgt(size_t(B) * O);
  for (int bi = 0; bi < B; ++bi)
    for (int o = 0; o < O; ++o) tgt[size_t(bi) * O + o] = Real(targets.at(bi, o));

  GradientsT<Real> grads;
  grads.loss = bce_with_logits(std::span<const Real>(logits), std::span<const Real>(tgt));

  // d loss / d logits for mean BCE: (sigmoid(z) - y) / N.
  const double inv_n = 1.0 / double(size_t(B) * O);
  std::vector<Real> dlogits(size_t(B) * O);
  for (size_t i = 0; i < dlogits.size(); ++i) {
    double z = double(logits[i]);
    double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    dlogits[i] = Real((s - double(tgt[i])) * inv_n);
  }

  // Head gradients.
  std::vector<Real> d_head_w(size_t(O) * C, Real(0)), d_head_b(size_t(O), Real(0));
  std::vector<Real> dh(size_t(B) * C, Real(0));
  for (int o = 0; o < O; ++o) {
    double db_acc = 0.0;
    for (int bi = 0; bi < B; ++bi) db_acc += double(dlogits[size_t(bi) * O + o]);
    d_head_b[size_t(o)] = Real(db_acc);
    for (int ci = 0; ci < C; ++ci) {
      double acc = 0.0;
      for (int bi = 0; bi < B; ++bi)
        acc += double(dlogits[size_t(bi) * O + o]) * double(head_in[size_t(bi) * C + ci]);
      d_head_w[size_t(o) * C + ci] = Real(acc);
    }
  }
  for (int bi = 0; bi < B; ++bi)
    for (int ci = 0; ci < C; ++ci) {
      double acc = 0.0;
      for (int o = 0; o < O; ++o)
        acc += double(dlogits[size_t(bi) * O + o]) * double(m.head_w[size_t(o) * C + ci]);
      dh[size_t(bi) * C + ci] = Real(acc);
    }

  // Through the final global average pool.
  TensorT<Real> dpool(x.b, x.c, x.h, x.w);
  const double inv_plane = 1.0 / double(x.plane());
  for (int bi = 0; bi < B; ++bi)
    for (int ci = 0; ci < C; ++ci) {
      Real v = Real(double(dh[size_t(bi) * C + ci]) * inv_plane);
      Real* p = dpool.plane_ptr(bi, ci);
      std::fill(p, p + dpool.plane(), v);
    }

  // Layer-by-layer reverse sweep.
  std::vector<std::vector<Real>> layer_dw(size_t(L)), layer_db(size_t(L)), layer_dgamma(size_t(L)),
      layer_dbeta(size_t(L));
  for (int l = L - 1; l >= 0; --l) {
    auto& cache = caches[size_t(l)];
    auto& lp = m.layers[size_t(l)];

    // Max pool: scatter into the activation gradient.
    TensorT<Real> dact(cache.conv_out.b, cache.conv_out.c, cache.conv_out.h, cache.conv_out.w);
    for (size_t i = 0; i < dpool.size(); ++i) dact.data[cache.argmax[i]] += dpool.data[i];

    // ELU.
    for (size_t i = 0; i < dact.size(); ++i) {
      Real pre = cache.bn_out.data[i];
      if (pre <= Real(0)) dact.data[i] = Real(double(dact.data[i]) * std::exp(double(pre)));
    }

    TensorT<Real> dconv_out;
    detail::bn_backward(cache.conv_out, cache.stats, lp, dact, dconv_out, layer_dgamma[size_t(l)],
                        layer_dbeta[size_t(l)]);

    TensorT<Real> dinput;
    detail::conv_backward(cache.input, lp.conv_w, dconv_out, dinput, layer_dw[size_t(l)],
                          layer_db[size_t(l)]);
    dpool = std::move(dinput);
  }

  for (int l = 0; l < L; ++l) {
    grads.g.push_back(std::move(layer_dw[size_t(l)]));
    grads.g.push_back(std::move(layer_db[size_t(l)]));
    grads.g.push_back(std::move(layer_dgamma[size_t(l)]));
    grads.g.push_back(std::move(layer_dbeta[size_t(l)]));
  }
  grads.g.push_back(std::move(d_head_w));
  grads.g.push_back(std::move(d_head_b));
  return grads;
}

// ---------------------------------------------------------------------------
// ADAM
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class Real>
struct AdamStateT {
  AdamConfig cfg;
  long step_count = 0;
  std::vector<std::vector<Real>> m, v;  // per parameter group
};

/// One bias-corrected update of a single parameter group. t is 1-based.
template <class Real>
void adam_update_inplace(std::span<Real> p, std::span<const Real> g, std::vector<Real>& m,
                         std::vector<Real>& v, long t, const AdamConfig& cfg) {
  if (p.size() != g.size()) raise(Errc::shape_mismatch, "adam: param/grad size");
  if (m.size() != p.size()) m.assign(p.size(), Real(0));
  if (v.size() != p.size()) v.assign(p.size(), Real(0));
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
  for (size_t i = 0; i < p.size(); ++i) {
    double gi = double(g[i]);
    double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
    double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
    m[i] = Real(mi);
    v[i] = Real(vi);
    p[i] = Real(double(p[i]) - cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
  }
}

/// Apply one ADAM step to every trainable parameter group of the model.
template <class Real>
void adam_step(ModelStateT<Real>& model, const GradientsT<Real>& grads, AdamStateT<Real>& st) {
  auto params = trainable_params(model);
  if (grads.g.size() != params.size()) raise(Errc::shape_mismatch, "adam: gradient group count");
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), {});
    st.v.assign(params.size(), {});
  }
  ++st.step_count;
  for (size_t k = 0; k < params.size(); ++k) {
    adam_update_inplace(std::span<Real>(*params[k].values), std::span<const Real>(grads.g[k]),
                        st.m[k], st.v[k], st.step_count, st.cfg);
  }
}

// ---------------------------------------------------------------------------
// Source-task training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 5;
  int batch_size = 8;
  AdamConfig adam;
  uint32_t seed = 0;
  bool shuffle = true;
};

namespace detail {

template <class Real>
TensorT<Real> stack_batch(const std::vector<TensorT<Real>>& inputs, const std::vector<int>& idx) {
  const auto& first = inputs[size_t(idx[0])];
  TensorT<Real> out(int(idx.size()), first.c, first.h, first.w);
  const size_t stride = first.size();
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& t = inputs[size_t(idx[i])];
    if (t.size() != stride) raise(Errc::shape_mismatch, "inconsistent sample shapes");
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + i * stride);
  }
  return out;
}

}  // namespace detail

/// Mini-batch training with ADAM. Shuffling is deterministic per
/// (seed, epoch). Returns the loss trace: entry 0 is the mean loss at
/// initialization (no updates), entry e is the mean training loss of epoch e.
/// Trailing batches of size 1 are skipped (batchnorm needs batch >= 2).
template <class Real>
std::vector<double> train_source(ModelStateT<Real>& model,
                                 const std::vector<TensorT<Real>>& inputs, const Mat& targets,
                                 const TrainConfig& cfg) {
  if (inputs.empty()) raise(Errc::empty_input, "empty dataset");
  if (int(inputs.size()) != targets.rows) raise(Errc::shape_mismatch, "inputs vs targets rows");
  if (cfg.batch_size < 2) raise(Errc::invalid_argument, "batch_size must be >= 2");

  Mode saved = model.mode;
  model.mode = Mode::train;
  AdamStateT<Real> opt;
  opt.cfg = cfg.adam;

  const int n = int(inputs.size());
  auto take_targets = [&](const std::vector<int>& idx) {
    Mat t(int(idx.size()), targets.cols);
    for (size_t i = 0; i < idx.size(); ++i)
      for (int c = 0; c < targets.cols; ++c) t.at(int(i), c) = targets.at(idx[i], c);
    return t;
  };

  auto epoch_pass = [&](uint32_t epoch, bool update) -> double {
    std::vector<int> order(size_t(n));
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;
    if (cfg.shuffle && update) {
      std::mt19937 gen(mix_seed(cfg.seed, epoch));
      deterministic_shuffle(order, gen);
    }
    double loss_sum = 0.0;
    long counted = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      int end = std::min(n, start + cfg.batch_size);
      if (end - start < 2) continue;  // batchnorm constraint
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      TensorT<Real> batch = detail::stack_batch(inputs, idx);
      Mat batch_targets = take_targets(idx);
      GradientsT<Real> grads = backward(model, batch, batch_targets, /*update_running=*/update);
      if (update) adam_step(model, grads, opt);
      loss_sum += grads.loss * double(end - start);
      counted += end - start;
    }
    return counted > 0 ? loss_sum / double(counted) : 0.0;
  };

  std::vector<double> trace;
  trace.push_back(epoch_pass(0, /*update=*/false));  // initialization loss
  for (int e = 1; e <= cfg.epochs; ++e) trace.push_back(epoch_pass(uint32_t(e), true));

  model.mode = saved;
  return trace;
}

}  // namespace cnf
