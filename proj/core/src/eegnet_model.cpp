#include <algorithm>
#include <cmath>
#include <cstring>

#include "drowsy/eegnet.hpp"
#include "drowsy/errors.hpp"
#include "eegnet_internal.hpp"

#include <fmt/format.h>

namespace drowsy::eegnet {

void EegNetConfig::validate() const {
  if (in_channels < 1) throw DataError("eegnet: in_channels must be >= 1");
  if (in_time < 16) throw DataError("eegnet: in_time must be >= 16");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw DataError("eegnet: dropout_p must be in [0, 1)");
  }
  if (conv1_filters < 1 || conv2_filters < 1 || conv3_filters < 1) {
    throw DataError("eegnet: filter counts must be >= 1");
  }
  if (conv2_kh < 1 || conv2_kw < 1 || conv3_kh < 1 || conv3_kw < 1 ||
      pool_h < 1 || pool_w < 1) {
    throw DataError("eegnet: kernel and pool sizes must be >= 1");
  }
  if (conv1_filters % pool_h != 0 || (conv1_filters / pool_h) % pool_h != 0) {
    throw DataError("eegnet: conv1_filters must pool down evenly");
  }
}

ParamLayout layout_of(const EegNetConfig& cfg) {
  cfg.validate();
  const int f1 = cfg.conv1_filters;
  const int f2 = cfg.conv2_filters;
  const int f3 = cfg.conv3_filters;

  ParamLayout L;
  std::size_t off = 0;
  auto take = [&off](std::size_t count) {
    const std::size_t at = off;
    off += count;
    return at;
  };
  L.conv1_w = take(static_cast<std::size_t>(f1) * cfg.in_channels);
  L.conv1_b = take(f1);
  L.bn1_g = take(f1);
  L.bn1_b = take(f1);
  L.conv2_w = take(static_cast<std::size_t>(f2) * cfg.conv2_kh * cfg.conv2_kw);
  L.conv2_b = take(f2);
  L.bn2_g = take(f2);
  L.bn2_b = take(f2);
  L.conv3_w =
      take(static_cast<std::size_t>(f3) * f2 * cfg.conv3_kh * cfg.conv3_kw);
  L.conv3_b = take(f3);
  L.bn3_g = take(f3);
  L.bn3_b = take(f3);

  L.h2 = f1 / cfg.pool_h;
  L.w2 = cfg.in_time / cfg.pool_w;
  L.h3 = L.h2 / cfg.pool_h;
  L.w3 = L.w2 / cfg.pool_w;
  L.flat = f3 * L.h3 * L.w3;
  if (L.w3 < 1) throw DataError("eegnet: in_time too short for two pools");

  L.dense_w = take(L.flat);
  L.dense_b = take(1);
  L.total = off;
  return L;
}

long param_count(const EegNetConfig& cfg) {
  return static_cast<long>(layout_of(cfg).total);
}

std::vector<LayerShape> shape_ledger(const EegNetConfig& cfg) {
  const ParamLayout L = layout_of(cfg);
  std::vector<LayerShape> s;
  s.push_back({"input", {cfg.in_channels, 1, cfg.in_time}});
  s.push_back({"conv1", {cfg.conv1_filters, 1, cfg.in_time}});
  s.push_back({"reshape", {1, cfg.conv1_filters, cfg.in_time}});
  s.push_back({"conv2", {cfg.conv2_filters, cfg.conv1_filters, cfg.in_time}});
  s.push_back({"pool2", {cfg.conv2_filters, L.h2, L.w2}});
  s.push_back({"conv3", {cfg.conv3_filters, L.h2, L.w2}});
  s.push_back({"pool3", {cfg.conv3_filters, L.h3, L.w3}});
  s.push_back({"flatten", {1, 1, L.flat}});
  s.push_back({"dense", {1, 1, 1}});
  return s;
}

EegNetModel build(const EegNetConfig& cfg, std::uint64_t seed) {
  const ParamLayout L = layout_of(cfg);

  EegNetModel model;
  model.cfg = cfg;
  model.seed = seed;
  model.params.assign(L.total, 0.0);

  Rng rng(derive_seed(seed, 0x1217));
  auto uniform_fan_in = [&rng](double* w, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) {
      w[i] = rng.uniform(-bound, bound);
    }
  };

  double* p = model.params.data();
  uniform_fan_in(p + L.conv1_w,
                 static_cast<std::size_t>(cfg.conv1_filters) * cfg.in_channels,
                 cfg.in_channels);
  uniform_fan_in(p + L.conv2_w,
                 static_cast<std::size_t>(cfg.conv2_filters) * cfg.conv2_kh *
                     cfg.conv2_kw,
                 cfg.conv2_kh * cfg.conv2_kw);
  uniform_fan_in(p + L.conv3_w,
                 static_cast<std::size_t>(cfg.conv3_filters) *
                     cfg.conv2_filters * cfg.conv3_kh * cfg.conv3_kw,
                 cfg.conv2_filters * cfg.conv3_kh * cfg.conv3_kw);
  uniform_fan_in(p + L.dense_w, static_cast<std::size_t>(L.flat), L.flat);

  // Batch-norm scale 1, shift 0; biases stay 0.
  const int f1 = cfg.conv1_filters, f2 = cfg.conv2_filters,
            f3 = cfg.conv3_filters;
  std::fill(p + L.bn1_g, p + L.bn1_g + f1, 1.0);
  std::fill(p + L.bn2_g, p + L.bn2_g + f2, 1.0);
  std::fill(p + L.bn3_g, p + L.bn3_g + f3, 1.0);

  model.running_mean.assign(f1 + f2 + f3, 0.0);
  model.running_var.assign(f1 + f2 + f3, 1.0);
  return model;
}

namespace detail {

void conv_spatial_forward(const double* x, int n, int C, int T,
                          const double* w, const double* b, int F,
                          double* out) {
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * C * T;
    double* oi = out + static_cast<std::size_t>(i) * F * T;
    for (int f = 0; f < F; ++f) {
      double* of = oi + static_cast<std::size_t>(f) * T;
      std::fill(of, of + T, b[f]);
      const double* wf = w + static_cast<std::size_t>(f) * C;
      for (int c = 0; c < C; ++c) {
        const double wv = wf[c];
        const double* xc = xi + static_cast<std::size_t>(c) * T;
        for (int t = 0; t < T; ++t) of[t] += wv * xc[t];
      }
    }
  }
}

void conv_spatial_backward(const double* x, const double* w,
                           const double* dout, int n, int C, int T, int F,
                           double* dx, double* dw, double* db) {
  std::fill(dx, dx + static_cast<std::size_t>(n) * C * T, 0.0);
  std::fill(dw, dw + static_cast<std::size_t>(F) * C, 0.0);
  std::fill(db, db + F, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * C * T;
    const double* gi = dout + static_cast<std::size_t>(i) * F * T;
    double* dxi = dx + static_cast<std::size_t>(i) * C * T;
    for (int f = 0; f < F; ++f) {
      const double* gf = gi + static_cast<std::size_t>(f) * T;
      double bsum = 0.0;
      for (int t = 0; t < T; ++t) bsum += gf[t];
      db[f] += bsum;
      const double* wf = w + static_cast<std::size_t>(f) * C;
      double* dwf = dw + static_cast<std::size_t>(f) * C;
      for (int c = 0; c < C; ++c) {
        const double* xc = xi + static_cast<std::size_t>(c) * T;
        double* dxc = dxi + static_cast<std::size_t>(c) * T;
        const double wv = wf[c];
        double acc = 0.0;
        for (int t = 0; t < T; ++t) {
          acc += gf[t] * xc[t];
          dxc[t] += wv * gf[t];
        }
        dwf[c] += acc;
      }
    }
  }
}

void conv2d_same_forward(const double* x, int n, int IC, int H, int W,
                         const double* w, const double* b, int OC, int KH,
                         int KW, double* out) {
  const int pt = (KH - 1) / 2;
  const int pl = (KW - 1) / 2;
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * IC * in_plane;
    double* oi = out + static_cast<std::size_t>(i) * OC * in_plane;
    for (int oc = 0; oc < OC; ++oc) {
      double* op = oi + static_cast<std::size_t>(oc) * in_plane;
      std::fill(op, op + in_plane, b[oc]);
    }
    for (int ic = 0; ic < IC; ++ic) {
      const double* xp = xi + static_cast<std::size_t>(ic) * in_plane;
      for (int oc = 0; oc < OC; ++oc) {
        double* op = oi + static_cast<std::size_t>(oc) * in_plane;
        const double* wk = w + ((static_cast<std::size_t>(oc) * IC + ic) * KH) * KW;
        for (int h = 0; h < H; ++h) {
          double* orow = op + static_cast<std::size_t>(h) * W;
          for (int dh = 0; dh < KH; ++dh) {
            const int hin = h + dh - pt;
            if (hin < 0 || hin >= H) continue;
            const double* xrow = xp + static_cast<std::size_t>(hin) * W;
            const double* wrow = wk + static_cast<std::size_t>(dh) * KW;
            for (int dw = 0; dw < KW; ++dw) {
              const double wv = wrow[dw];
              const int shift = dw - pl;
              const int w0 = std::max(0, -shift);
              const int w1 = std::min(W, W - shift);
              const double* xs = xrow + shift;
              for (int t = w0; t < w1; ++t) orow[t] += wv * xs[t];
            }
          }
        }
      }
    }
  }
}

void conv2d_same_backward_input(const double* w, const double* dout, int n,
                                int IC, int H, int W, int OC, int KH, int KW,
                                double* dx) {
  const int pt = (KH - 1) / 2;
  const int pl = (KW - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::fill(dx, dx + static_cast<std::size_t>(n) * IC * plane, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* gi = dout + static_cast<std::size_t>(i) * OC * plane;
    double* dxi = dx + static_cast<std::size_t>(i) * IC * plane;
    for (int ic = 0; ic < IC; ++ic) {
      double* dxp = dxi + static_cast<std::size_t>(ic) * plane;
      for (int oc = 0; oc < OC; ++oc) {
        const double* gp = gi + static_cast<std::size_t>(oc) * plane;
        const double* wk =
            w + ((static_cast<std::size_t>(oc) * IC + ic) * KH) * KW;
        for (int h = 0; h < H; ++h) {
          // dx[h] accumulates from dout rows that read x row h.
          for (int dh = 0; dh < KH; ++dh) {
            const int hout = h - dh + pt;
            if (hout < 0 || hout >= H) continue;
            const double* grow = gp + static_cast<std::size_t>(hout) * W;
            double* dxrow = dxp + static_cast<std::size_t>(h) * W;
            const double* wrow = wk + static_cast<std::size_t>(dh) * KW;
            for (int dw = 0; dw < KW; ++dw) {
              const double wv = wrow[dw];
              const int shift = dw - pl;  // x index = out index + shift
              const int t0 = std::max(0, shift);
              const int t1 = std::min(W, W + shift);
              const double* gs = grow - shift;
              for (int t = t0; t < t1; ++t) dxrow[t] += wv * gs[t];
            }
          }
        }
      }
    }
  }
}

void conv2d_same_backward_params(const double* x, const double* dout, int n,
                                 int IC, int H, int W, int OC, int KH, int KW,
                                 double* dw, double* db) {
  const int pt = (KH - 1) / 2;
  const int pl = (KW - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::fill(dw, dw + static_cast<std::size_t>(OC) * IC * KH * KW, 0.0);
  std::fill(db, db + OC, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * IC * plane;
    const double* gi = dout + static_cast<std::size_t>(i) * OC * plane;
    for (int oc = 0; oc < OC; ++oc) {
      const double* gp = gi + static_cast<std::size_t>(oc) * plane;
      double bsum = 0.0;
      for (std::size_t s = 0; s < plane; ++s) bsum += gp[s];
      db[oc] += bsum;
      for (int ic = 0; ic < IC; ++ic) {
        const double* xp = xi + static_cast<std::size_t>(ic) * plane;
        double* wk = dw + ((static_cast<std::size_t>(oc) * IC + ic) * KH) * KW;
        for (int dh = 0; dh < KH; ++dh) {
          double* wrow = wk + static_cast<std::size_t>(dh) * KW;
          for (int h = 0; h < H; ++h) {
            const int hin = h + dh - pt;
            if (hin < 0 || hin >= H) continue;
            const double* grow = gp + static_cast<std::size_t>(h) * W;
            const double* xrow = xp + static_cast<std::size_t>(hin) * W;
            for (int dw_i = 0; dw_i < KW; ++dw_i) {
              const int shift = dw_i - pl;
              const int t0 = std::max(0, -shift);
              const int t1 = std::min(W, W - shift);
              const double* xs = xrow + shift;
              double acc = 0.0;
              for (int t = t0; t < t1; ++t) acc += grow[t] * xs[t];
              wrow[dw_i] += acc;
            }
          }
        }
      }
    }
  }
}

void batchnorm_forward_train(const double* x, int n, int F, int S,
                             const double* gamma, const double* beta,
                             double* xhat, double* y, double* batch_mean,
                             double* batch_var) {
  const std::size_t stride = static_cast<std::size_t>(F) * S;
  const double count = static_cast<double>(n) * S;
  for (int f = 0; f < F; ++f) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* xr = x + i * stride + static_cast<std::size_t>(f) * S;
      for (int s = 0; s < S; ++s) sum += xr[s];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* xr = x + i * stride + static_cast<std::size_t>(f) * S;
      for (int s = 0; s < S; ++s) {
        const double d = xr[s] - mu;
        sq += d * d;
      }
    }
    const double var = sq / count;  // biased
    batch_mean[f] = mu;
    batch_var[f] = var;
    const double inv = 1.0 / std::sqrt(var + kBnEps);
    const double g = gamma[f], b = beta[f];
    for (int i = 0; i < n; ++i) {
      const double* xr = x + i * stride + static_cast<std::size_t>(f) * S;
      double* xh = xhat + i * stride + static_cast<std::size_t>(f) * S;
      double* yr = y + i * stride + static_cast<std::size_t>(f) * S;
      for (int s = 0; s < S; ++s) {
        const double v = (xr[s] - mu) * inv;
        xh[s] = v;
        yr[s] = g * v + b;
      }
    }
  }
}

void batchnorm_forward_eval(const double* x, int n, int F, int S,
                            const double* gamma, const double* beta,
                            const double* run_mean, const double* run_var,
                            double* y) {
  const std::size_t stride = static_cast<std::size_t>(F) * S;
  for (int f = 0; f < F; ++f) {
    const double inv = 1.0 / std::sqrt(run_var[f] + kBnEps);
    const double g = gamma[f], b = beta[f], mu = run_mean[f];
    for (int i = 0; i < n; ++i) {
      const double* xr = x + i * stride + static_cast<std::size_t>(f) * S;
      double* yr = y + i * stride + static_cast<std::size_t>(f) * S;
      for (int s = 0; s < S; ++s) yr[s] = g * (xr[s] - mu) * inv + b;
    }
  }
}

void batchnorm_backward(const double* xhat, const double* dy, int n, int F,
                        int S, const double* gamma, const double* batch_var,
                        double* dx, double* dgamma, double* dbeta) {
  const std::size_t stride = static_cast<std::size_t>(F) * S;
  const double count = static_cast<double>(n) * S;
  for (int f = 0; f < F; ++f) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* dyr = dy + i * stride + static_cast<std::size_t>(f) * S;
      const double* xh = xhat + i * stride + static_cast<std::size_t>(f) * S;
      for (int s = 0; s < S; ++s) {
        sum_dy += dyr[s];
        sum_dy_xhat += dyr[s] * xh[s];
      }
    }
    dgamma[f] = sum_dy_xhat;
    dbeta[f] = sum_dy;
    const double inv = 1.0 / std::sqrt(batch_var[f] + kBnEps);
    const double g = gamma[f];
    // dx = (g inv / N) * (N dy - sum(dy) - xhat * sum(dy xhat))
    const double scale = g * inv / count;
    for (int i = 0; i < n; ++i) {
      const double* dyr = dy + i * stride + static_cast<std::size_t>(f) * S;
      const double* xh = xhat + i * stride + static_cast<std::size_t>(f) * S;
      double* dxr = dx + i * stride + static_cast<std::size_t>(f) * S;
      for (int s = 0; s < S; ++s) {
        dxr[s] = scale * (count * dyr[s] - sum_dy - xh[s] * sum_dy_xhat);
      }
    }
  }
}

void maxpool_forward(const double* x, int n, int F, int H, int W, int ph,
                     int pw, double* out, std::int32_t* argmax) {
  const int OH = H / ph, OW = W / pw;
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(OH) * OW;
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < F; ++f) {
      const double* xp =
          x + (static_cast<std::size_t>(i) * F + f) * in_plane;
      double* op = out + (static_cast<std::size_t>(i) * F + f) * out_plane;
      std::int32_t* ap =
          argmax + (static_cast<std::size_t>(i) * F + f) * out_plane;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          const int h0 = oh * ph, w0 = ow * pw;
          double best = xp[static_cast<std::size_t>(h0) * W + w0];
          std::int32_t best_at = h0 * W + w0;
          for (int dh = 0; dh < ph; ++dh) {
            const double* row = xp + static_cast<std::size_t>(h0 + dh) * W;
            for (int dw = 0; dw < pw; ++dw) {
              if (row[w0 + dw] > best) {
                best = row[w0 + dw];
                best_at = (h0 + dh) * W + (w0 + dw);
              }
            }
          }
          op[static_cast<std::size_t>(oh) * OW + ow] = best;
          ap[static_cast<std::size_t>(oh) * OW + ow] = best_at;
        }
      }
    }
  }
}

void maxpool_backward(const double* dout, const std::int32_t* argmax, int n,
                      int F, int H, int W, int ph, int pw, double* dx) {
  const int OH = H / ph, OW = W / pw;
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(OH) * OW;
  std::fill(dx, dx + static_cast<std::size_t>(n) * F * in_plane, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < F; ++f) {
      const double* gp =
          dout + (static_cast<std::size_t>(i) * F + f) * out_plane;
      const std::int32_t* ap =
          argmax + (static_cast<std::size_t>(i) * F + f) * out_plane;
      double* dxp = dx + (static_cast<std::size_t>(i) * F + f) * in_plane;
      for (std::size_t s = 0; s < out_plane; ++s) dxp[ap[s]] += gp[s];
    }
  }
}

void dropout_forward(double* x, std::size_t count, double p,
                     const CounterRng& rng, std::uint8_t* mask) {
  if (p <= 0.0) {
    std::fill(mask, mask + count, std::uint8_t{1});
    return;
  }
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < count; ++i) {
    const bool keep = rng.uniform_at(i) >= p;
    mask[i] = keep ? 1 : 0;
    x[i] = keep ? x[i] * scale : 0.0;
  }
}

void dropout_backward(double* dx, const std::uint8_t* mask, std::size_t count,
                      double p) {
  const double scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;
  for (std::size_t i = 0; i < count; ++i) {
    dx[i] = mask[i] ? dx[i] * scale : 0.0;
  }
}

void Workspace::resize(const EegNetConfig& cfg, const ParamLayout& L,
                       int batch) {
  n = batch;
  const std::size_t nb = static_cast<std::size_t>(batch);
  const int T = cfg.in_time;
  const int f1 = cfg.conv1_filters, f2 = cfg.conv2_filters,
            f3 = cfg.conv3_filters;

  const std::size_t s1 = nb * f1 * T;
  const std::size_t s2 = nb * f2 * f1 * T;
  const std::size_t sp2 = nb * f2 * L.h2 * L.w2;
  const std::size_t s3 = nb * f3 * L.h2 * L.w2;
  const std::size_t sp3 = nb * f3 * L.h3 * L.w3;

  xhat1.resize(s1);
  drop1.resize(s1);
  mask1.resize(s1);
  conv2_out.resize(s2);
  xhat2.resize(s2);
  pool2_out.resize(sp2);
  drop2.resize(sp2);
  mask2.resize(sp2);
  argmax2.resize(sp2);
  conv3_out.resize(s3);
  xhat3.resize(s3);
  pool3_out.resize(sp3);
  drop3.resize(sp3);
  mask3.resize(sp3);
  argmax3.resize(sp3);
  pred.resize(nb);
  ga.resize(std::max({s1, s2, s3}));
  gb.resize(std::max({s1, s2, s3}));
  stats.mean1.resize(f1);
  stats.var1.resize(f1);
  stats.mean2.resize(f2);
  stats.var2.resize(f2);
  stats.mean3.resize(f3);
  stats.var3.resize(f3);
}

namespace {

// Dropout mask streams get distinct keys per layer.
constexpr std::uint64_t kDropLayer1 = 0xD1;
constexpr std::uint64_t kDropLayer2 = 0xD2;
constexpr std::uint64_t kDropLayer3 = 0xD3;

}  // namespace

void forward_train(const EegNetModel& model, const double* x, int n,
                   std::uint64_t key, Workspace& ws) {
  const EegNetConfig& cfg = model.cfg;
  const ParamLayout L = layout_of(cfg);
  ws.resize(cfg, L, n);
  const double* P = model.params.data();
  const int T = cfg.in_time;
  const int f1 = cfg.conv1_filters, f2 = cfg.conv2_filters,
            f3 = cfg.conv3_filters;

  // Layer 1: spatial conv, batch norm (train), dropout. The 16 x 1 x T maps
  // reshape to 1 x 16 x T without data movement.
  std::vector<double>& conv1_out = ws.ga;  // transient
  conv_spatial_forward(x, n, cfg.in_channels, T, P + L.conv1_w, P + L.conv1_b,
                       f1, conv1_out.data());
  batchnorm_forward_train(conv1_out.data(), n, f1, T, P + L.bn1_g, P + L.bn1_b,
                          ws.xhat1.data(), ws.drop1.data(),
                          ws.stats.mean1.data(), ws.stats.var1.data());
  dropout_forward(ws.drop1.data(), ws.drop1.size(), cfg.dropout_p,
                  CounterRng{derive_seed(key, kDropLayer1)}, ws.mask1.data());

  // Layer 2.
  conv2d_same_forward(ws.drop1.data(), n, 1, f1, T, P + L.conv2_w,
                      P + L.conv2_b, f2, cfg.conv2_kh, cfg.conv2_kw,
                      ws.conv2_out.data());
  std::vector<double>& bn2_out = ws.gb;  // transient
  batchnorm_forward_train(ws.conv2_out.data(), n, f2, f1 * T, P + L.bn2_g,
                          P + L.bn2_b, ws.xhat2.data(), bn2_out.data(),
                          ws.stats.mean2.data(), ws.stats.var2.data());
  maxpool_forward(bn2_out.data(), n, f2, f1, T, cfg.pool_h, cfg.pool_w,
                  ws.pool2_out.data(), ws.argmax2.data());
  std::copy(ws.pool2_out.begin(), ws.pool2_out.end(), ws.drop2.begin());
  dropout_forward(ws.drop2.data(), ws.drop2.size(), cfg.dropout_p,
                  CounterRng{derive_seed(key, kDropLayer2)}, ws.mask2.data());

  // Layer 3.
  conv2d_same_forward(ws.drop2.data(), n, f2, L.h2, L.w2, P + L.conv3_w,
                      P + L.conv3_b, f3, cfg.conv3_kh, cfg.conv3_kw,
                      ws.conv3_out.data());
  std::vector<double>& bn3_out = ws.gb;  // transient, reused
  batchnorm_forward_train(ws.conv3_out.data(), n, f3, L.h2 * L.w2,
                          P + L.bn3_g, P + L.bn3_b, ws.xhat3.data(),
                          bn3_out.data(), ws.stats.mean3.data(),
                          ws.stats.var3.data());
  maxpool_forward(bn3_out.data(), n, f3, L.h2, L.w2, cfg.pool_h, cfg.pool_w,
                  ws.pool3_out.data(), ws.argmax3.data());
  std::copy(ws.pool3_out.begin(), ws.pool3_out.end(), ws.drop3.begin());
  dropout_forward(ws.drop3.data(), ws.drop3.size(), cfg.dropout_p,
                  CounterRng{derive_seed(key, kDropLayer3)}, ws.mask3.data());

  // Dense head, identity activation.
  const double* dw = P + L.dense_w;
  const double dense_b = P[L.dense_b];
  for (int i = 0; i < n; ++i) {
    const double* fl = ws.drop3.data() + static_cast<std::size_t>(i) * L.flat;
    double s = dense_b;
    for (int j = 0; j < L.flat; ++j) s += dw[j] * fl[j];
    ws.pred[i] = s;
  }
}

void forward_eval(const EegNetModel& model, const double* x, int n,
                  Workspace& ws) {
  const EegNetConfig& cfg = model.cfg;
  const ParamLayout L = layout_of(cfg);
  ws.resize(cfg, L, n);
  const double* P = model.params.data();
  const int T = cfg.in_time;
  const int f1 = cfg.conv1_filters, f2 = cfg.conv2_filters,
            f3 = cfg.conv3_filters;
  const double* rm = model.running_mean.data();
  const double* rv = model.running_var.data();

  conv_spatial_forward(x, n, cfg.in_channels, T, P + L.conv1_w, P + L.conv1_b,
                       f1, ws.ga.data());
  batchnorm_forward_eval(ws.ga.data(), n, f1, T, P + L.bn1_g, P + L.bn1_b, rm,
                         rv, ws.drop1.data());

  conv2d_same_forward(ws.drop1.data(), n, 1, f1, T, P + L.conv2_w,
                      P + L.conv2_b, f2, cfg.conv2_kh, cfg.conv2_kw,
                      ws.conv2_out.data());
  batchnorm_forward_eval(ws.conv2_out.data(), n, f2, f1 * T, P + L.bn2_g,
                         P + L.bn2_b, rm + f1, rv + f1, ws.gb.data());
  maxpool_forward(ws.gb.data(), n, f2, f1, T, cfg.pool_h, cfg.pool_w,
                  ws.drop2.data(), ws.argmax2.data());

  conv2d_same_forward(ws.drop2.data(), n, f2, L.h2, L.w2, P + L.conv3_w,
                      P + L.conv3_b, f3, cfg.conv3_kh, cfg.conv3_kw,
                      ws.conv3_out.data());
  batchnorm_forward_eval(ws.conv3_out.data(), n, f3, L.h2 * L.w2, P + L.bn3_g,
                         P + L.bn3_b, rm + f1 + f2, rv + f1 + f2,
                         ws.gb.data());
  maxpool_forward(ws.gb.data(), n, f3, L.h2, L.w2, cfg.pool_h, cfg.pool_w,
                  ws.drop3.data(), ws.argmax3.data());

  const double* dw = P + L.dense_w;
  const double dense_b = P[L.dense_b];
  for (int i = 0; i < n; ++i) {
    const double* fl = ws.drop3.data() + static_cast<std::size_t>(i) * L.flat;
    double s = dense_b;
    for (int j = 0; j < L.flat; ++j) s += dw[j] * fl[j];
    ws.pred[i] = s;
  }
}

double backward_mse(const EegNetModel& model, const double* x, int n,
                    const double* targets, Workspace& ws, double* grad) {
  const EegNetConfig& cfg = model.cfg;
  const ParamLayout L = layout_of(cfg);
  const double* P = model.params.data();
  const int T = cfg.in_time;
  const int f1 = cfg.conv1_filters, f2 = cfg.conv2_filters,
            f3 = cfg.conv3_filters;

  std::fill(grad, grad + L.total, 0.0);

  double loss = 0.0;
  std::vector<double> dpred(n);
  for (int i = 0; i < n; ++i) {
    const double d = ws.pred[i] - targets[i];
    loss += d * d;
    dpred[i] = 2.0 * d / n;
  }
  loss /= n;

  // Dense.
  std::vector<double>& dflat = ws.ga;
  {
    const double* dw = P + L.dense_w;
    double db = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = dpred[i];
      db += g;
      const double* fl =
          ws.drop3.data() + static_cast<std::size_t>(i) * L.flat;
      double* gw = grad + L.dense_w;
      double* dfl = dflat.data() + static_cast<std::size_t>(i) * L.flat;
      for (int j = 0; j < L.flat; ++j) {
        gw[j] += g * fl[j];
        dfl[j] = g * dw[j];
      }
    }
    grad[L.dense_b] = db;
  }

  const std::size_t sp3 = static_cast<std::size_t>(n) * f3 * L.h3 * L.w3;
  dropout_backward(dflat.data(), ws.mask3.data(), sp3, cfg.dropout_p);

  // Pool 3 -> BN 3 -> conv 3.
  std::vector<double>& dbuf = ws.gb;
  maxpool_backward(dflat.data(), ws.argmax3.data(), n, f3, L.h2, L.w2,
                   cfg.pool_h, cfg.pool_w, dbuf.data());
  batchnorm_backward(ws.xhat3.data(), dbuf.data(), n, f3, L.h2 * L.w2,
                     P + L.bn3_g, ws.stats.var3.data(), ws.ga.data(),
                     grad + L.bn3_g, grad + L.bn3_b);
  conv2d_same_backward_params(ws.drop2.data(), ws.ga.data(), n, f2, L.h2,
                              L.w2, f3, cfg.conv3_kh, cfg.conv3_kw,
                              grad + L.conv3_w, grad + L.conv3_b);
  conv2d_same_backward_input(P + L.conv3_w, ws.ga.data(), n, f2, L.h2, L.w2,
                             f3, cfg.conv3_kh, cfg.conv3_kw, dbuf.data());

  const std::size_t sp2 = static_cast<std::size_t>(n) * f2 * L.h2 * L.w2;
  dropout_backward(dbuf.data(), ws.mask2.data(), sp2, cfg.dropout_p);

  // Pool 2 -> BN 2 -> conv 2.
  maxpool_backward(dbuf.data(), ws.argmax2.data(), n, f2, f1, T, cfg.pool_h,
                   cfg.pool_w, ws.ga.data());
  batchnorm_backward(ws.xhat2.data(), ws.ga.data(), n, f2, f1 * T,
                     P + L.bn2_g, ws.stats.var2.data(), dbuf.data(),
                     grad + L.bn2_g, grad + L.bn2_b);
  conv2d_same_backward_params(ws.drop1.data(), dbuf.data(), n, 1, f1, T, f2,
                              cfg.conv2_kh, cfg.conv2_kw, grad + L.conv2_w,
                              grad + L.conv2_b);
  conv2d_same_backward_input(P + L.conv2_w, dbuf.data(), n, 1, f1, T, f2,
                             cfg.conv2_kh, cfg.conv2_kw, ws.ga.data());

  const std::size_t s1 = static_cast<std::size_t>(n) * f1 * T;
  dropout_backward(ws.ga.data(), ws.mask1.data(), s1, cfg.dropout_p);

  // BN 1 -> conv 1. The conv-1 input gradient is discarded.
  batchnorm_backward(ws.xhat1.data(), ws.ga.data(), n, f1, T, P + L.bn1_g,
                     ws.stats.var1.data(), dbuf.data(), grad + L.bn1_g,
                     grad + L.bn1_b);
  {
    std::vector<double> dx_unused(static_cast<std::size_t>(n) *
                                  cfg.in_channels * T);
    conv_spatial_backward(x, P + L.conv1_w, dbuf.data(), n, cfg.in_channels,
                          T, f1, dx_unused.data(), grad + L.conv1_w,
                          grad + L.conv1_b);
  }

  return loss;
}

}  // namespace detail

std::vector<double> forward(const EegNetModel& model, const double* batch,
                            int n, Mode mode, std::uint64_t dropout_key) {
  thread_local detail::Workspace ws;
  if (mode == Mode::Train) {
    detail::forward_train(model, batch, n, dropout_key, ws);
  } else {
    detail::forward_eval(model, batch, n, ws);
  }
  return ws.pred;
}

double loss_and_gradients(const EegNetModel& model, const double* batch, int n,
                          std::span<const double> targets,
                          std::uint64_t dropout_key,
                          std::span<double> grad_out) {
  if (static_cast<int>(targets.size()) != n) {
    throw DataError("eegnet: target count does not match batch");
  }
  const ParamLayout L = layout_of(model.cfg);
  if (grad_out.size() != L.total) {
    throw DataError("eegnet: gradient buffer size mismatch");
  }
  thread_local detail::Workspace ws;
  detail::forward_train(model, batch, n, dropout_key, ws);
  return detail::backward_mse(model, batch, n, targets.data(), ws,
                              grad_out.data());
}

}  // namespace drowsy::eegnet
