#pragma once

// Layer kernels and the training workspace behind the EEGNet model. Internal
// to the library; tests reach them through eegnet_kernels.hpp.

#include <cstdint>
#include <vector>

#include "drowsy/eegnet.hpp"
#include "drowsy/rng.hpp"

namespace drowsy::eegnet::detail {

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

// x: n x C x T, w: F x C spatial filters, out: n x F x T.
void conv_spatial_forward(const double* x, int n, int C, int T,
                          const double* w, const double* b, int F,
                          double* out);
void conv_spatial_backward(const double* x, const double* w,
                           const double* dout, int n, int C, int T, int F,
                           double* dx, double* dw, double* db);

// Same-padded 2-D convolution; pad splits (k-1)/2 before, rest after.
// x: n x IC x H x W, w: OC x IC x KH x KW, out: n x OC x H x W.
void conv2d_same_forward(const double* x, int n, int IC, int H, int W,
                         const double* w, const double* b, int OC, int KH,
                         int KW, double* out);
void conv2d_same_backward_input(const double* w, const double* dout, int n,
                                int IC, int H, int W, int OC, int KH, int KW,
                                double* dx);
void conv2d_same_backward_params(const double* x, const double* dout, int n,
                                 int IC, int H, int W, int OC, int KH, int KW,
                                 double* dw, double* db);

// Per-feature-map batch normalization over n x F x S activations.
void batchnorm_forward_train(const double* x, int n, int F, int S,
                             const double* gamma, const double* beta,
                             double* xhat, double* y, double* batch_mean,
                             double* batch_var);
void batchnorm_forward_eval(const double* x, int n, int F, int S,
                            const double* gamma, const double* beta,
                            const double* run_mean, const double* run_var,
                            double* y);
void batchnorm_backward(const double* xhat, const double* dy, int n, int F,
                        int S, const double* gamma, const double* batch_var,
                        double* dx, double* dgamma, double* dbeta);

// Non-overlapping max pooling with floor semantics; argmax keeps the flat
// (h, w) offset of the first maximum for the backward pass.
void maxpool_forward(const double* x, int n, int F, int H, int W, int ph,
                     int pw, double* out, std::int32_t* argmax);
void maxpool_backward(const double* dout, const std::int32_t* argmax, int n,
                      int F, int H, int W, int ph, int pw, double* dx);

// Inverted dropout, in place; mask records kept elements.
void dropout_forward(double* x, std::size_t count, double p,
                     const CounterRng& rng, std::uint8_t* mask);
void dropout_backward(double* dx, const std::uint8_t* mask, std::size_t count,
                      double p);

struct BatchStats {
  std::vector<double> mean1, var1, mean2, var2, mean3, var3;
};

// All intermediate activations for one batch; reused across steps.
struct Workspace {
  int n = 0;
  std::vector<double> xhat1, drop1;          // n x f1 x T
  std::vector<double> conv2_out, xhat2;      // n x f2 x f1 x T
  std::vector<double> pool2_out, drop2;      // n x f2 x h2 x w2
  std::vector<std::int32_t> argmax2;
  std::vector<double> conv3_out, xhat3;      // n x f3 x h2 x w2
  std::vector<double> pool3_out, drop3;      // n x f3 x h3 x w3
  std::vector<std::int32_t> argmax3;
  std::vector<double> pred;                  // n
  std::vector<std::uint8_t> mask1, mask2, mask3;
  std::vector<double> ga, gb;                // gradient ping-pong buffers
  BatchStats stats;

  void resize(const EegNetConfig& cfg, const ParamLayout& L, int batch);
};

// Train-mode forward pass with dropout keyed by `key`; fills ws. Returns
// predictions in ws.pred.
void forward_train(const EegNetModel& model, const double* x, int n,
                   std::uint64_t key, Workspace& ws);

void forward_eval(const EegNetModel& model, const double* x, int n,
                  Workspace& ws);

// Backward pass after forward_train: MSE loss gradient into `grad`
// (layout-ordered, zeroed here). Returns the batch MSE.
double backward_mse(const EegNetModel& model, const double* x, int n,
                    const double* targets, Workspace& ws, double* grad);

}  // namespace drowsy::eegnet::detail
