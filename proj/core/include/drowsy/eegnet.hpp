#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drowsy/config.hpp"

namespace drowsy::eegnet {

// Compact convolutional regressor over C x T inputs:
//   16 spatial filters (C x 1) -> BatchNorm -> reshape to 1 x 16 x T
//   -> Dropout -> 4 x Conv2D(2,32) same-padded -> BatchNorm -> MaxPool(2,4)
//   -> Dropout -> 4 x Conv2D(8,4) same-padded -> BatchNorm -> MaxPool(2,4)
//   -> Dropout -> Dense -> identity activation.
// Trainable parameters total 16C + T + 841 whenever 16 | T.
struct EegNetConfig {
  int in_channels = 0;  // C
  int in_time = 0;      // T
  double dropout_p = 0.25;
  int conv1_filters = 16;
  int conv2_filters = 4, conv2_kh = 2, conv2_kw = 32;
  int conv3_filters = 4, conv3_kh = 8, conv3_kw = 4;
  int pool_h = 2, pool_w = 4;

  void validate() const;
};

struct Shape3 {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape3&) const = default;
};

struct LayerShape {
  std::string name;
  Shape3 shape;
};

// Output shape of every stage, floor semantics for non-divisible pooling.
std::vector<LayerShape> shape_ledger(const EegNetConfig& cfg);

long param_count(const EegNetConfig& cfg);

enum class Mode { Train, Eval };

// Flat offsets of every trainable tensor, declaration order.
struct ParamLayout {
  std::size_t conv1_w = 0, conv1_b = 0;
  std::size_t bn1_g = 0, bn1_b = 0;
  std::size_t conv2_w = 0, conv2_b = 0;
  std::size_t bn2_g = 0, bn2_b = 0;
  std::size_t conv3_w = 0, conv3_b = 0;
  std::size_t bn3_g = 0, bn3_b = 0;
  std::size_t dense_w = 0, dense_b = 0;
  std::size_t total = 0;
  int h2 = 0, w2 = 0;      // after first pool
  int h3 = 0, w3 = 0;      // after second pool
  int flat = 0;            // dense input size
};

ParamLayout layout_of(const EegNetConfig& cfg);

struct EegNetModel {
  EegNetConfig cfg;
  std::vector<double> params;        // trainable, flat
  std::vector<double> running_mean;  // bn1 | bn2 | bn3 feature maps
  std::vector<double> running_var;
  std::uint64_t seed = 0;  // init seed; also keys dropout/shuffle streams
};

// Seeded uniform fan-in init: weights U(-1/sqrt(fan_in), +1/sqrt(fan_in)),
// biases 0, batch-norm scale 1 / shift 0, running stats (0, 1).
EegNetModel build(const EegNetConfig& cfg, std::uint64_t seed);

// batch: n contiguous C*T samples. Train mode uses batch statistics and the
// dropout mask stream keyed by dropout_key; eval mode uses running statistics
// and no dropout. Neither updates the model.
std::vector<double> forward(const EegNetModel& model, const double* batch,
                            int n, Mode mode, std::uint64_t dropout_key = 0);

// MSE loss and its gradient w.r.t. every trainable parameter, train-mode
// forward with fixed dropout masks. Running stats untouched.
double loss_and_gradients(const EegNetModel& model, const double* batch, int n,
                          std::span<const double> targets,
                          std::uint64_t dropout_key,
                          std::span<double> grad_out);

struct AdamState {
  std::vector<double> m, v;
  long t = 0;

  void init(std::size_t n_params);
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// One optimizer step on `batch`; returns the batch MSE before the update.
// Updates batch-norm running statistics. Throws NumericError on NaN loss.
double train_step(EegNetModel& model, const double* batch, int n,
                  std::span<const double> targets, AdamState& adam,
                  double learning_rate, std::uint64_t step_key);

// Training-data access; lets epochs stream from lazily materialized windows.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual int count() const = 0;
  virtual int channels() const = 0;
  virtual int time_len() const = 0;
  virtual void fill(int sample_idx, double* dst) const = 0;  // C*T doubles
};

// In-memory source over an n x (C*T) matrix.
class DenseSource final : public SampleSource {
 public:
  DenseSource(const Matrix* data, int channels, int time_len)
      : data_(data), c_(channels), t_(time_len) {}
  int count() const override { return data_->rows; }
  int channels() const override { return c_; }
  int time_len() const override { return t_; }
  void fill(int i, double* dst) const override;

 private:
  const Matrix* data_;
  int c_, t_;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean pre-update batch MSE per epoch
  long steps = 0;
  double wall_s = 0.0;
};

// Seeded-shuffle mini-batch training with Adam. Deterministic given the
// model seed; tp.max_steps > 0 caps the total step count.
TrainReport fit(EegNetModel& model, const SampleSource& X,
                std::span<const double> y, const TrainParams& tp);

std::vector<double> predict(const EegNetModel& model, const SampleSource& X,
                            int batch_size = 256);

// Versioned binary container; round-trips bit-exactly including running
// statistics.
void save_model(const EegNetModel& model, const std::filesystem::path& path);
EegNetModel load_model(const std::filesystem::path& path);

}  // namespace drowsy::eegnet
