#include <chrono>
#include <cmath>
#include <cstring>

#include "drowsy/eegnet.hpp"
#include "drowsy/errors.hpp"
#include "eegnet_internal.hpp"

#include <fmt/format.h>

namespace drowsy::eegnet {

void AdamState::init(std::size_t n_params) {
  m.assign(n_params, 0.0);
  v.assign(n_params, 0.0);
  t = 0;
}

void DenseSource::fill(int i, double* dst) const {
  std::memcpy(dst, data_->row(i),
              static_cast<std::size_t>(data_->cols) * sizeof(double));
}

namespace {

void update_running_stats(EegNetModel& model,
                          const detail::BatchStats& stats, int batch_count) {
  // Normalization uses the biased batch variance; the running estimate keeps
  // the unbiased one, matching common framework behavior.
  const double mom = detail::kBnMomentum;
  auto update = [&](std::size_t base, const std::vector<double>& mean,
                    const std::vector<double>& var, long count) {
    const double unbias =
        count > 1 ? static_cast<double>(count) / (count - 1) : 1.0;
    for (std::size_t f = 0; f < mean.size(); ++f) {
      model.running_mean[base + f] =
          (1.0 - mom) * model.running_mean[base + f] + mom * mean[f];
      model.running_var[base + f] =
          (1.0 - mom) * model.running_var[base + f] + mom * var[f] * unbias;
    }
  };
  const EegNetConfig& cfg = model.cfg;
  const ParamLayout L = layout_of(cfg);
  const long n1 = static_cast<long>(batch_count) * cfg.in_time;
  const long n2 = static_cast<long>(batch_count) * cfg.conv1_filters * cfg.in_time;
  const long n3 = static_cast<long>(batch_count) * L.h2 * L.w2;
  update(0, stats.mean1, stats.var1, n1);
  update(cfg.conv1_filters, stats.mean2, stats.var2, n2);
  update(cfg.conv1_filters + cfg.conv2_filters, stats.mean3, stats.var3, n3);
}

}  // namespace

double train_step(EegNetModel& model, const double* batch, int n,
                  std::span<const double> targets, AdamState& adam,
                  double learning_rate, std::uint64_t step_key) {
  if (static_cast<int>(targets.size()) != n || n < 1) {
    throw DataError("train_step: target count does not match batch");
  }
  const ParamLayout L = layout_of(model.cfg);
  if (adam.m.size() != L.total) adam.init(L.total);

  thread_local detail::Workspace ws;
  thread_local std::vector<double> grad;
  grad.resize(L.total);

  detail::forward_train(model, batch, n, step_key, ws);
  const double loss =
      detail::backward_mse(model, batch, n, targets.data(), ws, grad.data());
  if (!std::isfinite(loss)) {
    throw NumericError("eegnet: training diverged (non-finite loss)");
  }

  adam.t += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam.t));
  double* p = model.params.data();
  for (std::size_t i = 0; i < L.total; ++i) {
    const double g = grad[i];
    adam.m[i] = kAdamBeta1 * adam.m[i] + (1.0 - kAdamBeta1) * g;
    adam.v[i] = kAdamBeta2 * adam.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double mhat = adam.m[i] / bc1;
    const double vhat = adam.v[i] / bc2;
    p[i] -= learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
  }

  update_running_stats(model, ws.stats, n);
  return loss;
}

TrainReport fit(EegNetModel& model, const SampleSource& X,
                std::span<const double> y, const TrainParams& tp) {
  const int n = X.count();
  if (static_cast<int>(y.size()) != n) {
    throw DataError("fit: label count does not match sample count");
  }
  if (n < tp.batch_size) {
    throw DataError(fmt::format(
        "fit: {} samples but batch size {}", n, tp.batch_size));
  }
  if (X.channels() != model.cfg.in_channels ||
      X.time_len() != model.cfg.in_time) {
    throw DataError("fit: source dimensions do not match the model");
  }
  for (double t : y) {
    if (!std::isfinite(t)) throw DataError("fit: non-finite target");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t sample_len =
      static_cast<std::size_t>(model.cfg.in_channels) * model.cfg.in_time;

  AdamState adam;
  adam.init(model.params.size());

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(derive_seed(model.seed, 0x5A0FF1E));

  std::vector<double> batch_buf(static_cast<std::size_t>(tp.batch_size) *
                                sample_len);
  std::vector<double> batch_y(tp.batch_size);

  TrainReport report;
  bool stop = false;
  for (int e = 0; e < tp.epochs && !stop; ++e) {
    // Fisher-Yates with the portable rng.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(
          shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    long batches = 0;
    for (int start = 0; start < n; start += tp.batch_size) {
      const int nb = std::min(tp.batch_size, n - start);
      for (int b = 0; b < nb; ++b) {
        X.fill(order[start + b], batch_buf.data() + b * sample_len);
        batch_y[b] = y[order[start + b]];
      }
      ++report.steps;
      const std::uint64_t key =
          derive_seed(model.seed, 0xD80, static_cast<std::uint64_t>(report.steps));
      loss_sum += train_step(model, batch_buf.data(), nb,
                             std::span<const double>(batch_y.data(), nb), adam,
                             tp.learning_rate, key);
      ++batches;
      if (tp.max_steps > 0 && report.steps >= tp.max_steps) {
        stop = true;
        break;
      }
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }

  report.wall_s = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  return report;
}

std::vector<double> predict(const EegNetModel& model, const SampleSource& X,
                            int batch_size) {
  const int n = X.count();
  if (X.channels() != model.cfg.in_channels ||
      X.time_len() != model.cfg.in_time) {
    throw DataError("predict: source dimensions do not match the model");
  }
  const std::size_t sample_len =
      static_cast<std::size_t>(model.cfg.in_channels) * model.cfg.in_time;

  std::vector<double> out(n);
  std::vector<double> buf(static_cast<std::size_t>(batch_size) * sample_len);
  for (int start = 0; start < n; start += batch_size) {
    const int nb = std::min(batch_size, n - start);
    for (int b = 0; b < nb; ++b) {
      X.fill(start + b, buf.data() + b * sample_len);
    }
    const auto preds = forward(model, buf.data(), nb, Mode::Eval);
    std::copy(preds.begin(), preds.begin() + nb, out.begin() + start);
  }
  return out;
}

}  // namespace drowsy::eegnet
