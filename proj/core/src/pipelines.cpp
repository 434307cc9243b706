#include "drowsy/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "drowsy/dsp.hpp"
#include "drowsy/eegnet.hpp"
#include "drowsy/errors.hpp"
#include "drowsy/labels.hpp"
#include "drowsy/rng.hpp"
#include "drowsy/smlr.hpp"

#include <fmt/format.h>

namespace drowsy::pipelines {

std::string algorithm_name(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::RR: return "RR";
    case AlgorithmId::RR_SMLR: return "RR-SMLR";
    case AlgorithmId::EEGNET_RAW: return "EEGNet";
    case AlgorithmId::EEGNET_PSD: return "EEGNet-PSD";
    case AlgorithmId::EEGNET_PSD_SMLR: return "EEGNet-PSD-SMLR";
  }
  return "?";
}

std::optional<AlgorithmId> parse_algorithm(const std::string& name) {
  for (AlgorithmId id : kAllAlgorithms) {
    if (algorithm_name(id) == name) return id;
  }
  return std::nullopt;
}

FeatureView FeatureView::of(const SubjectFeatures& s) {
  FeatureView v;
  v.subject_id = &s.subject_id;
  v.psd = &s.psd;
  v.psd_db = &s.psd_db;
  v.raw_norm = &s.raw_norm;
  v.fs_hz = s.fs_hz;
  v.grid = &s.grid;
  return v;
}

Recording preprocess(const Recording& rec, const PipelineConfig& cfg) {
  rec.validate();
  Recording out = dsp::bandpass(rec, cfg.band_lo_hz, cfg.band_hi_hz);
  if (cfg.target_fs_hz > 0 && rec.fs_hz != cfg.target_fs_hz) {
    const double ratio = rec.fs_hz / cfg.target_fs_hz;
    const int factor = static_cast<int>(std::llround(ratio));
    if (factor < 1 || std::abs(ratio - factor) > 1e-9) {
      throw DataError(fmt::format(
          "preprocess: fs {} Hz is not an integer multiple of target {} Hz",
          rec.fs_hz, cfg.target_fs_hz));
    }
    out = dsp::decimate(out, factor);
  }
  if (out.earlobe_indices) {
    out = dsp::rereference_earlobes(out);
  }
  return out;
}

FeatureSet extract_psd_features(const Recording& rec,
                                const PipelineConfig& cfg, Tensor3* db_out) {
  const SampleGrid grid = default_grid(rec, cfg);
  const int C = rec.n_channels();

  dsp::WelchConfig wcfg = cfg.welch;
  wcfg.fs_hz = rec.fs_hz;
  wcfg.validate();

  const long n_epoch = std::llround(cfg.epoch_s * rec.fs_hz);
  if (n_epoch < wcfg.segment_len) {
    throw DataError(fmt::format(
        "features: {}-sample epoch shorter than the {}-sample Welch segment",
        n_epoch, wcfg.segment_len));
  }

  // Frequency axis and band selection are fixed by the config, not the data.
  dsp::BinRange band;
  std::vector<double> band_freqs;
  {
    std::vector<double> probe(static_cast<std::size_t>(wcfg.segment_len), 0.0);
    probe[0] = 1.0;
    const auto est = dsp::welch_psd(probe, wcfg);
    band = dsp::band_bins(est.freqs_hz, cfg.psd_band_lo_hz, cfg.psd_band_hi_hz,
                          cfg.psd_target_bins);
    band_freqs.assign(est.freqs_hz.begin() + band.lo,
                      est.freqs_hz.begin() + band.hi + 1);
  }
  const int n_bins = band.count();

  FeatureSet fs;
  fs.grid = grid;
  fs.freq_bins_hz = band_freqs;
  fs.tensor = Tensor3(grid.count, C, n_bins);
  fs.channel_mask.assign(C, 1);

  for (int c = 0; c < C; ++c) {
    const double* row = rec.data.row(c);
    for (int j = 0; j < grid.count; ++j) {
      const long end = std::llround(grid.time_at(j) * rec.fs_hz);
      const auto est = dsp::welch_psd(
          std::span<const double>(row + (end - n_epoch), n_epoch), wcfg);
      double* dst = fs.tensor.row(j, c);
      for (int b = 0; b < n_bins; ++b) {
        dst[b] = 10.0 * std::log10(std::max(est.psd[band.lo + b], 1e-300));
      }
    }
  }

  if (db_out) *db_out = fs.tensor;

  // Reject any channel with at least one dB above the threshold.
  int retained = 0;
  for (int c = 0; c < C; ++c) {
    double peak = -1e300;
    for (int j = 0; j < grid.count; ++j) {
      const double* row = fs.tensor.row(j, c);
      for (int b = 0; b < n_bins; ++b) peak = std::max(peak, row[b]);
    }
    fs.channel_mask[c] = peak > cfg.reject_db ? 0 : 1;
    retained += fs.channel_mask[c];
  }
  if (retained == 0) {
    throw DataError("features: every channel exceeded the rejection threshold");
  }

  // Column-wise standardization over epochs for retained channels; rejected
  // channels are zeroed.
  for (int c = 0; c < C; ++c) {
    for (int b = 0; b < n_bins; ++b) {
      if (!fs.channel_mask[c]) {
        for (int j = 0; j < grid.count; ++j) fs.tensor(j, c, b) = 0.0;
        continue;
      }
      double sum = 0.0;
      for (int j = 0; j < grid.count; ++j) sum += fs.tensor(j, c, b);
      const double mu = sum / grid.count;
      double sq = 0.0;
      for (int j = 0; j < grid.count; ++j) {
        const double d = fs.tensor(j, c, b) - mu;
        sq += d * d;
      }
      const double sd = std::sqrt(sq / grid.count);
      if (sd > 0.0) {
        for (int j = 0; j < grid.count; ++j) {
          fs.tensor(j, c, b) = (fs.tensor(j, c, b) - mu) / sd;
        }
      } else {
        for (int j = 0; j < grid.count; ++j) fs.tensor(j, c, b) = 0.0;
      }
    }
  }
  fs.validate();
  return fs;
}

SubjectFeatures extract_subject(const Recording& rec,
                                const PipelineConfig& cfg, bool keep_raw) {
  const Recording prep = preprocess(rec, cfg);

  SubjectFeatures sf;
  sf.subject_id = prep.subject_id;
  sf.fs_hz = prep.fs_hz;
  sf.psd = extract_psd_features(prep, cfg, &sf.psd_db);
  sf.grid = sf.psd.grid;

  if (rec.events.empty()) {
    throw DataError(fmt::format("subject {}: no lane-departure events",
                                rec.subject_id));
  }
  auto series = labels::index_series_from_events(rec.events, cfg.tau0_s);
  series = labels::smooth_indices(series, cfg.smooth_s, cfg.smooth_centered);
  sf.labels = labels::labels_on_grid(series, sf.grid);
  sf.labels.validate();

  if (keep_raw) {
    sf.raw_norm = prep.data;
    const long n = prep.n_samples();
    for (int c = 0; c < sf.raw_norm.rows; ++c) {
      double* row = sf.raw_norm.row(c);
      double sum = 0.0;
      for (long i = 0; i < n; ++i) sum += row[i];
      const double mu = sum / static_cast<double>(n);
      double sq = 0.0;
      for (long i = 0; i < n; ++i) {
        const double d = row[i] - mu;
        sq += d * d;
      }
      const double sd = std::sqrt(sq / static_cast<double>(n));
      if (sd > 0.0) {
        for (long i = 0; i < n; ++i) row[i] = (row[i] - mu) / sd;
      } else {
        for (long i = 0; i < n; ++i) row[i] = 0.0;
      }
    }
  }
  return sf;
}

namespace {

// Theta-band mean dB per (epoch, channel).
Matrix theta_features(const Tensor3& db, const std::vector<double>& freqs,
                      const PipelineConfig& cfg) {
  const auto range = dsp::band_bins(freqs, cfg.theta_lo_hz, cfg.theta_hi_hz);
  Matrix out(db.d0, db.d1);
  for (int j = 0; j < db.d0; ++j) {
    for (int c = 0; c < db.d1; ++c) {
      const double* row = db.row(j, c);
      double s = 0.0;
      for (int b = range.lo; b <= range.hi; ++b) s += row[b];
      out(j, c) = s / range.count();
    }
  }
  return out;
}

Matrix select_columns(const Matrix& X, const std::vector<int>& cols) {
  Matrix out(X.rows, static_cast<int>(cols.size()));
  for (int i = 0; i < X.rows; ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out(i, static_cast<int>(k)) = X(i, cols[k]);
    }
  }
  return out;
}

}  // namespace

RrFeatures extract_rr_features(TrainSet train, const FeatureView& target,
                               const PipelineConfig& cfg) {
  if (train.empty()) throw DataError("rr features: no training subjects");

  std::vector<Matrix> train_theta;
  train_theta.reserve(train.size());
  for (const auto* s : train) {
    train_theta.push_back(theta_features(s->psd_db, s->psd.freq_bins_hz, cfg));
  }
  Matrix target_theta =
      theta_features(*target.psd_db, target.psd->freq_bins_hz, cfg);

  const int C = train_theta.front().cols;
  if (target_theta.cols != C) {
    throw DataError("rr features: channel count mismatch with target");
  }

  // Rejection and normalization statistics come from pooled training only.
  RrTransform tr;
  for (int c = 0; c < C; ++c) {
    double peak = -1e300;
    for (const auto& m : train_theta) {
      for (int i = 0; i < m.rows; ++i) peak = std::max(peak, m(i, c));
    }
    if (peak <= cfg.reject_db) tr.kept_channels.push_back(c);
  }
  if (tr.kept_channels.empty()) {
    throw DataError("rr features: every channel exceeded the threshold");
  }

  long n_total = 0;
  for (const auto& m : train_theta) n_total += m.rows;

  const int K = static_cast<int>(tr.kept_channels.size());
  tr.col_mean.assign(K, 0.0);
  tr.col_sd.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const int c = tr.kept_channels[k];
    double sum = 0.0;
    for (const auto& m : train_theta) {
      for (int i = 0; i < m.rows; ++i) sum += m(i, c);
    }
    const double mu = sum / static_cast<double>(n_total);
    double sq = 0.0;
    for (const auto& m : train_theta) {
      for (int i = 0; i < m.rows; ++i) {
        const double d = m(i, c) - mu;
        sq += d * d;
      }
    }
    tr.col_mean[k] = mu;
    tr.col_sd[k] = std::sqrt(sq / static_cast<double>(n_total));
  }

  auto normalize = [&](const Matrix& theta) {
    Matrix out = select_columns(theta, tr.kept_channels);
    for (int i = 0; i < out.rows; ++i) {
      for (int k = 0; k < K; ++k) {
        out(i, k) = tr.col_sd[k] > 0.0
                        ? (out(i, k) - tr.col_mean[k]) / tr.col_sd[k]
                        : 0.0;
      }
    }
    return out;
  };

  Matrix pooled(static_cast<int>(n_total), K);
  {
    int at = 0;
    for (const auto& m : train_theta) {
      const Matrix norm = normalize(m);
      for (int i = 0; i < norm.rows; ++i) {
        std::memcpy(pooled.row(at++), norm.row(i), K * sizeof(double));
      }
    }
  }
  tr.pca = numerics::pca_fit(pooled, cfg.pca_var_frac);

  RrFeatures out;
  out.train_x.reserve(train.size());
  for (const auto& m : train_theta) {
    out.train_x.push_back(tr.pca.transform(normalize(m)));
  }
  out.target_x = tr.pca.transform(normalize(target_theta));
  out.transform = std::move(tr);
  return out;
}

namespace {

// 30-s windows cut lazily from normalized continuous signals.
class RawEpochSource final : public eegnet::SampleSource {
 public:
  RawEpochSource(int channels, long n_epoch)
      : c_(channels), t_(static_cast<int>(n_epoch)) {}

  void add_subject(const Matrix* signal, const SampleGrid& grid, double fs) {
    for (int j = 0; j < grid.count; ++j) {
      const long end = std::llround(grid.time_at(j) * fs);
      const long begin = end - t_;
      if (begin < 0 || end > signal->cols) {
        throw DataError("raw source: window outside signal");
      }
      windows_.emplace_back(signal, begin);
    }
  }

  int count() const override { return static_cast<int>(windows_.size()); }
  int channels() const override { return c_; }
  int time_len() const override { return t_; }
  void fill(int i, double* dst) const override {
    const auto& [signal, begin] = windows_[i];
    for (int c = 0; c < c_; ++c) {
      std::memcpy(dst + static_cast<std::size_t>(c) * t_,
                  signal->row(c) + begin,
                  static_cast<std::size_t>(t_) * sizeof(double));
    }
  }

 private:
  int c_, t_;
  std::vector<std::pair<const Matrix*, long>> windows_;
};

// Pooled per-epoch PSD rows restricted to a common channel set.
class PsdSource final : public eegnet::SampleSource {
 public:
  PsdSource(std::vector<int> channels, int n_bins)
      : channels_(std::move(channels)), bins_(n_bins) {}

  void add_subject(const Tensor3* psd) {
    for (int j = 0; j < psd->d0; ++j) rows_.emplace_back(psd, j);
  }

  int count() const override { return static_cast<int>(rows_.size()); }
  int channels() const override { return static_cast<int>(channels_.size()); }
  int time_len() const override { return bins_; }
  void fill(int i, double* dst) const override {
    const auto& [psd, j] = rows_[i];
    for (std::size_t k = 0; k < channels_.size(); ++k) {
      std::memcpy(dst + k * bins_, psd->row(j, channels_[k]),
                  static_cast<std::size_t>(bins_) * sizeof(double));
    }
  }

 private:
  std::vector<int> channels_;
  int bins_;
  std::vector<std::pair<const Tensor3*, int>> rows_;
};

class ResampleSource final : public eegnet::SampleSource {
 public:
  ResampleSource(const eegnet::SampleSource* base, std::vector<int> map)
      : base_(base), map_(std::move(map)) {}
  int count() const override { return static_cast<int>(map_.size()); }
  int channels() const override { return base_->channels(); }
  int time_len() const override { return base_->time_len(); }
  void fill(int i, double* dst) const override { base_->fill(map_[i], dst); }

 private:
  const eegnet::SampleSource* base_;
  std::vector<int> map_;
};

std::vector<double> pooled_labels(TrainSet train) {
  std::vector<double> y;
  for (const auto* s : train) {
    y.insert(y.end(), s->labels.values.begin(), s->labels.values.end());
  }
  return y;
}

// Channels retained by every subject involved; the cross-subject net needs
// one fixed channel space.
std::vector<int> common_channels(TrainSet train,
                                 const FeatureView& target) {
  const std::size_t C = target.psd->channel_mask.size();
  std::vector<int> out;
  for (std::size_t c = 0; c < C; ++c) {
    bool ok = target.psd->channel_mask[c] != 0;
    for (const auto* s : train) {
      ok = ok && c < s->psd.channel_mask.size() && s->psd.channel_mask[c] != 0;
    }
    if (ok) out.push_back(static_cast<int>(c));
  }
  if (out.empty()) {
    throw DataError("eegnet-psd: no channel retained by every subject");
  }
  return out;
}

eegnet::EegNetConfig psd_net_config(int channels, int bins,
                                    const PipelineConfig& cfg) {
  eegnet::EegNetConfig net;
  net.in_channels = channels;
  net.in_time = bins;
  (void)cfg;
  return net;
}

std::vector<double> run_rr(TrainSet train, const FeatureView& target,
                           const PipelineConfig& cfg) {
  const RrFeatures rf = extract_rr_features(train, target, cfg);
  long n_total = 0;
  for (const auto& m : rf.train_x) n_total += m.rows;
  Matrix X(static_cast<int>(n_total), rf.target_x.cols);
  int at = 0;
  for (const auto& m : rf.train_x) {
    for (int i = 0; i < m.rows; ++i) {
      std::memcpy(X.row(at++), m.row(i), m.cols * sizeof(double));
    }
  }
  const auto y = pooled_labels(train);
  const auto model = numerics::ridge_fit(X, y, cfg.ridge_lambda);
  return model.predict_rows(rf.target_x);
}

std::vector<double> run_rr_smlr(TrainSet train, const FeatureView& target,
                                const PipelineConfig& cfg) {
  const RrFeatures rf = extract_rr_features(train, target, cfg);
  const int m = static_cast<int>(train.size());
  const int n = rf.target_x.rows;
  if (m < 2) {
    // A single source model: nothing to aggregate.
    const auto model = numerics::ridge_fit(
        rf.train_x[0], train[0]->labels.values, cfg.ridge_lambda);
    return model.predict_rows(rf.target_x);
  }
  Matrix P(m, n);
  for (int i = 0; i < m; ++i) {
    const auto model = numerics::ridge_fit(
        rf.train_x[i], train[i]->labels.values, cfg.ridge_lambda);
    const auto preds = model.predict_rows(rf.target_x);
    std::memcpy(P.row(i), preds.data(), preds.size() * sizeof(double));
  }
  return smlr::smlr_aggregate({std::move(P)}).combined;
}

std::vector<double> run_eegnet_raw(TrainSet train, const FeatureView& target,
                                   const PipelineConfig& cfg,
                                   std::uint64_t seed) {
  if (target.raw_norm->rows == 0) {
    throw DataError("eegnet: raw signals were not retained");
  }
  const int C = target.raw_norm->rows;
  const long n_epoch = std::llround(cfg.epoch_s * target.fs_hz);

  RawEpochSource train_src(C, n_epoch);
  for (const auto* s : train) {
    if (s->raw_norm.rows != C || s->fs_hz != target.fs_hz) {
      throw DataError("eegnet: subjects disagree on channels or rate");
    }
    train_src.add_subject(&s->raw_norm, s->grid, s->fs_hz);
  }
  RawEpochSource target_src(C, n_epoch);
  target_src.add_subject(target.raw_norm, *target.grid, target.fs_hz);

  eegnet::EegNetConfig net;
  net.in_channels = C;
  net.in_time = static_cast<int>(n_epoch);
  auto model = eegnet::build(net, derive_seed(seed, 0xE7));
  eegnet::fit(model, train_src, pooled_labels(train), cfg.train_raw);
  return eegnet::predict(model, target_src, /*batch_size=*/16);
}

std::vector<double> run_eegnet_psd(TrainSet train, const FeatureView& target,
                                   const PipelineConfig& cfg,
                                   std::uint64_t seed) {
  const auto channels = common_channels(train, target);
  const int bins = target.psd->tensor.d2;

  PsdSource train_src(channels, bins);
  for (const auto* s : train) train_src.add_subject(&s->psd.tensor);
  PsdSource target_src(channels, bins);
  target_src.add_subject(&target.psd->tensor);

  auto model = eegnet::build(
      psd_net_config(static_cast<int>(channels.size()), bins, cfg),
      derive_seed(seed, 0xE6));
  eegnet::fit(model, train_src, pooled_labels(train), cfg.train_psd);
  return eegnet::predict(model, target_src);
}

}  // namespace

namespace detail {

std::vector<double> eegnet_psd_smlr(TrainSet train, const FeatureView& target,
                                    const PipelineConfig& cfg,
                                    std::uint64_t resample_seed,
                                    std::span<const std::uint64_t> member_seeds,
                                    bool* fallback) {
  const auto channels = common_channels(train, target);
  const int bins = target.psd->tensor.d2;

  PsdSource train_src(channels, bins);
  for (const auto* s : train) train_src.add_subject(&s->psd.tensor);
  PsdSource target_src(channels, bins);
  target_src.add_subject(&target.psd->tensor);

  const auto y = pooled_labels(train);
  const int k = static_cast<int>(member_seeds.size());
  const auto resamples =
      smlr::bootstrap_indices(train_src.count(), k, resample_seed);

  const int n = target_src.count();
  Matrix P(k, n);
  for (int b = 0; b < k; ++b) {
    ResampleSource member_src(&train_src, resamples[b]);
    std::vector<double> member_y(resamples[b].size());
    for (std::size_t i = 0; i < resamples[b].size(); ++i) {
      member_y[i] = y[resamples[b][i]];
    }
    auto model = eegnet::build(
        psd_net_config(static_cast<int>(channels.size()), bins, cfg),
        member_seeds[b]);
    eegnet::fit(model, member_src, member_y, cfg.train_psd);
    const auto preds = eegnet::predict(model, target_src);
    std::memcpy(P.row(b), preds.data(), preds.size() * sizeof(double));
  }

  auto result = smlr::smlr_aggregate({std::move(P)});
  if (fallback) *fallback = result.fallback;
  return result.combined;
}

}  // namespace detail

std::vector<double> run_algorithm(AlgorithmId id, TrainSet train,
                                  const FeatureView& target,
                                  const PipelineConfig& cfg,
                                  std::uint64_t seed) {
  if (train.empty()) throw DataError("run_algorithm: no training subjects");

  switch (id) {
    case AlgorithmId::RR:
      return run_rr(train, target, cfg);
    case AlgorithmId::RR_SMLR:
      return run_rr_smlr(train, target, cfg);
    case AlgorithmId::EEGNET_RAW:
      return run_eegnet_raw(train, target, cfg, seed);
    case AlgorithmId::EEGNET_PSD:
      return run_eegnet_psd(train, target, cfg, seed);
    case AlgorithmId::EEGNET_PSD_SMLR: {
      std::vector<std::uint64_t> member_seeds(cfg.n_bootstrap);
      for (int b = 0; b < cfg.n_bootstrap; ++b) {
        member_seeds[b] = seed ^ static_cast<std::uint64_t>(b);
      }
      return detail::eegnet_psd_smlr(train, target, cfg,
                                     derive_seed(seed, 0xB007), member_seeds);
    }
  }
  throw DataError("run_algorithm: unknown algorithm");
}

}  // namespace drowsy::pipelines
