#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drowsy/config.hpp"
#include "drowsy/numerics.hpp"
#include "drowsy/types.hpp"

namespace drowsy::pipelines {

enum class AlgorithmId { RR, RR_SMLR, EEGNET_RAW, EEGNET_PSD, EEGNET_PSD_SMLR };

inline constexpr std::array<AlgorithmId, 5> kAllAlgorithms = {
    AlgorithmId::RR, AlgorithmId::RR_SMLR, AlgorithmId::EEGNET_RAW,
    AlgorithmId::EEGNET_PSD, AlgorithmId::EEGNET_PSD_SMLR};

// Display names, also the CSV column order: RR, RR-SMLR, EEGNet, EEGNet-PSD,
// EEGNet-PSD-SMLR.
std::string algorithm_name(AlgorithmId id);
std::optional<AlgorithmId> parse_algorithm(const std::string& name);

// Everything the algorithms consume for one subject. psd is z-normalized per
// retained (channel, bin) column over the subject's own epochs; psd_db keeps
// the raw dB values for transforms that fit their own statistics on training
// data. raw_norm is the preprocessed signal, z-normalized per channel, from
// which 30-s windows are cut lazily.
struct SubjectFeatures {
  std::string subject_id;
  FeatureSet psd;
  Tensor3 psd_db;   // samples x channels x bins, before rejection/normalization
  Matrix raw_norm;  // channels x samples; empty when the raw path is disabled
  double fs_hz = 0.0;
  SampleGrid grid;
  LabelVector labels;
};

// Label-free slice of SubjectFeatures: what an algorithm may see of the
// target subject.
struct FeatureView {
  const std::string* subject_id = nullptr;
  const FeatureSet* psd = nullptr;
  const Tensor3* psd_db = nullptr;
  const Matrix* raw_norm = nullptr;
  double fs_hz = 0.0;
  const SampleGrid* grid = nullptr;

  static FeatureView of(const SubjectFeatures& s);
};

// Band-pass -> decimate to cfg.target_fs_hz -> earlobe re-reference.
Recording preprocess(const Recording& rec, const PipelineConfig& cfg);

// Welch PSD per epoch and channel over the configured band, dB conversion,
// channel rejection above cfg.reject_db, per-column z-normalization.
// db_out, when given, receives the pre-rejection dB tensor.
FeatureSet extract_psd_features(const Recording& preprocessed,
                                const PipelineConfig& cfg,
                                Tensor3* db_out = nullptr);

// Full per-subject preparation from a raw recording: preprocess, PSD
// features, labels; keep_raw additionally retains the normalized signal for
// the raw-input net.
SubjectFeatures extract_subject(const Recording& rec,
                                const PipelineConfig& cfg, bool keep_raw);

// Transform fitted on pooled training subjects only.
struct RrTransform {
  std::vector<int> kept_channels;
  std::vector<double> col_mean, col_sd;
  numerics::PcaModel pca;
};

struct RrFeatures {
  std::vector<Matrix> train_x;  // per training subject, rows = epochs
  Matrix target_x;
  RrTransform transform;
};

// Training subjects are passed by pointer; each holds tens of megabytes.
using TrainSet = std::span<const SubjectFeatures* const>;

// Theta-band mean dB per channel, pooled-training channel rejection and
// normalization, PCA projection at cfg.pca_var_frac.
RrFeatures extract_rr_features(TrainSet train, const FeatureView& target,
                               const PipelineConfig& cfg);

// One algorithm, one target: returns per-grid-point predictions. Never sees
// target labels (FeatureView carries none).
std::vector<double> run_algorithm(AlgorithmId id, TrainSet train,
                                  const FeatureView& target,
                                  const PipelineConfig& cfg,
                                  std::uint64_t seed);

namespace detail {
// Bootstrap ensemble with explicit member seeds; run_algorithm uses
// member_seed = seed ^ member_index.
std::vector<double> eegnet_psd_smlr(TrainSet train, const FeatureView& target,
                                    const PipelineConfig& cfg,
                                    std::uint64_t resample_seed,
                                    std::span<const std::uint64_t> member_seeds,
                                    bool* fallback = nullptr);
}  // namespace detail

}  // namespace drowsy::pipelines
