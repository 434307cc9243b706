#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drowsy/tensor.hpp"

namespace drowsy {

// One lane-departure disturbance and the driver's steering response time.
struct LaneDepartureEvent {
  double onset_s = 0.0;
  double response_time_s = 0.0;  // > 0
};

// One subject's multi-channel recording plus its event log.
//
// `data` is channels x samples in microvolts. `earlobe_indices`, when
// present, names the two reference channels; a recording that has already
// been re-referenced carries no earlobes.
struct Recording {
  std::string subject_id;
  double fs_hz = 0.0;
  std::vector<std::string> channel_labels;
  std::optional<std::pair<int, int>> earlobe_indices;
  Matrix data;
  std::vector<LaneDepartureEvent> events;

  int n_channels() const { return data.rows; }
  long n_samples() const { return data.cols; }
  double duration_s() const {
    return fs_hz > 0 ? static_cast<double>(data.cols) / fs_hz : 0.0;
  }

  // Throws DataError on any broken invariant.
  void validate() const;
};

// Uniform prediction grid: times start_s, start_s + step_s, ...
struct SampleGrid {
  double start_s = 0.0;
  double step_s = 3.0;
  int count = 0;

  double time_at(int i) const { return start_s + step_s * i; }
  bool operator==(const SampleGrid&) const = default;
};

// Drowsiness labels in [0,1] on a sample grid.
struct LabelVector {
  std::vector<double> values;
  SampleGrid grid;

  void validate() const;
};

// Per-sample channel x frequency spectral features in dB.
//
// The tensor always spans the full channel set of its source recording;
// `channel_mask[c]` is false for channels dropped by the rejection rule
// (their rows are zeroed).
struct FeatureSet {
  Tensor3 tensor;  // samples x channels x freq bins
  std::vector<double> freq_bins_hz;
  std::vector<std::uint8_t> channel_mask;
  SampleGrid grid;

  int n_retained() const;
  void validate() const;
};

// Grid of fully covered trailing epochs: first point at epoch_s, then every
// step_s up to the recording end.
SampleGrid make_epoch_grid(double duration_s, double epoch_s, double step_s);

}  // namespace drowsy
