#include "drowsy/types.hpp"

#include <cmath>

#include "drowsy/errors.hpp"

#include <fmt/format.h>

namespace drowsy {

void Recording::validate() const {
  if (fs_hz <= 0) throw DataError("recording: fs_hz must be positive");
  if (static_cast<int>(channel_labels.size()) != data.rows) {
    throw DataError(fmt::format(
        "recording {}: {} channel labels but {} data rows", subject_id,
        channel_labels.size(), data.rows));
  }
  if (earlobe_indices) {
    const auto [a, b] = *earlobe_indices;
    if (a == b || a < 0 || b < 0 || a >= data.rows || b >= data.rows) {
      throw DataError(fmt::format(
          "recording {}: earlobe indices ({}, {}) invalid for {} channels",
          subject_id, a, b, data.rows));
    }
  }
  const double dur = duration_s();
  double prev = -1.0;
  for (const auto& ev : events) {
    if (!(ev.onset_s > prev)) {
      throw DataError(fmt::format(
          "recording {}: event onsets not strictly increasing at {} s",
          subject_id, ev.onset_s));
    }
    if (ev.onset_s < 0 || ev.onset_s > dur) {
      throw DataError(fmt::format(
          "recording {}: event onset {} s outside [0, {}]", subject_id,
          ev.onset_s, dur));
    }
    if (!(ev.response_time_s > 0)) {
      throw DataError(fmt::format(
          "recording {}: non-positive response time at {} s", subject_id,
          ev.onset_s));
    }
    prev = ev.onset_s;
  }
}

void LabelVector::validate() const {
  if (static_cast<int>(values.size()) != grid.count) {
    throw DataError("label vector: length does not match grid count");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(fmt::format("label vector: value {} outside [0, 1]", v));
    }
  }
}

int FeatureSet::n_retained() const {
  int n = 0;
  for (auto m : channel_mask) n += m ? 1 : 0;
  return n;
}

void FeatureSet::validate() const {
  if (tensor.d0 != grid.count) {
    throw DataError("feature set: sample count does not match grid");
  }
  if (static_cast<int>(channel_mask.size()) != tensor.d1) {
    throw DataError("feature set: mask length does not match channel count");
  }
  if (static_cast<int>(freq_bins_hz.size()) != tensor.d2) {
    throw DataError("feature set: frequency axis does not match tensor");
  }
  for (std::size_t i = 1; i < freq_bins_hz.size(); ++i) {
    if (!(freq_bins_hz[i] > freq_bins_hz[i - 1])) {
      throw DataError("feature set: frequency bins not strictly ascending");
    }
  }
}

SampleGrid make_epoch_grid(double duration_s, double epoch_s, double step_s) {
  if (epoch_s <= 0 || step_s <= 0) {
    throw DataError("epoch grid: epoch and step must be positive");
  }
  // Small slack so durations like n/fs that land a hair under an exact
  // multiple still count the last epoch.
  const double span = duration_s - epoch_s;
  if (span < -1e-9) {
    throw DataError(fmt::format(
        "epoch grid: recording of {} s shorter than one {} s epoch",
        duration_s, epoch_s));
  }
  const int count = static_cast<int>(std::floor(span / step_s + 1e-9)) + 1;
  return SampleGrid{epoch_s, step_s, count};
}

}  // namespace drowsy
