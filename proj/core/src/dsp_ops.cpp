#include <cmath>

#include "drowsy/dsp.hpp"
#include "drowsy/errors.hpp"

#include <fmt/format.h>

namespace drowsy::dsp {

Recording decimate(const Recording& rec, int factor) {
  if (factor < 1) throw DataError("decimate: factor must be >= 1");
  if (factor == 1) return rec;

  const long n_in = rec.n_samples();
  const long n_out = (n_in - 1) / factor + 1;
  Recording out = rec;
  out.fs_hz = rec.fs_hz / factor;
  out.data = Matrix(rec.n_channels(), static_cast<int>(n_out));
  for (int c = 0; c < rec.n_channels(); ++c) {
    const double* src = rec.data.row(c);
    double* dst = out.data.row(c);
    for (long i = 0; i < n_out; ++i) dst[i] = src[i * factor];
  }
  return out;
}

Recording rereference_earlobes(const Recording& rec) {
  if (!rec.earlobe_indices) {
    throw DataError(fmt::format("rereference: recording {} has no earlobes",
                                rec.subject_id));
  }
  const auto [ea, eb] = *rec.earlobe_indices;
  if (ea < 0 || eb < 0 || ea >= rec.n_channels() || eb >= rec.n_channels() ||
      ea == eb) {
    throw DataError("rereference: earlobe index out of range");
  }

  const long n = rec.n_samples();
  Recording out;
  out.subject_id = rec.subject_id;
  out.fs_hz = rec.fs_hz;
  out.events = rec.events;
  out.earlobe_indices = std::nullopt;

  const int kept = rec.n_channels() - 2;
  out.data = Matrix(kept, static_cast<int>(n));
  out.channel_labels.reserve(kept);

  const double* ra = rec.data.row(ea);
  const double* rb = rec.data.row(eb);
  int oc = 0;
  for (int c = 0; c < rec.n_channels(); ++c) {
    if (c == ea || c == eb) continue;
    out.channel_labels.push_back(rec.channel_labels[c]);
    const double* src = rec.data.row(c);
    double* dst = out.data.row(oc++);
    for (long i = 0; i < n; ++i) dst[i] = src[i] - 0.5 * (ra[i] + rb[i]);
  }
  return out;
}

EpochTensor epoch(const Recording& rec, const SampleGrid& grid,
                  double epoch_s) {
  const long n_epoch = std::llround(epoch_s * rec.fs_hz);
  if (n_epoch < 1) throw DataError("epoch: window shorter than one sample");

  EpochTensor out;
  out.grid = grid;
  out.fs_hz = rec.fs_hz;
  out.data = Tensor3(grid.count, rec.n_channels(), static_cast<int>(n_epoch));

  for (int j = 0; j < grid.count; ++j) {
    const double t = grid.time_at(j);
    const long end = std::llround(t * rec.fs_hz);
    const long begin = end - n_epoch;
    if (begin < 0 || end > rec.n_samples()) {
      throw DataError(fmt::format(
          "epoch: window [{} s - {} s, {} s) outside recording of {} s",
          t, epoch_s, t, rec.duration_s()));
    }
    for (int c = 0; c < rec.n_channels(); ++c) {
      const double* src = rec.data.row(c) + begin;
      double* dst = out.data.row(j, c);
      for (long i = 0; i < n_epoch; ++i) dst[i] = src[i];
    }
  }
  return out;
}

}  // namespace drowsy::dsp
