#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "drowsy/types.hpp"

namespace drowsy::dsp {

enum class Window { Hamming, Hann, Rect };

Window window_from_string(const std::string& name);
std::string window_name(Window w);

// Averaged-periodogram estimator settings. fs_hz == 0 means "taken from the
// recording at the call site".
struct WelchConfig {
  int segment_len = 2048;
  double overlap_frac = 0.5;  // in [0, 1)
  Window window = Window::Hamming;
  int nfft = 2048;  // >= segment_len
  double fs_hz = 0.0;

  void validate() const;
};

// samples x channels x time, one fully covered trailing window per grid point.
struct EpochTensor {
  Tensor3 data;
  SampleGrid grid;
  double fs_hz = 0.0;
};

struct PsdEstimate {
  std::vector<double> freqs_hz;  // k * fs / nfft, k = 0..nfft/2
  std::vector<double> psd;       // one-sided density, units^2/Hz
};

// Inclusive bin index range into a frequency axis.
struct BinRange {
  int lo = 0;
  int hi = -1;
  int count() const { return hi - lo + 1; }
};

// Second-order section y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2]
//                             - a1 y[n-1] - a2 y[n-2].
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

// Butterworth band-pass of analog prototype order `order` (2*order digital
// poles), as a cascade of biquads, designed by bilinear transform with
// frequency prewarping.
std::vector<Biquad> design_butter_bandpass(int order, double lo_hz,
                                           double hi_hz, double fs_hz);

// Frequency response of a cascade at one frequency.
std::complex<double> sos_response(std::span<const Biquad> sos, double freq_hz,
                                  double fs_hz);

// Forward-backward filtering with odd-reflection padding sized from the
// slowest pole's settle time. Zero phase; squared magnitude response.
std::vector<double> filtfilt(std::span<const Biquad> sos,
                             std::span<const double> x);

// Zero-phase 4th-order Butterworth band-pass applied per channel.
Recording bandpass(const Recording& rec, double lo_hz, double hi_hz);

// Keep every factor-th sample starting at index 0; divides fs accordingly.
// Assumes the signal is already band-limited below the new Nyquist.
Recording decimate(const Recording& rec, int factor);

// Subtract the mean of the two earlobe channels from every other channel and
// drop the earlobes from the output.
Recording rereference_earlobes(const Recording& rec);

// Epoch j covers samples in [t_j - epoch_s, t_j).
EpochTensor epoch(const Recording& rec, const SampleGrid& grid, double epoch_s);

// Welch PSD of one signal: windowed, zero-padded periodograms averaged over
// segments hopped by segment_len * (1 - overlap_frac), one-sided density
// normalized by fs * sum(w^2).
PsdEstimate welch_psd(std::span<const double> signal, const WelchConfig& cfg);

// Contiguous bins covering [lo_hz, hi_hz]: floor(lo*nfft/fs) ..
// floor(hi*nfft/fs) on a uniform axis. If target_count > 0 the range is
// widened (or narrowed) one bin at a time on the side closest to the band
// until the count matches.
BinRange band_bins(std::span<const double> freqs_hz, double lo_hz,
                   double hi_hz, int target_count = 0);

}  // namespace drowsy::dsp
