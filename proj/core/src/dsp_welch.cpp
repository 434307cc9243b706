#include <cmath>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "drowsy/dsp.hpp"
#include "drowsy/errors.hpp"

#include <fftw3.h>
#include <fmt/format.h>

namespace drowsy::dsp {

namespace {

// One cached r2c plan per nfft. Plans are created under a lock (FFTW planning
// is not thread-safe) with FFTW_UNALIGNED so they can execute on any buffer.
class PlanCache {
 public:
  fftw_plan get(int nfft) {
    std::lock_guard lock(mu_);
    auto it = plans_.find(nfft);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(nfft, 0.0);
    std::vector<fftw_complex> out(nfft / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(nfft, in.data(), out.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw NumericError("welch: FFT plan creation failed");
    plans_.emplace(nfft, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::unordered_map<int, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

std::vector<double> make_window(Window kind, int n) {
  std::vector<double> w(n, 1.0);
  switch (kind) {
    case Window::Rect:
      break;
    case Window::Hamming:
      for (int i = 0; i < n; ++i) {
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / n);
      }
      break;
    case Window::Hann:
      for (int i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
      }
      break;
  }
  return w;
}

}  // namespace

PsdEstimate welch_psd(std::span<const double> signal, const WelchConfig& cfg) {
  cfg.validate();
  if (cfg.fs_hz <= 0) throw DataError("welch: fs_hz must be set");
  const long n = static_cast<long>(signal.size());
  if (n < cfg.segment_len) {
    throw DataError(fmt::format(
        "welch: signal of {} samples shorter than one {}-sample segment", n,
        cfg.segment_len));
  }

  const int seg = cfg.segment_len;
  const int nfft = cfg.nfft;
  const long hop =
      std::max<long>(1, std::llround(seg * (1.0 - cfg.overlap_frac)));
  const long n_seg = (n - seg) / hop + 1;
  const int n_bins = nfft / 2 + 1;

  const auto window = make_window(cfg.window, seg);
  double wsq = 0.0;
  for (double w : window) wsq += w * w;

  fftw_plan plan = plan_cache().get(nfft);
  std::vector<double> in(nfft, 0.0);
  std::vector<fftw_complex> out(n_bins);
  std::vector<double> acc(n_bins, 0.0);

  for (long s = 0; s < n_seg; ++s) {
    const double* src = signal.data() + s * hop;
    for (int i = 0; i < seg; ++i) in[i] = src[i] * window[i];
    std::fill(in.begin() + seg, in.end(), 0.0);
    fftw_execute_dft_r2c(plan, in.data(), out.data());
    for (int k = 0; k < n_bins; ++k) {
      acc[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
  }

  PsdEstimate est;
  est.freqs_hz.resize(n_bins);
  est.psd.resize(n_bins);
  const double scale = 1.0 / (cfg.fs_hz * wsq * static_cast<double>(n_seg));
  const bool has_nyquist = (nfft % 2 == 0);
  for (int k = 0; k < n_bins; ++k) {
    est.freqs_hz[k] = static_cast<double>(k) * cfg.fs_hz / nfft;
    double v = acc[k] * scale;
    // One-sided density: interior bins carry the mirrored half.
    if (k != 0 && !(has_nyquist && k == n_bins - 1)) v *= 2.0;
    est.psd[k] = v;
  }
  return est;
}

BinRange band_bins(std::span<const double> freqs_hz, double lo_hz,
                   double hi_hz, int target_count) {
  const int n = static_cast<int>(freqs_hz.size());
  if (n == 0) throw DataError("band_bins: empty frequency axis");
  for (int i = 1; i < n; ++i) {
    if (!(freqs_hz[i] > freqs_hz[i - 1])) {
      throw DataError("band_bins: frequencies not strictly ascending");
    }
  }
  if (!(lo_hz <= hi_hz)) throw DataError("band_bins: lo > hi");
  if (lo_hz > freqs_hz[n - 1] || hi_hz < freqs_hz[0]) {
    throw DataError("band_bins: band outside the frequency axis");
  }

  // Edge bins floor-cover the band: largest k with freqs[k] <= bound.
  auto floor_bin = [&](double f) {
    int k = 0;
    while (k + 1 < n && freqs_hz[k + 1] <= f) ++k;
    return k;
  };
  BinRange r;
  r.lo = lo_hz < freqs_hz[0] ? 0 : floor_bin(lo_hz);
  r.hi = floor_bin(hi_hz);
  if (r.hi < r.lo) r.hi = r.lo;

  if (target_count > 0) {
    while (r.count() < target_count) {
      const bool can_lo = r.lo > 0;
      const bool can_hi = r.hi < n - 1;
      if (!can_lo && !can_hi) {
        throw DataError(fmt::format(
            "band_bins: axis of {} bins cannot reach {} bins", n,
            target_count));
      }
      const double d_lo = can_lo ? lo_hz - freqs_hz[r.lo - 1] : 1e300;
      const double d_hi = can_hi ? freqs_hz[r.hi + 1] - hi_hz : 1e300;
      if (d_lo <= d_hi) {
        --r.lo;
      } else {
        ++r.hi;
      }
    }
    while (r.count() > target_count) {
      // Trim the edge bin that sits farthest outside the band.
      const double d_lo = lo_hz - freqs_hz[r.lo];
      const double d_hi = freqs_hz[r.hi] - hi_hz;
      if (d_lo >= d_hi) {
        ++r.lo;
      } else {
        --r.hi;
      }
    }
  }
  return r;
}

}  // namespace drowsy::dsp
