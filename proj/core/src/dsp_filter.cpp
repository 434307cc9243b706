#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "drowsy/dsp.hpp"
#include "drowsy/errors.hpp"

#include <fmt/format.h>

namespace drowsy::dsp {

namespace {

using cd = std::complex<double>;

// Analog low-pass prototype poles, unit cutoff, left half-plane.
std::vector<cd> butter_prototype(int order) {
  std::vector<cd> poles;
  for (int k = 1; k <= order; ++k) {
    const double angle = M_PI * (2.0 * k + order - 1.0) / (2.0 * order);
    poles.emplace_back(std::cos(angle), std::sin(angle));
  }
  return poles;
}

}  // namespace

std::vector<Biquad> design_butter_bandpass(int order, double lo_hz,
                                           double hi_hz, double fs_hz) {
  if (order < 1) throw DataError("filter: order must be >= 1");
  if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs_hz / 2.0)) {
    throw DataError(fmt::format(
        "filter: band ({}, {}) Hz invalid for fs {} Hz", lo_hz, hi_hz, fs_hz));
  }

  const double K = 2.0 * fs_hz;  // bilinear constant
  const double w1 = K * std::tan(M_PI * lo_hz / fs_hz);  // prewarped edges
  const double w2 = K * std::tan(M_PI * hi_hz / fs_hz);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Low-pass -> band-pass: each prototype pole p yields the two roots of
  // s^2 - (p bw) s + w0^2 = 0.
  std::vector<cd> analog_poles;
  for (const cd& p : butter_prototype(order)) {
    const cd half = p * (bw / 2.0);
    const cd disc = std::sqrt(half * half - cd(w0sq, 0.0));
    analog_poles.push_back(half + disc);
    analog_poles.push_back(half - disc);
  }

  // Bilinear transform; zeros at s = 0 map to z = +1, the remaining `order`
  // zeros go to z = -1.
  std::vector<cd> digital_poles;
  digital_poles.reserve(analog_poles.size());
  cd pole_prod(1.0, 0.0);
  for (const cd& s : analog_poles) {
    digital_poles.push_back((cd(K, 0.0) + s) / (cd(K, 0.0) - s));
    pole_prod *= (cd(K, 0.0) - s);
  }
  const double gain =
      std::pow(bw, order) * std::pow(K, order) / pole_prod.real();

  // Pair conjugate poles into sections; every section carries zeros
  // (z - 1)(z + 1), i.e. numerator (1, 0, -1).
  std::vector<Biquad> sos;
  std::vector<bool> used(digital_poles.size(), false);
  for (std::size_t i = 0; i < digital_poles.size(); ++i) {
    if (used[i]) continue;
    const cd zi = digital_poles[i];
    if (std::abs(zi.imag()) > 1e-12) {
      // Conjugate partner is implicit.
      used[i] = true;
      // Mark the stored conjugate as consumed.
      for (std::size_t j = i + 1; j < digital_poles.size(); ++j) {
        if (!used[j] && std::abs(digital_poles[j] - std::conj(zi)) < 1e-9) {
          used[j] = true;
          break;
        }
      }
      Biquad s;
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = -1.0;
      s.a1 = -2.0 * zi.real();
      s.a2 = std::norm(zi);
      sos.push_back(s);
    } else {
      // Real pole: pair with the next unused real pole.
      std::size_t partner = digital_poles.size();
      for (std::size_t j = i + 1; j < digital_poles.size(); ++j) {
        if (!used[j] && std::abs(digital_poles[j].imag()) <= 1e-12) {
          partner = j;
          break;
        }
      }
      if (partner == digital_poles.size()) {
        throw NumericError("filter: unpaired real pole");
      }
      used[i] = used[partner] = true;
      const double p1 = zi.real(), p2 = digital_poles[partner].real();
      Biquad s;
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = -1.0;
      s.a1 = -(p1 + p2);
      s.a2 = p1 * p2;
      sos.push_back(s);
    }
  }

  // All gain on the first section.
  sos.front().b0 *= gain;
  sos.front().b1 *= gain;
  sos.front().b2 *= gain;
  return sos;
}

std::complex<double> sos_response(std::span<const Biquad> sos, double freq_hz,
                                  double fs_hz) {
  const double w = 2.0 * M_PI * freq_hz / fs_hz;
  const cd z1 = std::polar(1.0, -w);
  const cd z2 = z1 * z1;
  cd h(1.0, 0.0);
  for (const Biquad& s : sos) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

namespace {

void run_sos_forward(std::span<const Biquad> sos, std::vector<double>& x) {
  for (const Biquad& s : sos) {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

int settle_samples(std::span<const Biquad> sos) {
  double r_max = 0.0;
  for (const Biquad& s : sos) {
    // |pole|^2 = a2 for conjugate pairs; real pairs are bounded by it too.
    r_max = std::max(r_max, std::sqrt(std::max(s.a2, 0.0)));
  }
  r_max = std::min(r_max, 1.0 - 1e-9);
  // Samples for the slowest mode to decay to 1%.
  return static_cast<int>(std::ceil(4.6 / -std::log(r_max)));
}

}  // namespace

std::vector<double> filtfilt(std::span<const Biquad> sos,
                             std::span<const double> x) {
  const long n = static_cast<long>(x.size());
  const long min_len = 3 * (2 * static_cast<long>(sos.size()) + 1);
  if (n <= min_len) {
    throw DataError(fmt::format(
        "filtfilt: signal of {} samples too short for the filter ({} needed)",
        n, min_len + 1));
  }

  const long pad = std::min<long>(3L * settle_samples(sos), n - 1);

  // Odd reflection on both ends.
  std::vector<double> ext(n + 2 * pad);
  for (long i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + pad);
  for (long i = 0; i < pad; ++i) {
    ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }

  run_sos_forward(sos, ext);
  std::reverse(ext.begin(), ext.end());
  run_sos_forward(sos, ext);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

Recording bandpass(const Recording& rec, double lo_hz, double hi_hz) {
  const auto sos = design_butter_bandpass(4, lo_hz, hi_hz, rec.fs_hz);
  Recording out = rec;
  for (int c = 0; c < rec.n_channels(); ++c) {
    const auto filtered = filtfilt(
        sos, std::span<const double>(rec.data.row(c), rec.n_samples()));
    std::copy(filtered.begin(), filtered.end(), out.data.row(c));
  }
  return out;
}

}  // namespace drowsy::dsp
