#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drowsy/types.hpp"

namespace drowsy::synth {

// Generative model for desk-scale experiments: a slow latent drowsiness
// level drives both the band power of the synthetic EEG and the response
// times, so the learning task is solvable by construction.
struct SynthProfile {
  int n_channels = 32;  // last two are earlobes
  double fs_hz = 500.0;
  double duration_s = 600.0;

  double event_gap_lo_s = 5.0;
  double event_gap_hi_s = 10.0;

  // Clipped Ornstein-Uhlenbeck latent in [0, 1].
  double latent_mean = 0.5;
  double latent_revert_per_s = 1.0 / 120.0;
  double latent_noise = 0.04;  // per sqrt(s)
  double latent_init = 0.2;

  // Oscillator amplitudes scale with (1 + coupling * latent).
  double coupling = 1.0;
  double alpha_hz = 10.0, alpha_amp = 1.0;
  double theta_hz = 5.0, theta_amp = 0.8;
  double pink_amp = 1.0;
  double earlobe_amp = 0.5;

  // response_time = resp_tau0 + resp_gain * latent + LogNormal(mu, sigma),
  // floored at 0.1 s.
  double resp_tau0 = 0.8;
  double resp_gain = 3.0;
  double resp_noise_mu = -1.897119984885881;  // log(0.15)
  double resp_noise_sigma = 0.5;

  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json_text() const;
  static SynthProfile from_json_text(const std::string& text);
  void apply_json_text(const std::string& text);
};

// One subject: pink-noise channels with latent-modulated alpha/theta
// oscillators and per-channel random mixing; lane-departure events at
// uniform 5-10 s gaps. Deterministic in profile.seed.
Recording generate_subject(const SynthProfile& profile,
                           const std::string& subject_id);

// Writes n_subjects containers plus dataset.json. Per-subject profiles are
// jittered deterministically from the base profile and seeded by
// (seed, subject index).
void generate_dataset(int n_subjects, const SynthProfile& base,
                      std::uint64_t seed, const std::filesystem::path& dir);

// The latent trace the generator used, one value per signal sample.
std::vector<double> latent_trace(const SynthProfile& profile);

}  // namespace drowsy::synth
