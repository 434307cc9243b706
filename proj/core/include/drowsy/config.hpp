#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "drowsy/dsp.hpp"
#include "drowsy/types.hpp"

namespace drowsy {

// Gradient-training schedule. max_steps == 0 means no cap beyond `epochs`.
struct TrainParams {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 4;
  long max_steps = 0;
  std::string optimizer = "adam";  // only adam is implemented
};

// Every knob of the experiment. Defaults reproduce the reference constants:
// 1-50 Hz analysis band, 4-12 Hz PSD band, 30 s epochs every 3 s, 90 s label
// smoothing, tau0 = 1 s, 20 dB channel rejection, 10 bootstrap members,
// 10 repeats.
struct PipelineConfig {
  double band_lo_hz = 1.0;
  double band_hi_hz = 50.0;
  double psd_band_lo_hz = 4.0;
  double psd_band_hi_hz = 12.0;
  double theta_lo_hz = 4.0;
  double theta_hi_hz = 8.0;
  double epoch_s = 30.0;
  double step_s = 3.0;
  double smooth_s = 90.0;
  bool smooth_centered = false;
  double tau0_s = 1.0;
  double reject_db = 20.0;
  int n_bootstrap = 10;
  int n_repeats = 10;
  double ridge_lambda = 1.0;
  double pca_var_frac = 0.95;
  double target_fs_hz = 250.0;  // decimation target; 0 keeps the input rate
  int psd_target_bins = 67;     // 0 = take the bins as they fall
  dsp::WelchConfig welch;

  // Nets on spectral inputs converge in a few passes; the raw-signal net is
  // two orders of magnitude more expensive per step, so its schedule is
  // capped separately. Both are desk-scale defaults, not tuned results.
  TrainParams train_psd{1e-3, 64, 4, 0, "adam"};
  TrainParams train_raw{1e-3, 16, 1, 12, "adam"};

  std::uint64_t master_seed = 0;
  bool master_seed_set = false;
  int jobs = 0;  // worker threads; 0 = hardware concurrency

  void validate() const;

  // JSON round-trip of every field above.
  static PipelineConfig from_json_text(const std::string& text);
  static PipelineConfig from_json_file(const std::filesystem::path& path);
  std::string to_json_text() const;

  // Merge of non-default keys from `text` over *this.
  void apply_json_text(const std::string& text);
};

SampleGrid default_grid(const Recording& rec, const PipelineConfig& cfg);

}  // namespace drowsy
