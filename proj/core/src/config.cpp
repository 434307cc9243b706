#include "drowsy/config.hpp"

#include <fstream>
#include <sstream>

#include "drowsy/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace drowsy {

using nlohmann::json;

namespace dsp {

Window window_from_string(const std::string& name) {
  if (name == "hamming") return Window::Hamming;
  if (name == "hann") return Window::Hann;
  if (name == "rect") return Window::Rect;
  throw DataError(fmt::format("unknown window '{}'", name));
}

std::string window_name(Window w) {
  switch (w) {
    case Window::Hamming: return "hamming";
    case Window::Hann: return "hann";
    case Window::Rect: return "rect";
  }
  return "hamming";
}

void WelchConfig::validate() const {
  if (segment_len < 2) throw DataError("welch: segment_len must be >= 2");
  if (!(overlap_frac >= 0.0 && overlap_frac < 1.0)) {
    throw DataError("welch: overlap_frac must be in [0, 1)");
  }
  if (nfft < segment_len) throw DataError("welch: nfft must be >= segment_len");
}

}  // namespace dsp

void PipelineConfig::validate() const {
  if (!(0 < band_lo_hz && band_lo_hz < band_hi_hz)) {
    throw DataError("config: analysis band must satisfy 0 < lo < hi");
  }
  if (!(psd_band_lo_hz >= band_lo_hz && psd_band_hi_hz <= band_hi_hz &&
        psd_band_lo_hz < psd_band_hi_hz)) {
    throw DataError("config: PSD band must lie inside the analysis band");
  }
  if (epoch_s <= 0 || step_s <= 0 || smooth_s <= 0) {
    throw DataError("config: windows and steps must be positive");
  }
  if (tau0_s <= 0) throw DataError("config: tau0 must be positive");
  if (n_bootstrap < 1 || n_repeats < 1) {
    throw DataError("config: counts must be >= 1");
  }
  if (ridge_lambda < 0) throw DataError("config: ridge_lambda must be >= 0");
  if (!(pca_var_frac > 0 && pca_var_frac <= 1.0)) {
    throw DataError("config: pca_var_frac must be in (0, 1]");
  }
  if (target_fs_hz < 0) throw DataError("config: target_fs_hz must be >= 0");
  welch.validate();
  for (const TrainParams* tp : {&train_psd, &train_raw}) {
    if (tp->learning_rate < 0 || tp->batch_size < 1 || tp->epochs < 0 ||
        tp->max_steps < 0) {
      throw DataError("config: invalid training parameters");
    }
    if (tp->optimizer != "adam") {
      throw DataError(fmt::format("config: unknown optimizer '{}'",
                                  tp->optimizer));
    }
  }
}

namespace {

json train_to_json(const TrainParams& tp) {
  return json{{"learning_rate", tp.learning_rate},
              {"batch_size", tp.batch_size},
              {"epochs", tp.epochs},
              {"max_steps", tp.max_steps},
              {"optimizer", tp.optimizer}};
}

void train_from_json(const json& j, TrainParams& tp) {
  if (j.contains("learning_rate")) tp.learning_rate = j["learning_rate"];
  if (j.contains("batch_size")) tp.batch_size = j["batch_size"];
  if (j.contains("epochs")) tp.epochs = j["epochs"];
  if (j.contains("max_steps")) tp.max_steps = j["max_steps"];
  if (j.contains("optimizer")) tp.optimizer = j["optimizer"];
}

}  // namespace

std::string PipelineConfig::to_json_text() const {
  json j{{"band_lo_hz", band_lo_hz},
         {"band_hi_hz", band_hi_hz},
         {"psd_band_lo_hz", psd_band_lo_hz},
         {"psd_band_hi_hz", psd_band_hi_hz},
         {"theta_lo_hz", theta_lo_hz},
         {"theta_hi_hz", theta_hi_hz},
         {"epoch_s", epoch_s},
         {"step_s", step_s},
         {"smooth_s", smooth_s},
         {"smooth_centered", smooth_centered},
         {"tau0_s", tau0_s},
         {"reject_db", reject_db},
         {"n_bootstrap", n_bootstrap},
         {"n_repeats", n_repeats},
         {"ridge_lambda", ridge_lambda},
         {"pca_var_frac", pca_var_frac},
         {"target_fs_hz", target_fs_hz},
         {"psd_target_bins", psd_target_bins},
         {"welch",
          {{"segment_len", welch.segment_len},
           {"overlap_frac", welch.overlap_frac},
           {"window", dsp::window_name(welch.window)},
           {"nfft", welch.nfft}}},
         {"train_psd", train_to_json(train_psd)},
         {"train_raw", train_to_json(train_raw)},
         {"jobs", jobs}};
  if (master_seed_set) j["master_seed"] = master_seed;
  return j.dump(2) + "\n";
}

void PipelineConfig::apply_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  try {
    if (j.contains("band_lo_hz")) band_lo_hz = j["band_lo_hz"];
    if (j.contains("band_hi_hz")) band_hi_hz = j["band_hi_hz"];
    if (j.contains("psd_band_lo_hz")) psd_band_lo_hz = j["psd_band_lo_hz"];
    if (j.contains("psd_band_hi_hz")) psd_band_hi_hz = j["psd_band_hi_hz"];
    if (j.contains("theta_lo_hz")) theta_lo_hz = j["theta_lo_hz"];
    if (j.contains("theta_hi_hz")) theta_hi_hz = j["theta_hi_hz"];
    if (j.contains("epoch_s")) epoch_s = j["epoch_s"];
    if (j.contains("step_s")) step_s = j["step_s"];
    if (j.contains("smooth_s")) smooth_s = j["smooth_s"];
    if (j.contains("smooth_centered")) smooth_centered = j["smooth_centered"];
    if (j.contains("tau0_s")) tau0_s = j["tau0_s"];
    if (j.contains("reject_db")) reject_db = j["reject_db"];
    if (j.contains("n_bootstrap")) n_bootstrap = j["n_bootstrap"];
    if (j.contains("n_repeats")) n_repeats = j["n_repeats"];
    if (j.contains("ridge_lambda")) ridge_lambda = j["ridge_lambda"];
    if (j.contains("pca_var_frac")) pca_var_frac = j["pca_var_frac"];
    if (j.contains("target_fs_hz")) target_fs_hz = j["target_fs_hz"];
    if (j.contains("psd_target_bins")) psd_target_bins = j["psd_target_bins"];
    if (j.contains("welch")) {
      const json& w = j["welch"];
      if (w.contains("segment_len")) welch.segment_len = w["segment_len"];
      if (w.contains("overlap_frac")) welch.overlap_frac = w["overlap_frac"];
      if (w.contains("window")) {
        welch.window = dsp::window_from_string(w["window"]);
      }
      if (w.contains("nfft")) welch.nfft = w["nfft"];
    }
    if (j.contains("train_psd")) train_from_json(j["train_psd"], train_psd);
    if (j.contains("train_raw")) train_from_json(j["train_raw"], train_raw);
    if (j.contains("jobs")) jobs = j["jobs"];
    if (j.contains("master_seed")) {
      master_seed = j["master_seed"];
      master_seed_set = true;
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("config: bad field type: {}", e.what()));
  }
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  PipelineConfig cfg;
  cfg.apply_json_text(text);
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_json_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("config: cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

SampleGrid default_grid(const Recording& rec, const PipelineConfig& cfg) {
  return make_epoch_grid(rec.duration_s(), cfg.epoch_s, cfg.step_s);
}

}  // namespace drowsy
