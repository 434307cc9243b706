#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drowsy/types.hpp"

namespace drowsy {

// On-disk subject container: <dir>/manifest.json plus <dir>/signal.f64le
// holding little-endian 64-bit floats, channel-major (all samples of channel
// 0, then channel 1, ...). Round-trips are bit-exact.
void save_recording(const Recording& rec, const std::filesystem::path& dir);
Recording load_recording(const std::filesystem::path& dir);

// A dataset directory holds one subdirectory per subject and a dataset.json
// listing them (plus optional generator metadata).
void save_dataset_index(const std::filesystem::path& dir,
                        const std::vector<std::string>& subjects,
                        const std::string& extra_json = "");
std::vector<std::string> load_dataset_index(const std::filesystem::path& dir);

// grid_time_s,label
void save_labels_csv(const LabelVector& labels,
                     const std::filesystem::path& path);

// algorithm,subject,repeat,grid_time_s,prediction
void save_predictions_csv(const std::filesystem::path& path,
                          const std::string& algorithm,
                          const std::string& subject, int repeat,
                          const SampleGrid& grid,
                          std::span<const double> predictions);

// Fixed-format float for CSV output: 6 significant digits.
std::string csv_num(double v);

}  // namespace drowsy
