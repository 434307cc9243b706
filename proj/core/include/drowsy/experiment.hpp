#pragma once

#include <filesystem>
#include <vector>

#include "drowsy/eval.hpp"
#include "drowsy/pipelines.hpp"

namespace drowsy {

// Loads every subject of a dataset directory and prepares its features in
// parallel. keep_raw retains the normalized signals for the raw-input net.
std::vector<pipelines::SubjectFeatures> prepare_dataset(
    const std::filesystem::path& data_dir, const PipelineConfig& cfg,
    bool keep_raw);

// Full experiment: prepare, leave-one-subject-out over `algorithms`, write
// report files plus config.resolved.json into out_dir. Returns the report.
eval::EvalReport run_compare(
    const std::filesystem::path& data_dir,
    std::span<const pipelines::AlgorithmId> algorithms,
    const PipelineConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace drowsy
