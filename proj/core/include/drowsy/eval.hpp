#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "drowsy/pipelines.hpp"

namespace drowsy::eval {

struct ScoreCell {
  double rmse = 0.0;
  double cc = 0.0;
  bool cc_flagged = false;  // zero-variance prediction, cc recorded as 0
};

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  int df1 = 0, df2 = 0;
};

struct EvalReport {
  std::vector<std::string> algorithms;  // display order
  std::vector<std::string> subjects;
  int n_repeats = 0;
  // cells[a][s][r]
  std::vector<std::vector<std::vector<ScoreCell>>> cells;
  std::vector<double> avg_rmse, avg_cc;  // per algorithm
  AnovaResult anova_rmse, anova_cc;
  Matrix pairwise_rmse, pairwise_cc;  // FDR-adjusted p, symmetric, unit diag

  void validate() const;
};

// Pluggable algorithm execution, mainly for tests; defaults to
// pipelines::run_algorithm.
using AlgorithmRunner = std::function<std::vector<double>(
    pipelines::AlgorithmId, pipelines::TrainSet,
    const pipelines::FeatureView&, const PipelineConfig&, std::uint64_t)>;

// Leave-one-subject-out: every subject becomes the target once, every
// algorithm trains on the rest, cfg.n_repeats times with derived seeds.
// Scores each cell against the target's labels, then fills in the ANOVA and
// pairwise statistics over repeat-means.
EvalReport loso_evaluate(const std::vector<pipelines::SubjectFeatures>& subjects,
                         std::span<const pipelines::AlgorithmId> algorithms,
                         const PipelineConfig& cfg,
                         AlgorithmRunner runner = {});

// Blocked two-way ANOVA without interaction on an algorithms x subjects
// matrix: F = MS_algorithm / MS_residual with (a-1, (a-1)(s-1)) dof.
AnovaResult anova_two_way(const Matrix& scores);

// Rank-based pairwise comparisons with midrank ties:
// z = (mean-rank difference) / sqrt((N(N+1)/12 - tie term)(1/n_i + 1/n_j)),
// two-sided normal p. Returns a symmetric matrix with unit diagonal.
Matrix dunn_pairwise(const std::vector<std::vector<double>>& groups);

// Benjamini-Hochberg step-up adjustment, input order preserved.
std::vector<double> fdr_adjust(std::span<const double> p);

// Writes averages.csv, anova.csv, pairwise.csv, fig1_data.csv, report.json.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json_file(const std::filesystem::path& path);

// Upper tail of the F distribution, via the regularized incomplete beta.
double f_upper_tail(double f, int df1, int df2);

}  // namespace drowsy::eval
