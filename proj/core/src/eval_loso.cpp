#include <cmath>

#include "drowsy/errors.hpp"
#include "drowsy/eval.hpp"
#include "drowsy/numerics.hpp"
#include "drowsy/parallel.hpp"
#include "drowsy/rng.hpp"

#include <fmt/format.h>

namespace drowsy::eval {

void EvalReport::validate() const {
  const std::size_t a = algorithms.size(), s = subjects.size();
  if (cells.size() != a) throw DataError("report: cell grid mismatch");
  for (const auto& per_subject : cells) {
    if (per_subject.size() != s) throw DataError("report: cell grid mismatch");
    for (const auto& per_repeat : per_subject) {
      if (static_cast<int>(per_repeat.size()) != n_repeats) {
        throw DataError("report: cell grid mismatch");
      }
      for (const auto& cell : per_repeat) {
        if (!(cell.rmse >= 0.0) || !std::isfinite(cell.rmse) ||
            !(cell.cc >= -1.0 && cell.cc <= 1.0)) {
          throw DataError("report: invalid score cell");
        }
      }
    }
  }
}

EvalReport loso_evaluate(const std::vector<pipelines::SubjectFeatures>& subjects,
                         std::span<const pipelines::AlgorithmId> algorithms,
                         const PipelineConfig& cfg, AlgorithmRunner runner) {
  const int ns = static_cast<int>(subjects.size());
  const int na = static_cast<int>(algorithms.size());
  if (ns < 2) throw DataError("loso: need at least 2 subjects");
  if (na < 1) throw DataError("loso: no algorithms selected");
  const int nr = cfg.n_repeats;

  if (!runner) {
    runner = [](pipelines::AlgorithmId id, pipelines::TrainSet train,
                const pipelines::FeatureView& target,
                const PipelineConfig& c, std::uint64_t seed) {
      return pipelines::run_algorithm(id, train, target, c, seed);
    };
  }

  EvalReport report;
  report.n_repeats = nr;
  for (auto id : algorithms) {
    report.algorithms.push_back(pipelines::algorithm_name(id));
  }
  for (const auto& s : subjects) report.subjects.push_back(s.subject_id);
  report.cells.assign(
      na, std::vector<std::vector<ScoreCell>>(
              ns, std::vector<ScoreCell>(nr)));

  // One task per (algorithm, target, repeat) cell; seeds derive from stable
  // identifiers, not from scheduling.
  const std::size_t n_tasks =
      static_cast<std::size_t>(na) * ns * nr;
  parallel_for_tasks(n_tasks, cfg.jobs, [&](std::size_t task) {
    const int r = static_cast<int>(task % nr);
    const int s = static_cast<int>((task / nr) % ns);
    const int a = static_cast<int>(task / (static_cast<std::size_t>(nr) * ns));
    const pipelines::AlgorithmId id = algorithms[a];

    std::vector<const pipelines::SubjectFeatures*> train;
    train.reserve(ns - 1);
    for (int i = 0; i < ns; ++i) {
      if (i != s) train.push_back(&subjects[i]);
    }
    const auto target = pipelines::FeatureView::of(subjects[s]);
    const std::uint64_t seed =
        derive_seed(cfg.master_seed, static_cast<std::uint64_t>(id) + 0x40,
                    static_cast<std::uint64_t>(s),
                    static_cast<std::uint64_t>(r));

    const auto preds = runner(id, train, target, cfg, seed);
    const auto& truth = subjects[s].labels.values;
    if (preds.size() != truth.size()) {
      throw DataError(fmt::format(
          "loso: {} predicted {} values for {} grid points",
          pipelines::algorithm_name(id), preds.size(), truth.size()));
    }

    ScoreCell cell;
    cell.rmse = numerics::rmse(preds, truth);
    try {
      cell.cc = numerics::pearson_cc(preds, truth);
    } catch (const NumericError&) {
      cell.cc = 0.0;  // zero-variance predictions score as uncorrelated
      cell.cc_flagged = true;
    }
    report.cells[a][s][r] = cell;
  });

  // Averages over subjects and repeats.
  report.avg_rmse.assign(na, 0.0);
  report.avg_cc.assign(na, 0.0);
  for (int a = 0; a < na; ++a) {
    double sr = 0.0, sc = 0.0;
    for (int s = 0; s < ns; ++s) {
      for (int r = 0; r < nr; ++r) {
        sr += report.cells[a][s][r].rmse;
        sc += report.cells[a][s][r].cc;
      }
    }
    report.avg_rmse[a] = sr / (static_cast<double>(ns) * nr);
    report.avg_cc[a] = sc / (static_cast<double>(ns) * nr);
  }

  // Statistics over repeat-means, one observation per (algorithm, subject).
  Matrix mean_rmse(na, ns), mean_cc(na, ns);
  for (int a = 0; a < na; ++a) {
    for (int s = 0; s < ns; ++s) {
      double sr = 0.0, sc = 0.0;
      for (int r = 0; r < nr; ++r) {
        sr += report.cells[a][s][r].rmse;
        sc += report.cells[a][s][r].cc;
      }
      mean_rmse(a, s) = sr / nr;
      mean_cc(a, s) = sc / nr;
    }
  }

  if (na >= 2) {
    report.anova_rmse = anova_two_way(mean_rmse);
    report.anova_cc = anova_two_way(mean_cc);

    auto adjusted_pairwise = [na](const Matrix& means) {
      std::vector<std::vector<double>> groups(na);
      for (int a = 0; a < na; ++a) {
        groups[a].assign(means.row(a), means.row(a) + means.cols);
      }
      const Matrix raw = dunn_pairwise(groups);
      std::vector<double> flat;
      for (int x = 0; x < na; ++x) {
        for (int y = x + 1; y < na; ++y) flat.push_back(raw(x, y));
      }
      const auto adj = fdr_adjust(flat);
      Matrix out(na, na, 1.0);
      std::size_t at = 0;
      for (int x = 0; x < na; ++x) {
        for (int y = x + 1; y < na; ++y) {
          out(x, y) = adj[at];
          out(y, x) = adj[at];
          ++at;
        }
      }
      return out;
    };
    report.pairwise_rmse = adjusted_pairwise(mean_rmse);
    report.pairwise_cc = adjusted_pairwise(mean_cc);
  }

  report.validate();
  return report;
}

}  // namespace drowsy::eval
