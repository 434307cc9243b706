#include <fstream>
#include <sstream>

#include "drowsy/errors.hpp"
#include "drowsy/eval.hpp"
#include "drowsy/io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace drowsy::eval {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

std::string join_algorithms(const EvalReport& r) {
  std::string s;
  for (const auto& a : r.algorithms) {
    s += ',';
    s += a;
  }
  return s;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json cells = json::array();
  for (std::size_t a = 0; a < r.algorithms.size(); ++a) {
    for (std::size_t s = 0; s < r.subjects.size(); ++s) {
      for (int rep = 0; rep < r.n_repeats; ++rep) {
        const ScoreCell& c = r.cells[a][s][rep];
        cells.push_back({{"algorithm", r.algorithms[a]},
                         {"subject", r.subjects[s]},
                         {"repeat", rep},
                         {"rmse", c.rmse},
                         {"cc", c.cc},
                         {"cc_flagged", c.cc_flagged}});
      }
    }
  }

  auto matrix_to_json = [](const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
      json row = json::array();
      for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };

  json j{{"algorithms", r.algorithms},
         {"subjects", r.subjects},
         {"n_repeats", r.n_repeats},
         {"cells", cells},
         {"avg_rmse", r.avg_rmse},
         {"avg_cc", r.avg_cc},
         {"anova",
          {{"rmse", {{"f", r.anova_rmse.f}, {"p", r.anova_rmse.p},
                     {"df1", r.anova_rmse.df1}, {"df2", r.anova_rmse.df2}}},
           {"cc", {{"f", r.anova_cc.f}, {"p", r.anova_cc.p},
                   {"df1", r.anova_cc.df1}, {"df2", r.anova_cc.df2}}}}},
         {"pairwise_rmse", matrix_to_json(r.pairwise_rmse)},
         {"pairwise_cc", matrix_to_json(r.pairwise_cc)}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();

  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt report {}: {}", path.string(),
                                e.what()));
  }

  EvalReport r;
  try {
    r.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    r.subjects = j.at("subjects").get<std::vector<std::string>>();
    r.n_repeats = j.at("n_repeats");
    const std::size_t na = r.algorithms.size(), ns = r.subjects.size();
    r.cells.assign(na, std::vector<std::vector<ScoreCell>>(
                           ns, std::vector<ScoreCell>(r.n_repeats)));
    auto alg_index = [&](const std::string& name) {
      for (std::size_t a = 0; a < na; ++a) {
        if (r.algorithms[a] == name) return a;
      }
      throw DataError(fmt::format("report: unknown algorithm {}", name));
    };
    auto subj_index = [&](const std::string& name) {
      for (std::size_t s = 0; s < ns; ++s) {
        if (r.subjects[s] == name) return s;
      }
      throw DataError(fmt::format("report: unknown subject {}", name));
    };
    for (const auto& c : j.at("cells")) {
      const std::size_t a = alg_index(c.at("algorithm"));
      const std::size_t s = subj_index(c.at("subject"));
      const int rep = c.at("repeat");
      if (rep < 0 || rep >= r.n_repeats) {
        throw DataError("report: repeat index out of range");
      }
      r.cells[a][s][rep] = {c.at("rmse"), c.at("cc"), c.at("cc_flagged")};
    }
    r.avg_rmse = j.at("avg_rmse").get<std::vector<double>>();
    r.avg_cc = j.at("avg_cc").get<std::vector<double>>();
    const auto& an = j.at("anova");
    r.anova_rmse = {an.at("rmse").at("f"), an.at("rmse").at("p"),
                    an.at("rmse").at("df1"), an.at("rmse").at("df2")};
    r.anova_cc = {an.at("cc").at("f"), an.at("cc").at("p"),
                  an.at("cc").at("df1"), an.at("cc").at("df2")};
    auto matrix_from = [](const json& rows) {
      Matrix m(static_cast<int>(rows.size()),
               rows.empty() ? 0 : static_cast<int>(rows[0].size()));
      for (int i = 0; i < m.rows; ++i) {
        for (int jx = 0; jx < m.cols; ++jx) m(i, jx) = rows[i][jx];
      }
      return m;
    };
    r.pairwise_rmse = matrix_from(j.at("pairwise_rmse"));
    r.pairwise_cc = matrix_from(j.at("pairwise_cc"));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt report {}: {}", path.string(),
                                e.what()));
  }
  r.validate();
  return r;
}

void emit_report(const EvalReport& r, const std::filesystem::path& dir) {
  r.validate();
  std::filesystem::create_directories(dir);
  const std::size_t na = r.algorithms.size(), ns = r.subjects.size();

  // Average table: one row per metric, one column per algorithm.
  {
    std::ostringstream out;
    out << "metric" << join_algorithms(r) << '\n';
    out << "rmse";
    for (std::size_t a = 0; a < na; ++a) out << ',' << csv_num(r.avg_rmse[a]);
    out << "\ncc";
    for (std::size_t a = 0; a < na; ++a) out << ',' << csv_num(r.avg_cc[a]);
    out << '\n';
    write_file(dir / "averages.csv", out.str());
  }

  {
    std::ostringstream out;
    out << "metric,f,df1,df2,p\n";
    out << "rmse," << csv_num(r.anova_rmse.f) << ',' << r.anova_rmse.df1 << ','
        << r.anova_rmse.df2 << ',' << csv_num(r.anova_rmse.p) << '\n';
    out << "cc," << csv_num(r.anova_cc.f) << ',' << r.anova_cc.df1 << ','
        << r.anova_cc.df2 << ',' << csv_num(r.anova_cc.p) << '\n';
    write_file(dir / "anova.csv", out.str());
  }

  // Pairwise adjusted p, lower triangle by row.
  {
    std::ostringstream out;
    out << "metric,algorithm_a,algorithm_b,p_adjusted\n";
    auto dump = [&](const char* metric, const Matrix& m) {
      for (std::size_t x = 1; x < na; ++x) {
        for (std::size_t y = 0; y < x; ++y) {
          out << metric << ',' << r.algorithms[x] << ',' << r.algorithms[y]
              << ','
              << csv_num(m(static_cast<int>(x), static_cast<int>(y))) << '\n';
        }
      }
    };
    if (na >= 2) {
      dump("rmse", r.pairwise_rmse);
      dump("cc", r.pairwise_cc);
    }
    write_file(dir / "pairwise.csv", out.str());
  }

  // Per-subject bars plus the cross-subject average group.
  {
    std::ostringstream out;
    out << "metric,subject" << join_algorithms(r) << '\n';
    auto row_mean = [&](std::size_t a, std::size_t s, bool use_cc) {
      double sum = 0.0;
      for (int rep = 0; rep < r.n_repeats; ++rep) {
        sum += use_cc ? r.cells[a][s][rep].cc : r.cells[a][s][rep].rmse;
      }
      return sum / r.n_repeats;
    };
    for (const bool use_cc : {false, true}) {
      const char* metric = use_cc ? "cc" : "rmse";
      for (std::size_t s = 0; s < ns; ++s) {
        out << metric << ',' << r.subjects[s];
        for (std::size_t a = 0; a < na; ++a) {
          out << ',' << csv_num(row_mean(a, s, use_cc));
        }
        out << '\n';
      }
      out << metric << ",average";
      for (std::size_t a = 0; a < na; ++a) {
        out << ',' << csv_num(use_cc ? r.avg_cc[a] : r.avg_rmse[a]);
      }
      out << '\n';
    }
    write_file(dir / "fig1_data.csv", out.str());
  }

  write_file(dir / "report.json", report_to_json(r));
}

}  // namespace drowsy::eval
