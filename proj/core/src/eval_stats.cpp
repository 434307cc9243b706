#include <algorithm>
#include <cmath>
#include <numeric>

#include "drowsy/errors.hpp"
#include "drowsy/eval.hpp"

#include <fmt/format.h>

namespace drowsy::eval {

namespace {

// Regularized incomplete beta by Lentz continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("betainc: continued fraction did not converge");
}

double betai(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw NumericError("betainc: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double lbeta =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
      a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double f_upper_tail(double f, int df1, int df2) {
  if (df1 < 1 || df2 < 1) throw NumericError("f tail: invalid dof");
  if (f <= 0.0) return 1.0;
  const double x = df2 / (df2 + df1 * f);
  return betai(df2 / 2.0, df1 / 2.0, x);
}

AnovaResult anova_two_way(const Matrix& scores) {
  const int a = scores.rows, s = scores.cols;
  if (a < 2 || s < 2) {
    throw DataError("anova: need at least 2 levels per factor");
  }

  const double n = static_cast<double>(a) * s;
  double grand = 0.0;
  for (double v : scores.a) grand += v;
  grand /= n;

  std::vector<double> row_mean(a, 0.0), col_mean(s, 0.0);
  for (int i = 0; i < a; ++i) {
    for (int j = 0; j < s; ++j) {
      row_mean[i] += scores(i, j);
      col_mean[j] += scores(i, j);
    }
  }
  for (double& v : row_mean) v /= s;
  for (double& v : col_mean) v /= a;

  double ss_total = 0.0, ss_rows = 0.0, ss_cols = 0.0;
  for (int i = 0; i < a; ++i) {
    const double d = row_mean[i] - grand;
    ss_rows += d * d;
  }
  ss_rows *= s;
  for (int j = 0; j < s; ++j) {
    const double d = col_mean[j] - grand;
    ss_cols += d * d;
  }
  ss_cols *= a;
  for (int i = 0; i < a; ++i) {
    for (int j = 0; j < s; ++j) {
      const double d = scores(i, j) - grand;
      ss_total += d * d;
    }
  }
  const double ss_resid = ss_total - ss_rows - ss_cols;

  AnovaResult res;
  res.df1 = a - 1;
  res.df2 = (a - 1) * (s - 1);
  const double ms_resid = ss_resid / res.df2;
  if (!(ms_resid > 0.0)) {
    throw NumericError("anova: zero residual variance");
  }
  res.f = (ss_rows / res.df1) / ms_resid;
  res.p = f_upper_tail(res.f, res.df1, res.df2);
  return res;
}

Matrix dunn_pairwise(const std::vector<std::vector<double>>& groups) {
  const int g = static_cast<int>(groups.size());
  if (g < 2) throw DataError("dunn: need at least 2 groups");
  long N = 0;
  for (const auto& grp : groups) {
    if (grp.size() < 2) throw DataError("dunn: group with fewer than 2 values");
    N += static_cast<long>(grp.size());
  }

  // Joint midranks.
  struct Obs {
    double v;
    int group;
  };
  std::vector<Obs> all;
  all.reserve(N);
  for (int i = 0; i < g; ++i) {
    for (double v : groups[i]) all.push_back({v, i});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Obs& a, const Obs& b) { return a.v < b.v; });

  std::vector<double> rank_sum(g, 0.0);
  double tie_sum = 0.0;  // sum of t^3 - t
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_sum[all[k].group] += midrank;
    if (t > 1.0) tie_sum += t * t * t - t;
    i = j;
  }

  const double nd = static_cast<double>(N);
  const double base = nd * (nd + 1.0) / 12.0 - tie_sum / (12.0 * (nd - 1.0));
  if (!(base > 0.0)) throw NumericError("dunn: all observations tied");

  Matrix p(g, g, 1.0);
  for (int x = 0; x < g; ++x) {
    const double rx = rank_sum[x] / static_cast<double>(groups[x].size());
    for (int y = x + 1; y < g; ++y) {
      const double ry = rank_sum[y] / static_cast<double>(groups[y].size());
      const double se = std::sqrt(
          base * (1.0 / groups[x].size() + 1.0 / groups[y].size()));
      const double z = (rx - ry) / se;
      const double pv = std::erfc(std::abs(z) / std::sqrt(2.0));
      p(x, y) = pv;
      p(y, x) = pv;
    }
  }
  return p;
}

std::vector<double> fdr_adjust(std::span<const double> p) {
  const int m = static_cast<int>(p.size());
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(fmt::format("fdr: p-value {} outside [0, 1]", v));
    }
  }
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p[a] < p[b]; });

  std::vector<double> adjusted(m);
  double running = 1.0;
  for (int k = m - 1; k >= 0; --k) {
    const double q = p[order[k]] * m / static_cast<double>(k + 1);
    running = std::min(running, std::min(q, 1.0));
    adjusted[order[k]] = running;
  }
  return adjusted;
}

}  // namespace drowsy::eval
