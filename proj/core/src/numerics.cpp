#include "drowsy/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drowsy/errors.hpp"

#include <fmt/format.h>

namespace drowsy::numerics {

double ordered_sum(std::span<const double> terms) {
  std::vector<double> sorted(terms.begin(), terms.end());
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (double v : sorted) s += v;
  return s;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw DataError("mean of empty vector");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Matrix covariance_matrix(const Matrix& P) {
  const int m = P.rows, n = P.cols;
  if (n < 2) throw DataError("covariance: need at least 2 columns");

  std::vector<double> row_mean(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    const double* r = P.row(i);
    for (int j = 0; j < n; ++j) s += r[j];
    row_mean[i] = s / n;
  }

  Matrix Q(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = i; k < m; ++k) {
      const double* ri = P.row(i);
      const double* rk = P.row(k);
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        s += (ri[j] - row_mean[i]) * (rk[j] - row_mean[k]);
      }
      const double q = s / (n - 1);
      Q(i, k) = q;
      Q(k, i) = q;
    }
  }
  return Q;
}

namespace {

double frobenius_norm(const Matrix& Q) {
  std::vector<double> sq(Q.a.size());
  for (std::size_t i = 0; i < Q.a.size(); ++i) sq[i] = Q.a[i] * Q.a[i];
  return std::sqrt(ordered_sum(sq));
}

void check_symmetric(const Matrix& Q) {
  if (Q.rows != Q.cols) throw DataError("eigen: matrix not square");
  for (int i = 0; i < Q.rows; ++i) {
    for (int j = i + 1; j < Q.cols; ++j) {
      const double d = std::abs(Q(i, j) - Q(j, i));
      const double scale = std::max({std::abs(Q(i, j)), std::abs(Q(j, i)), 1.0});
      if (d > 1e-9 * scale) throw DataError("eigen: matrix not symmetric");
    }
  }
}

// Permutation-invariant matvec: each output entry sums its m products in
// value order, so conjugating Q by a permutation permutes the result exactly.
void matvec_ordered(const Matrix& Q, const std::vector<double>& v,
                    std::vector<double>& out, std::vector<double>& scratch) {
  const int m = Q.rows;
  for (int i = 0; i < m; ++i) {
    const double* r = Q.row(i);
    scratch.resize(m);
    for (int j = 0; j < m; ++j) scratch[j] = r[j] * v[j];
    out[i] = ordered_sum(scratch);
  }
}

double norm2_ordered(const std::vector<double>& v,
                     std::vector<double>& scratch) {
  scratch.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) scratch[i] = v[i] * v[i];
  return std::sqrt(ordered_sum(scratch));
}

}  // namespace

EigResult leading_eigenvector(const Matrix& Q, double tol, long max_iter) {
  check_symmetric(Q);
  const int m = Q.rows;
  if (m < 1) throw DataError("eigen: empty matrix");

  const double qnorm = frobenius_norm(Q);
  if (qnorm == 0.0) {
    throw NumericError("eigen: zero matrix has no leading direction");
  }

  std::vector<double> v(m, 1.0 / std::sqrt(static_cast<double>(m)));
  std::vector<double> w(m), resid(m), scratch;
  double lambda = 0.0;

  long it = 0;
  for (; it < max_iter; ++it) {
    matvec_ordered(Q, v, w, scratch);
    // Rayleigh quotient with ||v|| = 1.
    scratch.resize(m);
    for (int i = 0; i < m; ++i) scratch[i] = v[i] * w[i];
    lambda = ordered_sum(scratch);

    for (int i = 0; i < m; ++i) resid[i] = w[i] - lambda * v[i];
    if (norm2_ordered(resid, scratch) <= tol * qnorm) break;

    const double wn = norm2_ordered(w, scratch);
    if (wn == 0.0) {
      throw NumericError("eigen: iterate vanished (indefinite spectrum)");
    }
    for (int i = 0; i < m; ++i) v[i] = w[i] / wn;
  }
  if (it == max_iter) {
    throw NumericError(
        "eigen: power iteration did not converge (degenerate spectrum)");
  }

  // Sign convention: entries sum >= 0; tie broken by first nonzero entry.
  const double s = ordered_sum(v);
  bool flip = s < 0.0;
  if (s == 0.0) {
    for (double x : v) {
      if (x != 0.0) {
        flip = x < 0.0;
        break;
      }
    }
  }
  if (flip) {
    for (double& x : v) x = -x;
  }
  return EigResult{std::move(v), lambda, it + 1};
}

KMeans1DResult kmeans_1d(std::span<const double> values, int k) {
  const int n = static_cast<int>(values.size());
  if (n == 0) throw DataError("kmeans: empty input");
  if (k < 1) throw DataError("kmeans: k must be >= 1");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  // Seed at evenly spaced order statistics; k = 3 gives min / median / max.
  std::vector<double> centroids(k);
  if (k == 1) {
    centroids[0] = ordered_sum(sorted) / n;
  } else {
    for (int c = 0; c < k; ++c) {
      const auto idx = static_cast<std::size_t>(
          (static_cast<long>(c) * (n - 1)) / (k - 1));
      centroids[c] = sorted[idx];
    }
  }

  std::vector<int> assignment(n, 0);
  std::vector<double> members;
  for (int iter = 0; iter < 1000; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::abs(values[i] - centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = std::abs(values[i] - centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    bool moved = false;
    for (int c = 0; c < k; ++c) {
      members.clear();
      for (int i = 0; i < n; ++i) {
        if (assignment[i] == c) members.push_back(values[i]);
      }
      if (members.empty()) continue;  // empty cluster keeps its centroid
      const double mu = ordered_sum(members) / static_cast<double>(members.size());
      if (mu != centroids[c]) moved = true;
      centroids[c] = mu;
    }
    if (!moved && !changed) break;
  }

  // Drop empty clusters, remap assignments, keep centroids ascending.
  std::vector<int> remap(k, -1);
  KMeans1DResult res;
  for (int c = 0; c < k; ++c) {
    bool populated = false;
    for (int i = 0; i < n; ++i) {
      if (assignment[i] == c) {
        populated = true;
        break;
      }
    }
    if (populated) {
      remap[c] = static_cast<int>(res.centroids.size());
      res.centroids.push_back(centroids[c]);
    }
  }
  res.assignment.resize(n);
  for (int i = 0; i < n; ++i) res.assignment[i] = remap[assignment[i]];
  return res;
}

namespace {

// Cholesky solve of a symmetric positive-definite system, in place.
std::vector<double> spd_solve(Matrix A, std::vector<double> b) {
  const int d = A.rows;
  for (int j = 0; j < d; ++j) {
    double diag = A(j, j);
    for (int k = 0; k < j; ++k) diag -= A(j, k) * A(j, k);
    if (diag <= 0.0) {
      throw NumericError("ridge: system is singular (needs lambda > 0)");
    }
    const double ljj = std::sqrt(diag);
    A(j, j) = ljj;
    for (int i = j + 1; i < d; ++i) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / ljj;
    }
  }
  // L y = b
  for (int i = 0; i < d; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= A(i, k) * b[k];
    b[i] = s / A(i, i);
  }
  // L' x = y
  for (int i = d - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < d; ++k) s -= A(k, i) * b[k];
    b[i] = s / A(i, i);
  }
  return b;
}

}  // namespace

double RidgeModel::predict(std::span<const double> x) const {
  double s = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * x[j];
  return s;
}

std::vector<double> RidgeModel::predict_rows(const Matrix& X) const {
  std::vector<double> out(X.rows);
  for (int i = 0; i < X.rows; ++i) {
    out[i] = predict(std::span<const double>(X.row(i), X.cols));
  }
  return out;
}

RidgeModel ridge_fit(const Matrix& X, std::span<const double> y,
                     double lambda) {
  const int n = X.rows, d = X.cols;
  if (n < 1 || d < 1) throw DataError("ridge: empty design matrix");
  if (static_cast<int>(y.size()) != n) throw DataError("ridge: y length mismatch");
  if (lambda < 0) throw DataError("ridge: lambda must be >= 0");

  std::vector<double> xm(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* r = X.row(i);
    for (int j = 0; j < d; ++j) xm[j] += r[j];
  }
  for (double& v : xm) v /= n;
  double ym = 0.0;
  for (double v : y) ym += v;
  ym /= n;

  // Gram matrix and right-hand side on centered data.
  Matrix G(d, d);
  std::vector<double> rhs(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* r = X.row(i);
    const double dy = y[i] - ym;
    for (int a = 0; a < d; ++a) {
      const double xa = r[a] - xm[a];
      rhs[a] += xa * dy;
      for (int b = a; b < d; ++b) G(a, b) += xa * (r[b] - xm[b]);
    }
  }
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < a; ++b) G(a, b) = G(b, a);
    G(a, a) += lambda;
  }

  RidgeModel model;
  model.weights = spd_solve(G, rhs);
  double dot = 0.0;
  for (int j = 0; j < d; ++j) dot += model.weights[j] * xm[j];
  model.intercept = ym - dot;
  return model;
}

void jacobi_eigh(const Matrix& S, std::vector<double>& eigenvalues,
                 Matrix& eigenvectors) {
  check_symmetric(S);
  const int d = S.rows;
  Matrix A = S;
  Matrix V(d, d);
  for (int i = 0; i < d; ++i) V(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) off += A(p, q) * A(p, q);
    }
    if (off < 1e-26 * std::max(1.0, frobenius_norm(S))) break;

    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < d; ++i) {
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < d; ++i) {
          const double api = A(p, i), aqi = A(q, i);
          A(p, i) = c * api - s * aqi;
          A(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < d; ++i) {
          const double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  // Sort descending by eigenvalue; stable so ties keep rotation order.
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return A(a, a) > A(b, b); });

  eigenvalues.resize(d);
  eigenvectors = Matrix(d, d);
  for (int c = 0; c < d; ++c) {
    eigenvalues[c] = A(order[c], order[c]);
    for (int i = 0; i < d; ++i) eigenvectors(i, c) = V(i, order[c]);
  }
}

Matrix PcaModel::transform(const Matrix& X) const {
  const int d = static_cast<int>(mean.size());
  if (X.cols != d) throw DataError("pca: column count mismatch");
  Matrix out(X.rows, p);
  for (int i = 0; i < X.rows; ++i) {
    const double* r = X.row(i);
    for (int c = 0; c < p; ++c) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += (r[j] - mean[j]) * components(j, c);
      out(i, c) = s;
    }
  }
  return out;
}

PcaModel pca_fit(const Matrix& X, double var_frac) {
  const int n = X.rows, d = X.cols;
  if (n < 2) throw DataError("pca: need at least 2 rows");
  if (!(var_frac > 0 && var_frac <= 1.0)) {
    throw DataError("pca: var_frac must be in (0, 1]");
  }

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* r = X.row(i);
    for (int j = 0; j < d; ++j) model.mean[j] += r[j];
  }
  for (double& v : model.mean) v /= n;

  Matrix C(d, d);
  for (int i = 0; i < n; ++i) {
    const double* r = X.row(i);
    for (int a = 0; a < d; ++a) {
      const double xa = r[a] - model.mean[a];
      for (int b = a; b < d; ++b) C(a, b) += xa * (r[b] - model.mean[b]);
    }
  }
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < a; ++b) C(a, b) = C(b, a);
    for (int b = a; b < d; ++b) C(a, b) /= (n - 1);
    for (int b = 0; b < a; ++b) C(a, b) /= (n - 1);
  }

  Matrix evecs;
  jacobi_eigh(C, model.explained, evecs);

  double total = 0.0;
  for (double v : model.explained) total += std::max(v, 0.0);
  if (total <= 0.0) throw DataError("pca: zero-variance input");

  const double rank_tol = std::max(n, d) * 1e-12 * model.explained[0];
  int p = 0;
  double acc = 0.0;
  for (int c = 0; c < d; ++c) {
    if (model.explained[c] <= rank_tol) break;
    acc += model.explained[c];
    ++p;
    if (acc / total >= var_frac - 1e-12) break;
  }
  model.p = std::max(p, 1);

  model.components = Matrix(d, model.p);
  for (int c = 0; c < model.p; ++c) {
    // Deterministic orientation: largest-magnitude entry positive.
    int arg = 0;
    for (int i = 1; i < d; ++i) {
      if (std::abs(evecs(i, c)) > std::abs(evecs(arg, c))) arg = i;
    }
    const double sign = evecs(arg, c) < 0 ? -1.0 : 1.0;
    for (int i = 0; i < d; ++i) model.components(i, c) = sign * evecs(i, c);
  }
  return model;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw DataError("rmse: length mismatch or empty input");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double pearson_cc(std::span<const double> pred, std::span<const double> truth) {
  const std::size_t n = pred.size();
  if (n != truth.size() || n == 0) {
    throw DataError("cc: length mismatch or empty input");
  }
  const double mp = mean(pred), mt = mean(truth);
  double spt = 0.0, spp = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = pred[i] - mp, b = truth[i] - mt;
    spt += a * b;
    spp += a * a;
    stt += b * b;
  }
  if (spp <= 0.0 || stt <= 0.0) {
    throw NumericError("cc: zero variance input");
  }
  return spt / std::sqrt(spp * stt);
}

}  // namespace drowsy::numerics
