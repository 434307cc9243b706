#include "drowsy/smlr.hpp"

#include <algorithm>
#include <cmath>

#include "drowsy/errors.hpp"
#include "drowsy/numerics.hpp"
#include "drowsy/rng.hpp"

namespace drowsy::smlr {

void EnsemblePredictions::validate() const {
  if (P.rows < 2 || P.cols < 2) {
    throw DataError("smlr: need at least 2 models and 2 samples");
  }
  for (double v : P.a) {
    if (!std::isfinite(v)) throw DataError("smlr: non-finite prediction");
  }
}

namespace {

SmlrResult uniform_fallback(const Matrix& P) {
  SmlrResult res;
  res.fallback = true;
  const int m = P.rows, n = P.cols;
  res.mu0.assign(m, 1.0 / std::sqrt(static_cast<double>(m)));
  res.strong_set.resize(m);
  for (int i = 0; i < m; ++i) res.strong_set[i] = i;
  res.weights.assign(m, 1.0 / m);
  res.combined.resize(n);
  std::vector<double> col(m);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) col[i] = P(i, j) / m;
    res.combined[j] = numerics::ordered_sum(col);
  }
  return res;
}

bool rows_identical(const Matrix& P) {
  for (int i = 1; i < P.rows; ++i) {
    for (int j = 0; j < P.cols; ++j) {
      if (P(i, j) != P(0, j)) return false;
    }
  }
  return true;
}

}  // namespace

SmlrResult smlr_aggregate(const EnsemblePredictions& preds) {
  preds.validate();
  const Matrix& P = preds.P;
  const int m = P.rows, n = P.cols;

  // Bitwise-identical members: return the common row outright — the only
  // answer that is exact in floating point.
  if (rows_identical(P)) {
    SmlrResult res;
    res.fallback = true;
    res.mu0.assign(m, 1.0 / std::sqrt(static_cast<double>(m)));
    res.strong_set.resize(m);
    for (int i = 0; i < m; ++i) res.strong_set[i] = i;
    res.weights.assign(m, 1.0 / m);
    res.combined.assign(P.row(0), P.row(0) + n);
    return res;
  }

  const Matrix Q = numerics::covariance_matrix(P);

  numerics::EigResult eig;
  try {
    eig = numerics::leading_eigenvector(Q);
  } catch (const NumericError&) {
    return uniform_fallback(P);
  }

  std::vector<double> abs_mu(m);
  for (int i = 0; i < m; ++i) abs_mu[i] = std::abs(eig.vector[i]);
  const auto clusters = numerics::kmeans_1d(abs_mu, 3);

  // Strong set: members of the cluster with the largest centroid.
  const int strong_cluster = static_cast<int>(clusters.centroids.size()) - 1;
  SmlrResult res;
  res.mu0 = eig.vector;
  for (int i = 0; i < m; ++i) {
    if (clusters.assignment[i] == strong_cluster) res.strong_set.push_back(i);
  }

  std::vector<double> strong_mu;
  strong_mu.reserve(res.strong_set.size());
  for (int i : res.strong_set) strong_mu.push_back(res.mu0[i]);
  const double denom = numerics::ordered_sum(strong_mu);

  double abs_total = 0.0;
  for (double v : strong_mu) abs_total += std::abs(v);
  if (!(denom > 1e-12 * std::max(abs_total, 1e-300))) {
    // Weights cancel; no meaningful combination exists.
    return uniform_fallback(P);
  }

  res.weights.resize(res.strong_set.size());
  for (std::size_t s = 0; s < res.strong_set.size(); ++s) {
    res.weights[s] = strong_mu[s] / denom;
  }

  res.combined.resize(n);
  std::vector<double> terms(res.strong_set.size());
  for (int j = 0; j < n; ++j) {
    for (std::size_t s = 0; s < res.strong_set.size(); ++s) {
      terms[s] = res.weights[s] * P(res.strong_set[s], j);
    }
    res.combined[j] = numerics::ordered_sum(terms);
  }
  return res;
}

std::vector<std::vector<int>> bootstrap_indices(int n_train, int k,
                                                std::uint64_t seed) {
  if (n_train < 1 || k < 1) {
    throw DataError("bootstrap: n_train and k must be >= 1");
  }
  std::vector<std::vector<int>> out(k);
  for (int b = 0; b < k; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    out[b].resize(n_train);
    for (int i = 0; i < n_train; ++i) {
      out[b][i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_train)));
    }
  }
  return out;
}

}  // namespace drowsy::smlr
