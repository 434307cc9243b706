#pragma once

#include <span>
#include <vector>

#include "drowsy/tensor.hpp"

namespace drowsy::numerics {

// Sum after sorting a copy of the terms by value. The result depends only on
// the multiset of inputs, which makes reductions over ensemble members exact
// under member permutation.
double ordered_sum(std::span<const double> terms);

double mean(std::span<const double> v);

// Sample covariance (1/(n-1)) of the rows of P (m x n).
Matrix covariance_matrix(const Matrix& P);

struct EigResult {
  std::vector<double> vector;  // unit norm, sum of entries >= 0
  double value = 0.0;
  long iterations = 0;
};

// Leading eigenpair of a symmetric matrix by power iteration from the
// normalized all-ones vector; converged when ||Qv - lambda v|| <= tol ||Q||_F.
// Throws NumericError if the cap is hit (degenerate spectrum).
EigResult leading_eigenvector(const Matrix& Q, double tol = 1e-10,
                              long max_iter = 100000);

struct KMeans1DResult {
  std::vector<double> centroids;  // ascending, empty clusters dropped
  std::vector<int> assignment;    // per input value, into centroids
};

// Deterministic Lloyd iteration seeded at evenly spaced order statistics
// (min / median / max for k = 3). Duplicate seeds collapse, so fewer than k
// distinct values yield one populated cluster per distinct value.
KMeans1DResult kmeans_1d(std::span<const double> values, int k);

struct RidgeModel {
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(std::span<const double> x) const;
  std::vector<double> predict_rows(const Matrix& X) const;
};

// Solves (Xc'Xc + lambda I) w = Xc'y on column-centered data, intercept
// restored. lambda = 0 requires full column rank.
RidgeModel ridge_fit(const Matrix& X, std::span<const double> y,
                     double lambda);

struct PcaModel {
  std::vector<double> mean;       // column means of the fitted data
  Matrix components;              // d x p, orthonormal columns
  std::vector<double> explained;  // descending eigenvalues (all d)
  int p = 0;

  Matrix transform(const Matrix& X) const;
};

// Principal components of X (n x d): smallest p whose explained-variance
// ratio reaches var_frac. var_frac = 1 keeps the numerical rank.
PcaModel pca_fit(const Matrix& X, double var_frac);

double rmse(std::span<const double> pred, std::span<const double> truth);
// Throws NumericError when either side has zero variance.
double pearson_cc(std::span<const double> pred, std::span<const double> truth);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations;
// eigenvalues descending, eigenvectors in matching columns.
void jacobi_eigh(const Matrix& S, std::vector<double>& eigenvalues,
                 Matrix& eigenvectors);

}  // namespace drowsy::numerics
