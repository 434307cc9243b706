#pragma once

#include <cstdint>
#include <vector>

#include "drowsy/tensor.hpp"

namespace drowsy::smlr {

// Row i holds model i's predictions over the n unlabeled samples.
struct EnsemblePredictions {
  Matrix P;  // m x n

  void validate() const;
};

struct SmlrResult {
  std::vector<double> mu0;         // leading eigenvector, sign-fixed
  std::vector<int> strong_set;     // ascending member indices
  std::vector<double> weights;     // per strong member, sums to 1
  std::vector<double> combined;    // length n
  bool fallback = false;           // uniform average taken instead
};

// Label-free aggregation: covariance of member predictions, leading
// eigenvector, k-means (k = 3) over its absolute entries, then the
// eigenvector-weighted average of the cluster with the largest centroid.
// Degenerate inputs (identical members, flat covariance) fall back to the
// uniform average with `fallback` set.
SmlrResult smlr_aggregate(const EnsemblePredictions& preds);

// k with-replacement index multisets of size n_train, member b drawn from a
// sub-stream of `seed` so the resamples are independent of k.
std::vector<std::vector<int>> bootstrap_indices(int n_train, int k,
                                                std::uint64_t seed);

}  // namespace drowsy::smlr
