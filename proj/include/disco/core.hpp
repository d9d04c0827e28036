#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "disco/errors.hpp"

namespace disco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sorted, duplicate-free pool indices. Sorted storage gives every consumer
/// a deterministic iteration order, which fixes tie-breaking downstream.
using IndexList = std::vector<Index>;

/// Unit identifiers paired with a dense n x q feature matrix; row i
/// describes units[i].
struct DescriptorTable {
  std::vector<std::string> units;
  Matrix features;

  Index size() const { return static_cast<Index>(units.size()); }
  Index dim() const { return features.cols(); }
};

/// Unit identifiers paired with one scalar outcome each, measured relative
/// to a non-interventional control.
struct OutcomeTable {
  std::vector<std::string> units;
  Vector outcomes;

  Index size() const { return static_cast<Index>(units.size()); }
};

/// Inner join of a descriptor and an outcome table over unit identifiers,
/// ordered by unit id ascending.
struct AlignedDataset {
  std::vector<std::string> units;
  Matrix features;
  Vector outcomes;
  std::string descriptor_source;
  std::string outcome_source;

  Index size() const { return static_cast<Index>(units.size()); }
  Index dim() const { return features.cols(); }
};

/// Disjoint partition of {0..n-1} into a fixed held-out test set, the
/// still-available pool, and the cumulatively acquired set. Immutable;
/// commit_batch returns a successor state.
struct PoolState {
  IndexList test_idx;
  IndexList avail_idx;
  IndexList cum_idx;
  int cycle = 0;

  Index size() const {
    return static_cast<Index>(test_idx.size() + avail_idx.size() +
                              cum_idx.size());
  }
};

/// An ordered batch of pool indices chosen by an acquisition function,
/// optionally with the per-index scores that ranked them.
struct AcquisitionBatch {
  IndexList indices;
  std::vector<double> scores;  // empty unless the method is score-based
};

/// One row of a run's learning curve.
struct CycleRecord {
  int cycle = 0;
  Index n_acquired_total = 0;
  double test_mse = 0.0;
  double hit_ratio = 0.0;
  std::vector<std::string> acquired_units;
  double wall_time_s = 0.0;
};

/// Splits {0..n-1} into test (round(test_fraction*n) indices drawn uniformly)
/// and available pool; the cumulative set starts empty.
PoolState make_pool_state(Index n, double test_fraction, std::uint64_t seed);

/// Moves the batch from avail to cum and advances the cycle counter; the
/// batch must be a subset of the available pool.
PoolState commit_batch(const PoolState& state, const AcquisitionBatch& batch);

/// True if `sorted` contains `value` (binary search; IndexLists are sorted).
bool contains(const IndexList& sorted, Index value);

/// Rows of `m` at `rows`, in the given order.
Matrix select_rows(const Matrix& m, const IndexList& rows);
Vector select_rows(const Vector& v, const IndexList& rows);

}  // namespace disco
