#include "disco/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "disco/rng.hpp"

namespace disco {

PoolState make_pool_state(Index n, double test_fraction, std::uint64_t seed) {
  if (n < 5) {
    throw ConfigError("make_pool_state: need at least 5 units, got " +
                      std::to_string(n));
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("make_pool_state: test_fraction must be in (0, 1)");
  }
  const Index n_test = static_cast<Index>(
      std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) {
    throw ConfigError(
        "make_pool_state: split would leave an empty test set or pool");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(seed, "pool_split"));
  rng.shuffle(order);

  PoolState state;
  state.test_idx.assign(order.begin(), order.begin() + n_test);
  state.avail_idx.assign(order.begin() + n_test, order.end());
  std::sort(state.test_idx.begin(), state.test_idx.end());
  std::sort(state.avail_idx.begin(), state.avail_idx.end());
  state.cycle = 0;
  return state;
}

PoolState commit_batch(const PoolState& state, const AcquisitionBatch& batch) {
  for (Index idx : batch.indices) {
    if (!contains(state.avail_idx, idx)) {
      std::ostringstream msg;
      msg << "commit_batch: index " << idx << " is not in the available pool";
      throw ContractError(msg.str());
    }
  }
  IndexList sorted_batch = batch.indices;
  std::sort(sorted_batch.begin(), sorted_batch.end());
  if (std::adjacent_find(sorted_batch.begin(), sorted_batch.end()) !=
      sorted_batch.end()) {
    throw ContractError("commit_batch: batch contains duplicate indices");
  }

  PoolState next;
  next.test_idx = state.test_idx;
  next.avail_idx.reserve(state.avail_idx.size() - sorted_batch.size());
  std::set_difference(state.avail_idx.begin(), state.avail_idx.end(),
                      sorted_batch.begin(), sorted_batch.end(),
                      std::back_inserter(next.avail_idx));
  next.cum_idx.reserve(state.cum_idx.size() + sorted_batch.size());
  std::set_union(state.cum_idx.begin(), state.cum_idx.end(),
                 sorted_batch.begin(), sorted_batch.end(),
                 std::back_inserter(next.cum_idx));
  next.cycle = state.cycle + 1;
  return next;
}

bool contains(const IndexList& sorted, Index value) {
  return std::binary_search(sorted.begin(), sorted.end(), value);
}

Matrix select_rows(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  }
  return out;
}

Vector select_rows(const Vector& v, const IndexList& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Index>(i)] = v[rows[i]];
  }
  return out;
}

}  // namespace disco
