#pragma once

#include <cstdint>
#include <vector>

#include "disco/acquisition.hpp"
#include "disco/core.hpp"
#include "disco/models.hpp"

namespace disco {

/// Everything one active-learning run needs. ensemble_size 0 and
/// num_cycles 0 mean "pick the default for the model kind / batch size".
struct RunSpec {
  ModelKind model_kind = ModelKind::ensemble_mlp;
  AcquisitionKind acquisition_kind = AcquisitionKind::random;
  Index batch_size = 64;
  int num_cycles = 0;  // 0 = cycle_schedule(batch_size)
  std::uint64_t seed = 0;

  double temperature = 1.0;
  double gamma = 0.1;
  int adv_steps = 15;
  Index ensemble_size = 0;  // 0 = 10 for the MLP, 100 for the forest
  std::vector<Index> hidden_grid = {16, 32, 64, 128};
  int max_epochs = 100;

  double hit_quantile = 0.05;
  double test_fraction = 0.2;

  Index resolved_ensemble_size() const {
    if (ensemble_size > 0) return ensemble_size;
    return model_kind == ModelKind::ensemble_mlp ? 10 : 100;
  }
  int resolved_num_cycles() const;
  void validate() const;
};

/// Number of cycles for a batch size: 40 up to b = 64, then reduced so the
/// total acquisition budget stays at 64 * 40 = 2560 points.
int cycle_schedule(Index batch_size);

/// The units considered interesting: the top `quantile` fraction of non-test
/// units ranked by |outcome| (at least one), ties to the lower index.
struct HitSet {
  IndexList indices;  // sorted ascending
};

HitSet make_hit_set(const Vector& outcomes, const IndexList& test_idx,
                    double quantile);

/// |hits acquired so far| / |hits|.
double hit_ratio(const HitSet& hits, const IndexList& cum_idx);

/// Mean squared residual.
double evaluate_mse(const Vector& predictions, const Vector& outcomes);

/// Runs the full acquisition loop: a shared uniform-random seed batch,
/// then per cycle a from-scratch model fit on the cumulative data, test-set
/// evaluation, and the next batch acquisition. Record k describes the state
/// after the k-th committed batch (its units, |cum| = k*b, the test MSE of
/// the model trained on those rows, and the hit ratio). Deterministic per
/// (data, spec, seed).
std::vector<CycleRecord> run_active_learning(const AlignedDataset& data,
                                             const RunSpec& spec);

}  // namespace disco
