#include "disco/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "disco/rng.hpp"

namespace disco {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TrainedModel {
  ModelKind kind;
  EnsembleMlp mlp;            // valid when kind == ensemble_mlp
  RandomForestModel forest;   // valid when kind == random_forest

  EstimatorOutput predict(const Matrix& features) const {
    return kind == ModelKind::ensemble_mlp ? predict_ensemble(mlp, features)
                                           : rf_predict(forest, features);
  }
};

TrainedModel train_model(const RunSpec& spec, const Matrix& features,
                         const Vector& outcomes, std::uint64_t seed) {
  TrainedModel model;
  model.kind = spec.model_kind;
  if (spec.model_kind == ModelKind::ensemble_mlp) {
    MlpTrainConfig cfg;
    cfg.ensemble_size = spec.resolved_ensemble_size();
    cfg.hidden_grid = spec.hidden_grid;
    cfg.max_epochs = spec.max_epochs;
    model.mlp = train_mlp_ensemble(features, outcomes, cfg, seed);
  } else {
    model.forest = train_random_forest(features, outcomes,
                                       spec.resolved_ensemble_size(), seed);
  }
  return model;
}

AcquisitionInput build_acquisition_input(const RunSpec& spec,
                                         const AlignedDataset& data,
                                         const PoolState& state,
                                         const TrainedModel& model,
                                         Index batch, std::uint64_t seed) {
  AcquisitionInput in;
  in.avail_idx = state.avail_idx;
  in.avail_features = select_rows(data.features, state.avail_idx);
  in.cum_features = select_rows(data.features, state.cum_idx);
  in.estimator_output = model.predict(in.avail_features);
  in.batch_size = batch;
  in.rng_seed = derive_seed(seed, "acquire", static_cast<std::uint64_t>(state.cycle));
  in.temperature = spec.temperature;
  in.gamma = spec.gamma;
  in.adv_steps = spec.adv_steps;

  if (model.kind == ModelKind::ensemble_mlp) {
    in.mlp = &model.mlp;
    const auto kind = spec.acquisition_kind;
    if (kind == AcquisitionKind::coreset ||
        kind == AcquisitionKind::kmeansembed) {
      in.avail_embeddings =
          penultimate_embeddings(model.mlp, in.avail_features, 0).values;
      in.cum_embeddings =
          penultimate_embeddings(model.mlp, in.cum_features, 0).values;
    }
    if (kind == AcquisitionKind::badge) {
      in.gradient_embeddings = badge_gradient_embedding(
          model.mlp, in.avail_features, 0,
          derive_seed(seed, "badge_samples",
                      static_cast<std::uint64_t>(state.cycle)));
    }
  }
  return in;
}

}  // namespace

int cycle_schedule(Index batch_size) {
  if (batch_size < 1) throw ConfigError("cycle_schedule: batch size must be >= 1");
  if (batch_size <= 64) return 40;
  const double budget = 64.0 * 40.0;
  return static_cast<int>(std::ceil(budget / static_cast<double>(batch_size)));
}

int RunSpec::resolved_num_cycles() const {
  return num_cycles > 0 ? num_cycles : cycle_schedule(batch_size);
}

void RunSpec::validate() const {
  if (batch_size < 1) throw ConfigError("run spec: batch_size must be >= 1");
  if (!(hit_quantile > 0.0 && hit_quantile <= 0.5)) {
    throw ConfigError("run spec: hit_quantile must be in (0, 0.5]");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("run spec: test_fraction must be in (0, 1)");
  }
  if (!compatible(model_kind, acquisition_kind)) {
    throw ConfigError("incompatible pair: model '" + to_string(model_kind) +
                      "' cannot drive acquisition '" +
                      to_string(acquisition_kind) + "'");
  }
}

HitSet make_hit_set(const Vector& outcomes, const IndexList& test_idx,
                    double quantile) {
  if (!(quantile > 0.0 && quantile <= 0.5)) {
    throw ConfigError("make_hit_set: quantile must be in (0, 0.5]");
  }
  IndexList non_test;
  for (Index i = 0; i < outcomes.size(); ++i) {
    if (!contains(test_idx, i)) non_test.push_back(i);
  }
  if (non_test.empty()) throw ContractError("make_hit_set: no non-test units");

  std::sort(non_test.begin(), non_test.end(), [&](Index a, Index b) {
    const double av = std::abs(outcomes[a]);
    const double bv = std::abs(outcomes[b]);
    if (av != bv) return av > bv;
    return a < b;
  });
  const Index size = std::max<Index>(
      1, static_cast<Index>(std::llround(
             quantile * static_cast<double>(non_test.size()))));
  HitSet hits;
  hits.indices.assign(non_test.begin(), non_test.begin() + size);
  std::sort(hits.indices.begin(), hits.indices.end());
  return hits;
}

double hit_ratio(const HitSet& hits, const IndexList& cum_idx) {
  if (hits.indices.empty()) throw ContractError("hit_ratio: empty hit set");
  std::size_t found = 0;
  for (Index h : hits.indices) {
    if (contains(cum_idx, h)) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(hits.indices.size());
}

double evaluate_mse(const Vector& predictions, const Vector& outcomes) {
  if (predictions.size() != outcomes.size() || predictions.size() == 0) {
    throw ShapeError("evaluate_mse: size mismatch or empty input");
  }
  return (predictions - outcomes).squaredNorm() /
         static_cast<double>(predictions.size());
}

std::vector<CycleRecord> run_active_learning(const AlignedDataset& data,
                                             const RunSpec& spec) {
  spec.validate();
  const Index n = data.size();
  PoolState state = make_pool_state(n, spec.test_fraction, spec.seed);
  const HitSet hits = make_hit_set(data.outcomes, state.test_idx,
                                   spec.hit_quantile);
  const Matrix test_features = select_rows(data.features, state.test_idx);
  const Vector test_outcomes = select_rows(data.outcomes, state.test_idx);
  const int cycles = spec.resolved_num_cycles();

  // The first batch is uniform-random from a stream that does not depend on
  // the acquisition kind, so every method starts from the same labeled set.
  AcquisitionBatch next_batch;
  {
    Rng rng(derive_seed(spec.seed, "seed_batch"));
    const Index b = std::min<Index>(spec.batch_size,
                                    static_cast<Index>(state.avail_idx.size()));
    const auto rows = rng.sample_without_replacement(
        state.avail_idx.size(), static_cast<std::size_t>(b));
    for (std::size_t r : rows) next_batch.indices.push_back(state.avail_idx[r]);
  }

  std::vector<CycleRecord> records;
  records.reserve(static_cast<std::size_t>(cycles));
  for (int k = 1; k <= cycles; ++k) {
    const auto started = Clock::now();
    const AcquisitionBatch batch = next_batch;
    next_batch = AcquisitionBatch{};
    if (batch.indices.empty()) break;  // pool exhausted in an earlier cycle
    state = commit_batch(state, batch);

    TrainedModel model;
    try {
      model = train_model(spec, select_rows(data.features, state.cum_idx),
                          select_rows(data.outcomes, state.cum_idx),
                          derive_seed(spec.seed, "train",
                                      static_cast<std::uint64_t>(k)));
    } catch (const NumericalError& err) {
      throw NumericalError("cycle " + std::to_string(k) + ": " + err.what(),
                           err.epoch);
    }

    CycleRecord record;
    record.cycle = k;
    record.n_acquired_total = static_cast<Index>(state.cum_idx.size());
    record.test_mse =
        evaluate_mse(model.predict(test_features).mean, test_outcomes);
    record.hit_ratio = hit_ratio(hits, state.cum_idx);
    for (Index idx : batch.indices) {
      record.acquired_units.push_back(
          data.units[static_cast<std::size_t>(idx)]);
    }

    if (k < cycles && !state.avail_idx.empty()) {
      const Index b = std::min<Index>(
          spec.batch_size, static_cast<Index>(state.avail_idx.size()));
      const AcquisitionInput in = build_acquisition_input(
          spec, data, state, model, b, spec.seed);
      next_batch = acquire(spec.acquisition_kind, in);
    }

    record.wall_time_s = seconds_since(started);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace disco
