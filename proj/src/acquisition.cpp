#include "disco/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "disco/rng.hpp"

namespace disco {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonempty(const AcquisitionInput& in) {
  if (in.avail_idx.empty()) {
    throw ContractError("acquisition: available pool is empty");
  }
  if (in.batch_size < 1) {
    throw ConfigError("acquisition: batch size must be >= 1");
  }
}

Index effective_batch(const AcquisitionInput& in) {
  return std::min<Index>(in.batch_size,
                         static_cast<Index>(in.avail_idx.size()));
}

AcquisitionBatch rows_to_batch(const AcquisitionInput& in,
                               const IndexList& rows,
                               const std::vector<double>& scores = {}) {
  AcquisitionBatch batch;
  batch.indices.reserve(rows.size());
  for (Index r : rows) {
    batch.indices.push_back(in.avail_idx[static_cast<std::size_t>(r)]);
  }
  batch.scores = scores;
  return batch;
}

/// Row positions ordered by descending score, ties to the lowest row.
IndexList top_rows(const Vector& scores, Index b) {
  IndexList order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return a < c;
  });
  order.resize(static_cast<std::size_t>(b));
  return order;
}

AcquisitionBatch acquire_by_score(const AcquisitionInput& in,
                                  const ScoreVector& scores) {
  require_nonempty(in);
  if (scores.values.size() != static_cast<Index>(in.avail_idx.size())) {
    throw ShapeError("acquisition: score vector not aligned with pool");
  }
  const IndexList rows = top_rows(scores.values, effective_batch(in));
  std::vector<double> picked;
  picked.reserve(rows.size());
  for (Index r : rows) picked.push_back(scores.values[r]);
  return rows_to_batch(in, rows, picked);
}

double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

const Matrix& require_embeddings(const std::optional<Matrix>& m,
                                 const char* what) {
  if (!m.has_value()) {
    throw CapabilityError(std::string("acquisition: ") + what +
                          " embeddings are required but missing");
  }
  return *m;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ensemble_mlp: return "ensemble_mlp";
    case ModelKind::random_forest: return "random_forest";
  }
  return "?";
}

std::string to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::random: return "random";
    case AcquisitionKind::topuncertain: return "topuncertain";
    case AcquisitionKind::softuncertain: return "softuncertain";
    case AcquisitionKind::margin: return "margin";
    case AcquisitionKind::coreset: return "coreset";
    case AcquisitionKind::badge: return "badge";
    case AcquisitionKind::advbim: return "advbim";
    case AcquisitionKind::kmeansdata: return "kmeansdata";
    case AcquisitionKind::kmeansembed: return "kmeansembed";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "ensemble_mlp" || name == "mlp") return ModelKind::ensemble_mlp;
  if (name == "random_forest" || name == "forest") {
    return ModelKind::random_forest;
  }
  throw ConfigError("unknown model kind: " + std::string(name));
}

AcquisitionKind parse_acquisition_kind(std::string_view name) {
  for (AcquisitionKind kind : kAllAcquisitions) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown acquisition kind: " + std::string(name));
}

bool compatible(ModelKind model, AcquisitionKind acquisition) {
  if (model == ModelKind::ensemble_mlp) return true;
  switch (acquisition) {
    case AcquisitionKind::random:
    case AcquisitionKind::topuncertain:
    case AcquisitionKind::softuncertain:
    case AcquisitionKind::margin:
    case AcquisitionKind::kmeansdata:
      return true;
    default:
      return false;
  }
}

ScoreVector bald_scores(const EstimatorOutput& out) {
  ScoreVector s;
  s.kind = ScoreVector::Kind::bald;
  s.values = (0.5 * out.variance.array().log1p()).matrix();
  return s;
}

ScoreVector margin_scores(const EstimatorOutput& out) {
  ScoreVector s;
  s.kind = ScoreVector::Kind::margin;
  s.values = out.per_member.rowwise().maxCoeff() -
             out.per_member.rowwise().minCoeff();
  return s;
}

AcquisitionBatch acquire_random(const AcquisitionInput& in) {
  require_nonempty(in);
  Rng rng(in.rng_seed);
  const auto rows = rng.sample_without_replacement(
      in.avail_idx.size(), static_cast<std::size_t>(effective_batch(in)));
  IndexList row_idx(rows.begin(), rows.end());
  return rows_to_batch(in, row_idx);
}

AcquisitionBatch acquire_topuncertain(const AcquisitionInput& in) {
  return acquire_by_score(in, bald_scores(in.estimator_output));
}

AcquisitionBatch acquire_margin(const AcquisitionInput& in) {
  return acquire_by_score(in, margin_scores(in.estimator_output));
}

AcquisitionBatch acquire_softuncertain(const AcquisitionInput& in) {
  require_nonempty(in);
  if (!(in.temperature > 0.0)) {
    throw ConfigError("softuncertain: temperature must be positive");
  }
  const ScoreVector scores = bald_scores(in.estimator_output);
  if (scores.values.size() != static_cast<Index>(in.avail_idx.size())) {
    throw ShapeError("softuncertain: score vector not aligned with pool");
  }
  const Index n = scores.values.size();
  const Index b = effective_batch(in);
  const Vector z = scores.values / in.temperature;

  Rng rng(in.rng_seed);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  IndexList rows;
  std::vector<double> picked_scores;
  rows.reserve(static_cast<std::size_t>(b));

  for (Index k = 0; k < b; ++k) {
    // Tempered softmax over the remaining candidates, max-subtracted so the
    // exponentials cannot overflow.
    double zmax = -kInf;
    for (Index i = 0; i < n; ++i) {
      if (!taken[static_cast<std::size_t>(i)]) zmax = std::max(zmax, z[i]);
    }
    double total = 0.0;
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      w[static_cast<std::size_t>(i)] = std::exp(z[i] - zmax);
      total += w[static_cast<std::size_t>(i)];
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    Index chosen = -1;
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      cum += w[static_cast<std::size_t>(i)];
      if (u < cum) {
        chosen = i;
        break;
      }
    }
    if (chosen < 0) {  // u landed on the rounding boundary
      for (Index i = n - 1; i >= 0; --i) {
        if (!taken[static_cast<std::size_t>(i)]) {
          chosen = i;
          break;
        }
      }
    }
    taken[static_cast<std::size_t>(chosen)] = true;
    rows.push_back(chosen);
    picked_scores.push_back(scores.values[chosen]);
  }
  return rows_to_batch(in, rows, picked_scores);
}

IndexList farthest_first(const Matrix& candidates, const Matrix& anchors,
                         Index b) {
  const Index n = candidates.rows();
  if (b > n) throw ContractError("farthest_first: b exceeds candidate count");
  std::vector<double> min_d2(static_cast<std::size_t>(n), kInf);
  for (Index i = 0; i < n; ++i) {
    for (Index a = 0; a < anchors.rows(); ++a) {
      min_d2[static_cast<std::size_t>(i)] =
          std::min(min_d2[static_cast<std::size_t>(i)],
                   squared_distance(candidates, i, anchors, a));
    }
  }

  IndexList selected;
  selected.reserve(static_cast<std::size_t>(b));
  for (Index k = 0; k < b; ++k) {
    Index best = -1;
    double best_d2 = -kInf;
    for (Index i = 0; i < n; ++i) {
      if (std::find(selected.begin(), selected.end(), i) != selected.end()) {
        continue;
      }
      if (min_d2[static_cast<std::size_t>(i)] > best_d2) {
        best_d2 = min_d2[static_cast<std::size_t>(i)];
        best = i;
      }
    }
    selected.push_back(best);
    for (Index i = 0; i < n; ++i) {
      min_d2[static_cast<std::size_t>(i)] =
          std::min(min_d2[static_cast<std::size_t>(i)],
                   squared_distance(candidates, i, candidates, best));
    }
  }
  return selected;
}

AcquisitionBatch acquire_coreset(const AcquisitionInput& in) {
  require_nonempty(in);
  const Matrix& avail = require_embeddings(in.avail_embeddings, "pool");
  const Matrix& anchors = require_embeddings(in.cum_embeddings, "acquired");
  const IndexList rows = farthest_first(avail, anchors, effective_batch(in));
  return rows_to_batch(in, rows);
}

IndexList kmeanspp_seed(const Matrix& points, Index b, std::uint64_t seed) {
  const Index n = points.rows();
  if (b > n) throw ContractError("kmeanspp_seed: b exceeds point count");
  Rng rng(seed);
  IndexList selected;
  if (b == 0) return selected;
  selected.reserve(static_cast<std::size_t>(b));
  selected.push_back(
      static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(n))));

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    d2[static_cast<std::size_t>(i)] =
        squared_distance(points, i, points, selected.back());
  }

  while (static_cast<Index>(selected.size()) < b) {
    double total = 0.0;
    for (double w : d2) total += w;
    Index chosen = -1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      for (Index i = 0; i < n; ++i) {
        cum += d2[static_cast<std::size_t>(i)];
        if (u < cum) {
          chosen = i;
          break;
        }
      }
      if (chosen < 0) {
        for (Index i = n - 1; i >= 0; --i) {
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            chosen = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point coincides with a seed; take the lowest
      // unselected index.
      for (Index i = 0; i < n; ++i) {
        if (std::find(selected.begin(), selected.end(), i) ==
            selected.end()) {
          chosen = i;
          break;
        }
      }
    }
    selected.push_back(chosen);
    for (Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)],
                   squared_distance(points, i, points, chosen));
    }
  }
  return selected;
}

Matrix lloyd_kmeans(const Matrix& points, Index b, std::uint64_t seed,
                    int max_iter, double tol) {
  const Index n = points.rows();
  if (b > n) throw ContractError("lloyd_kmeans: b exceeds point count");
  const IndexList seeds = kmeanspp_seed(points, b, seed);
  Matrix centroids(b, points.cols());
  for (Index k = 0; k < b; ++k) {
    centroids.row(k) = points.row(seeds[static_cast<std::size_t>(k)]);
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), 0);
  std::vector<double> assign_d2(static_cast<std::size_t>(n), 0.0);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d2 = kInf;
      for (Index k = 0; k < b; ++k) {
        const double d = squared_distance(points, i, centroids, k);
        if (d < best_d2) {
          best_d2 = d;
          best = k;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
      assign_d2[static_cast<std::size_t>(i)] = best_d2;
    }

    Matrix next = Matrix::Zero(b, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(b), 0);
    for (Index i = 0; i < n; ++i) {
      next.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (Index k = 0; k < b; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        next.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
      } else {
        // Re-seed an empty cluster to the point farthest from its centroid.
        Index far = 0;
        double far_d2 = -kInf;
        for (Index i = 0; i < n; ++i) {
          if (assign_d2[static_cast<std::size_t>(i)] > far_d2) {
            far_d2 = assign_d2[static_cast<std::size_t>(i)];
            far = i;
          }
        }
        next.row(k) = points.row(far);
        assign_d2[static_cast<std::size_t>(far)] = 0.0;  // claimed
      }
    }

    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = next;
    if (shift < tol) break;
  }
  return centroids;
}

IndexList nearest_unique_mapping(const Matrix& targets, const Matrix& pool) {
  if (targets.rows() > pool.rows()) {
    throw ContractError("nearest_unique_mapping: more targets than pool rows");
  }
  std::vector<bool> taken(static_cast<std::size_t>(pool.rows()), false);
  IndexList out;
  out.reserve(static_cast<std::size_t>(targets.rows()));
  for (Index t = 0; t < targets.rows(); ++t) {
    Index best = -1;
    double best_d2 = kInf;
    for (Index j = 0; j < pool.rows(); ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double d = squared_distance(targets, t, pool, j);
      if (d < best_d2) {
        best_d2 = d;
        best = j;
      }
    }
    taken[static_cast<std::size_t>(best)] = true;
    out.push_back(best);
  }
  return out;
}

AcquisitionBatch acquire_kmeans_data(const AcquisitionInput& in) {
  require_nonempty(in);
  const Matrix centroids =
      lloyd_kmeans(in.avail_features, effective_batch(in), in.rng_seed);
  const IndexList rows = nearest_unique_mapping(centroids, in.avail_features);
  return rows_to_batch(in, rows);
}

AcquisitionBatch acquire_kmeans_embed(const AcquisitionInput& in) {
  require_nonempty(in);
  const Matrix& avail = require_embeddings(in.avail_embeddings, "pool");
  const Matrix centroids = lloyd_kmeans(avail, effective_batch(in), in.rng_seed);
  const IndexList rows = nearest_unique_mapping(centroids, avail);
  return rows_to_batch(in, rows);
}

AcquisitionBatch acquire_badge(const AcquisitionInput& in) {
  require_nonempty(in);
  const Matrix& grads =
      require_embeddings(in.gradient_embeddings, "loss-gradient");
  const IndexList rows = kmeanspp_seed(grads, effective_batch(in), in.rng_seed);
  return rows_to_batch(in, rows);
}

std::vector<Vector> bim_perturb(const EnsembleMlp& model, const Vector& t,
                                double gamma, int adv_steps) {
  if (!(gamma > 0.0)) throw ConfigError("advbim: gamma must be positive");
  if (adv_steps < 1) throw ConfigError("advbim: adv_steps must be >= 1");
  const double eps = gamma * t.norm();
  const double eta = eps / static_cast<double>(adv_steps);

  std::vector<Vector> trajectory;
  trajectory.reserve(static_cast<std::size_t>(adv_steps) + 1);
  trajectory.push_back(t);
  Vector current = t;
  for (int step = 0; step < adv_steps; ++step) {
    const Vector grad = variance_gradient_wrt_input(model, current);
    current += eta * grad.array().sign().matrix();
    Vector offset = current - t;
    const double norm = offset.norm();
    if (norm > eps) {
      current = t + offset * (eps / norm);
    }
    trajectory.push_back(current);
  }
  return trajectory;
}

AcquisitionBatch acquire_advbim(const AcquisitionInput& in) {
  require_nonempty(in);
  if (in.mlp == nullptr) {
    throw CapabilityError("advbim: requires a differentiable model");
  }
  const Index n = static_cast<Index>(in.avail_idx.size());
  if (in.avail_features.rows() != n) {
    throw ShapeError("advbim: features not aligned with pool");
  }

  Matrix perturbed(n, in.avail_features.cols());
  for (Index i = 0; i < n; ++i) {
    perturbed.row(i) =
        bim_perturb(*in.mlp, in.avail_features.row(i).transpose(), in.gamma,
                    in.adv_steps)
            .back()
            .transpose();
  }

  // Nearest-pool distance of each perturbed point decides the mapping order.
  std::vector<double> nearest_d2(static_cast<std::size_t>(n), kInf);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      nearest_d2[static_cast<std::size_t>(i)] =
          std::min(nearest_d2[static_cast<std::size_t>(i)],
                   squared_distance(perturbed, i, in.avail_features, j));
    }
  }
  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index c) {
    const double da = nearest_d2[static_cast<std::size_t>(a)];
    const double dc = nearest_d2[static_cast<std::size_t>(c)];
    if (da != dc) return da < dc;
    return a < c;
  });

  const Index b = effective_batch(in);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  IndexList rows;
  rows.reserve(static_cast<std::size_t>(b));
  for (Index t : order) {
    if (static_cast<Index>(rows.size()) == b) break;
    Index best = -1;
    double best_d2 = kInf;
    for (Index j = 0; j < n; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double d = squared_distance(perturbed, t, in.avail_features, j);
      if (d < best_d2) {
        best_d2 = d;
        best = j;
      }
    }
    taken[static_cast<std::size_t>(best)] = true;
    rows.push_back(best);
  }
  return rows_to_batch(in, rows);
}

AcquisitionBatch acquire(AcquisitionKind kind, const AcquisitionInput& in) {
  switch (kind) {
    case AcquisitionKind::random: return acquire_random(in);
    case AcquisitionKind::topuncertain: return acquire_topuncertain(in);
    case AcquisitionKind::softuncertain: return acquire_softuncertain(in);
    case AcquisitionKind::margin: return acquire_margin(in);
    case AcquisitionKind::coreset: return acquire_coreset(in);
    case AcquisitionKind::badge: return acquire_badge(in);
    case AcquisitionKind::advbim: return acquire_advbim(in);
    case AcquisitionKind::kmeansdata: return acquire_kmeans_data(in);
    case AcquisitionKind::kmeansembed: return acquire_kmeans_embed(in);
  }
  throw ConfigError("acquire: unknown acquisition kind");
}

}  // namespace disco
