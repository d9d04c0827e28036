#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disco/core.hpp"
#include "disco/models.hpp"

namespace disco {

enum class ModelKind { ensemble_mlp, random_forest };

enum class AcquisitionKind {
  random,
  topuncertain,
  softuncertain,
  margin,
  coreset,
  badge,
  advbim,
  kmeansdata,
  kmeansembed,
};

inline constexpr AcquisitionKind kAllAcquisitions[] = {
    AcquisitionKind::random,      AcquisitionKind::topuncertain,
    AcquisitionKind::softuncertain, AcquisitionKind::margin,
    AcquisitionKind::coreset,     AcquisitionKind::badge,
    AcquisitionKind::advbim,      AcquisitionKind::kmeansdata,
    AcquisitionKind::kmeansembed,
};

std::string to_string(ModelKind kind);
std::string to_string(AcquisitionKind kind);
ModelKind parse_model_kind(std::string_view name);
AcquisitionKind parse_acquisition_kind(std::string_view name);

/// The random forest exposes no embeddings or input gradients, so it only
/// supports the model-independent and prediction-spread methods.
bool compatible(ModelKind model, AcquisitionKind acquisition);

/// Everything an acquisition function may consume for one selection round.
/// Matrices are row-aligned with avail_idx (and cum_idx for cum_* fields).
struct AcquisitionInput {
  IndexList avail_idx;
  Matrix avail_features;
  Matrix cum_features;
  EstimatorOutput estimator_output;

  std::optional<Matrix> avail_embeddings;
  std::optional<Matrix> cum_embeddings;
  std::optional<Matrix> gradient_embeddings;
  const EnsembleMlp* mlp = nullptr;  // required by advbim

  Index batch_size = 1;
  std::uint64_t rng_seed = 0;
  double temperature = 1.0;  // softuncertain
  double gamma = 0.1;        // advbim perturbation budget
  int adv_steps = 15;        // advbim iterations
};

struct ScoreVector {
  enum class Kind { bald, margin };
  Vector values;
  Kind kind = Kind::bald;
};

/// 0.5 * ln(1 + prediction variance); the information-gain estimate with
/// unit outcome noise.
ScoreVector bald_scores(const EstimatorOutput& out);

/// Spread max_j g_j - min_j g_j of the member predictions per row.
ScoreVector margin_scores(const EstimatorOutput& out);

AcquisitionBatch acquire_random(const AcquisitionInput& in);
AcquisitionBatch acquire_topuncertain(const AcquisitionInput& in);
AcquisitionBatch acquire_softuncertain(const AcquisitionInput& in);
AcquisitionBatch acquire_margin(const AcquisitionInput& in);
AcquisitionBatch acquire_coreset(const AcquisitionInput& in);
AcquisitionBatch acquire_badge(const AcquisitionInput& in);
AcquisitionBatch acquire_advbim(const AcquisitionInput& in);
AcquisitionBatch acquire_kmeans_data(const AcquisitionInput& in);
AcquisitionBatch acquire_kmeans_embed(const AcquisitionInput& in);

AcquisitionBatch acquire(AcquisitionKind kind, const AcquisitionInput& in);

// ---------------------------------------------------------------------------
// Selection utilities shared by the methods above
// ---------------------------------------------------------------------------

/// Greedy k-centers: repeatedly takes the candidate farthest from every
/// already-selected or anchor point. With no anchors the first pick is the
/// lowest index; all ties break to the lowest index.
IndexList farthest_first(const Matrix& candidates, const Matrix& anchors,
                         Index b);

/// k-means++ seeding: first seed uniform, later seeds proportional to the
/// squared distance to the nearest existing seed. When all remaining
/// distances are zero the lowest unselected index is taken.
IndexList kmeanspp_seed(const Matrix& points, Index b, std::uint64_t seed);

/// k-means++ seeding followed by Lloyd iterations until the largest centroid
/// shift drops below tol; empty clusters are re-seeded to the farthest point.
Matrix lloyd_kmeans(const Matrix& points, Index b, std::uint64_t seed,
                    int max_iter = 300, double tol = 1e-4);

/// For each target row in order, the nearest pool row not yet taken
/// (Euclidean, ties to the lowest index).
IndexList nearest_unique_mapping(const Matrix& targets, const Matrix& pool);

/// The basic-iterative-method trajectory for one point: adv_steps sign-of-
/// variance-gradient steps of size eps/adv_steps, rescaled onto the
/// eps = gamma*||t|| ball whenever the offset leaves it. Returns
/// [t, t_hat_1, ..., t_hat_steps].
std::vector<Vector> bim_perturb(const EnsembleMlp& model, const Vector& t,
                                double gamma, int adv_steps);

}  // namespace disco
