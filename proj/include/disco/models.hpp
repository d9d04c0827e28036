#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "disco/core.hpp"

namespace disco {

/// Per-feature z-score transform fitted on training rows. Features with zero
/// spread keep scale 1 so the transform stays invertible.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  static Standardizer identity(Index dim);

  Matrix apply(const Matrix& x) const;
  Vector apply_row(const Vector& t) const;
};

/// One hidden ReLU layer plus a linear output head.
struct MlpMember {
  Matrix w1;  // hidden_size x q
  Vector b1;  // hidden_size
  Vector w2;  // hidden_size
  double b2 = 0.0;

  Index hidden_size() const { return w1.rows(); }
  Index input_dim() const { return w1.cols(); }

  /// Post-activation hidden vectors, one row per (already standardized) input
  /// row.
  Matrix hidden(const Matrix& x) const;
  Vector predict(const Matrix& x) const;
};

struct EnsembleTrainMeta {
  Index hidden_size = 0;
  double validation_mse = 0.0;
  std::vector<int> epochs_used;         // per member
  std::vector<bool> early_stopped;      // per member
};

/// Deep ensemble of independently initialized and trained members; the
/// spread of member predictions is the model's epistemic uncertainty.
struct EnsembleMlp {
  std::vector<MlpMember> members;
  Standardizer standardizer;
  EnsembleTrainMeta meta;

  Index size() const { return static_cast<Index>(members.size()); }
  Index hidden_size() const { return members.front().hidden_size(); }
  Index input_dim() const { return members.front().input_dim(); }
};

/// Per-member predictions with their row-wise mean and population variance.
struct EstimatorOutput {
  Matrix per_member;  // n x m
  Vector mean;
  Vector variance;

  static EstimatorOutput from_per_member(Matrix per_member);
  Index size() const { return per_member.rows(); }
  Index members() const { return per_member.cols(); }
};

/// Penultimate-layer (post-ReLU hidden) activations of one member.
struct EmbeddingMatrix {
  Matrix values;  // n x hidden_size
  Index source_member = 0;
};

struct MlpTrainConfig {
  Index ensemble_size = 10;
  std::vector<Index> hidden_grid = {16, 32, 64, 128};
  int max_epochs = 100;
  int patience = 5;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  Index minibatch = 32;
  double validation_fraction = 0.2;
};

/// Trains the ensemble from scratch. The hidden size is picked from
/// config.hidden_grid by validation MSE on a 20% holdout of the training
/// rows; the same holdout drives per-member early stopping. Inputs are
/// z-scored internally; outcomes are used as given. Deterministic per seed.
EnsembleMlp train_mlp_ensemble(const Matrix& features, const Vector& outcomes,
                               const MlpTrainConfig& config,
                               std::uint64_t seed);

EstimatorOutput predict_ensemble(const EnsembleMlp& model,
                                 const Matrix& features);

EmbeddingMatrix penultimate_embeddings(const EnsembleMlp& model,
                                       const Matrix& features,
                                       Index member_index);

/// Gradient of the squared-error loss 0.5*(g - yhat)^2 with respect to the
/// final-layer weights and bias: (g - yhat) * [h; 1].
Vector badge_gradient_row(const Vector& hidden, double prediction,
                          double sampled_outcome);

/// One row per input: badge_gradient_row with yhat drawn from
/// Normal(member prediction, 1). Deterministic per seed.
Matrix badge_gradient_embedding(const EnsembleMlp& model,
                                const Matrix& features, Index member_index,
                                std::uint64_t seed);

/// Analytic gradient of the across-member population variance of predictions
/// with respect to the raw (unstandardized) input.
Vector variance_gradient_wrt_input(const EnsembleMlp& model, const Vector& t);

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean
  Index count = 0;     // leaf sample count
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct RandomForestModel {
  std::vector<RegressionTree> trees;
  Index input_dim = 0;
  Index max_features = 1;  // split candidates per node
  bool bootstrap = true;
};

/// m trees on bootstrap resamples with max(1, floor(q/3)) candidate features
/// per split, grown until leaves are pure or hold fewer than 2 samples.
RandomForestModel train_random_forest(const Matrix& features,
                                      const Vector& outcomes, Index m,
                                      std::uint64_t seed);

EstimatorOutput rf_predict(const RandomForestModel& model,
                           const Matrix& features);

}  // namespace disco
