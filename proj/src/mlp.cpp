#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "disco/models.hpp"
#include "disco/rng.hpp"

namespace disco {

namespace {

Matrix relu(Matrix m) {
  return m.cwiseMax(0.0);
}

void check_finite_params(const MlpMember& member, int epoch) {
  if (!member.w1.allFinite() || !member.b1.allFinite() ||
      !member.w2.allFinite() || !std::isfinite(member.b2)) {
    throw NumericalError(
        "mlp training diverged at epoch " + std::to_string(epoch), epoch);
  }
}

struct MemberTrainResult {
  MlpMember member;
  int epochs_used = 0;
  bool early_stopped = false;
  double best_val_mse = std::numeric_limits<double>::infinity();
};

MlpMember init_member(Index hidden, Index q, Rng& rng) {
  MlpMember m;
  m.w1.resize(hidden, q);
  const double w1_sd = std::sqrt(2.0 / static_cast<double>(q));
  for (Index r = 0; r < hidden; ++r) {
    for (Index c = 0; c < q; ++c) m.w1(r, c) = rng.normal(0.0, w1_sd);
  }
  m.b1 = Vector::Zero(hidden);
  m.w2.resize(hidden);
  const double w2_sd = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Index r = 0; r < hidden; ++r) m.w2[r] = rng.normal(0.0, w2_sd);
  m.b2 = 0.0;
  return m;
}

double validation_mse(const MlpMember& m, const Matrix& x, const Vector& y) {
  return (m.predict(x) - y).squaredNorm() / static_cast<double>(y.size());
}

/// Mini-batch gradient descent with momentum on squared error, early-stopped
/// on the shared validation split; returns the best-validation snapshot.
MemberTrainResult train_member(const Matrix& x_train, const Vector& y_train,
                               const Matrix& x_val, const Vector& y_val,
                               Index hidden, const MlpTrainConfig& cfg,
                               std::uint64_t seed) {
  Rng rng(seed);
  const Index n = x_train.rows();
  const Index q = x_train.cols();

  MemberTrainResult result;
  MlpMember m = init_member(hidden, q, rng);

  Matrix v_w1 = Matrix::Zero(hidden, q);
  Vector v_b1 = Vector::Zero(hidden);
  Vector v_w2 = Vector::Zero(hidden);
  double v_b2 = 0.0;

  MlpMember best = m;
  double best_val = validation_mse(m, x_val, y_val);
  int patience_left = cfg.patience;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  int epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (Index start = 0; start < n; start += cfg.minibatch) {
      const Index bsz = std::min(cfg.minibatch, n - start);
      Matrix xb(bsz, q);
      Vector yb(bsz);
      for (Index i = 0; i < bsz; ++i) {
        xb.row(i) = x_train.row(order[static_cast<std::size_t>(start + i)]);
        yb[i] = y_train[order[static_cast<std::size_t>(start + i)]];
      }

      Matrix z = (xb * m.w1.transpose()).rowwise() + m.b1.transpose();
      Matrix h = relu(z);
      Vector pred = h * m.w2 + Vector::Constant(bsz, m.b2);
      Vector delta = (pred - yb) / static_cast<double>(bsz);
      if (!delta.allFinite()) {
        throw NumericalError(
            "mlp training loss became non-finite at epoch " +
                std::to_string(epoch),
            epoch);
      }

      Vector g_w2 = h.transpose() * delta;
      double g_b2 = delta.sum();
      Matrix dh = delta * m.w2.transpose();
      dh = (z.array() > 0.0).select(dh, 0.0);
      Matrix g_w1 = dh.transpose() * xb;
      Vector g_b1 = dh.colwise().sum();

      v_w1 = cfg.momentum * v_w1 - cfg.learning_rate * g_w1;
      v_b1 = cfg.momentum * v_b1 - cfg.learning_rate * g_b1;
      v_w2 = cfg.momentum * v_w2 - cfg.learning_rate * g_w2;
      v_b2 = cfg.momentum * v_b2 - cfg.learning_rate * g_b2;
      m.w1 += v_w1;
      m.b1 += v_b1;
      m.w2 += v_w2;
      m.b2 += v_b2;
    }
    check_finite_params(m, epoch);

    const double val = validation_mse(m, x_val, y_val);
    if (val < best_val - 1e-12) {
      best_val = val;
      best = m;
      patience_left = cfg.patience;
    } else {
      --patience_left;
      if (patience_left <= 0) {
        result.early_stopped = true;
        ++epoch;
        break;
      }
    }
  }

  result.member = std::move(best);
  result.epochs_used = epoch;
  result.best_val_mse = best_val;
  return result;
}

}  // namespace

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  Matrix centered = x.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().mean()).sqrt();
  for (Index j = 0; j < s.scale.size(); ++j) {
    if (s.scale[j] < 1e-12) s.scale[j] = 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Index dim) {
  Standardizer s;
  s.mean = Vector::Zero(dim);
  s.scale = Vector::Ones(dim);
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Vector Standardizer::apply_row(const Vector& t) const {
  return (t - mean).cwiseQuotient(scale);
}

Matrix MlpMember::hidden(const Matrix& x) const {
  return relu((x * w1.transpose()).rowwise() + b1.transpose());
}

Vector MlpMember::predict(const Matrix& x) const {
  return hidden(x) * w2 + Vector::Constant(x.rows(), b2);
}

EstimatorOutput EstimatorOutput::from_per_member(Matrix per_member) {
  EstimatorOutput out;
  out.mean = per_member.rowwise().mean();
  out.variance =
      (per_member.colwise() - out.mean).array().square().rowwise().mean();
  out.per_member = std::move(per_member);
  return out;
}

EnsembleMlp train_mlp_ensemble(const Matrix& features, const Vector& outcomes,
                               const MlpTrainConfig& config,
                               std::uint64_t seed) {
  const Index n = features.rows();
  if (n < 2) {
    throw InsufficientDataError(
        "train_mlp_ensemble: need at least 2 training rows, got " +
        std::to_string(n));
  }
  if (outcomes.size() != n) {
    throw ShapeError("train_mlp_ensemble: features/outcomes row mismatch");
  }
  if (!outcomes.allFinite() || !features.allFinite()) {
    throw DataError("train_mlp_ensemble: non-finite training values");
  }
  if (config.ensemble_size < 1 || config.hidden_grid.empty()) {
    throw ConfigError("train_mlp_ensemble: bad ensemble configuration");
  }

  EnsembleMlp model;
  model.standardizer = Standardizer::fit(features);
  const Matrix x = model.standardizer.apply(features);

  // Shared validation holdout: used for the hidden-size grid and for every
  // member's early stopping.
  Rng split_rng(derive_seed(seed, "validation_split"));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  split_rng.shuffle(order);
  const Index n_val = std::clamp<Index>(
      static_cast<Index>(std::llround(config.validation_fraction *
                                      static_cast<double>(n))),
      1, n - 1);
  IndexList val_rows(order.begin(), order.begin() + n_val);
  IndexList train_rows(order.begin() + n_val, order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const Matrix x_train = select_rows(x, train_rows);
  const Vector y_train = select_rows(outcomes, train_rows);
  const Matrix x_val = select_rows(x, val_rows);
  const Vector y_val = select_rows(outcomes, val_rows);

  Index hidden = config.hidden_grid.front();
  double hidden_val = std::numeric_limits<double>::infinity();
  if (config.hidden_grid.size() == 1) {
    hidden = config.hidden_grid.front();
  } else {
    for (Index h : config.hidden_grid) {
      auto probe =
          train_member(x_train, y_train, x_val, y_val, h, config,
                       derive_seed(seed, "hidden_probe",
                                   static_cast<std::uint64_t>(h)));
      if (probe.best_val_mse < hidden_val) {
        hidden_val = probe.best_val_mse;
        hidden = h;
      }
    }
  }

  model.meta.hidden_size = hidden;
  model.members.reserve(static_cast<std::size_t>(config.ensemble_size));
  double val_sum = 0.0;
  for (Index j = 0; j < config.ensemble_size; ++j) {
    auto r = train_member(x_train, y_train, x_val, y_val, hidden, config,
                          derive_seed(seed, "member",
                                      static_cast<std::uint64_t>(j)));
    val_sum += r.best_val_mse;
    model.meta.epochs_used.push_back(r.epochs_used);
    model.meta.early_stopped.push_back(r.early_stopped);
    model.members.push_back(std::move(r.member));
  }
  model.meta.validation_mse = val_sum / static_cast<double>(config.ensemble_size);
  return model;
}

EstimatorOutput predict_ensemble(const EnsembleMlp& model,
                                 const Matrix& features) {
  if (features.cols() != model.input_dim()) {
    throw ShapeError("predict_ensemble: expected " +
                     std::to_string(model.input_dim()) + " feature columns, got " +
                     std::to_string(features.cols()));
  }
  const Matrix x = model.standardizer.apply(features);
  Matrix per_member(features.rows(), model.size());
  for (Index j = 0; j < model.size(); ++j) {
    per_member.col(j) = model.members[static_cast<std::size_t>(j)].predict(x);
  }
  return EstimatorOutput::from_per_member(std::move(per_member));
}

EmbeddingMatrix penultimate_embeddings(const EnsembleMlp& model,
                                       const Matrix& features,
                                       Index member_index) {
  if (member_index < 0 || member_index >= model.size()) {
    throw ContractError("penultimate_embeddings: member index out of range");
  }
  if (features.cols() != model.input_dim()) {
    throw ShapeError("penultimate_embeddings: feature column mismatch");
  }
  EmbeddingMatrix out;
  out.source_member = member_index;
  out.values = model.members[static_cast<std::size_t>(member_index)].hidden(
      model.standardizer.apply(features));
  return out;
}

Vector badge_gradient_row(const Vector& hidden, double prediction,
                          double sampled_outcome) {
  const double residual = prediction - sampled_outcome;
  Vector grad(hidden.size() + 1);
  grad.head(hidden.size()) = residual * hidden;
  grad[hidden.size()] = residual;
  return grad;
}

Matrix badge_gradient_embedding(const EnsembleMlp& model,
                                const Matrix& features, Index member_index,
                                std::uint64_t seed) {
  if (member_index < 0 || member_index >= model.size()) {
    throw ContractError("badge_gradient_embedding: member index out of range");
  }
  if (features.cols() != model.input_dim()) {
    throw ShapeError("badge_gradient_embedding: feature column mismatch");
  }
  const MlpMember& member = model.members[static_cast<std::size_t>(member_index)];
  const Matrix h = member.hidden(model.standardizer.apply(features));
  const Vector pred = h * member.w2 + Vector::Constant(h.rows(), member.b2);

  Rng rng(derive_seed(seed, "badge_outcome_samples"));
  Matrix grads(features.rows(), member.hidden_size() + 1);
  for (Index i = 0; i < features.rows(); ++i) {
    const double yhat = rng.normal(pred[i], 1.0);  // sigma^2 = 1
    grads.row(i) =
        badge_gradient_row(h.row(i).transpose(), pred[i], yhat).transpose();
  }
  return grads;
}

Vector variance_gradient_wrt_input(const EnsembleMlp& model, const Vector& t) {
  if (t.size() != model.input_dim()) {
    throw ShapeError("variance_gradient_wrt_input: dimension mismatch");
  }
  if (!t.allFinite()) {
    throw ContractError("variance_gradient_wrt_input: non-finite input");
  }
  const Index m = model.size();
  const Vector x = model.standardizer.apply_row(t);

  Vector preds(m);
  std::vector<Vector> grads(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) {
    const MlpMember& mem = model.members[static_cast<std::size_t>(j)];
    Vector z = mem.w1 * x + mem.b1;
    Vector h = z.cwiseMax(0.0);
    preds[j] = mem.w2.dot(h) + mem.b2;
    // d g_j / d x = W1^T (w2 .* relu'(z)); relu' is 0 at exactly 0.
    Vector gate = (z.array() > 0.0).select(mem.w2, Vector::Zero(z.size()));
    grads[static_cast<std::size_t>(j)] = mem.w1.transpose() * gate;
  }

  const double mean = preds.mean();
  Vector grad_x = Vector::Zero(x.size());
  for (Index j = 0; j < m; ++j) {
    grad_x += (2.0 / static_cast<double>(m)) * (preds[j] - mean) *
              grads[static_cast<std::size_t>(j)];
  }
  // Chain rule through the z-score: dx/dt = 1/scale.
  return grad_x.cwiseQuotient(model.standardizer.scale);
}

}  // namespace disco
