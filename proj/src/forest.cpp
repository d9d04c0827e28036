#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "disco/models.hpp"
#include "disco/rng.hpp"

namespace disco {

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

/// Best axis-aligned split of `rows` by squared error, scanning candidate
/// features in the given order and stopping after `max_features` non-constant
/// ones have been evaluated.
SplitChoice find_split(const Matrix& x, const Vector& y,
                       const std::vector<Index>& rows,
                       const std::vector<Index>& feature_order,
                       Index max_features) {
  SplitChoice best;
  const std::size_t n = rows.size();
  std::vector<std::pair<double, double>> vals(n);  // (feature value, y)
  Index evaluated = 0;

  for (Index f : feature_order) {
    if (evaluated >= max_features) break;
    for (std::size_t i = 0; i < n; ++i) {
      vals[i] = {x(rows[i], f), y[rows[i]]};
    }
    std::sort(vals.begin(), vals.end());
    if (vals.front().first == vals.back().first) continue;  // constant feature
    ++evaluated;

    double sum_left = 0.0, sumsq_left = 0.0;
    double sum_right = 0.0, sumsq_right = 0.0;
    for (const auto& [v, yi] : vals) {
      sum_right += yi;
      sumsq_right += yi * yi;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto [v, yi] = vals[i];
      sum_left += yi;
      sumsq_left += yi * yi;
      sum_right -= yi;
      sumsq_right -= yi * yi;
      if (v == vals[i + 1].first) continue;  // no boundary between equal values
      const double n_left = static_cast<double>(i + 1);
      const double n_right = static_cast<double>(n - i - 1);
      const double sse = (sumsq_left - sum_left * sum_left / n_left) +
                         (sumsq_right - sum_right * sum_right / n_right);
      if (sse < best.sse) {
        best.sse = sse;
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (v + vals[i + 1].first);
      }
    }
  }
  return best;
}

int build_node(RegressionTree& tree, const Matrix& x, const Vector& y,
               std::vector<Index>& rows, Index max_features, Rng& rng) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  double sum = 0.0;
  for (Index r : rows) sum += y[r];
  const double mean = sum / static_cast<double>(rows.size());

  bool pure = true;
  for (Index r : rows) {
    if (y[r] != y[rows.front()]) {
      pure = false;
      break;
    }
  }

  if (rows.size() < 2 || pure) {
    tree.nodes[node_id].value = mean;
    tree.nodes[node_id].count = static_cast<Index>(rows.size());
    return node_id;
  }

  std::vector<Index> feature_order(static_cast<std::size_t>(x.cols()));
  std::iota(feature_order.begin(), feature_order.end(), Index{0});
  rng.shuffle(feature_order);
  const SplitChoice split = find_split(x, y, rows, feature_order, max_features);

  if (split.feature < 0) {  // all features constant on this node
    tree.nodes[node_id].value = mean;
    tree.nodes[node_id].count = static_cast<Index>(rows.size());
    return node_id;
  }

  std::vector<Index> left_rows, right_rows;
  for (Index r : rows) {
    (x(r, split.feature) <= split.threshold ? left_rows : right_rows)
        .push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  tree.nodes[node_id].feature = split.feature;
  tree.nodes[node_id].threshold = split.threshold;
  const int left = build_node(tree, x, y, left_rows, max_features, rng);
  const int right = build_node(tree, x, y, right_rows, max_features, rng);
  tree.nodes[node_id].left = left;
  tree.nodes[node_id].right = right;
  return node_id;
}

}  // namespace

double RegressionTree::predict_row(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

RandomForestModel train_random_forest(const Matrix& features,
                                      const Vector& outcomes, Index m,
                                      std::uint64_t seed) {
  const Index n = features.rows();
  if (n < 2) {
    throw InsufficientDataError(
        "train_random_forest: need at least 2 training rows, got " +
        std::to_string(n));
  }
  if (outcomes.size() != n) {
    throw ShapeError("train_random_forest: features/outcomes row mismatch");
  }
  if (m < 1) throw ConfigError("train_random_forest: need at least 1 tree");

  RandomForestModel model;
  model.input_dim = features.cols();
  model.max_features = std::max<Index>(1, features.cols() / 3);
  model.bootstrap = true;
  model.trees.resize(static_cast<std::size_t>(m));

  for (Index j = 0; j < m; ++j) {
    Rng rng(derive_seed(seed, "tree", static_cast<std::uint64_t>(j)));
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) {
      r = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(n)));
    }
    build_node(model.trees[static_cast<std::size_t>(j)], features, outcomes,
               rows, model.max_features, rng);
  }
  return model;
}

EstimatorOutput rf_predict(const RandomForestModel& model,
                           const Matrix& features) {
  if (features.cols() != model.input_dim) {
    throw ShapeError("rf_predict: expected " +
                     std::to_string(model.input_dim) + " feature columns, got " +
                     std::to_string(features.cols()));
  }
  Matrix per_member(features.rows(),
                    static_cast<Index>(model.trees.size()));
  for (std::size_t j = 0; j < model.trees.size(); ++j) {
    for (Index i = 0; i < features.rows(); ++i) {
      per_member(i, static_cast<Index>(j)) =
          model.trees[j].predict_row(features.row(i));
    }
  }
  return EstimatorOutput::from_per_member(std::move(per_member));
}

}  // namespace disco
