#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "voxkit/common.hpp"
#include "voxkit/feature_selection.hpp"
#include "voxkit/linear_model.hpp"

namespace voxkit {

struct FoldPlan {
  struct Fold {
    std::vector<int> train;
    std::vector<int> test;
  };
  std::vector<Fold> folds;
  int n_samples = 0;
};

// k contiguous blocks (the first n mod k folds get one extra sample), or
// blocks of a seeded permutation when shuffle is on.
inline FoldPlan kfold(int n, int k, bool shuffle = false, std::uint64_t seed = 0) {
  require(k >= 2 && k <= n, ErrorKind::BadK, "need 2 <= k <= n");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  if (shuffle) order = Rng(seed).permutation(n);

  FoldPlan plan;
  plan.n_samples = n;
  const int base = n / k, extra = n % k;
  int at = 0;
  for (int f = 0; f < k; ++f) {
    const int len = base + (f < extra ? 1 : 0);
    FoldPlan::Fold fold;
    fold.test.assign(order.begin() + at, order.begin() + at + len);
    fold.train.reserve(static_cast<std::size_t>(n - len));
    for (int i = 0; i < n; ++i)
      if (i < at || i >= at + len) fold.train.push_back(order[static_cast<std::size_t>(i)]);
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
    at += len;
  }
  return plan;
}

// Monte-Carlo splitter: n_iter independent seeded partitions with
// round(test_fraction * n) held out each time.
inline FoldPlan shuffle_split(int n, int n_iter, double test_fraction, std::uint64_t seed = 0) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::BadFraction,
          "test_fraction must lie in (0, 1)");
  require(n_iter >= 1, ErrorKind::InvalidArgument, "n_iter must be at least 1");
  int n_test = static_cast<int>(std::lround(test_fraction * n));
  n_test = std::max(1, std::min(n_test, n - 1));

  Rng rng(seed);
  FoldPlan plan;
  plan.n_samples = n;
  for (int it = 0; it < n_iter; ++it) {
    const std::vector<int> order = rng.permutation(n);
    FoldPlan::Fold fold;
    fold.test.assign(order.begin(), order.begin() + n_test);
    fold.train.assign(order.begin() + n_test, order.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// Declarative estimator description so CV and grid search can refit fresh
// models per fold. select_k > 0 prepends ANOVA k-best selection, refit
// inside every fold so no test information leaks into the screening.
struct EstimatorSpec {
  ModelKind kind = ModelKind::SvcHingeL2;
  double reg = 1.0;  // C for classifiers, alpha for regressors
  int select_k = 0;
  int lars_max_iter = 10;
  int lars_cv_folds = 5;
};

enum class Metric { Accuracy, R2 };

namespace detail {

inline LinearModel fit_spec(const EstimatorSpec& spec, const DataMatrix& X, const Vector& y) {
  switch (spec.kind) {
    case ModelKind::SvcHingeL2:
    case ModelKind::SvcSqHingeL2:
    case ModelKind::SvcSqHingeL1:
    case ModelKind::LogRegL1:
    case ModelKind::LogRegL2: {
      std::vector<int> labels(static_cast<std::size_t>(y.size()));
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double v = y(i);
        require(v == std::floor(v), ErrorKind::InvalidArgument,
                "classifier labels must be integers");
        labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
      }
      switch (spec.kind) {
        case ModelKind::SvcHingeL2:
          return fit_linear_svc(X, labels, Penalty::L2, SvcLoss::Hinge, spec.reg);
        case ModelKind::SvcSqHingeL2:
          return fit_linear_svc(X, labels, Penalty::L2, SvcLoss::SquaredHinge, spec.reg);
        case ModelKind::SvcSqHingeL1:
          return fit_linear_svc(X, labels, Penalty::L1, SvcLoss::SquaredHinge, spec.reg);
        case ModelKind::LogRegL1:
          return fit_logistic(X, labels, Penalty::L1, spec.reg);
        default:
          return fit_logistic(X, labels, Penalty::L2, spec.reg);
      }
    }
    case ModelKind::Ridge:
      return fit_ridge(X, y, spec.reg);
    case ModelKind::Lasso:
      return fit_lasso_cd(X, y, spec.reg);
    case ModelKind::LassoLars:
      return fit_lasso_lars_cv(X, y, spec.lars_cv_folds, spec.lars_max_iter).model;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown estimator kind");
}

inline DataMatrix take_rows(const DataMatrix& X, const std::vector<int>& rows) {
  DataMatrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

inline Vector take(const Vector& y, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

inline std::vector<int> to_labels(const Vector& y) {
  std::vector<int> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(y(i));
  return out;
}

}  // namespace detail

// Fits the spec on each fold's train rows (selection included) and scores
// the held-out rows. Nothing crosses the split.
inline std::vector<double> cross_val_score(const EstimatorSpec& spec, const DataMatrix& X,
                                           const Vector& y, const FoldPlan& plan, Metric metric) {
  require(plan.n_samples == static_cast<int>(X.rows()), ErrorKind::LengthMismatch,
          "fold plan does not match sample count");
  require(y.size() == X.rows(), ErrorKind::LengthMismatch, "label count does not match samples");

  std::vector<double> scores;
  scores.reserve(plan.folds.size());
  for (const auto& fold : plan.folds) {
    DataMatrix Xtr = detail::take_rows(X, fold.train);
    DataMatrix Xte = detail::take_rows(X, fold.test);
    const Vector ytr = detail::take(y, fold.train);
    const Vector yte = detail::take(y, fold.test);

    if (spec.select_k > 0) {
      const FeatureSelector sel = select_k_best(f_classif(Xtr, detail::to_labels(ytr)),
                                                spec.select_k);
      Xtr = select_transform(sel, Xtr);
      Xte = select_transform(sel, Xte);
    }
    const LinearModel model = detail::fit_spec(spec, Xtr, ytr);
    if (metric == Metric::Accuracy) {
      scores.push_back(accuracy_score(detail::to_labels(yte), classify(model, Xte)));
    } else {
      const Matrix pred = predict(model, Xte);
      scores.push_back(r2_score_per_target(Matrix(yte), pred)(0));
    }
  }
  return scores;
}

struct GridResult {
  struct Entry {
    std::vector<std::pair<std::string, double>> params;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double std_dev = 0.0;  // n-1 denominator
  };
  std::vector<Entry> entries;
  std::size_t best_index = 0;
  LinearModel best_model;  // refit on the full data

  const Entry& best() const { return entries[best_index]; }
};

using ParamGrid = std::vector<std::pair<std::string, std::vector<double>>>;

namespace detail {

inline void apply_param(EstimatorSpec& spec, const std::string& name, double value) {
  if (name == "C" || name == "alpha" || name == "reg")
    spec.reg = value;
  else if (name == "k")
    spec.select_k = static_cast<int>(value);
  else
    throw Error(ErrorKind::InvalidArgument, "unknown grid parameter " + name);
}

}  // namespace detail

// Exhaustive search over the Cartesian product of the grid, scored with
// cross_val_score; ties keep the first combination in grid order.
inline GridResult grid_search(const EstimatorSpec& spec_template, const ParamGrid& grid,
                              const DataMatrix& X, const Vector& y, const FoldPlan& plan,
                              Metric metric) {
  require(!grid.empty(), ErrorKind::InvalidArgument, "empty parameter grid");
  for (const auto& [name, values] : grid)
    require(!values.empty(), ErrorKind::InvalidArgument, "empty value list for " + name);

  std::size_t total = 1;
  for (const auto& [name, values] : grid) total *= values.size();

  GridResult result;
  result.entries.reserve(total);
  for (std::size_t combo = 0; combo < total; ++combo) {
    // row-major order: the last grid axis varies fastest
    EstimatorSpec spec = spec_template;
    GridResult::Entry entry;
    std::size_t rem = combo;
    for (std::size_t axis = grid.size(); axis-- > 0;) {
      const auto& [name, values] = grid[axis];
      const double value = values[rem % values.size()];
      rem /= values.size();
      entry.params.emplace_back(name, value);
    }
    std::reverse(entry.params.begin(), entry.params.end());
    for (const auto& [name, value] : entry.params) detail::apply_param(spec, name, value);

    entry.fold_scores = cross_val_score(spec, X, y, plan, metric);
    const double n = static_cast<double>(entry.fold_scores.size());
    for (double s : entry.fold_scores) entry.mean += s;
    entry.mean /= n;
    if (entry.fold_scores.size() > 1) {
      double ss = 0.0;
      for (double s : entry.fold_scores) ss += (s - entry.mean) * (s - entry.mean);
      entry.std_dev = std::sqrt(ss / (n - 1.0));
    }
    result.entries.push_back(std::move(entry));
  }

  result.best_index = 0;
  for (std::size_t i = 1; i < result.entries.size(); ++i)
    if (result.entries[i].mean > result.entries[result.best_index].mean) result.best_index = i;

  EstimatorSpec best_spec = spec_template;
  for (const auto& [name, value] : result.entries[result.best_index].params)
    detail::apply_param(best_spec, name, value);
  if (best_spec.select_k > 0) {
    const FeatureSelector sel =
        select_k_best(f_classif(X, detail::to_labels(y)), best_spec.select_k);
    result.best_model = detail::fit_spec(best_spec, select_transform(sel, X), y);
  } else {
    result.best_model = detail::fit_spec(best_spec, X, y);
  }
  return result;
}

}  // namespace voxkit
