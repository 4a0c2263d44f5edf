#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "voxkit/common.hpp"

namespace voxkit {

// One-way ANOVA F statistic per feature. Classes are the distinct values of
// y; pass expected_classes to insist that ids 0..expected-1 all occur.
// Zero within-class variance with spread between classes scores +infinity;
// zero between-class variance scores 0.
inline Vector f_classif(const DataMatrix& X, const std::vector<int>& y,
                        int expected_classes = 0) {
  require(static_cast<Eigen::Index>(y.size()) == X.rows(), ErrorKind::LengthMismatch,
          "label count does not match sample count");

  std::vector<int> classes(y);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const int g = static_cast<int>(classes.size());
  require(g >= 2, ErrorKind::SingleClass, "need at least two classes");
  if (expected_classes > 0) {
    require(g <= expected_classes, ErrorKind::InvalidArgument, "more classes than declared");
    for (int c = 0; c < expected_classes; ++c)
      require(std::binary_search(classes.begin(), classes.end(), c), ErrorKind::EmptyClass,
              "class " + std::to_string(c) + " has no samples");
  }
  const Eigen::Index n = X.rows();
  require(n > g, ErrorKind::InvalidArgument, "need more samples than classes");

  std::vector<int> group(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    group[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), y[i]) -
                                classes.begin());
  std::vector<double> group_size(static_cast<std::size_t>(g), 0.0);
  for (int gi : group) group_size[static_cast<std::size_t>(gi)] += 1.0;

  Vector scores(X.cols());
  std::vector<double> group_mean(static_cast<std::size_t>(g));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    std::fill(group_mean.begin(), group_mean.end(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
      group_mean[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])] += X(i, j);
    double grand = 0.0;
    for (int c = 0; c < g; ++c) {
      grand += group_mean[static_cast<std::size_t>(c)];
      group_mean[static_cast<std::size_t>(c)] /= group_size[static_cast<std::size_t>(c)];
    }
    grand /= static_cast<double>(n);

    double ss_between = 0.0;
    for (int c = 0; c < g; ++c) {
      const double d = group_mean[static_cast<std::size_t>(c)] - grand;
      ss_between += group_size[static_cast<std::size_t>(c)] * d * d;
    }
    double ss_within = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = X(i, j) - group_mean[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])];
      ss_within += d * d;
    }

    if (ss_between <= 0.0) {
      scores(j) = 0.0;
    } else if (ss_within <= 0.0) {
      scores(j) = std::numeric_limits<double>::infinity();
    } else {
      scores(j) = (ss_between / static_cast<double>(g - 1)) /
                  (ss_within / static_cast<double>(n - g));
    }
  }
  return scores;
}

// k-best selection on a score vector. Ties break toward the lower feature
// index; +infinity outranks every finite score.
struct FeatureSelector {
  Vector scores;
  std::vector<std::uint8_t> support;
  int k = 0;

  int n_features() const { return static_cast<int>(support.size()); }

  std::vector<int> selected_indices() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < n_features(); ++j)
      if (support[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
  }
};

inline FeatureSelector select_k_best(const Vector& scores, int k) {
  require(k >= 1, ErrorKind::InvalidArgument, "k must be at least 1");
  const int d = static_cast<int>(scores.size());
  const int kept = std::min(k, d);

  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });

  FeatureSelector sel;
  sel.scores = scores;
  sel.support.assign(static_cast<std::size_t>(d), 0);
  sel.k = kept;
  for (int i = 0; i < kept; ++i) sel.support[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  return sel;
}

inline DataMatrix select_transform(const FeatureSelector& sel, const DataMatrix& X) {
  require(X.cols() == sel.n_features(), ErrorKind::LengthMismatch,
          "feature count does not match selector");
  DataMatrix out(X.rows(), sel.k);
  Eigen::Index c = 0;
  for (int j = 0; j < sel.n_features(); ++j)
    if (sel.support[static_cast<std::size_t>(j)]) out.col(c++) = X.col(j);
  return out;
}

// Scatter reduced-space columns back to the original indices, zeros elsewhere.
inline DataMatrix select_inverse_transform(const FeatureSelector& sel, const DataMatrix& W) {
  require(W.cols() == sel.k, ErrorKind::LengthMismatch,
          "reduced feature count does not match selector");
  DataMatrix out = DataMatrix::Zero(W.rows(), sel.n_features());
  Eigen::Index c = 0;
  for (int j = 0; j < sel.n_features(); ++j)
    if (sel.support[static_cast<std::size_t>(j)]) out.col(j) = W.col(c++);
  return out;
}

}  // namespace voxkit
