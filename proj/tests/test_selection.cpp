#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "voxkit/feature_selection.hpp"

using namespace voxkit;

namespace {

auto has_kind(ErrorKind kind) {
  return Catch::Matchers::Predicate<Error>([kind](const Error& e) { return e.kind() == kind; });
}

}  // namespace

TEST_CASE("f_classif hand cases", "[select]") {
  DataMatrix X(4, 1);
  X << 1, 2, 1, 2;
  CHECK(f_classif(X, {0, 0, 1, 1})(0) == 0.0);

  DataMatrix Y(6, 1);
  Y << 0, 0, 0, 1, 1, 1;
  CHECK(std::isinf(f_classif(Y, {0, 0, 0, 1, 1, 1})(0)));

  DataMatrix Z(6, 1);
  Z << 1, 2, 3, 2, 3, 4;
  const double f = f_classif(Z, {0, 0, 0, 1, 1, 1})(0);
  CHECK(std::abs(f - 1.5) <= 1e-12);
}

TEST_CASE("f_classif matches the brute-force ANOVA oracle", "[select]") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int g = 2 + static_cast<int>(rng.uniform_index(3));
    const int n = 20;
    const DataMatrix X = oracles::random_matrix(rng, n, 30);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % g;  // every class occupied
    const Vector scores = f_classif(X, y);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      std::vector<std::vector<double>> groups(static_cast<std::size_t>(g));
      for (int i = 0; i < n; ++i)
        groups[static_cast<std::size_t>(i % g)].push_back(X(i, j));
      CHECK(scores(j) == Catch::Approx(oracles::anova_f(groups)).margin(1e-10));
    }
  }
}

TEST_CASE("f_classif is invariant to per-feature affine maps", "[select]") {
  Rng rng(7);
  const int n = 24;
  DataMatrix X = oracles::random_matrix(rng, n, 10);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % 2;
  const Vector base = f_classif(X, y);
  DataMatrix X2 = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    X2.col(j) = (3.5 * X.col(j)).array() - 11.0;
  const Vector mapped = f_classif(X2, y);
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    CHECK(mapped(j) == Catch::Approx(base(j)).epsilon(1e-8));
}

TEST_CASE("f_classif class errors", "[select]") {
  DataMatrix X(4, 2);
  X.setRandom();
  CHECK_THROWS_MATCHES(f_classif(X, {3, 3, 3, 3}), Error, has_kind(ErrorKind::SingleClass));
  CHECK_THROWS_MATCHES(f_classif(X, {0, 0, 2, 2}, 3), Error, has_kind(ErrorKind::EmptyClass));
}

TEST_CASE("select_k_best ranking and ties", "[select]") {
  Vector scores(3);
  scores << 0.1, 5.0, 3.0;
  const FeatureSelector sel = select_k_best(scores, 2);
  CHECK(sel.selected_indices() == std::vector<int>{1, 2});

  Vector equal = Vector::Constant(4, 2.0);
  CHECK(select_k_best(equal, 2).selected_indices() == std::vector<int>{0, 1});

  Vector with_inf(4);
  with_inf << std::numeric_limits<double>::infinity(), 1.0,
      std::numeric_limits<double>::infinity(), 5.0;
  CHECK(select_k_best(with_inf, 2).selected_indices() == std::vector<int>{0, 2});

  CHECK(select_k_best(scores, 3).selected_indices() == std::vector<int>{0, 1, 2});
  CHECK(select_k_best(scores, 99).k == 3);  // clips
}

TEST_CASE("select_k_best keeps 500 of 40000", "[select]") {
  Rng rng(3);
  Vector scores(40000);
  for (Eigen::Index j = 0; j < scores.size(); ++j) scores(j) = rng.uniform01();
  const FeatureSelector sel = select_k_best(scores, 500);
  int count = 0;
  for (auto f : sel.support) count += f;
  CHECK(count == 500);
}

TEST_CASE("select transforms and inverse round trip", "[select]") {
  Rng rng(8);
  const DataMatrix X = oracles::random_matrix(rng, 5, 3);

  Vector all = Vector::Ones(3);
  const FeatureSelector identity = select_k_best(all, 3);
  CHECK((select_transform(identity, X) - X).cwiseAbs().maxCoeff() == 0.0);

  Vector pick(3);
  pick << 0.0, 9.0, 0.0;
  const FeatureSelector middle = select_k_best(pick, 1);
  const DataMatrix one = select_transform(middle, X);
  REQUIRE(one.cols() == 1);
  CHECK((one.col(0) - X.col(1)).cwiseAbs().maxCoeff() == 0.0);

  Vector mixed(3);
  mixed << 7.0, 0.1, 5.0;  // support {0, 2}
  const FeatureSelector sel = select_k_best(mixed, 2);
  DataMatrix W(1, 2);
  W << 4.0, -2.0;
  const DataMatrix full = select_inverse_transform(sel, W);
  CHECK(full(0, 0) == 4.0);
  CHECK(full(0, 1) == 0.0);
  CHECK(full(0, 2) == -2.0);

  const DataMatrix Wr = oracles::random_matrix(rng, 3, 2);
  CHECK((select_transform(sel, select_inverse_transform(sel, Wr)) - Wr).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(select_inverse_transform(sel, DataMatrix::Zero(2, 2)).cwiseAbs().maxCoeff() == 0.0);

  // projection idempotence
  const DataMatrix t1 = select_transform(sel, X);
  const DataMatrix t2 = select_transform(sel, select_inverse_transform(sel, t1));
  CHECK((t1 - t2).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_MATCHES(select_transform(sel, oracles::random_matrix(rng, 2, 5)), Error,
                       has_kind(ErrorKind::LengthMismatch));
  CHECK_THROWS_MATCHES(select_inverse_transform(sel, oracles::random_matrix(rng, 2, 3)), Error,
                       has_kind(ErrorKind::LengthMismatch));
}
