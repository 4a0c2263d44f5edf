#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "oracles.hpp"
#include "voxkit/decomposition.hpp"
#include "voxkit/signal.hpp"
#include "voxkit/synth.hpp"

using namespace voxkit;

namespace {

Matrix uniform_sources(Rng& rng, int k, int n) {
  Matrix S(k, n);
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    for (Eigen::Index j = 0; j < S.cols(); ++j) S(i, j) = rng.uniform(-1.0, 1.0);
  return S;
}

}  // namespace

TEST_CASE("pca recovers the direction of colinear data", "[decomp]") {
  Rng rng(70);
  DataMatrix X(200, 2);
  for (int i = 0; i < 200; ++i) {
    const double t = rng.normal();
    X(i, 0) = 0.6 * t + 2.0;  // offset checks the centering
    X(i, 1) = 0.8 * t - 1.0;
  }
  const PcaModel pca = pca_fit(X, 1);
  CHECK(pca.components(0, 0) == Catch::Approx(0.6).margin(1e-8));
  CHECK(pca.components(0, 1) == Catch::Approx(0.8).margin(1e-8));
}

TEST_CASE("full-rank pca reconstructs exactly and orders singular values", "[decomp]") {
  Rng rng(71);
  const DataMatrix X = oracles::random_matrix(rng, 20, 5);
  const PcaModel pca = pca_fit(X, 5);
  CHECK((pca.inverse_transform(pca.transform(X)) - X).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((pca.components * pca.components.transpose() - Matrix::Identity(5, 5))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
  for (Eigen::Index i = 1; i < pca.singular_values.size(); ++i)
    CHECK(pca.singular_values(i) <= pca.singular_values(i - 1));

  // reconstruction error is non-increasing in the component count
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 5; ++k) {
    const PcaModel sub = pca_fit(X, k);
    const double err = (sub.inverse_transform(sub.transform(X)) - X).norm();
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
  CHECK_THROWS_AS(pca_fit(X, 6), Error);
  CHECK_THROWS_AS(pca_fit(X, 0), Error);
}

TEST_CASE("isotropic clouds spread variance evenly", "[decomp]") {
  Rng rng(72);
  const DataMatrix X = oracles::random_matrix(rng, 10000, 4);
  const PcaModel pca = pca_fit(X, 4);
  const Vector var = pca.singular_values.array().square();
  const double total = var.sum();
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(var(i) / total <= 0.5);
    CHECK(var(i) / total >= 0.125);
  }
}

TEST_CASE("fastica separates uniform sources through a known mixing", "[decomp]") {
  Rng rng(73);
  const int n = 20000;
  const Matrix S = uniform_sources(rng, 2, n);
  Matrix A(2, 2);
  A << 1.0, 1.0, 0.5, 2.0;
  const Matrix X = (A * S).transpose();  // observations x channels

  const IcaModel ica = fastica(X, 2, IcaNonlinearity::LogCosh, 7);
  REQUIRE(ica.converged);
  const auto match = oracles::greedy_match_correlations(S, ica.sources);
  for (double c : match) CHECK(c >= 0.99);
}

TEST_CASE("fastica reaches a small Amari index on three sources", "[decomp]") {
  Rng rng(74);
  const int n = 20000;
  const Matrix S = uniform_sources(rng, 3, n);
  Matrix A(3, 3);
  A << 1.0, 0.4, -0.3,
      -0.5, 1.2, 0.2,
      0.3, -0.2, 0.9;
  const Matrix X = (A * S).transpose();
  const IcaModel ica = fastica(X, 3, IcaNonlinearity::LogCosh, 11);
  REQUIRE(ica.converged);
  CHECK(oracles::amari_index(ica.channel_unmixing(), A) <= 0.05);
}

TEST_CASE("the cube contrast also separates", "[decomp]") {
  Rng rng(75);
  const Matrix S = uniform_sources(rng, 2, 20000);
  Matrix A(2, 2);
  A << 0.9, -0.4, 0.3, 1.1;
  const IcaModel ica = fastica((A * S).transpose(), 2, IcaNonlinearity::Cube, 3);
  const auto match = oracles::greedy_match_correlations(S, ica.sources);
  for (double c : match) CHECK(c >= 0.99);
}

TEST_CASE("gaussian data returns a usable model with the convergence flag", "[decomp]") {
  Rng rng(76);
  const DataMatrix X = oracles::random_matrix(rng, 5000, 3);
  const IcaModel ica = fastica(X, 3, IcaNonlinearity::LogCosh, 5, 100);
  CHECK(ica.unmixing.allFinite());
  for (int i = 0; i < 3; ++i) {
    const double var = ica.sources.row(i).array().square().mean() -
                       std::pow(ica.sources.row(i).mean(), 2);
    CHECK(var == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("fastica is invariant to channel rescaling", "[decomp]") {
  Rng rng(77);
  const Matrix S = uniform_sources(rng, 3, 15000);
  Matrix A(3, 3);
  A << 1.0, 0.2, 0.1, -0.3, 0.8, 0.4, 0.2, -0.5, 1.2;
  Matrix X = (A * S).transpose();
  const IcaModel base = fastica(X, 3, IcaNonlinearity::LogCosh, 9);
  Matrix scaled = X;
  scaled.col(0) *= 2.0;
  scaled.col(1) *= 0.5;
  scaled.col(2) *= 10.0;
  const IcaModel rescaled = fastica(scaled, 3, IcaNonlinearity::LogCosh, 9);
  const auto match = oracles::greedy_match_correlations(base.sources, rescaled.sources);
  for (double c : match) CHECK(c >= 0.99);
}

TEST_CASE("same seed gives a bit-identical model", "[decomp]") {
  Rng rng(78);
  const Matrix S = uniform_sources(rng, 2, 4000);
  Matrix A(2, 2);
  A << 1.0, 0.7, -0.2, 1.3;
  const Matrix X = (A * S).transpose();
  const IcaModel a = fastica(X, 2, IcaNonlinearity::LogCosh, 123);
  const IcaModel b = fastica(X, 2, IcaNonlinearity::LogCosh, 123);
  CHECK(std::memcmp(a.unmixing.data(), b.unmixing.data(), sizeof(double) * 4) == 0);
  CHECK(std::memcmp(a.sources.data(), b.sources.data(),
                    sizeof(double) * static_cast<std::size_t>(a.sources.size())) == 0);
}

TEST_CASE("concat-ica recovers the synthetic network maps", "[decomp]") {
  const RestSet rest = make_rest(2, 100, {12, 12, 12}, 3, 81);
  const ConcatIcaResult result = concat_ica(rest.subjects, 3, 20, IcaNonlinearity::LogCosh, 4);
  const auto match = oracles::greedy_match_correlations(rest.true_maps, result.maps);
  for (double c : match) CHECK(c >= 0.95);
}

TEST_CASE("single-subject concat-ica equals plain spatial ica", "[decomp]") {
  const RestSet rest = make_rest(1, 40, {10, 10, 10}, 3, 82, 0.05);
  const int nt = 40;
  const ConcatIcaResult grouped =
      concat_ica(rest.subjects, 3, nt, IcaNonlinearity::LogCosh, 6, 2000, 1e-12);
  const IcaModel plain =
      fastica(detrend(rest.subjects[0]).transpose(), 3, IcaNonlinearity::LogCosh, 6, 2000, 1e-12);
  const auto match = oracles::greedy_match_correlations(plain.sources, grouped.maps);
  for (double c : match) CHECK(c >= 1.0 - 1e-6);
}

TEST_CASE("ten components come back when asked", "[decomp]") {
  const RestSet rest = make_rest(2, 60, {10, 10, 10}, 4, 83);
  const ConcatIcaResult result = concat_ica(rest.subjects, 10, 12, IcaNonlinearity::LogCosh, 2);
  CHECK(result.maps.rows() == 10);
  CHECK(result.maps.cols() == 1000);
}

TEST_CASE("concat-ica validates its inputs", "[decomp]") {
  const RestSet rest = make_rest(2, 30, {8, 8, 8}, 2, 84);
  std::vector<DataMatrix> bad = rest.subjects;
  bad[1] = bad[1].leftCols(100).eval();
  CHECK_THROWS_MATCHES(concat_ica(bad, 2, 5), Error, Catch::Matchers::Predicate<Error>([](
      const Error& e) { return e.kind() == ErrorKind::VoxelCountMismatch; }));
  CHECK_THROWS_AS(concat_ica(rest.subjects, 4, 2), Error);  // dim < components
}
