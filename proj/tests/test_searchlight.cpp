#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "voxkit/searchlight.hpp"
#include "voxkit/synth.hpp"

using namespace voxkit;

TEST_CASE("sub-voxel radius keeps only the center", "[searchlight]") {
  const BrainMask mask = BrainMask::full({4, 4, 4}, Affine4::identity());
  const SphereIndex index = build_spheres(mask, 0.5);
  for (std::size_t c = 0; c < index.neighbors.size(); ++c) {
    REQUIRE(index.neighbors[c].size() == 1);
    CHECK(index.neighbors[c][0] == static_cast<int>(c));
  }
}

TEST_CASE("isotropic radius-1 spheres are 6-neighborhoods plus center", "[searchlight]") {
  const BrainMask mask = BrainMask::full({5, 5, 5}, Affine4::identity());
  const SphereIndex index = build_spheres(mask, 1.0);
  // voxel (2,2,2) is interior: feature index 2 + 5*(2 + 5*2) = 62
  CHECK(index.neighbors[62].size() == 7);
  // corner voxel 0 has 4 entries: itself + 3 in-bounds steps
  CHECK(index.neighbors[0].size() == 4);
}

TEST_CASE("anisotropic affines shape the neighborhoods", "[searchlight]") {
  const Affine4 aff = Affine4::scaling(3.0, 1.0, 1.0);
  const BrainMask mask = BrainMask::full({7, 7, 7}, aff);
  const double radius = 2.0;
  const SphereIndex index = build_spheres(mask, radius);

  // lattice-enumeration oracle at the interior voxel (3,3,3)
  int expected = 0;
  for (int dz = -3; dz <= 3; ++dz)
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx)
        if ((aff.linear() * Eigen::Vector3d(dx, dy, dz)).norm() <= radius) ++expected;
  const int center = 3 + 7 * (3 + 7 * 3);
  CHECK(static_cast<int>(index.neighbors[static_cast<std::size_t>(center)].size()) == expected);
  // no x-steps survive a 3mm pitch at radius 2
  for (int f : index.neighbors[static_cast<std::size_t>(center)]) {
    const int x = f % 7;
    CHECK(x == 3);
  }
}

TEST_CASE("neighborhoods are symmetric", "[searchlight]") {
  Rng rng(5);
  std::vector<std::uint8_t> flags(6 * 5 * 4);
  for (auto& f : flags) f = rng.uniform01() < 0.6 ? 1 : 0;
  flags[0] = 1;
  const BrainMask mask({6, 5, 4}, Affine4::scaling(2.0, 1.0, 1.5), flags);
  const SphereIndex index = build_spheres(mask, 2.2);
  for (std::size_t i = 0; i < index.neighbors.size(); ++i)
    for (int j : index.neighbors[i]) {
      const auto& back = index.neighbors[static_cast<std::size_t>(j)];
      CHECK(std::find(back.begin(), back.end(), static_cast<int>(i)) != back.end());
    }
}

TEST_CASE("searchlight localizes an informative blob", "[searchlight]") {
  const std::array<int, 3> shape{10, 10, 10};
  const DecodingSet set = make_decoding(shape, 20, 5.0, 21);
  const BrainMask full = BrainMask::full(shape, set.volume.affine());
  const DataMatrix X = apply_mask(set.volume, full);
  Vector y(static_cast<Eigen::Index>(set.labels.size()));
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = set.labels[i];

  EstimatorSpec spec;
  spec.kind = ModelKind::SvcHingeL2;
  spec.reg = 1.0;
  const FoldPlan plan = kfold(static_cast<int>(X.rows()), 5);
  const SphereIndex index = build_spheres(full, 1.8);
  const Vector scores = searchlight_map(X, y, index, spec, plan);

  CHECK(scores.minCoeff() >= 0.0);
  CHECK(scores.maxCoeff() <= 1.0);

  const auto truth = set.truth_support.voxel_indices();
  double truth_mean = 0.0;
  for (std::size_t v : truth) truth_mean += scores(static_cast<Eigen::Index>(v));
  truth_mean /= static_cast<double>(truth.size());
  CHECK(truth_mean >= 0.85);

  // voxels far from the blob sit at chance
  const auto coords = full.voxel_coords();
  double far_mean = 0.0;
  int far_count = 0;
  Eigen::Vector3d blob_center = Eigen::Vector3d::Zero();
  for (std::size_t v : truth)
    blob_center += Eigen::Vector3d(coords[v][0], coords[v][1], coords[v][2]);
  blob_center /= static_cast<double>(truth.size());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const Eigen::Vector3d p(coords[c][0], coords[c][1], coords[c][2]);
    if ((p - blob_center).norm() >= 3.0 * 1.8) {
      far_mean += scores(static_cast<Eigen::Index>(c));
      ++far_count;
    }
  }
  far_mean /= far_count;
  CHECK(far_mean <= 0.65);
}

TEST_CASE("searchlight output is independent of center order", "[searchlight]") {
  const std::array<int, 3> shape{8, 8, 8};
  const DecodingSet set = make_decoding(shape, 10, 2.0, 31);
  const BrainMask full = BrainMask::full(shape, set.volume.affine());
  const DataMatrix X = apply_mask(set.volume, full);
  Vector y(static_cast<Eigen::Index>(set.labels.size()));
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = set.labels[i];
  EstimatorSpec spec;
  spec.kind = ModelKind::SvcHingeL2;
  const FoldPlan plan = kfold(static_cast<int>(X.rows()), 4);
  const SphereIndex index = build_spheres(full, 1.2);

  const Vector forward = searchlight_map(X, y, index, spec, plan);

  // reversed manual loop over centers must agree bitwise
  Vector reversed(forward.size());
  for (std::size_t c = index.neighbors.size(); c-- > 0;) {
    const auto& cols = index.neighbors[c];
    DataMatrix sub(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      sub.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
    const auto scores = cross_val_score(spec, sub, y, plan, Metric::Accuracy);
    double mean = 0.0;
    for (double s : scores) mean += s;
    reversed(static_cast<Eigen::Index>(c)) = mean / static_cast<double>(scores.size());
  }
  for (Eigen::Index c = 0; c < forward.size(); ++c) CHECK(forward(c) == reversed(c));
}

TEST_CASE("permuted labels keep every center near chance", "[searchlight]") {
  const std::array<int, 3> shape{8, 8, 8};
  const DecodingSet set = make_decoding(shape, 20, 5.0, 41);
  const BrainMask full = BrainMask::full(shape, set.volume.affine());
  const DataMatrix X = apply_mask(set.volume, full);
  Rng rng(42);
  const auto perm = rng.permutation(static_cast<int>(set.labels.size()));
  Vector y(static_cast<Eigen::Index>(set.labels.size()));
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = set.labels[static_cast<std::size_t>(perm[i])];

  EstimatorSpec spec;
  spec.kind = ModelKind::SvcHingeL2;
  const FoldPlan plan = kfold(static_cast<int>(X.rows()), 5);
  const SphereIndex index = build_spheres(full, 1.5);
  const Vector scores = searchlight_map(X, y, index, spec, plan);
  CHECK(scores.minCoeff() >= 0.25);
  CHECK(scores.maxCoeff() <= 0.75);
}

TEST_CASE("searchlight rejects regressor specs", "[searchlight]") {
  const BrainMask mask = BrainMask::full({4, 4, 4}, Affine4::identity());
  const SphereIndex index = build_spheres(mask, 1.0);
  EstimatorSpec spec;
  spec.kind = ModelKind::Ridge;
  Rng rng(1);
  const DataMatrix X = oracles::random_matrix(rng, 10, static_cast<int>(mask.n_voxels()));
  Vector y(10);
  for (int i = 0; i < 10; ++i) y(i) = i % 2;
  CHECK_THROWS_AS(searchlight_map(X, y, index, spec, kfold(10, 2)), Error);
}
