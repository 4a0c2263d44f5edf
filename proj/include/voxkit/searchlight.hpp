#pragma once

#include <cmath>
#include <vector>

#include "voxkit/common.hpp"
#include "voxkit/model_selection.hpp"
#include "voxkit/volume.hpp"

namespace voxkit {

// Spherical neighborhoods over the masked voxels. Distances are measured in
// world mm through the affine, so anisotropic voxels get ellipsoidal index
// neighborhoods. Feature indices follow the mask's canonical order.
struct SphereIndex {
  std::vector<std::vector<int>> neighbors;  // per center, includes the center
  double radius_mm = 0.0;
};

inline SphereIndex build_spheres(const BrainMask& mask, double radius_mm) {
  require(radius_mm > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  const Eigen::Matrix3d lin = mask.affine().linear();
  const Eigen::Matrix3d inv = lin.inverse();

  // bound the integer offsets: |delta_k| <= r * |row k of inv|
  std::array<int, 3> span{};
  for (int k = 0; k < 3; ++k)
    span[static_cast<std::size_t>(k)] =
        static_cast<int>(std::floor(radius_mm * inv.row(k).norm() + 1e-9));

  std::vector<std::array<int, 3>> offsets;
  for (int dz = -span[2]; dz <= span[2]; ++dz)
    for (int dy = -span[1]; dy <= span[1]; ++dy)
      for (int dx = -span[0]; dx <= span[0]; ++dx)
        if ((lin * Eigen::Vector3d(dx, dy, dz)).norm() <= radius_mm)
          offsets.push_back({dx, dy, dz});

  // feature index lookup per grid cell
  std::vector<int> feature(mask.size(), -1);
  const auto idx = mask.voxel_indices();
  for (std::size_t j = 0; j < idx.size(); ++j) feature[idx[j]] = static_cast<int>(j);

  const auto coords = mask.voxel_coords();
  SphereIndex out;
  out.radius_mm = radius_mm;
  out.neighbors.resize(coords.size());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    auto& list = out.neighbors[c];
    for (const auto& off : offsets) {
      const int x = coords[c][0] + off[0];
      const int y = coords[c][1] + off[1];
      const int z = coords[c][2] + off[2];
      if (x < 0 || x >= mask.shape()[0] || y < 0 || y >= mask.shape()[1] || z < 0 ||
          z >= mask.shape()[2])
        continue;
      const int f = feature[mask.index(x, y, z)];
      if (f >= 0) list.push_back(f);
    }
  }
  return out;
}

// Cross-validated decoding inside every sphere: score[c] is the mean CV
// accuracy of the spec restricted to the neighborhood of center c. Centers
// run in parallel; each writes only its slot, so results are independent of
// scheduling. Any per-center failure aborts the whole map.
inline Vector searchlight_map(const DataMatrix& X, const Vector& y, const SphereIndex& index,
                              const EstimatorSpec& spec, const FoldPlan& plan) {
  require(is_classifier(spec.kind), ErrorKind::InvalidArgument,
          "searchlight expects a classifier spec");
  Vector scores(static_cast<Eigen::Index>(index.neighbors.size()));
  parallel_for(index.neighbors.size(), [&](std::size_t c) {
    const auto& cols = index.neighbors[c];
    DataMatrix sub(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      sub.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
    const std::vector<double> fold_scores = cross_val_score(spec, sub, y, plan, Metric::Accuracy);
    double mean = 0.0;
    for (double s : fold_scores) mean += s;
    scores(static_cast<Eigen::Index>(c)) = mean / static_cast<double>(fold_scores.size());
  });
  return scores;
}

}  // namespace voxkit
