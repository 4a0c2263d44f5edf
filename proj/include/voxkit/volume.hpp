#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "voxkit/common.hpp"

namespace voxkit {

// 4x4 voxel-index -> world-mm transform. Last row is (0,0,0,1) and the
// upper-left 3x3 block must be invertible.
struct Affine4 {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();

  static Affine4 identity() { return Affine4{}; }

  static Affine4 scaling(double sx, double sy, double sz) {
    Affine4 a;
    a.m(0, 0) = sx;
    a.m(1, 1) = sy;
    a.m(2, 2) = sz;
    return a;
  }

  Eigen::Matrix3d linear() const { return m.block<3, 3>(0, 0); }
  Eigen::Vector3d origin() const { return m.block<3, 1>(0, 3); }

  bool last_row_ok() const {
    return m(3, 0) == 0.0 && m(3, 1) == 0.0 && m(3, 2) == 0.0 && m(3, 3) == 1.0;
  }

  bool invertible() const { return std::abs(linear().determinant()) > 1e-12; }

  void validate() const {
    require(last_row_ok(), ErrorKind::InvalidArgument, "affine last row must be (0,0,0,1)");
    require(invertible(), ErrorKind::SingularAffine, "affine 3x3 block is singular");
  }

  Eigen::Vector3d apply(double i, double j, double k) const {
    return linear() * Eigen::Vector3d(i, j, k) + origin();
  }

  Affine4 inverse() const {
    validate();
    Affine4 out;
    const Eigen::Matrix3d inv = linear().inverse();
    out.m.block<3, 3>(0, 0) = inv;
    out.m.block<3, 1>(0, 3) = -inv * origin();
    return out;
  }

  bool approx_equal(const Affine4& other, double tol = 1e-6) const {
    return (m - other.m).cwiseAbs().maxCoeff() <= tol;
  }
};

// storage provenance of a loaded file; in-memory data is always double
enum class ElementKind : std::uint8_t { U8, I16, I32, F32, F64 };

// Dense 4D grid (3 spatial dims + time/trial dim), x-fastest layout.
class Volume4D {
 public:
  Volume4D() = default;

  Volume4D(std::array<int, 4> shape, Affine4 affine,
           ElementKind kind = ElementKind::F64)
      : shape_(shape), affine_(affine), element_kind_(kind) {
    for (int d : shape_) require(d >= 1, ErrorKind::BadShape, "volume dims must be positive");
    affine_.validate();
    data_.assign(voxel_count() * static_cast<std::size_t>(shape_[3]), 0.0);
  }

  Volume4D(std::array<int, 4> shape, Affine4 affine, std::vector<double> data,
           ElementKind kind = ElementKind::F64)
      : shape_(shape), affine_(affine), data_(std::move(data)), element_kind_(kind) {
    for (int d : shape_) require(d >= 1, ErrorKind::BadShape, "volume dims must be positive");
    affine_.validate();
    require(data_.size() == voxel_count() * static_cast<std::size_t>(shape_[3]),
            ErrorKind::LengthMismatch, "data length does not match shape");
  }

  const std::array<int, 4>& shape() const { return shape_; }
  int nx() const { return shape_[0]; }
  int ny() const { return shape_[1]; }
  int nz() const { return shape_[2]; }
  int nt() const { return shape_[3]; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(shape_[0]) * static_cast<std::size_t>(shape_[1]) *
           static_cast<std::size_t>(shape_[2]);
  }

  const Affine4& affine() const { return affine_; }
  ElementKind element_kind() const { return element_kind_; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  std::size_t index(int x, int y, int z, int t) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(shape_[0]) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(shape_[1]) *
                    (static_cast<std::size_t>(z) +
                     static_cast<std::size_t>(shape_[2]) * static_cast<std::size_t>(t)));
  }

  double at(int x, int y, int z, int t) const { return data_[index(x, y, z, t)]; }
  double& at(int x, int y, int z, int t) { return data_[index(x, y, z, t)]; }

  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && x < shape_[0] && y >= 0 && y < shape_[1] && z >= 0 && z < shape_[2];
  }

  // mean over the time dim, as an nt=1 volume
  Volume4D mean_over_time() const {
    Volume4D out({shape_[0], shape_[1], shape_[2], 1}, affine_, element_kind_);
    const std::size_t n = voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (int t = 0; t < shape_[3]; ++t) s += data_[v + n * static_cast<std::size_t>(t)];
      out.data()[v] = s / static_cast<double>(shape_[3]);
    }
    return out;
  }

 private:
  std::array<int, 4> shape_{1, 1, 1, 1};
  Affine4 affine_;
  std::vector<double> data_;
  ElementKind element_kind_ = ElementKind::F64;
};

// Boolean 3D grid selecting in-brain voxels; defines the voxel -> feature
// correspondence (features follow x-fastest scan order of the true flags).
class BrainMask {
 public:
  BrainMask() = default;

  BrainMask(std::array<int, 3> shape, Affine4 affine, std::vector<std::uint8_t> flags)
      : shape_(shape), affine_(affine), flags_(std::move(flags)) {
    for (int d : shape_) require(d >= 1, ErrorKind::BadShape, "mask dims must be positive");
    affine_.validate();
    require(flags_.size() == size(), ErrorKind::LengthMismatch, "flag count does not match shape");
    n_voxels_ = 0;
    for (auto f : flags_) n_voxels_ += (f != 0);
    require(n_voxels_ >= 1, ErrorKind::EmptyMask, "mask selects no voxels");
  }

  static BrainMask full(std::array<int, 3> shape, Affine4 affine) {
    const std::size_t n = static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) *
                          static_cast<std::size_t>(shape[2]);
    return BrainMask(shape, affine, std::vector<std::uint8_t>(n, 1));
  }

  const std::array<int, 3>& shape() const { return shape_; }
  const Affine4& affine() const { return affine_; }
  std::size_t size() const {
    return static_cast<std::size_t>(shape_[0]) * static_cast<std::size_t>(shape_[1]) *
           static_cast<std::size_t>(shape_[2]);
  }
  std::size_t n_voxels() const { return n_voxels_; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(shape_[0]) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(shape_[1]) * static_cast<std::size_t>(z));
  }

  bool at(int x, int y, int z) const { return flags_[index(x, y, z)] != 0; }
  const std::vector<std::uint8_t>& flags() const { return flags_; }

  // flat grid indices of the true voxels, ascending (= feature order)
  std::vector<std::size_t> voxel_indices() const {
    std::vector<std::size_t> out;
    out.reserve(n_voxels_);
    for (std::size_t i = 0; i < flags_.size(); ++i)
      if (flags_[i]) out.push_back(i);
    return out;
  }

  // grid coordinates of the true voxels in feature order
  std::vector<std::array<int, 3>> voxel_coords() const {
    std::vector<std::array<int, 3>> out;
    out.reserve(n_voxels_);
    for (int z = 0; z < shape_[2]; ++z)
      for (int y = 0; y < shape_[1]; ++y)
        for (int x = 0; x < shape_[0]; ++x)
          if (at(x, y, z)) out.push_back({x, y, z});
    return out;
  }

 private:
  std::array<int, 3> shape_{1, 1, 1};
  Affine4 affine_;
  std::vector<std::uint8_t> flags_;
  std::size_t n_voxels_ = 0;
};

enum class Interp { Nearest, Trilinear };

// Resample vol onto a new grid: each target index is mapped through
// target_affine to world mm, then through the source affine inverse back to
// source index space. Out-of-bounds samples read as 0. Frames resampled
// independently.
inline Volume4D resample(const Volume4D& vol, const Affine4& target_affine,
                         std::array<int, 3> target_shape, Interp interp) {
  for (int d : target_shape) require(d >= 1, ErrorKind::BadShape, "target dims must be positive");
  require(vol.affine().invertible(), ErrorKind::SingularAffine, "source affine is singular");
  target_affine.validate();

  // composite index->index map
  const Eigen::Matrix4d comp = vol.affine().inverse().m * target_affine.m;
  const Eigen::Matrix3d lin = comp.block<3, 3>(0, 0);
  const Eigen::Vector3d off = comp.block<3, 1>(0, 3);

  Volume4D out({target_shape[0], target_shape[1], target_shape[2], vol.nt()}, target_affine,
               vol.element_kind());

  auto sample_nearest = [&](const Eigen::Vector3d& p, int t) -> double {
    const int x = static_cast<int>(std::lround(p.x()));
    const int y = static_cast<int>(std::lround(p.y()));
    const int z = static_cast<int>(std::lround(p.z()));
    if (!vol.in_bounds(x, y, z)) return 0.0;
    return vol.at(x, y, z, t);
  };
  auto sample_trilinear = [&](const Eigen::Vector3d& p, int t) -> double {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy), z0 = static_cast<int>(fz);
    const double wx = p.x() - fx, wy = p.y() - fy, wz = p.z() - fz;
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double w = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy) * (dz ? wz : 1.0 - wz);
          if (w == 0.0) continue;
          const int x = x0 + dx, y = y0 + dy, z = z0 + dz;
          if (vol.in_bounds(x, y, z)) acc += w * vol.at(x, y, z, t);
        }
    return acc;
  };

  for (int t = 0; t < vol.nt(); ++t)
    for (int k = 0; k < target_shape[2]; ++k)
      for (int j = 0; j < target_shape[1]; ++j)
        for (int i = 0; i < target_shape[0]; ++i) {
          const Eigen::Vector3d p = lin * Eigen::Vector3d(i, j, k) + off;
          out.at(i, j, k, t) = interp == Interp::Nearest ? sample_nearest(p, t)
                                                         : sample_trilinear(p, t);
        }
  return out;
}

namespace detail {
// quantile with linear interpolation between order statistics
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}
}  // namespace detail

// Threshold-based mask: the cutoff is the mean of the lower_q and upper_q
// quantiles of the nonzero intensities. Strict > comparison, relaxed to >=
// when the threshold reaches the nonzero maximum so constant images still
// yield a usable mask.
inline BrainMask compute_mask(const Volume4D& mean_vol, double lower_q = 0.2,
                              double upper_q = 0.85) {
  require(mean_vol.nt() == 1, ErrorKind::BadShape, "compute_mask expects a single-frame volume");
  require(lower_q >= 0.0 && lower_q < upper_q && upper_q <= 1.0, ErrorKind::InvalidArgument,
          "quantiles must satisfy 0 <= lower < upper <= 1");

  std::vector<double> nonzero;
  nonzero.reserve(mean_vol.data().size());
  for (double v : mean_vol.data())
    if (v != 0.0) nonzero.push_back(v);
  require(!nonzero.empty(), ErrorKind::EmptyMask, "volume has no nonzero intensities");
  std::sort(nonzero.begin(), nonzero.end());

  const double threshold =
      0.5 * (detail::quantile_sorted(nonzero, lower_q) + detail::quantile_sorted(nonzero, upper_q));
  const bool relax = threshold >= nonzero.back();

  std::vector<std::uint8_t> flags(mean_vol.voxel_count(), 0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const double v = mean_vol.data()[i];
    const bool in = (v != 0.0) && (relax ? v >= threshold : v > threshold);
    flags[i] = in ? 1 : 0;
    count += in;
  }
  require(count >= 1, ErrorKind::EmptyMask, "threshold removed every voxel");
  return BrainMask({mean_vol.nx(), mean_vol.ny(), mean_vol.nz()}, mean_vol.affine(),
                   std::move(flags));
}

// 4D volume -> (nt x n_voxels) matrix; feature j is the j-th masked voxel in
// x-fastest scan order.
inline DataMatrix apply_mask(const Volume4D& vol, const BrainMask& mask) {
  require(vol.nx() == mask.shape()[0] && vol.ny() == mask.shape()[1] &&
              vol.nz() == mask.shape()[2],
          ErrorKind::ShapeMismatch, "volume and mask spatial shapes differ");
  require(vol.affine().approx_equal(mask.affine()), ErrorKind::AffineMismatch,
          "volume and mask affines differ");

  const auto idx = mask.voxel_indices();
  const std::size_t n_frame = vol.voxel_count();
  DataMatrix X(vol.nt(), static_cast<Eigen::Index>(idx.size()));
  for (int t = 0; t < vol.nt(); ++t) {
    const std::size_t base = n_frame * static_cast<std::size_t>(t);
    for (std::size_t j = 0; j < idx.size(); ++j)
      X(t, static_cast<Eigen::Index>(j)) = vol.data()[base + idx[j]];
  }
  return X;
}

// rows -> 4D volume, zeros off-mask; inverse of apply_mask on the support
inline Volume4D unmask(const Matrix& rows, const BrainMask& mask) {
  require(static_cast<std::size_t>(rows.cols()) == mask.n_voxels(), ErrorKind::LengthMismatch,
          "row length does not match mask voxel count");
  const auto idx = mask.voxel_indices();
  Volume4D out({mask.shape()[0], mask.shape()[1], mask.shape()[2],
                static_cast<int>(rows.rows())},
               mask.affine());
  const std::size_t n_frame = out.voxel_count();
  for (Eigen::Index t = 0; t < rows.rows(); ++t) {
    const std::size_t base = n_frame * static_cast<std::size_t>(t);
    for (std::size_t j = 0; j < idx.size(); ++j)
      out.data()[base + idx[j]] = rows(t, static_cast<Eigen::Index>(j));
  }
  return out;
}

inline Volume4D unmask(const Vector& row, const BrainMask& mask) {
  return unmask(Matrix(row.transpose()), mask);
}

}  // namespace voxkit
