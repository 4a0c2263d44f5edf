#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "voxkit/common.hpp"
#include "voxkit/volume.hpp"

namespace voxkit {

// Desk-scale stand-ins for task / stimulus-reconstruction / resting-state
// datasets. Everything is a pure function of parameters + seed, and the
// ground truth ships with the data so downstream tests never re-derive it.

struct DecodingSet {
  Volume4D volume;          // (nx, ny, nz, 2 * n_per_class)
  std::vector<int> labels;  // +1 / -1, interleaved
  BrainMask truth_support;  // discriminative ellipsoid
  double snr = 0.0;
};

// Background N(0,1) noise everywhere; +1 trials add `snr` inside a seeded
// ellipsoid. Labels alternate so contiguous folds stay balanced.
inline DecodingSet make_decoding(std::array<int, 3> shape, int n_per_class, double snr,
                                 std::uint64_t seed) {
  for (int d : shape) require(d >= 8, ErrorKind::BadShape, "shape must be at least 8x8x8");
  require(n_per_class >= 10, ErrorKind::InvalidArgument, "need at least 10 trials per class");

  Rng rng(seed);
  const Affine4 affine = Affine4::identity();

  // seeded ellipsoid: center in the middle third, semi-axes in [1.5, dim/5]
  Eigen::Vector3d center, semi;
  for (int d = 0; d < 3; ++d) {
    const double lo = shape[static_cast<std::size_t>(d)] / 3.0;
    const double hi = 2.0 * shape[static_cast<std::size_t>(d)] / 3.0;
    center(d) = rng.uniform(lo, hi);
  }
  for (int d = 0; d < 3; ++d)
    semi(d) = rng.uniform(1.5, std::max(1.6, shape[static_cast<std::size_t>(d)] / 5.0));

  std::vector<std::uint8_t> flags;
  flags.reserve(static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) *
                static_cast<std::size_t>(shape[2]));
  for (int z = 0; z < shape[2]; ++z)
    for (int y = 0; y < shape[1]; ++y)
      for (int x = 0; x < shape[0]; ++x) {
        const double q = std::pow((x - center(0)) / semi(0), 2) +
                         std::pow((y - center(1)) / semi(1), 2) +
                         std::pow((z - center(2)) / semi(2), 2);
        flags.push_back(q <= 1.0 ? 1 : 0);
      }

  DecodingSet set;
  set.truth_support = BrainMask(shape, affine, std::move(flags));
  set.snr = snr;

  const int nt = 2 * n_per_class;
  set.labels.resize(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) set.labels[static_cast<std::size_t>(t)] = (t % 2 == 0) ? 1 : -1;

  set.volume = Volume4D({shape[0], shape[1], shape[2], nt}, affine);
  const auto support = set.truth_support.voxel_indices();
  const std::size_t frame = set.volume.voxel_count();
  for (int t = 0; t < nt; ++t) {
    const std::size_t base = frame * static_cast<std::size_t>(t);
    for (std::size_t v = 0; v < frame; ++v) set.volume.data()[base + v] = rng.normal();
    if (set.labels[static_cast<std::size_t>(t)] > 0)
      for (std::size_t s : support) set.volume.data()[base + s] += snr;
  }
  return set;
}

struct EncodingSet {
  Matrix stimuli;      // n_trials x 100, binary 10x10 images flattened row-major
  Matrix bold;         // n_trials x n_voxels
  Matrix true_fields;  // n_voxels x 100, one contiguous 2x2 patch per voxel
  double noise_sigma = 0.0;
};

// Balanced random binary stimuli drive voxels through sparse 2x2 receptive
// patches. Voxels walk a snake path over the patch corners, so neighboring
// voxels see neighboring pixels.
inline EncodingSet make_encoding(int n_trials, int n_voxels, double noise_sigma,
                                 std::uint64_t seed) {
  require(n_trials >= 50, ErrorKind::InvalidArgument, "need at least 50 trials");
  require(n_voxels >= 1, ErrorKind::InvalidArgument, "need at least one voxel");

  Rng rng(seed);
  EncodingSet set;
  set.noise_sigma = noise_sigma;

  set.true_fields = Matrix::Zero(n_voxels, 100);
  for (int v = 0; v < n_voxels; ++v) {
    const int pos = n_voxels > 1 ? static_cast<int>(std::lround(80.0 * v / (n_voxels - 1))) : 40;
    const int row = pos / 9;
    const int col = row % 2 == 0 ? pos % 9 : 8 - pos % 9;  // snake over the 9x9 corners
    const double amp = rng.uniform(1.0, 2.0);
    for (int dr = 0; dr < 2; ++dr)
      for (int dc = 0; dc < 2; ++dc) set.true_fields(v, (row + dr) * 10 + (col + dc)) = amp;
  }

  set.stimuli = Matrix(n_trials, 100);
  for (int t = 0; t < n_trials; ++t)
    for (int p = 0; p < 100; ++p) set.stimuli(t, p) = rng.uniform01() < 0.5 ? 1.0 : 0.0;

  set.bold = set.stimuli * set.true_fields.transpose();
  for (int t = 0; t < n_trials; ++t)
    for (int v = 0; v < n_voxels; ++v) set.bold(t, v) += noise_sigma * rng.normal();
  return set;
}

struct RestSet {
  std::vector<DataMatrix> subjects;  // time x voxels (full grid)
  Matrix true_maps;                  // n_networks x voxels
  std::vector<Matrix> true_timecourses;
  std::array<int, 3> shape{};
  Affine4 affine;
};

// Smooth Gaussian-bump network maps with per-subject AR(1) activations.
// Linear trends are mixed in on purpose so detrending is exercised.
inline RestSet make_rest(int n_subjects, int nt, std::array<int, 3> shape, int n_networks,
                         std::uint64_t seed, double noise_sigma = 0.1) {
  require(n_subjects >= 1, ErrorKind::InvalidArgument, "need at least one subject");
  require(nt >= 8, ErrorKind::InvalidArgument, "need at least 8 timepoints");
  require(n_networks >= 1 && n_networks <= 8, ErrorKind::InvalidArgument,
          "n_networks must lie in 1..8");
  for (int d : shape) require(d >= 8, ErrorKind::BadShape, "shape must be at least 8x8x8");

  Rng rng(seed);
  RestSet set;
  set.shape = shape;
  set.affine = Affine4::identity();
  const std::size_t n_vox = static_cast<std::size_t>(shape[0]) *
                            static_cast<std::size_t>(shape[1]) *
                            static_cast<std::size_t>(shape[2]);
  const double sigma_g = std::min({shape[0], shape[1], shape[2]}) / 6.0;

  // well-separated bump centers keep map correlations low
  std::vector<Eigen::Vector3d> centers;
  for (int k = 0; k < n_networks; ++k) {
    Eigen::Vector3d c;
    for (int attempt = 0; attempt < 500; ++attempt) {
      for (int d = 0; d < 3; ++d)
        c(d) = rng.uniform(0.15 * shape[static_cast<std::size_t>(d)],
                           0.85 * shape[static_cast<std::size_t>(d)]);
      bool ok = true;
      for (const auto& prev : centers)
        if ((c - prev).norm() < 3.0 * sigma_g) ok = false;
      if (ok) break;
    }
    centers.push_back(c);
  }

  set.true_maps = Matrix(n_networks, static_cast<Eigen::Index>(n_vox));
  for (int k = 0; k < n_networks; ++k) {
    std::size_t v = 0;
    for (int z = 0; z < shape[2]; ++z)
      for (int y = 0; y < shape[1]; ++y)
        for (int x = 0; x < shape[0]; ++x, ++v) {
          const double d2 = (Eigen::Vector3d(x, y, z) - centers[static_cast<std::size_t>(k)])
                                .squaredNorm();
          set.true_maps(k, static_cast<Eigen::Index>(v)) =
              std::exp(-d2 / (2.0 * sigma_g * sigma_g));
        }
  }

  for (int s = 0; s < n_subjects; ++s) {
    Matrix tc(nt, n_networks);
    for (int k = 0; k < n_networks; ++k) {
      double u = rng.normal();
      tc(0, k) = u;
      for (int t = 1; t < nt; ++t) {
        u = 0.5 * u + rng.normal();  // AR(1), coefficient 0.5
        tc(t, k) = u;
      }
    }
    DataMatrix data = tc * set.true_maps;
    for (std::size_t v = 0; v < n_vox; ++v) {
      const double slope = rng.normal() * 2.0 / static_cast<double>(nt);
      for (int t = 0; t < nt; ++t)
        data(t, static_cast<Eigen::Index>(v)) +=
            slope * (t - (nt - 1) / 2.0) + noise_sigma * rng.normal();
    }
    set.true_timecourses.push_back(std::move(tc));
    set.subjects.push_back(std::move(data));
  }
  return set;
}

}  // namespace voxkit
