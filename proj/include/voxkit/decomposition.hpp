#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <vector>

#include "voxkit/common.hpp"
#include "voxkit/signal.hpp"

namespace voxkit {

struct PcaModel {
  Matrix components;      // n_components x n_features, orthonormal rows
  Vector singular_values;  // non-increasing
  Vector mean;             // per feature

  Matrix transform(const DataMatrix& X) const {
    return (X.rowwise() - mean.transpose()) * components.transpose();
  }
  Matrix inverse_transform(const Matrix& scores) const {
    return (scores * components).rowwise() + mean.transpose();
  }
};

namespace detail {

// deterministic sign: the largest-|entry| coordinate of each row is positive
inline void fix_row_signs(Matrix& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const double a = std::abs(rows(i, j));
      if (a > best) {
        best = a;
        arg = j;
      }
    }
    if (rows(i, arg) < 0.0) rows.row(i) = -rows.row(i);
  }
}

}  // namespace detail

inline PcaModel pca_fit(const DataMatrix& X, int n_components) {
  const auto max_rank = std::min(X.rows(), X.cols());
  require(n_components >= 1 && n_components <= max_rank, ErrorKind::BadComponentCount,
          "n_components must lie in 1..min(n_samples, n_features)");

  PcaModel model;
  model.mean = X.colwise().mean();
  const Matrix Xc = X.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinV);
  model.components = svd.matrixV().leftCols(n_components).transpose();
  model.singular_values = svd.singularValues().head(n_components);
  detail::fix_row_signs(model.components);
  return model;
}

enum class IcaNonlinearity { LogCosh, Cube };

// Whitening + symmetric fixed-point FastICA. unmixing acts on the whitened
// data; channel_unmixing() composes it with the whitening for raw channels.
struct IcaModel {
  Matrix unmixing;   // n_components x n_components (whitened space)
  Matrix whitening;  // n_components x n_channels
  Vector mean;       // per channel
  Matrix sources;    // n_components x n_observations, unit variance rows
  std::uint64_t seed = 0;
  IcaNonlinearity nonlinearity = IcaNonlinearity::LogCosh;
  bool converged = true;
  int n_iter = 0;

  Matrix channel_unmixing() const { return unmixing * whitening; }
};

namespace detail {

// W <- (W W^T)^{-1/2} W
inline void symmetric_decorrelate(Matrix& W) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(W * W.transpose());
  const Vector inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  W = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * W;
}

}  // namespace detail

// X_obs: n_observations x n_channels (for spatial ICA, observations are
// voxels). Non-convergence is reported via the flag; the last iterate is
// still returned.
inline IcaModel fastica(const DataMatrix& X_obs, int n_components,
                        IcaNonlinearity nonlinearity = IcaNonlinearity::LogCosh,
                        std::uint64_t seed = 0, int max_iter = 500, double tol = 1e-6) {
  const Eigen::Index n_obs = X_obs.rows();
  const Eigen::Index n_chan = X_obs.cols();
  require(n_components >= 1 && n_components <= n_chan, ErrorKind::BadComponentCount,
          "n_components must lie in 1..n_channels");

  IcaModel model;
  model.seed = seed;
  model.nonlinearity = nonlinearity;
  model.mean = X_obs.colwise().mean();
  const Matrix Xc = X_obs.rowwise() - model.mean.transpose();

  // whiten: top eigenpairs of the channel covariance
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Xc.transpose() * Xc / static_cast<double>(n_obs));
  const Vector& evals = eig.eigenvalues();  // ascending
  const double top = evals(n_chan - 1);
  Matrix K(n_components, n_chan);
  for (int c = 0; c < n_components; ++c) {
    const Eigen::Index src = n_chan - 1 - c;
    require(evals(src) > 1e-12 * std::max(top, 1e-300), ErrorKind::BadComponentCount,
            "data rank is below the requested component count");
    K.row(c) = eig.eigenvectors().col(src).transpose() / std::sqrt(evals(src));
  }
  detail::fix_row_signs(K);
  const Matrix Z = K * Xc.transpose();  // n_components x n_obs, identity covariance

  // seeded init, then decorrelate
  Rng rng(seed);
  Matrix W(n_components, n_components);
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.normal();
  detail::symmetric_decorrelate(W);

  const double inv_n = 1.0 / static_cast<double>(n_obs);
  bool converged = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Matrix U = W * Z;
    Matrix G(U.rows(), U.cols());
    Vector gprime_mean(n_components);
    if (nonlinearity == IcaNonlinearity::LogCosh) {
      G = U.array().tanh();
      for (int i = 0; i < n_components; ++i)
        gprime_mean(i) = (1.0 - G.row(i).array().square()).mean();
    } else {
      G = U.array().cube();
      for (int i = 0; i < n_components; ++i)
        gprime_mean(i) = 3.0 * U.row(i).array().square().mean();
    }
    Matrix W_new = G * Z.transpose() * inv_n - gprime_mean.asDiagonal() * W;
    detail::symmetric_decorrelate(W_new);

    double delta = 0.0;
    for (int i = 0; i < n_components; ++i)
      delta = std::max(delta, std::abs(1.0 - std::abs(W_new.row(i).dot(W.row(i)))));
    W = W_new;
    if (delta < tol) {
      converged = true;
      ++iter;
      break;
    }
  }

  model.unmixing = W;
  model.whitening = K;
  model.sources = W * Z;
  model.converged = converged;
  model.n_iter = iter;
  return model;
}

struct ConcatIcaResult {
  Matrix maps;  // n_components x n_voxels, unit variance rows
  bool converged = true;
};

// Group spatial ICA: per subject, detrend and reduce the time dimension to
// per_subject_dim PCA components, stack the reduced series, then run
// FastICA with voxels as the random direction.
inline ConcatIcaResult concat_ica(const std::vector<DataMatrix>& subjects, int n_components,
                                  int per_subject_dim,
                                  IcaNonlinearity nonlinearity = IcaNonlinearity::LogCosh,
                                  std::uint64_t seed = 0, int max_iter = 500, double tol = 1e-6) {
  require(!subjects.empty(), ErrorKind::InvalidArgument, "no subjects");
  require(per_subject_dim >= n_components, ErrorKind::InvalidArgument,
          "per_subject_dim must be at least n_components");
  const Eigen::Index n_vox = subjects.front().cols();
  for (const auto& s : subjects)
    require(s.cols() == n_vox, ErrorKind::VoxelCountMismatch,
            "subjects must share the voxel count");

  Matrix stacked(static_cast<Eigen::Index>(subjects.size()) * per_subject_dim, n_vox);
  Eigen::Index at = 0;
  for (const auto& s : subjects) {
    require(s.rows() >= per_subject_dim, ErrorKind::InvalidArgument,
            "per_subject_dim exceeds a subject's timepoint count");
    const DataMatrix cleaned = detrend(s);
    Eigen::BDCSVD<Matrix> svd(cleaned, Eigen::ComputeThinU);
    stacked.middleRows(at, per_subject_dim) =
        svd.matrixU().leftCols(per_subject_dim).transpose() * cleaned;
    at += per_subject_dim;
  }

  const IcaModel ica =
      fastica(stacked.transpose(), n_components, nonlinearity, seed, max_iter, tol);

  ConcatIcaResult out;
  out.converged = ica.converged;
  out.maps = ica.sources;
  for (Eigen::Index i = 0; i < out.maps.rows(); ++i) {
    const double sd = std::sqrt(out.maps.row(i).array().square().mean() -
                                std::pow(out.maps.row(i).mean(), 2));
    if (sd > 0.0) out.maps.row(i) /= sd;
  }
  return out;
}

}  // namespace voxkit
