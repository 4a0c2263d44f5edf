#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "voxkit/common.hpp"

namespace voxkit {

struct CleanConfig {
  bool detrend = false;
  bool standardize = false;
  std::optional<double> low_cut_hz;
  std::optional<double> high_cut_hz;
  double tr_seconds = 1.0;

  void validate() const {
    require(tr_seconds > 0.0, ErrorKind::InvalidArgument, "tr_seconds must be positive");
    const double nyquist = 0.5 / tr_seconds;
    if (low_cut_hz && high_cut_hz)
      require(*low_cut_hz < *high_cut_hz && *high_cut_hz < nyquist, ErrorKind::BadBand,
              "band must satisfy low < high < Nyquist");
    if (high_cut_hz) require(*high_cut_hz < nyquist, ErrorKind::BadBand, "high cut above Nyquist");
  }
};

namespace dft {

// Complex DFT, radix-2 when the length is a power of two, direct sum
// otherwise. Cleaning runs on short series, so the O(n^2) fallback is fine.
inline void transform(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if ((n & (n - 1)) == 0) {
    // iterative Cooley-Tukey
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
      const std::complex<double> wl(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        std::complex<double> w(1.0, 0.0);
        for (std::size_t k = 0; k < len / 2; ++k) {
          const std::complex<double> u = a[i + k];
          const std::complex<double> v = a[i + k + len / 2] * w;
          a[i + k] = u + v;
          a[i + k + len / 2] = u - v;
          w *= wl;
        }
      }
    }
  } else {
    std::vector<std::complex<double>> out(n, {0.0, 0.0});
    const double sign = inverse ? 2.0 : -2.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t t = 0; t < n; ++t) {
        const double ang = sign * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
        out[k] += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
    }
    a = std::move(out);
  }
  if (inverse)
    for (auto& v : a) v /= static_cast<double>(n);
}

}  // namespace dft

// Subtracts the per-column least-squares line a*t + b (t = 0..nt-1).
inline DataMatrix detrend(const DataMatrix& X) {
  const Eigen::Index n = X.rows();
  require(n >= 2, ErrorKind::TooFewTimepoints, "detrend needs at least 2 timepoints");
  const double t_mean = static_cast<double>(n - 1) / 2.0;
  double sxx = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) sxx += (t - t_mean) * (t - t_mean);

  DataMatrix out(n, X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    double sxy = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) sxy += (t - t_mean) * (X(t, j) - mean);
    const double slope = sxy / sxx;
    for (Eigen::Index t = 0; t < n; ++t) out(t, j) = X(t, j) - mean - slope * (t - t_mean);
  }
  return out;
}

// Zero mean, unit population variance per column. Columns whose residuals
// are at rounding-noise level map to all-zeros instead of amplified noise.
inline DataMatrix standardize(const DataMatrix& X) {
  DataMatrix out(X.rows(), X.cols());
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    const Vector centered = X.col(j).array() - mean;
    const double amax = centered.cwiseAbs().maxCoeff();
    if (amax <= 1e-12 * std::max(1.0, std::abs(mean))) {
      out.col(j).setZero();
      continue;
    }
    const double sd = std::sqrt(centered.squaredNorm() / n);
    out.col(j) = centered / sd;
  }
  return out;
}

// Ideal frequency mask per column: DFT, zero every bin whose frequency lies
// outside [low_cut, high_cut], inverse DFT. Bin k maps to frequency
// min(k, nt-k) / (nt * tr); the DC bin is removed whenever a low cut is set.
inline DataMatrix bandpass(const DataMatrix& X, const CleanConfig& cfg) {
  cfg.validate();
  if (!cfg.low_cut_hz && !cfg.high_cut_hz) return X;
  const Eigen::Index n = X.rows();
  require(n >= 2, ErrorKind::TooFewTimepoints, "bandpass needs at least 2 timepoints");

  std::vector<bool> keep(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double cycles = static_cast<double>(std::min(k, n - k));
    const double freq = cycles / (static_cast<double>(n) * cfg.tr_seconds);
    bool ok = true;
    if (cfg.low_cut_hz && freq < *cfg.low_cut_hz) ok = false;
    if (cfg.high_cut_hz && freq > *cfg.high_cut_hz) ok = false;
    keep[static_cast<std::size_t>(k)] = ok;
  }

  DataMatrix out(n, X.cols());
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (Eigen::Index t = 0; t < n; ++t) buf[static_cast<std::size_t>(t)] = {X(t, j), 0.0};
    dft::transform(buf, false);
    for (Eigen::Index k = 0; k < n; ++k)
      if (!keep[static_cast<std::size_t>(k)]) buf[static_cast<std::size_t>(k)] = {0.0, 0.0};
    dft::transform(buf, true);
    for (Eigen::Index t = 0; t < n; ++t) out(t, j) = buf[static_cast<std::size_t>(t)].real();
  }
  return out;
}

// Cleaning order: detrend, then frequency filter, then standardize.
inline DataMatrix clean(const DataMatrix& X, const CleanConfig& cfg) {
  cfg.validate();
  DataMatrix out = X;
  if (cfg.detrend) out = detrend(out);
  if (cfg.low_cut_hz || cfg.high_cut_hz) out = bandpass(out, cfg);
  if (cfg.standardize) out = standardize(out);
  return out;
}

}  // namespace voxkit
