#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace voxkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// samples x features, row = sample
using DataMatrix = Eigen::MatrixXd;

enum class ErrorKind {
  // configuration / argument problems
  InvalidArgument,
  BadK,
  BadFraction,
  BadBand,
  BadShape,
  BadSlice,
  BadComponentCount,
  TooManyClusters,
  // data / format problems
  TruncatedFile,
  BadMagic,
  UnsupportedDatatype,
  NonFiniteData,
  IoFailure,
  ShapeMismatch,
  AffineMismatch,
  LengthMismatch,
  VoxelCountMismatch,
  TooFewTimepoints,
  SingleClass,
  EmptyClass,
  EmptyMask,
  // numeric problems
  SingularAffine,
  SingularSystem,
  DegenerateCorrelation,
  NoConvergence,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::BadK: return "BadK";
    case ErrorKind::BadFraction: return "BadFraction";
    case ErrorKind::BadBand: return "BadBand";
    case ErrorKind::BadShape: return "BadShape";
    case ErrorKind::BadSlice: return "BadSlice";
    case ErrorKind::BadComponentCount: return "BadComponentCount";
    case ErrorKind::TooManyClusters: return "TooManyClusters";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::NonFiniteData: return "NonFiniteData";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::AffineMismatch: return "AffineMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::VoxelCountMismatch: return "VoxelCountMismatch";
    case ErrorKind::TooFewTimepoints: return "TooFewTimepoints";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::SingularAffine: return "SingularAffine";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorKind::NoConvergence: return "NoConvergence";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline void require(bool cond, ErrorKind kind, const std::string& detail) {
  if (!cond) throw Error(kind, detail);
}

// Seeded RNG with hand-rolled distributions. std::mt19937_64 output is
// fully specified by the standard; the distribution helpers avoid the
// implementation-defined std::*_distribution classes so that streams are
// bit-identical across platforms and library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // unbiased integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "uniform_index(0)");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // standard normal via Box-Muller (pairwise, cached)
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates permutation of 0..n-1
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Runs f(0..n-1) across a small thread pool. Each index writes only its own
// outputs, so the result does not depend on scheduling. The first exception
// thrown by a task is rethrown on the calling thread.
template <typename F>
void parallel_for(std::size_t n, F&& f, unsigned max_threads = 0) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (max_threads != 0 && max_threads < hw) hw = max_threads;
  if (n <= 1 || hw <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);  // stop handing out work
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  threads.reserve(count);
  for (unsigned t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

}  // namespace voxkit
