#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "voxkit/common.hpp"

namespace voxkit {

enum class ModelKind {
  SvcHingeL2,
  SvcSqHingeL2,
  SvcSqHingeL1,
  LogRegL1,
  LogRegL2,
  Ridge,
  Lasso,
  LassoLars,
};

enum class Penalty { L1, L2 };
enum class SvcLoss { Hinge, SquaredHinge };

inline bool is_classifier(ModelKind k) {
  return k == ModelKind::SvcHingeL2 || k == ModelKind::SvcSqHingeL2 ||
         k == ModelKind::SvcSqHingeL1 || k == ModelKind::LogRegL1 || k == ModelKind::LogRegL2;
}

// External binary labels mapped onto {-1,+1}: the smaller label is the
// negative class, the larger the positive class.
struct ClassLabels {
  int negative = -1;
  int positive = +1;

  static ClassLabels from(const std::vector<int>& y) {
    std::vector<int> distinct(y);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    require(distinct.size() >= 2, ErrorKind::SingleClass, "need two classes");
    require(distinct.size() == 2, ErrorKind::InvalidArgument,
            "binary classifiers support exactly two classes");
    return ClassLabels{distinct[0], distinct[1]};
  }

  Vector signs(const std::vector<int>& y) const {
    Vector s(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
      require(y[i] == negative || y[i] == positive, ErrorKind::InvalidArgument,
              "label outside the fitted classes");
      s(static_cast<Eigen::Index>(i)) = y[i] == positive ? 1.0 : -1.0;
    }
    return s;
  }

  int external(double sign) const { return sign >= 0.0 ? positive : negative; }
};

// Fitted coefficients + intercept(s). Classifiers use a single target row.
// reg is C for classifiers (larger = weaker regularization) and alpha for
// regressors (larger = stronger).
struct LinearModel {
  ModelKind kind = ModelKind::Ridge;
  Matrix coef;       // n_targets x n_features
  Vector intercept;  // n_targets
  double reg = 1.0;
  ClassLabels labels;
  bool converged = true;
  int n_iter = 0;
  double objective = 0.0;
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

namespace detail {

// log(1 + exp(z)) without overflow
inline double log1pexp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// sigma(-z) = 1 / (1 + exp(z)) without overflow
inline double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

inline void check_two_classes(const Vector& y) {
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0 ? pos : neg) = true;
  require(pos && neg, ErrorKind::SingleClass, "training data contains a single class");
}

// Dual coordinate ascent (maximal violating pair) for the hinge /
// squared-hinge SVM with an unpenalized intercept:
//   min 0.5 |w|^2 + C sum loss(y_i (w.x_i + b))
// The unpenalized b shows up as the dual constraint sum alpha_i y_i = 0.
struct SmoResult {
  Vector w;
  double b = 0.0;
  bool converged = true;
  int n_updates = 0;
};

inline SmoResult solve_svc_dual(const Matrix& X, const Vector& y, double C, bool squared,
                                double tol = 1e-8) {
  const Eigen::Index n = X.rows();
  const Matrix K = X * X.transpose();
  const double diag = squared ? 1.0 / (2.0 * C) : 0.0;
  const double upper = squared ? std::numeric_limits<double>::infinity() : C;

  Vector alpha = Vector::Zero(n);
  Vector s = Vector::Zero(n);  // s_i = w . x_i
  const long max_updates = 2000L * static_cast<long>(n);
  long updates = 0;
  bool converged = false;

  while (updates < max_updates) {
    // v_i = -y_i * grad_i; b is feasible iff max_up v <= b <= min_low v
    int best_up = -1, best_low = -1;
    double v_up = -std::numeric_limits<double>::infinity();
    double v_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = -y(i) * (y(i) * s(i) - 1.0 + diag * alpha(i));
      const bool in_up = (y(i) > 0 && alpha(i) < upper) || (y(i) < 0 && alpha(i) > 0);
      const bool in_low = (y(i) < 0 && alpha(i) < upper) || (y(i) > 0 && alpha(i) > 0);
      if (in_up && v > v_up) {
        v_up = v;
        best_up = static_cast<int>(i);
      }
      if (in_low && v < v_low) {
        v_low = v;
        best_low = static_cast<int>(i);
      }
    }
    if (best_up < 0 || best_low < 0 || v_up - v_low <= tol) {
      converged = true;
      break;
    }
    const Eigen::Index i = best_up, j = best_low;
    double a = K(i, i) + K(j, j) - 2.0 * K(i, j) + (squared ? 1.0 / C : 0.0);
    if (a < 1e-12) a = 1e-12;
    double t = (v_up - v_low) / a;
    // box constraints along the feasible direction
    if (y(i) > 0)
      t = std::min(t, upper - alpha(i));
    else
      t = std::min(t, alpha(i));
    if (y(j) > 0)
      t = std::min(t, alpha(j));
    else
      t = std::min(t, upper - alpha(j));
    if (t <= 0.0) {
      converged = true;  // boxed in; KKT holds to tolerance on the free directions
      break;
    }
    alpha(i) += y(i) * t;
    alpha(j) -= y(j) * t;
    s += t * (K.col(i) - K.col(j));
    ++updates;
  }

  SmoResult out;
  out.w = X.transpose() * (alpha.array() * y.array()).matrix();
  out.n_updates = static_cast<int>(updates);
  out.converged = converged;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = -y(i) * (y(i) * s(i) - 1.0 + diag * alpha(i));
    const bool in_up = (y(i) > 0 && alpha(i) < upper) || (y(i) < 0 && alpha(i) > 0);
    const bool in_low = (y(i) < 0 && alpha(i) < upper) || (y(i) > 0 && alpha(i) > 0);
    if (in_up) lo = std::max(lo, v);
    if (in_low) hi = std::min(hi, v);
  }
  if (std::isfinite(lo) && std::isfinite(hi))
    out.b = 0.5 * (lo + hi);
  else if (std::isfinite(lo))
    out.b = lo;
  else if (std::isfinite(hi))
    out.b = hi;
  return out;
}

// Cyclic coordinate descent with soft-thresholding for
//   min |w|_1 + C sum loss(y_i (w.x_i + b)),   loss smooth
// (squared hinge or logistic). One Newton-style proposal per coordinate,
// then a backtracking line search on the true objective; the intercept is
// an unpenalized extra coordinate.
struct CdnResult {
  Vector w;
  double b = 0.0;
  bool converged = true;
  int n_epochs = 0;
};

enum class SmoothLoss { SquaredHinge, Logistic };

inline CdnResult solve_l1_cdn(const Matrix& X, const Vector& y, double C, SmoothLoss loss,
                              double kkt_tol = 1e-6, int max_epochs = 2000) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  Vector w = Vector::Zero(d);
  double b = 0.0;
  Vector z = Vector::Zero(n);  // z_i = w . x_i + b

  auto loss_value = [&](const Vector& zz) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = y(i) * zz(i);
      if (loss == SmoothLoss::SquaredHinge) {
        const double h = std::max(0.0, 1.0 - m);
        total += h * h;
      } else {
        total += log1pexp(-m);
      }
    }
    return C * total;
  };
  // first and second derivatives of the loss part with respect to z_i
  auto derivs = [&](Eigen::Index i, double& g, double& h) {
    const double m = y(i) * z(i);
    if (loss == SmoothLoss::SquaredHinge) {
      const double slack = 1.0 - m;
      g = slack > 0.0 ? -2.0 * C * y(i) * slack : 0.0;
      h = slack > 0.0 ? 2.0 * C : 0.0;
    } else {
      const double s = sigmoid_neg(m);
      g = -C * y(i) * s;
      h = C * s * (1.0 - s);
    }
  };

  auto coordinate_step = [&](Eigen::Index j, bool penalized) {
    double g = 0.0, h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double gi, hi;
      derivs(i, gi, hi);
      const double xij = penalized ? X(i, j) : 1.0;
      g += xij * gi;
      h += xij * xij * hi;
    }
    if (h < 1e-12) h = 1e-12;
    const double wj = penalized ? w(j) : b;
    double dir;
    if (!penalized) {
      dir = -g / h;
    } else if (g + 1.0 <= h * wj) {
      dir = -(g + 1.0) / h;
    } else if (g - 1.0 >= h * wj) {
      dir = -(g - 1.0) / h;
    } else {
      dir = -wj;
    }
    if (dir == 0.0) return 0.0;

    const double old_loss = loss_value(z);
    const double pen_gain = penalized ? std::abs(wj + dir) - std::abs(wj) : 0.0;
    const double decrease_bound = g * dir + pen_gain;  // signed; < 0 for a descent step
    double lambda = 1.0;
    for (int ls = 0; ls < 40; ++ls) {
      Vector z_new = z;
      for (Eigen::Index i = 0; i < n; ++i)
        z_new(i) += lambda * dir * (penalized ? X(i, j) : 1.0);
      const double new_loss = loss_value(z_new);
      const double pen_delta =
          penalized ? std::abs(wj + lambda * dir) - std::abs(wj) : 0.0;
      if (new_loss + pen_delta - old_loss <= 0.01 * lambda * decrease_bound) {
        z = std::move(z_new);
        if (penalized)
          w(j) += lambda * dir;
        else
          b += lambda * dir;
        return lambda * dir;
      }
      lambda *= 0.5;
    }
    return 0.0;
  };

  CdnResult out;
  int epoch = 0;
  for (; epoch < max_epochs; ++epoch) {
    for (Eigen::Index j = 0; j < d; ++j) coordinate_step(j, true);
    coordinate_step(0, false);

    // KKT violations: |g_j| <= 1 at zero, g_j + sign(w_j) = 0 otherwise
    double worst = 0.0;
    for (Eigen::Index j = 0; j <= d; ++j) {
      const bool penalized = j < d;
      double g = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double gi, hi;
        derivs(i, gi, hi);
        g += (penalized ? X(i, j) : 1.0) * gi;
      }
      double viol;
      if (!penalized)
        viol = std::abs(g);
      else if (w(j) > 0.0)
        viol = std::abs(g + 1.0);
      else if (w(j) < 0.0)
        viol = std::abs(g - 1.0);
      else
        viol = std::max(0.0, std::abs(g) - 1.0);
      worst = std::max(worst, viol);
    }
    if (worst <= kkt_tol) {
      ++epoch;
      break;
    }
  }
  out.w = w;
  out.b = b;
  out.n_epochs = epoch;
  out.converged = epoch < max_epochs;
  return out;
}

}  // namespace detail

// Linear SVM: min penalty(w) + C * sum_i loss(y_i (w.x_i + b)).
// l2/hinge and l2/squared_hinge solve the dual; l1 requires squared_hinge
// and runs primal coordinate descent. NoConvergence is reported through the
// converged flag, never as an exception.
inline LinearModel fit_linear_svc(const DataMatrix& X, const std::vector<int>& y_ext,
                                  Penalty penalty, SvcLoss loss, double C) {
  require(C > 0.0, ErrorKind::InvalidArgument, "C must be positive");
  require(static_cast<Eigen::Index>(y_ext.size()) == X.rows(), ErrorKind::LengthMismatch,
          "label count does not match sample count");
  require(!(penalty == Penalty::L1 && loss == SvcLoss::Hinge), ErrorKind::InvalidArgument,
          "l1 penalty requires the squared hinge loss");
  const ClassLabels labels = ClassLabels::from(y_ext);
  const Vector y = labels.signs(y_ext);
  detail::check_two_classes(y);

  LinearModel model;
  model.labels = labels;
  model.reg = C;
  if (penalty == Penalty::L2) {
    const bool squared = loss == SvcLoss::SquaredHinge;
    const auto res = detail::solve_svc_dual(X, y, C, squared);
    model.kind = squared ? ModelKind::SvcSqHingeL2 : ModelKind::SvcHingeL2;
    model.coef = res.w.transpose();
    model.intercept = Vector::Constant(1, res.b);
    model.converged = res.converged;
    model.n_iter = res.n_updates;
    double l = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double slack = std::max(0.0, 1.0 - y(i) * (res.w.dot(X.row(i)) + res.b));
      l += squared ? slack * slack : slack;
    }
    model.objective = 0.5 * res.w.squaredNorm() + C * l;
  } else {
    const auto res = detail::solve_l1_cdn(X, y, C, detail::SmoothLoss::SquaredHinge);
    model.kind = ModelKind::SvcSqHingeL1;
    model.coef = res.w.transpose();
    model.intercept = Vector::Constant(1, res.b);
    model.converged = res.converged;
    model.n_iter = res.n_epochs;
    double l = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double slack = std::max(0.0, 1.0 - y(i) * (res.w.dot(X.row(i)) + res.b));
      l += slack * slack;
    }
    model.objective = res.w.lpNorm<1>() + C * l;
  }
  return model;
}

// Logistic regression: min penalty(w) + C * sum_i log(1 + exp(-y_i (w.x_i + b))).
// l2 uses damped Newton iterations; l1 uses coordinate descent with
// soft-thresholding. The intercept is never penalized.
inline LinearModel fit_logistic(const DataMatrix& X, const std::vector<int>& y_ext,
                                Penalty penalty, double C) {
  require(C > 0.0, ErrorKind::InvalidArgument, "C must be positive");
  require(static_cast<Eigen::Index>(y_ext.size()) == X.rows(), ErrorKind::LengthMismatch,
          "label count does not match sample count");
  const ClassLabels labels = ClassLabels::from(y_ext);
  const Vector y = labels.signs(y_ext);
  detail::check_two_classes(y);

  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  LinearModel model;
  model.labels = labels;
  model.reg = C;

  if (penalty == Penalty::L1) {
    const auto res = detail::solve_l1_cdn(X, y, C, detail::SmoothLoss::Logistic);
    model.kind = ModelKind::LogRegL1;
    model.coef = res.w.transpose();
    model.intercept = Vector::Constant(1, res.b);
    model.converged = res.converged;
    model.n_iter = res.n_epochs;
    double l = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      l += detail::log1pexp(-y(i) * (res.w.dot(X.row(i)) + res.b));
    model.objective = res.w.lpNorm<1>() + C * l;
    return model;
  }

  // l2: Newton on v = (w, b) with an Armijo backtracking line search
  Vector v = Vector::Zero(d + 1);
  auto objective = [&](const Vector& vv) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = X.row(i).dot(vv.head(d)) + vv(d);
      total += detail::log1pexp(-y(i) * z);
    }
    return 0.5 * vv.head(d).squaredNorm() + C * total;
  };

  bool converged = false;
  int iter = 0;
  const int max_iter = 200;
  for (; iter < max_iter; ++iter) {
    Vector grad = Vector::Zero(d + 1);
    grad.head(d) = v.head(d);
    Matrix H = Matrix::Zero(d + 1, d + 1);
    H.topLeftCorner(d, d).setIdentity();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = X.row(i).dot(v.head(d)) + v(d);
      const double s = detail::sigmoid_neg(y(i) * z);
      const double gz = -C * y(i) * s;
      const double hz = C * s * (1.0 - s);
      grad.head(d) += gz * X.row(i).transpose();
      grad(d) += gz;
      Vector xi(d + 1);
      xi.head(d) = X.row(i).transpose();
      xi(d) = 1.0;
      H.noalias() += hz * xi * xi.transpose();
    }
    if (grad.norm() <= 1e-6) {
      converged = true;
      break;
    }
    Vector step = H.ldlt().solve(-grad);
    const double slope = grad.dot(step);
    double lambda = 1.0;
    const double f0 = objective(v);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector cand = v + lambda * step;
      if (objective(cand) <= f0 + 1e-4 * lambda * slope) {
        v = cand;
        moved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) break;
  }

  model.kind = ModelKind::LogRegL2;
  model.coef = v.head(d).transpose();
  model.intercept = Vector::Constant(1, v(d));
  model.converged = converged;
  model.n_iter = iter;
  model.objective = objective(v);
  return model;
}

// Ridge regression, multi-target: coef = (Xc' Xc + alpha I)^-1 Xc' Yc on
// centered data; intercepts restore the means.
inline LinearModel fit_ridge(const DataMatrix& X, const Matrix& Y, double alpha) {
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be non-negative");
  require(X.rows() == Y.rows(), ErrorKind::LengthMismatch, "X and Y row counts differ");
  require(X.rows() >= 1, ErrorKind::LengthMismatch, "need at least one sample");

  const Eigen::Index d = X.cols();
  const Vector x_mean = X.colwise().mean();
  const Vector y_mean = Y.colwise().mean();
  const Matrix Xc = X.rowwise() - x_mean.transpose();
  const Matrix Yc = Y.rowwise() - y_mean.transpose();

  if (alpha == 0.0) {
    const auto qr = Xc.colPivHouseholderQr();
    require(qr.rank() == d, ErrorKind::SingularSystem,
            "alpha = 0 requires full column rank");
  }
  Matrix A = Xc.transpose() * Xc;
  A.diagonal().array() += alpha;
  const Matrix coef_t = A.ldlt().solve(Xc.transpose() * Yc);  // d x targets

  LinearModel model;
  model.kind = ModelKind::Ridge;
  model.reg = alpha;
  model.coef = coef_t.transpose();
  model.intercept = y_mean - coef_t.transpose() * x_mean;
  return model;
}

inline LinearModel fit_ridge(const DataMatrix& X, const Vector& y, double alpha) {
  return fit_ridge(X, Matrix(y), alpha);
}

// Lasso: min (1/2n) |y - Xw - b|^2 + alpha |w|_1 by cyclic coordinate
// descent with soft-thresholding; stops when the KKT system holds to 1e-8.
inline LinearModel fit_lasso_cd(const DataMatrix& X, const Vector& y, double alpha,
                                double kkt_tol = 1e-8, int max_epochs = 10000) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
  require(X.rows() == y.size(), ErrorKind::LengthMismatch, "X and y row counts differ");

  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double dn = static_cast<double>(n);
  const Vector x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Matrix Xc = X.rowwise() - x_mean.transpose();
  const Vector yc = y.array() - y_mean;

  Vector col_sq(d);
  for (Eigen::Index j = 0; j < d; ++j) col_sq(j) = Xc.col(j).squaredNorm() / dn;

  Vector w = Vector::Zero(d);
  Vector r = yc;
  bool converged = false;
  int epoch = 0;
  for (; epoch < max_epochs; ++epoch) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (col_sq(j) <= 0.0) continue;
      const double rho = Xc.col(j).dot(r) / dn + col_sq(j) * w(j);
      const double w_new = soft_threshold(rho, alpha) / col_sq(j);
      const double delta = w_new - w(j);
      if (delta != 0.0) {
        r -= delta * Xc.col(j);
        w(j) = w_new;
      }
    }
    // exact KKT pass on a fresh residual
    r = yc - Xc * w;
    const Vector g = Xc.transpose() * r / dn;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (w(j) == 0.0)
        worst = std::max(worst, std::abs(g(j)) - alpha);
      else
        worst = std::max(worst, std::abs(g(j) - alpha * (w(j) > 0 ? 1.0 : -1.0)));
    }
    if (worst <= kkt_tol) {
      converged = true;
      ++epoch;
      break;
    }
  }

  LinearModel model;
  model.kind = ModelKind::Lasso;
  model.reg = alpha;
  model.coef = w.transpose();
  model.intercept = Vector::Constant(1, y_mean - x_mean.dot(w));
  model.converged = converged;
  model.n_iter = epoch;
  return model;
}

// One point on a LARS path: the alpha breakpoint and the coefficients there.
struct LarsBreakpoint {
  double alpha = 0.0;
  Vector coef;
};

struct LarsPath {
  std::vector<LarsBreakpoint> points;
  Vector x_mean;
  double y_mean = 0.0;

  double intercept_at(const Vector& w) const { return y_mean - x_mean.dot(w); }

  // coefficients at an arbitrary alpha: piecewise-linear interpolation,
  // clamped to the path ends
  Vector coef_at(double alpha) const {
    const auto& pts = points;
    if (alpha >= pts.front().alpha) return Vector::Zero(pts.front().coef.size());
    if (alpha <= pts.back().alpha) return pts.back().coef;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      if (alpha >= pts[k].alpha) {
        const double hi = pts[k - 1].alpha, lo = pts[k].alpha;
        if (hi - lo <= 0.0) return pts[k].coef;
        const double t = (hi - alpha) / (hi - lo);
        return pts[k - 1].coef + t * (pts[k].coef - pts[k - 1].coef);
      }
    }
    return pts.back().coef;
  }
};

// Lasso-modified LARS for (1/2n) |y - Xw|^2 + alpha |w|_1 on centered data.
// The active set grows by the most correlated feature (exact ties take the
// lower index); a coefficient hitting zero is dropped and the direction is
// recomputed. Coefficients are piecewise-linear in alpha between breakpoints.
inline LarsPath lars_path(const DataMatrix& X, const Vector& y, int max_iter) {
  require(max_iter >= 1, ErrorKind::InvalidArgument, "max_iter must be at least 1");
  require(X.rows() == y.size(), ErrorKind::LengthMismatch, "X and y row counts differ");

  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double dn = static_cast<double>(n);

  LarsPath path;
  path.x_mean = X.colwise().mean();
  path.y_mean = y.mean();
  const Matrix Xc = X.rowwise() - path.x_mean.transpose();
  const Vector yc = y.array() - path.y_mean;
  const Matrix gram = Xc.transpose() * Xc / dn;

  Vector w = Vector::Zero(d);
  Vector c = Xc.transpose() * yc / dn;

  double alpha = 0.0;
  int first = -1;
  for (Eigen::Index j = 0; j < d; ++j)
    if (std::abs(c(j)) > alpha + 1e-15) {
      alpha = std::abs(c(j));
      first = static_cast<int>(j);
    }
  path.points.push_back({alpha, w});
  if (first < 0) return path;  // y uncorrelated with every feature

  const double alpha0 = alpha;
  std::vector<int> active{first};
  std::vector<bool> is_active(static_cast<std::size_t>(d), false);
  is_active[static_cast<std::size_t>(first)] = true;
  int last_dropped = -1;

  for (int step = 0; step < max_iter && alpha > 1e-12 * alpha0; ++step) {
    const auto m = static_cast<Eigen::Index>(active.size());
    Matrix G(m, m);
    Vector sgn(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      sgn(a) = c(active[static_cast<std::size_t>(a)]) >= 0 ? 1.0 : -1.0;
      for (Eigen::Index b = 0; b < m; ++b)
        G(a, b) = gram(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]);
    }
    const Vector dir = G.ldlt().solve(sgn);
    if ((G * dir - sgn).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, sgn.cwiseAbs().maxCoeff()))
      break;  // active Gram numerically singular; path ends here

    // correlation decay rates of the inactive features
    Vector u = Vector::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) u += dir(a) * Xc.col(active[static_cast<std::size_t>(a)]);
    const Vector rate = Xc.transpose() * u / dn;

    const double tol = 1e-12 * alpha0;

    // earliest join: an inactive feature whose |correlation| catches up
    double join_gamma = std::numeric_limits<double>::infinity();
    int join = -1;
    for (Eigen::Index k = 0; k < d; ++k) {
      if (is_active[static_cast<std::size_t>(k)]) continue;
      double best_k = std::numeric_limits<double>::infinity();
      for (const double cand :
           {(alpha - c(k)) / (1.0 - rate(k)), (alpha + c(k)) / (1.0 + rate(k))}) {
        if (!std::isfinite(cand) || cand < 0.0) continue;
        if (cand <= tol && static_cast<int>(k) == last_dropped) continue;  // skip the zero root
        best_k = std::min(best_k, cand);
      }
      if (best_k < join_gamma - tol) {  // ties keep the earlier (lower) index
        join_gamma = best_k;
        join = static_cast<int>(k);
      }
    }

    // earliest drop: an active coefficient crossing zero
    double drop_gamma = std::numeric_limits<double>::infinity();
    int drop = -1;
    for (Eigen::Index a = 0; a < m; ++a) {
      const int k = active[static_cast<std::size_t>(a)];
      if (dir(a) == 0.0) continue;
      const double cand = -w(k) / dir(a);
      if (cand <= tol) continue;
      if (cand < drop_gamma - tol) {
        drop_gamma = cand;
        drop = k;
      }
    }

    // a drop at the same gamma beats a join; both are capped by the full
    // shrink of the active correlations
    double gamma = alpha;
    if (drop >= 0 && drop_gamma <= std::min(join_gamma, alpha) + tol) {
      gamma = std::min(drop_gamma, alpha);
      join = -1;
    } else if (join >= 0 && join_gamma <= alpha + tol) {
      gamma = std::min(join_gamma, alpha);
      drop = -1;
    } else {
      join = drop = -1;
    }

    for (Eigen::Index a = 0; a < m; ++a) w(active[static_cast<std::size_t>(a)]) += gamma * dir(a);
    alpha -= gamma;
    if (drop >= 0) w(drop) = 0.0;
    path.points.push_back({std::max(alpha, 0.0), w});

    c = Xc.transpose() * (yc - Xc * w) / dn;
    if (drop >= 0) {
      active.erase(std::remove(active.begin(), active.end(), drop), active.end());
      is_active[static_cast<std::size_t>(drop)] = false;
      last_dropped = drop;
    } else if (join >= 0) {
      active.push_back(join);
      std::sort(active.begin(), active.end());
      is_active[static_cast<std::size_t>(join)] = true;
      last_dropped = -1;
    } else {
      break;  // residual correlations exhausted
    }
  }
  return path;
}

struct LassoLarsCvResult {
  LinearModel model;
  double alpha = 0.0;
  std::vector<double> alpha_grid;
  std::vector<double> cv_mse;
};

// Per-fold LARS paths evaluated on a common alpha grid (the union of all
// breakpoints); the alpha with minimal mean held-out MSE wins (ties go to
// the strongest regularization) and the model is refit on all data.
inline LassoLarsCvResult fit_lasso_lars_cv(const DataMatrix& X, const Vector& y, int n_folds,
                                           int max_iter) {
  require(n_folds >= 2, ErrorKind::InvalidArgument, "need at least 2 folds");
  const Eigen::Index n = X.rows();
  require(n >= n_folds, ErrorKind::InvalidArgument, "more folds than samples");

  // contiguous folds, first n % k folds one longer
  std::vector<std::pair<Eigen::Index, Eigen::Index>> folds;  // [begin, end)
  {
    const Eigen::Index base = n / n_folds, extra = n % n_folds;
    Eigen::Index at = 0;
    for (int f = 0; f < n_folds; ++f) {
      const Eigen::Index len = base + (f < extra ? 1 : 0);
      folds.emplace_back(at, at + len);
      at += len;
    }
  }

  std::vector<LarsPath> paths;
  paths.reserve(folds.size());
  std::vector<double> grid;
  for (const auto& [begin, end] : folds) {
    const Eigen::Index test_len = end - begin;
    const Eigen::Index train_len = n - test_len;
    DataMatrix Xtr(train_len, X.cols());
    Vector ytr(train_len);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i >= begin && i < end) continue;
      Xtr.row(at) = X.row(i);
      ytr(at) = y(i);
      ++at;
    }
    paths.push_back(lars_path(Xtr, ytr, max_iter));
    for (const auto& pt : paths.back().points) grid.push_back(pt.alpha);
  }
  std::sort(grid.begin(), grid.end(), std::greater<double>());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + a); }),
             grid.end());

  std::vector<double> mse(grid.size(), 0.0);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& [begin, end] = folds[f];
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const Vector w = paths[f].coef_at(grid[gi]);
      const double b = paths[f].intercept_at(w);
      double err = 0.0;
      for (Eigen::Index i = begin; i < end; ++i) {
        const double r = y(i) - (X.row(i).dot(w) + b);
        err += r * r;
      }
      mse[gi] += err / static_cast<double>(end - begin);
    }
  }
  for (auto& v : mse) v /= static_cast<double>(folds.size());

  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi)
    if (mse[gi] < mse[best]) best = gi;

  const LarsPath full = lars_path(X, y, max_iter);
  const Vector w = full.coef_at(grid[best]);

  LassoLarsCvResult out;
  out.alpha = grid[best];
  out.alpha_grid = grid;
  out.cv_mse = mse;
  out.model.kind = ModelKind::LassoLars;
  out.model.reg = grid[best];
  out.model.coef = w.transpose();
  out.model.intercept = Vector::Constant(1, full.intercept_at(w));
  return out;
}

// ---- prediction & metrics ----

inline Matrix predict(const LinearModel& model, const DataMatrix& X) {
  require(X.cols() == model.coef.cols(), ErrorKind::LengthMismatch,
          "feature count does not match the fitted model");
  Matrix out = X * model.coef.transpose();
  out.rowwise() += model.intercept.transpose();
  return out;
}

inline Vector decision_function(const LinearModel& model, const DataMatrix& X) {
  require(model.coef.rows() == 1, ErrorKind::InvalidArgument,
          "decision_function expects a single-target model");
  return predict(model, X).col(0);
}

// margin > 0 (or exactly 0) -> positive class
inline std::vector<int> classify(const LinearModel& model, const DataMatrix& X) {
  const Vector margins = decision_function(model, X);
  std::vector<int> out(static_cast<std::size_t>(margins.size()));
  for (Eigen::Index i = 0; i < margins.size(); ++i)
    out[static_cast<std::size_t>(i)] = model.labels.external(margins(i));
  return out;
}

// 1 - SS_res / SS_tot per column, with SS_tot taken on the given
// (held-out) targets. SS_tot = 0 scores 0 by definition.
inline Vector r2_score_per_target(const Matrix& Y_true, const Matrix& Y_pred) {
  require(Y_true.rows() == Y_pred.rows() && Y_true.cols() == Y_pred.cols(),
          ErrorKind::ShapeMismatch, "r2 inputs must have identical shapes");
  require(Y_true.rows() >= 2, ErrorKind::InvalidArgument, "r2 needs at least 2 samples");
  Vector out(Y_true.cols());
  for (Eigen::Index j = 0; j < Y_true.cols(); ++j) {
    const double mean = Y_true.col(j).mean();
    const double ss_tot = (Y_true.col(j).array() - mean).square().sum();
    const double ss_res = (Y_true.col(j) - Y_pred.col(j)).squaredNorm();
    out(j) = ss_tot == 0.0 ? 0.0 : 1.0 - ss_res / ss_tot;
  }
  return out;
}

inline double accuracy_score(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  require(y_true.size() == y_pred.size(), ErrorKind::LengthMismatch,
          "label vectors must have equal length");
  require(!y_true.empty(), ErrorKind::LengthMismatch, "empty label vectors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += (y_true[i] == y_pred[i]);
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

}  // namespace voxkit
