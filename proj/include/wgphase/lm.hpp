// Bounded Levenberg-Marquardt least squares.
//
// Minimises |r(x)|^2 for a residual callable r: VectorXd -> VectorXd. The
// Jacobian comes from central differences (one-sided at an active bound),
// damping is multiplied by 2 on a rejected step and divided by 3 on an
// accepted one, and bounds are enforced by projection with an active set.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wgphase/error.hpp"

namespace wgphase {

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Bounds unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
  }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
  bool contains(const Eigen::VectorXd& x) const {
    return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
  }
};

struct LmOptions {
  int max_iter = 500;
  double initial_lambda = 1e-3;
  double chi2_rtol = 1e-10;
  double step_tol = 1e-12;
  /// Scaled JtJ eigenvalue ratio below which a direction counts as flat.
  double flat_ratio = 1e-10;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  Eigen::Index n_residuals = 0;
  int n_iter = 0;
  bool converged = false;
  std::vector<bool> at_bound;
  std::vector<std::string> warnings;
  /// Smallest/largest eigenvalue of the column-scaled normal matrix and the
  /// matching eigenvector (in parameter order).
  double conditioning = 1.0;
  Eigen::VectorXd flat_direction;
  std::string diagnostic;

  Eigen::Index index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<Eigen::Index>(i);
    throw InputError("FitResult: no parameter named " + name);
  }
  double value(const std::string& name) const { return params[index(name)]; }
  double sigma(const std::string& name) const {
    const auto i = index(name);
    return std::sqrt(std::max(0.0, covariance(i, i)));
  }
  Eigen::Index dof() const { return std::max<Eigen::Index>(n_residuals - params.size(), 1); }
  double reduced_chi2() const { return chi2 / static_cast<double>(dof()); }
};

namespace detail {

inline double fd_step(double x) { return std::max(1e-6 * std::abs(x), 1e-8); }

}  // namespace detail

/// Jacobian by central differences; falls back to a one-sided stencil when
/// the central one would leave the box.
template <class Residual>
Eigen::MatrixXd finite_difference_jacobian(Residual&& model, const Eigen::VectorXd& x, const Bounds& bounds,
                                           const Eigen::VectorXd* r_at_x = nullptr) {
  Eigen::VectorXd r0;
  if (r_at_x == nullptr) {
    r0 = model(x);
    r_at_x = &r0;
  }
  Eigen::MatrixXd jac(r_at_x->size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = detail::fd_step(x[j]);
    Eigen::VectorXd xp = x, xm = x;
    const bool up_ok = x[j] + h <= bounds.upper[j];
    const bool down_ok = x[j] - h >= bounds.lower[j];
    if (up_ok && down_ok) {
      xp[j] += h;
      xm[j] -= h;
      jac.col(j) = (model(xp) - model(xm)) / (2.0 * h);
    } else if (up_ok) {
      xp[j] += h;
      jac.col(j) = (model(xp) - *r_at_x) / h;
    } else if (down_ok) {
      xm[j] -= h;
      jac.col(j) = (*r_at_x - model(xm)) / h;
    } else {
      jac.col(j).setZero();
    }
  }
  return jac;
}

/// Covariance (JtJ)^-1 scaled by the reduced chi2, plus conditioning of the
/// column-scaled normal matrix. Rank-deficient problems get a pseudo-inverse.
inline void fill_covariance(FitResult& fit, const Eigen::MatrixXd& jac, const LmOptions& opts) {
  const Eigen::Index n = jac.cols();
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i) scale[i] = jtj(i, i) > 0.0 ? 1.0 / std::sqrt(jtj(i, i)) : 1.0;
  const Eigen::MatrixXd scaled = scale.asDiagonal() * jtj * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  fit.conditioning = top > 0.0 ? std::max(ev.minCoeff(), 0.0) / top : 0.0;
  fit.flat_direction = eig.eigenvectors().col(0);

  Eigen::MatrixXd inv_scaled = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (ev[k] > opts.flat_ratio * top) {
      const Eigen::VectorXd v = eig.eigenvectors().col(k);
      inv_scaled += v * v.transpose() / ev[k];
    }
  }
  Eigen::MatrixXd cov = scale.asDiagonal() * inv_scaled * scale.asDiagonal();
  cov *= fit.reduced_chi2();
  fit.covariance = 0.5 * (cov + cov.transpose());
}

template <class Residual>
FitResult lm_minimize(Residual&& model, const Eigen::VectorXd& init, const Bounds& bounds,
                      const LmOptions& opts = {}, std::vector<std::string> names = {}) {
  const Eigen::Index n = init.size();
  detail::require(n > 0, "lm_minimize: empty parameter vector");
  detail::require(bounds.lower.size() == n && bounds.upper.size() == n, "lm_minimize: bounds size mismatch");
  detail::require(bounds.contains(init), "lm_minimize: initial point outside bounds");
  if (names.empty())
    for (Eigen::Index i = 0; i < n; ++i) names.push_back("p" + std::to_string(i));
  detail::require(static_cast<Eigen::Index>(names.size()) == n, "lm_minimize: names size mismatch");

  FitResult fit;
  fit.names = std::move(names);
  Eigen::VectorXd x = init;
  Eigen::VectorXd r = model(x);
  detail::require(r.allFinite(), "lm_minimize: residual not finite at the initial point");
  fit.n_residuals = r.size();
  double chi2 = r.squaredNorm();
  double lambda = opts.initial_lambda;
  bool ridge_warned = false;

  Eigen::MatrixXd jac = finite_difference_jacobian(model, x, bounds, &r);
  bool done = chi2 == 0.0;
  int iter = 0;
  while (!done && iter < opts.max_iter) {
    ++iter;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    // Parameters pinned at a bound with the descent direction pointing out stay put.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool push_down = x[i] <= bounds.lower[i] && grad[i] > 0.0;
      const bool push_up = x[i] >= bounds.upper[i] && grad[i] < 0.0;
      if (!push_down && !push_up) free.push_back(i);
    }
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd a(m, m);
      Eigen::VectorXd g(m);
      double max_diag = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) max_diag = std::max(max_diag, jtj(free[i], free[i]));
      const double diag_floor = std::max(max_diag, 1.0) * 1e-15;
      for (Eigen::Index i = 0; i < m; ++i) {
        g[i] = grad[free[i]];
        for (Eigen::Index k = 0; k < m; ++k) a(i, k) = jtj(free[i], free[k]);
        a(i, i) += lambda * std::max(jtj(free[i], free[i]), diag_floor);
      }
      // The undamped normal matrix decides whether the problem is singular;
      // damping alone would hide a zero column.
      Eigen::MatrixXd raw(m, m);
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k < m; ++k) raw(i, k) = jtj(free[i], free[k]);
      const Eigen::LDLT<Eigen::MatrixXd> raw_ldlt(raw);
      const bool singular = raw_ldlt.info() != Eigen::Success || !(raw_ldlt.vectorD().minCoeff() > 1e-14 * max_diag);
      double ridge = 1e-12 * std::max(max_diag, 1.0);
      if (singular) {
        if (!ridge_warned) {
          fit.warnings.push_back("singular normal equations; ridge-regularized");
          ridge_warned = true;
        }
        a.diagonal().array() += ridge;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      Eigen::VectorXd sub = ldlt.solve(-g);
      while (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !sub.allFinite()) {
        if (!ridge_warned) {
          fit.warnings.push_back("singular normal equations; ridge-regularized");
          ridge_warned = true;
        }
        a.diagonal().array() += ridge;
        ridge *= 10.0;
        ldlt.compute(a);
        sub = ldlt.solve(-g);
        if (ridge > 1e30) break;
      }
      for (Eigen::Index i = 0; i < m; ++i) step[free[i]] = sub[i];
    }

    const Eigen::VectorXd x_new = bounds.project(x + step);
    const Eigen::VectorXd actual = x_new - x;
    if (actual.norm() < opts.step_tol * (x.norm() + opts.step_tol)) {
      done = true;
      break;
    }
    const Eigen::VectorXd r_new = model(x_new);
    const double chi2_new = r_new.allFinite() ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
    if (chi2_new < chi2) {
      const double rel = (chi2 - chi2_new) / chi2;
      x = x_new;
      r = r_new;
      chi2 = chi2_new;
      lambda = std::max(lambda / 3.0, 1e-15);
      jac = finite_difference_jacobian(model, x, bounds, &r);
      if (rel < opts.chi2_rtol || chi2 == 0.0) done = true;
    } else {
      lambda *= 2.0;
      if (lambda > 1e30) done = true;
    }
  }

  fit.params = x;
  fit.chi2 = chi2;
  fit.n_iter = iter;
  fit.converged = done;
  if (!done) fit.warnings.push_back("iteration limit reached");
  fit.at_bound.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    fit.at_bound[static_cast<std::size_t>(i)] = x[i] <= bounds.lower[i] || x[i] >= bounds.upper[i];
  fill_covariance(fit, jac, opts);
  return fit;
}

/// Names of the parameters that dominate the flat direction of a fit.
inline std::string describe_flat_direction(const FitResult& fit) {
  std::ostringstream os;
  os << "flat direction (scaled eigenvalue ratio " << fit.conditioning << "):";
  for (Eigen::Index i = 0; i < fit.flat_direction.size(); ++i)
    if (std::abs(fit.flat_direction[i]) > 0.1)
      os << ' ' << fit.names[static_cast<std::size_t>(i)] << '=' << fit.flat_direction[i];
  return os.str();
}

}  // namespace wgphase
