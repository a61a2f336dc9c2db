#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rydsurf/error.hpp"

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with central
// finite-difference Jacobians, box bounds by projection and covariance from
// the pseudo-inverse of J^T W J.

namespace rydsurf {

/// y = model(params, x)
using ScalarModel = std::function<double(std::span<const double>, double)>;

struct Bounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return std::clamp(v, lo, hi); }
};

struct FitOptions {
  int max_iterations = 200;
  /// Relative chi2 decrease below which an accepted step ends the fit.
  double chi2_tol = 1e-12;
  /// Infinity norm of the scaled gradient below which the fit ends.
  double gradient_tol = 1e-12;
  double lambda_initial = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double lambda_max = 1e16;
  /// Relative finite-difference step.
  double fd_step = 6e-6;
};

struct FitProblem {
  ScalarModel model;
  std::vector<double> x;
  std::vector<double> y;
  /// Empty, or one positive entry per point. Empty means unit weights.
  std::vector<double> sigma;
  std::vector<double> initial;
  /// Empty, or one interval per parameter.
  std::vector<Bounds> bounds;
  /// Empty, or one flag per parameter; fixed parameters stay at their initial value.
  std::vector<bool> fixed;
  FitOptions options;
};

struct FitResult {
  Eigen::VectorXd params;
  /// Pseudo-inverse of J^T W J at the optimum (zero rows for fixed parameters).
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t n_data = 0;
  std::size_t n_free = 0;
  bool unit_weights = true;

  double dof() const { return static_cast<double>(n_data) - static_cast<double>(n_free); }
  double reduced_chi2() const { return dof() > 0 ? chi2 / dof() : 0.0; }
};

namespace detail {

inline double step_for(double p, double rel) { return rel * std::max(std::abs(p), 1.0); }

}  // namespace detail

/// d model(params, x_i) / d params_j by central differences; one-sided
/// second-order differences where a bound blocks the central stencil.
inline Eigen::MatrixXd finite_difference_jacobian(const ScalarModel& model, std::span<const double> params,
                                                  std::span<const double> x, std::span<const Bounds> bounds = {},
                                                  double rel_step = 6e-6, const std::vector<bool>& skip = {}) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(params.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, m);
  std::vector<double> p(params.begin(), params.end());
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (!skip.empty() && skip[ju]) continue;
    const double p0 = params[ju];
    const double h = detail::step_for(p0, rel_step);
    const Bounds b = bounds.empty() ? Bounds{} : bounds[ju];
    auto eval = [&](double v, Eigen::Index i) {
      p[ju] = v;
      const double r = model(p, x[static_cast<std::size_t>(i)]);
      p[ju] = p0;
      return r;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
      if (b.contains(p0 - h) && b.contains(p0 + h)) {
        jac(i, j) = (eval(p0 + h, i) - eval(p0 - h, i)) / (2.0 * h);
      } else if (b.contains(p0 + 2.0 * h)) {
        jac(i, j) = (-3.0 * eval(p0, i) + 4.0 * eval(p0 + h, i) - eval(p0 + 2.0 * h, i)) / (2.0 * h);
      } else {
        jac(i, j) = (3.0 * eval(p0, i) - 4.0 * eval(p0 - h, i) + eval(p0 - 2.0 * h, i)) / (2.0 * h);
      }
    }
  }
  return jac;
}

namespace detail {

struct Weighted {
  Eigen::VectorXd residual;  // (y - f) / sigma
  double chi2 = 0.0;
};

inline Weighted weighted_residuals(const FitProblem& pr, std::span<const double> p) {
  Weighted w;
  w.residual.resize(static_cast<Eigen::Index>(pr.x.size()));
  for (std::size_t i = 0; i < pr.x.size(); ++i) {
    const double s = pr.sigma.empty() ? 1.0 : pr.sigma[i];
    const double r = (pr.y[i] - pr.model(p, pr.x[i])) / s;
    w.residual(static_cast<Eigen::Index>(i)) = r;
  }
  w.chi2 = w.residual.squaredNorm();
  if (!std::isfinite(w.chi2)) w.chi2 = std::numeric_limits<double>::infinity();
  return w;
}

inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cut = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-14;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cut) inv(i) = 1.0 / ev(i);
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline void check_problem(const FitProblem& pr) {
  if (!pr.model) throw FitError("fit problem has no model");
  if (pr.x.size() != pr.y.size()) throw FitError("fit problem: x and y differ in length");
  if (!pr.sigma.empty() && pr.sigma.size() != pr.x.size()) throw FitError("fit problem: sigma length mismatch");
  for (double s : pr.sigma) {
    if (!(s > 0.0)) throw FitError("fit problem: sigma must be positive");
  }
  if (!pr.bounds.empty() && pr.bounds.size() != pr.initial.size()) throw FitError("fit problem: bounds length mismatch");
  if (!pr.fixed.empty() && pr.fixed.size() != pr.initial.size()) throw FitError("fit problem: fixed-mask length mismatch");
  std::size_t n_free = 0;
  for (std::size_t j = 0; j < pr.initial.size(); ++j) {
    if (pr.fixed.empty() || !pr.fixed[j]) ++n_free;
    if (!pr.bounds.empty() && !pr.bounds[j].contains(pr.initial[j])) throw FitError("fit problem: initial value outside bounds");
  }
  if (pr.initial.empty() || n_free == 0) throw FitError("fit problem has no free parameters");
  if (pr.x.size() < n_free) throw FitError("fit problem: fewer data points than free parameters");
}

}  // namespace detail

inline FitResult lm_fit(const FitProblem& pr) {
  detail::check_problem(pr);
  const auto m = static_cast<Eigen::Index>(pr.initial.size());
  const auto& opt = pr.options;
  std::vector<bool> fixed = pr.fixed.empty() ? std::vector<bool>(pr.initial.size(), false) : pr.fixed;
  std::vector<Bounds> bounds = pr.bounds.empty() ? std::vector<Bounds>(pr.initial.size()) : pr.bounds;
  std::vector<double> p = pr.initial;

  FitResult out;
  out.n_data = pr.x.size();
  out.n_free = static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), false));
  out.unit_weights = pr.sigma.empty();

  auto weights = [&](Eigen::Index i) { return pr.sigma.empty() ? 1.0 : pr.sigma[static_cast<std::size_t>(i)]; };
  auto scaled_jacobian = [&](const std::vector<double>& at) {
    Eigen::MatrixXd j = finite_difference_jacobian(pr.model, at, pr.x, bounds, opt.fd_step, fixed);
    for (Eigen::Index i = 0; i < j.rows(); ++i) j.row(i) /= weights(i);
    return j;
  };

  auto current = detail::weighted_residuals(pr, p);
  if (!std::isfinite(current.chi2)) throw FitError("model is not finite at the initial parameters");
  double lambda = opt.lambda_initial;
  Eigen::MatrixXd jac = scaled_jacobian(p);

  for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * current.residual;  // -1/2 d chi2 / dp
    double gnorm = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (fixed[static_cast<std::size_t>(j)]) continue;
      gnorm = std::max(gnorm, std::abs(grad(j)) * std::max(std::abs(p[static_cast<std::size_t>(j)]), 1.0));
    }
    if (gnorm <= opt.gradient_tol * std::max(current.chi2, 1e-300) || current.chi2 < 1e-28 * out.n_data) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (fixed[static_cast<std::size_t>(j)]) {
          a.row(j).setZero();
          a.col(j).setZero();
          a(j, j) = 1.0;
        } else {
          a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
        }
      }
      Eigen::VectorXd rhs = grad;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (fixed[static_cast<std::size_t>(j)]) rhs(j) = 0.0;
      }
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      Eigen::VectorXd step;
      if (ldlt.info() == Eigen::Success) step = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        lambda *= opt.lambda_up;  // singular normal matrix: damp harder
        if (lambda > opt.lambda_max) break;
        continue;
      }
      std::vector<double> trial = p;
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (!fixed[ju]) trial[ju] = bounds[ju].clamp(p[ju] + step(j));
      }
      const auto next = detail::weighted_residuals(pr, trial);
      if (next.chi2 <= current.chi2) {
        const double decrease = current.chi2 - next.chi2;
        const bool moved = trial != p;
        p = std::move(trial);
        current = next;
        lambda = std::max(lambda * opt.lambda_down, 1e-12);
        accepted = true;
        if (!moved || decrease <= opt.chi2_tol * current.chi2) {
          out.converged = true;
        }
      } else {
        lambda *= opt.lambda_up;
        if (lambda > opt.lambda_max) break;
      }
    }
    if (!accepted) {
      // No downhill step at any damping: a minimum to numerical precision
      // when the gradient is negligible, otherwise a stall.
      out.converged = gnorm <= 1e-6 * std::max(current.chi2, 1e-300) || current.chi2 < 1e-20 * out.n_data;
      break;
    }
    if (out.converged) {
      ++out.iterations;
      break;
    }
    jac = scaled_jacobian(p);
  }

  out.params = Eigen::Map<const Eigen::VectorXd>(p.data(), m);
  out.chi2 = current.chi2;
  const Eigen::MatrixXd final_jac = scaled_jacobian(p);
  Eigen::MatrixXd jtj = final_jac.transpose() * final_jac;
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!fixed[static_cast<std::size_t>(j)]) free.push_back(j);
  }
  const auto nf = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd reduced(nf, nf);
  for (Eigen::Index a = 0; a < nf; ++a)
    for (Eigen::Index b = 0; b < nf; ++b) reduced(a, b) = jtj(free[a], free[b]);
  const Eigen::MatrixXd cov_free = detail::pseudo_inverse(reduced);
  out.covariance = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index a = 0; a < nf; ++a)
    for (Eigen::Index b = 0; b < nf; ++b) out.covariance(free[a], free[b]) = cov_free(a, b);
  return out;
}

/// Standard error of parameter i; scaled by sqrt(reduced chi2) for unit weights.
inline double profile_uncertainty(const FitResult& r, std::size_t i) {
  const auto k = static_cast<Eigen::Index>(i);
  if (k >= r.covariance.rows()) throw FitError("parameter index out of range");
  double var = std::max(r.covariance(k, k), 0.0);
  if (r.unit_weights) var *= r.reduced_chi2();
  return std::sqrt(var);
}

inline std::vector<double> profile_uncertainties(const FitResult& r) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) out.push_back(profile_uncertainty(r, static_cast<std::size_t>(i)));
  return out;
}

}  // namespace rydsurf
