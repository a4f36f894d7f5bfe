#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include "penning/error.hpp"

namespace penning {

template <class F>
concept SmoothObjective = requires(const F& f, const Eigen::VectorXd& x) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.gradient(x) } -> std::convertible_to<Eigen::VectorXd>;
  { f.hessian(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

struct MinimizerOptions {
  double grad_tol = 1e-10;       // infinity norm of the gradient
  double newton_switch = 1e-4;   // gradient norm below which Newton steps are tried
  int max_iterations = 20000;
  double max_step = 0.5;         // largest coordinate displacement per step
};

struct MinimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> value_trace;  // objective after every accepted step
};

namespace detail {

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;
  Eigen::VectorXd x;
};

template <SmoothObjective F>
double safe_value(const F& f, const Eigen::VectorXd& x) {
  try {
    const double v = f.value(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  } catch (const SingularConfigurationError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Backtracking with quadratic then cubic interpolation; Armijo sufficient decrease.
template <SmoothObjective F>
LineSearchResult backtrack(const F& f, const Eigen::VectorXd& x, double f0,
                           const Eigen::VectorXd& g, const Eigen::VectorXd& p) {
  constexpr double c1 = 1e-4;
  constexpr double min_step = 1e-14;
  const double slope = g.dot(p);
  LineSearchResult out;
  if (!(slope < 0.0)) return out;

  double lam = 1.0, lam_prev = 0.0, f_prev = 0.0;
  bool first = true;
  while (lam >= min_step) {
    Eigen::VectorXd xn = x + lam * p;
    const double fn = safe_value(f, xn);
    if (fn <= f0 + c1 * lam * slope) {
      out.ok = true;
      out.step = lam;
      out.value = fn;
      out.x = std::move(xn);
      return out;
    }
    double next;
    if (!std::isfinite(fn)) {
      next = 0.1 * lam;
    } else if (first) {
      next = -slope / (2.0 * (fn - f0 - slope));
      first = false;
    } else {
      const double r1 = fn - f0 - lam * slope;
      const double r2 = f_prev - f0 - lam_prev * slope;
      const double a = (r1 / (lam * lam) - r2 / (lam_prev * lam_prev)) / (lam - lam_prev);
      const double b = (-lam_prev * r1 / (lam * lam) + lam * r2 / (lam_prev * lam_prev)) / (lam - lam_prev);
      if (a == 0.0) {
        next = -slope / (2.0 * b);
      } else {
        const double disc = b * b - 3.0 * a * slope;
        if (disc < 0.0) next = 0.5 * lam;
        else if (b <= 0.0) next = (-b + std::sqrt(disc)) / (3.0 * a);
        else next = -slope / (b + std::sqrt(disc));
      }
      next = std::min(next, 0.5 * lam);
    }
    if (std::isfinite(fn)) {
      lam_prev = lam;
      f_prev = fn;
    }
    lam = std::max(next, 0.1 * lam);
  }
  return out;
}

}  // namespace detail

/// Quasi-Newton (BFGS, inverse-Hessian form) descent that switches to full
/// Newton steps once the gradient is small and the Hessian is positive definite.
template <SmoothObjective F>
MinimizerResult minimize(const F& f, Eigen::VectorXd x, const MinimizerOptions& opts = {}) {
  const Eigen::Index n = x.size();
  MinimizerResult res;
  double fx = f.value(x);
  Eigen::VectorXd g = f.gradient(x);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool fresh_h = true;
  // Energies within this slack of each other are indistinguishable in double precision.
  const auto slack = [](double v) { return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v)); };

  res.value_trace.push_back(fx);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    if (gnorm < opts.newton_switch) {
      const Eigen::MatrixXd hess = f.hessian(x);
      Eigen::LLT<Eigen::MatrixXd> llt(hess);
      if (llt.info() != Eigen::Success) {
        // Indefinite Hessian near a saddle: leave along the most negative curvature direction.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
        if (eig.eigenvalues()(0) < 0.0) {
          Eigen::VectorXd p = eig.eigenvectors().col(0);
          if (g.dot(p) > 0.0) p = -p;
          p *= 0.1 * opts.max_step / p.lpNorm<Eigen::Infinity>();
          // Pure negative curvature with vanishing slope: nudge with the gradient so Armijo applies.
          p -= g;
          auto ls = detail::backtrack(f, x, fx, g, p);
          if (ls.ok) {
            g = f.gradient(ls.x);
            x = std::move(ls.x);
            fx = ls.value;
            res.value_trace.push_back(fx);
            h_inv.setIdentity();
            fresh_h = true;
            continue;
          }
        }
      }
      if (llt.info() == Eigen::Success) {
        Eigen::VectorXd p = -llt.solve(g);
        const double pmax = p.lpNorm<Eigen::Infinity>();
        if (pmax > opts.max_step) p *= opts.max_step / pmax;
        // Near the minimum the energy change drops below roundoff, so the full
        // step is judged by the gradient it leaves behind.
        Eigen::VectorXd xn = x + p;
        double fn = detail::safe_value(f, xn);
        Eigen::VectorXd gn;
        if (fn <= fx + slack(fx)) gn = f.gradient(xn);
        if (gn.size() == 0 || !(gn.lpNorm<Eigen::Infinity>() < gnorm)) {
          auto ls = detail::backtrack(f, x, fx, g, p);
          if (!ls.ok || ls.step < 1e-3) break;
          xn = std::move(ls.x);
          fn = ls.value;
          gn = f.gradient(xn);
        }
        x = std::move(xn);
        fx = fn;
        g = std::move(gn);
        res.value_trace.push_back(fx);
        h_inv.setIdentity();
        fresh_h = true;
        continue;
      }
    }

    Eigen::VectorXd p = -h_inv * g;
    if (!(g.dot(p) < 0.0)) {
      h_inv.setIdentity();
      fresh_h = true;
      p = -g;
    }
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (pmax > opts.max_step) p *= opts.max_step / pmax;

    auto ls = detail::backtrack(f, x, fx, g, p);
    if (!ls.ok) {
      if (fresh_h) break;
      h_inv.setIdentity();
      fresh_h = true;
      continue;
    }
    Eigen::VectorXd gn = f.gradient(ls.x);
    const Eigen::VectorXd s = ls.x - x;
    const Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (fresh_h) {
        h_inv *= sy / y.squaredNorm();
        fresh_h = false;
      }
      const Eigen::VectorXd hy = h_inv * y;
      const double yhy = y.dot(hy);
      h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) - (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    x = std::move(ls.x);
    fx = ls.value;
    g = std::move(gn);
    res.value_trace.push_back(fx);
  }

  res.iterations = it;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  res.converged = res.grad_norm <= opts.grad_tol;
  res.value = fx;
  res.x = std::move(x);
  return res;
}

}  // namespace penning
