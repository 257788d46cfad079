// least_squares.hpp - damped Gauss-Newton for small fixed-size separable models.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include <Eigen/Dense>

namespace tdnp::lsq {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

struct Options {
  int max_iterations = 200;
  double step_tolerance = 1e-10;     // |D dx| / |D x|, D = sqrt(diag J^T J)
  double gradient_tolerance = 1e-8;  // |J^T r| / (|J|_F |y|)
  double reduction_tolerance = 1e-14;  // predicted SSR drop of a full step, relative
  double initial_damping = 1e-3;
  int polish_iterations = 8;
};

template <int N>
struct Outcome {
  Vec<N> x;
  Mat<N> jtj;
  double ssr = 0.0;
  double scaled_gradient = 0.0;
  int iterations = 0;
  bool step_converged = false;
  bool gradient_small = false;
};

/// `model(t, x, grad)` returns f(t; x) and writes df/dx into `grad`.
template <int N, class Model>
double residuals(const Model& model, std::span<const double> t, std::span<const double> y,
                 const Vec<N>& x, Mat<N>* jtj = nullptr, Vec<N>* jtr = nullptr,
                 double* jac_frobenius = nullptr) {
  double ssr = 0.0;
  if (jtj) jtj->setZero();
  if (jtr) jtr->setZero();
  double jf = 0.0;
  Vec<N> g;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - model(t[i], x, g);
    ssr += r * r;
    if (jtj) *jtj += g * g.transpose();
    if (jtr) *jtr += g * r;
    jf += g.squaredNorm();
  }
  if (jac_frobenius) *jac_frobenius = std::sqrt(jf);
  return ssr;
}

/// Newton step on 1/2 SSR: H = J^T J - sum r_i d2f_i, with the model's second
/// derivatives taken by central differences of its analytic gradient.
template <int N, class Model>
Vec<N> newton_step(const Model& model, std::span<const double> t, std::span<const double> y,
                   const Vec<N>& x, const Mat<N>& jtj, const Vec<N>& jtr) {
  Mat<N> h = jtj;
  Vec<N> gp, gm;
  for (int j = 0; j < N; ++j) {
    const double dh = 1e-5 * std::max(std::abs(x[j]), 1e-8);
    Vec<N> xp = x, xm = x;
    xp[j] += dh;
    xm[j] -= dh;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = y[i] - model(t[i], x, gp);
      model(t[i], xp, gp);
      model(t[i], xm, gm);
      h.col(j) -= r * (gp - gm) / (xp[j] - xm[j]);
    }
  }
  h = 0.5 * (h + h.transpose()).eval();
  Eigen::LDLT<Mat<N>> ldlt(h);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    return Vec<N>::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  return ldlt.solve(jtr);
}

/// Levenberg-Marquardt damping of the Gauss-Newton normal equations with the
/// diagonal scaling of J^T J, which keeps the iteration invariant under
/// rescaling of individual parameters.
template <int N, class Model>
Outcome<N> damped_gauss_newton(const Model& model, std::span<const double> t,
                               std::span<const double> y, Vec<N> x, const Options& opt = {}) {
  double y_norm = 0.0;
  for (double v : y) y_norm += v * v;
  y_norm = std::sqrt(y_norm);

  Outcome<N> out;
  Mat<N> jtj;
  Vec<N> jtr;
  double jf = 0.0;
  double ssr = residuals<N>(model, t, y, x, &jtj, &jtr, &jf);
  double lambda = opt.initial_damping;

  auto scaled_grad = [&](const Vec<N>& g, double jfro) {
    const double denom = jfro * y_norm;
    return denom > 0.0 ? g.norm() / denom : 0.0;
  };

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (ssr == 0.0) {
      out.step_converged = true;
      break;
    }
    Mat<N> damped = jtj;
    for (int k = 0; k < N; ++k) {
      const double d = jtj(k, k) > 0.0 ? jtj(k, k) : 1.0;
      damped(k, k) += lambda * d;
    }
    const Vec<N> dx = damped.ldlt().solve(jtr);
    if (!dx.allFinite()) break;

    const Vec<N> trial = x + dx;
    Mat<N> jtj_t;
    Vec<N> jtr_t;
    double jf_t = 0.0;
    const double ssr_t = residuals<N>(model, t, y, trial, &jtj_t, &jtr_t, &jf_t);

    if (std::isfinite(ssr_t) && ssr_t <= ssr) {
      x = trial;
      ssr = ssr_t;
      jtj = jtj_t;
      jtr = jtr_t;
      jf = jf_t;
      lambda = std::max(lambda / 10.0, 1e-14);
      // Judge convergence by the undamped step from the new point: a damped
      // step can be tiny merely because lambda is large.
      const Vec<N> gn = jtj.ldlt().solve(jtr);
      const Vec<N> d = jtj.diagonal().cwiseMax(0.0).cwiseSqrt();
      const double xn = d.cwiseProduct(x).norm();
      const double rel = xn > 0.0 ? d.cwiseProduct(gn).norm() / xn : gn.norm();
      // When rounding in J^T r limits the step, accept once a full step could
      // no longer lower the SSR measurably.
      const double predicted = gn.dot(jtr);
      const bool stalled = predicted <= opt.reduction_tolerance * ssr &&
                           scaled_grad(jtr, jf) < opt.gradient_tolerance;
      if (gn.allFinite() && (rel < opt.step_tolerance || stalled)) {
        out.step_converged = true;
        ++it;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e16) {
        // No descent direction left at working precision.
        out.step_converged = scaled_grad(jtr, jf) < opt.gradient_tolerance;
        break;
      }
    }
  }

  // Polish: once the SSR can no longer discriminate steps, Newton on the
  // stationarity condition J^T r = 0 still can. The full Hessian matters when
  // residuals are large relative to the curvature of the model. This also
  // settles LM runs that ran out of iterations crawling along a flat valley.
  {
    auto newton_converged = [&](const Vec<N>& step) {
      const Vec<N> d = jtj.diagonal().cwiseMax(0.0).cwiseSqrt();
      const double xn = d.cwiseProduct(x).norm();
      return step.allFinite() && (xn > 0.0 ? d.cwiseProduct(step).norm() / xn : step.norm()) <
                                     opt.step_tolerance;
    };
    for (int k = 0; k < opt.polish_iterations; ++k) {
      const Vec<N> step = newton_step<N>(model, t, y, x, jtj, jtr);
      if (!step.allFinite()) break;
      if (!out.step_converged && newton_converged(step)) out.step_converged = true;
      const Vec<N> trial = x + step;
      Mat<N> jtj_t;
      Vec<N> jtr_t;
      double jf_t = 0.0;
      const double ssr_t = residuals<N>(model, t, y, trial, &jtj_t, &jtr_t, &jf_t);
      if (!std::isfinite(ssr_t) || !(scaled_grad(jtr_t, jf_t) < scaled_grad(jtr, jf)) ||
          ssr_t > ssr * (1.0 + 1e-12)) {
        break;
      }
      x = trial;
      ssr = ssr_t;
      jtj = jtj_t;
      jtr = jtr_t;
      jf = jf_t;
    }
  }

  out.x = x;
  out.jtj = jtj;
  out.ssr = ssr;
  out.iterations = it;
  out.scaled_gradient = scaled_grad(jtr, jf);
  out.gradient_small = out.scaled_gradient < opt.gradient_tolerance;
  return out;
}

/// Log-spaced scan over a rate-like parameter; returns the scan value with
/// the lowest objective.
template <class Objective>
double log_scan(double lo, double hi, int points, const Objective& objective) {
  double best = lo;
  double best_val = std::numeric_limits<double>::infinity();
  const double step = std::log(hi / lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double v = lo * std::exp(step * i);
    const double f = objective(v);
    if (f < best_val) {
      best_val = f;
      best = v;
    }
  }
  return best;
}

}  // namespace tdnp::lsq
