// analysis.hpp - fits of measured buildup / relaxation curves, relaxation
// decomposition and absolute polarization calibration.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdnp/errors.hpp"
#include "tdnp/kinetics.hpp"
#include "tdnp/least_squares.hpp"
#include "tdnp/units.hpp"

namespace tdnp::analysis {

using kinetics::BuildupCurve;
using kinetics::KineticsParams;

struct FitParameter {
  std::string name;
  double value = 0.0;
  double uncertainty = 0.0;  // one sigma; +inf when unidentifiable
  bool identifiable = true;
};

struct FitResult {
  std::string model;
  std::vector<FitParameter> parameters;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // RMS residual
  double scaled_gradient = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> notes;

  const FitParameter& parameter(std::string_view name) const {
    for (const auto& p : parameters) {
      if (p.name == name) return p;
    }
    throw ValidationError("fit result has no parameter '" + std::string(name) + "'");
  }
  double value(std::string_view name) const { return parameter(name).value; }
  double uncertainty(std::string_view name) const { return parameter(name).uncertainty; }
};

namespace detail {

struct CurveArrays {
  std::vector<double> t;
  std::vector<double> y;
  double t_min_positive = 0.0;
  double t_max = 0.0;
  double y_scale = 0.0;  // max |y| after normalization: 1, or 0 for an all-zero curve
  double unit = 1.0;     // original max |y|; y holds values / unit
};

inline CurveArrays unpack(const BuildupCurve& curve) {
  CurveArrays a;
  a.t.reserve(curve.size());
  a.y.reserve(curve.size());
  for (const auto& s : curve.samples) {
    a.t.push_back(s.time.count());
    a.y.push_back(s.value);
    if (s.time.count() > 0.0 && (a.t_min_positive == 0.0 || s.time.count() < a.t_min_positive)) {
      a.t_min_positive = s.time.count();
    }
    a.y_scale = std::max(a.y_scale, std::abs(s.value));
  }
  a.t_max = a.t.empty() ? 0.0 : a.t.back();
  // Fitting normalized values keeps the iteration path independent of signal units.
  if (a.y_scale > 0.0 && std::isfinite(a.y_scale)) {
    a.unit = a.y_scale;
    for (auto& v : a.y) v /= a.unit;
    a.y_scale = 1.0;
  }
  return a;
}

inline bool all_finite(const CurveArrays& a) {
  return std::all_of(a.y.begin(), a.y.end(), [](double v) { return std::isfinite(v); });
}

/// Rate range for initial scans: from 1/(100 t_max) to 100/t_min.
inline std::pair<double, double> rate_bounds(const CurveArrays& a) {
  const double lo = 1.0 / (100.0 * a.t_max);
  const double hi = 100.0 / (a.t_min_positive > 0.0 ? a.t_min_positive : a.t_max);
  return {lo, hi};
}

template <int N>
void fill_statistics(FitResult& r, const lsq::Outcome<N>& o, std::size_t n_samples) {
  r.residual_norm = std::sqrt(o.ssr / static_cast<double>(n_samples));
  r.scaled_gradient = o.scaled_gradient;
  r.iterations = o.iterations;
  const double dof = static_cast<double>(n_samples) - N;
  const double s2 = dof > 0 ? o.ssr / dof : 0.0;

  Eigen::FullPivLU<lsq::Mat<N>> lu(o.jtj);
  lu.setThreshold(1e-12);
  r.covariance = Eigen::MatrixXd::Constant(N, N, std::numeric_limits<double>::infinity());
  if (lu.isInvertible()) r.covariance = s2 * lu.inverse();
  for (int k = 0; k < N; ++k) {
    const double var = r.covariance(k, k);
    r.parameters[k].uncertainty = std::isfinite(var) ? std::sqrt(std::max(var, 0.0))
                                                     : std::numeric_limits<double>::infinity();
    if (!lu.isInvertible()) r.parameters[k].identifiable = false;
  }
}

/// Restores signal units on the parameters flagged in `signal` (and on the
/// covariance and RMS residual) after a fit on normalized values.
template <int N>
void restore_units(FitResult& r, double unit, const std::array<bool, N>& signal) {
  if (unit == 1.0) return;
  r.residual_norm *= unit;
  for (int i = 0; i < N; ++i) {
    if (!signal[i]) continue;
    r.parameters[i].value *= unit;
    r.parameters[i].uncertainty *= unit;
  }
  if (r.covariance.rows() != N) return;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) r.covariance(i, j) *= (signal[i] ? unit : 1.0) * (signal[j] ? unit : 1.0);
  }
}

}  // namespace detail

/// Fits P(t) = offset + (p0 - offset) exp(-t / t_const).
/// A curve without a resolvable decay comes back with converged = false.
inline FitResult fit_decay(const BuildupCurve& curve) {
  if (curve.size() < 4) throw ValidationError("fit_decay: needs at least 4 samples");
  curve.validate();
  const auto a = detail::unpack(curve);

  FitResult r;
  r.model = "decay";
  r.parameters = {{"p0"}, {"t_const"}, {"offset"}};
  if (!detail::all_finite(a)) {
    r.notes.push_back("non-finite sample values");
    return r;
  }

  // For fixed t_const the model is linear in (p0, offset).
  auto linear_solve = [&](double tau, double& p0, double& offset) {
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < a.t.size(); ++i) {
      const double e = std::exp(-a.t[i] / tau);
      const Eigen::Vector2d row(e, 1.0 - e);
      m += row * row.transpose();
      b += row * a.y[i];
    }
    const Eigen::Vector2d x = m.ldlt().solve(b);
    p0 = x[0];
    offset = x[1];
    double ssr = 0.0;
    for (std::size_t i = 0; i < a.t.size(); ++i) {
      const double e = std::exp(-a.t[i] / tau);
      const double d = a.y[i] - (offset + (p0 - offset) * e);
      ssr += d * d;
    }
    return ssr;
  };

  const auto [k_lo, k_hi] = detail::rate_bounds(a);
  const double k0 = lsq::log_scan(k_lo, k_hi, 241, [&](double k) {
    double p0, off;
    return linear_solve(1.0 / k, p0, off);
  });
  double p0 = 0.0, offset = 0.0;
  linear_solve(1.0 / k0, p0, offset);

  const double tiny = 1e-9 * std::max(a.y_scale, std::numeric_limits<double>::min());
  if (a.y_scale == 0.0 || std::abs(p0 - offset) <= tiny) {
    r.parameters[0].value = p0 * a.unit;
    r.parameters[1].value = 1.0 / k0;
    r.parameters[2].value = offset * a.unit;
    r.parameters[1].identifiable = false;
    r.parameters[1].uncertainty = std::numeric_limits<double>::infinity();
    r.notes.push_back("no decay resolved: time constant unidentifiable");
    return r;
  }

  auto model = [](double t, const lsq::Vec<3>& x, lsq::Vec<3>& g) {
    const double e = std::exp(-t / x[1]);
    g[0] = e;
    g[1] = (x[0] - x[2]) * e * t / (x[1] * x[1]);
    g[2] = 1.0 - e;
    return x[2] + (x[0] - x[2]) * e;
  };
  const auto o = lsq::damped_gauss_newton<3>(model, a.t, a.y, lsq::Vec<3>(p0, 1.0 / k0, offset));

  for (int k = 0; k < 3; ++k) r.parameters[k].value = o.x[k];
  detail::fill_statistics<3>(r, o, a.t.size());
  detail::restore_units<3>(r, a.unit, {true, false, true});
  r.converged = o.step_converged && o.gradient_small && o.x[1] > 0.0 &&
                r.parameters[1].identifiable;
  if (!r.converged) {
    if (!r.parameters[1].identifiable) r.notes.push_back("singular normal matrix");
    if (!o.step_converged) r.notes.push_back("iteration limit or stall before step tolerance");
    if (!o.gradient_small) r.notes.push_back("residual gradient above tolerance");
    if (!(o.x[1] > 0.0)) r.notes.push_back("nonpositive time constant");
  }
  return r;
}

/// Fits P(t) = amplitude (1 - exp(-rate t)). amplitude = P_e / (1 + T_D/T_R) and
/// rate = 1/T_D + 1/T_R; T_D and P_e need an independently measured T_R.
inline FitResult fit_buildup(const BuildupCurve& curve) {
  if (curve.size() < 4) throw ValidationError("fit_buildup: needs at least 4 samples");
  curve.validate();
  const auto a = detail::unpack(curve);

  FitResult r;
  r.model = "buildup";
  r.parameters = {{"amplitude"}, {"rate"}};
  r.notes.push_back(
      "identifiable combinations only: amplitude = P_e/(1+T_D/T_R), rate = 1/T_D + 1/T_R "
      "(per minute)");
  if (!detail::all_finite(a)) {
    r.notes.push_back("non-finite sample values");
    return r;
  }

  auto linear_solve = [&](double k, double& amp) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.t.size(); ++i) {
      const double g = -std::expm1(-k * a.t[i]);
      num += g * a.y[i];
      den += g * g;
    }
    amp = den > 0.0 ? num / den : 0.0;
    double ssr = 0.0;
    for (std::size_t i = 0; i < a.t.size(); ++i) {
      const double d = a.y[i] - amp * -std::expm1(-k * a.t[i]);
      ssr += d * d;
    }
    return ssr;
  };

  const auto [k_lo, k_hi] = detail::rate_bounds(a);
  const double k0 = lsq::log_scan(k_lo, k_hi, 241, [&](double k) {
    double amp;
    return linear_solve(k, amp);
  });
  double amp0 = 0.0;
  linear_solve(k0, amp0);

  if (a.y_scale == 0.0 || std::abs(amp0) <= 1e-12 * a.y_scale) {
    r.parameters[0].value = amp0 * a.unit;
    r.parameters[1].value = k0;
    r.parameters[1].identifiable = false;
    r.parameters[1].uncertainty = std::numeric_limits<double>::infinity();
    r.converged = true;
    r.notes.push_back("zero amplitude: rate unidentifiable");
    return r;
  }

  auto model = [](double t, const lsq::Vec<2>& x, lsq::Vec<2>& g) {
    const double e = std::exp(-x[1] * t);
    g[0] = 1.0 - e;
    g[1] = x[0] * t * e;
    return x[0] * (1.0 - e);
  };
  const auto o = lsq::damped_gauss_newton<2>(model, a.t, a.y, lsq::Vec<2>(amp0, k0));

  for (int k = 0; k < 2; ++k) r.parameters[k].value = o.x[k];
  detail::fill_statistics<2>(r, o, a.t.size());
  detail::restore_units<2>(r, a.unit, {true, false});
  r.converged = o.step_converged && o.gradient_small && o.x[1] > 0.0 &&
                r.parameters[1].identifiable;
  if (!r.converged) {
    if (!r.parameters[1].identifiable) r.notes.push_back("rate unidentifiable (singular normal matrix)");
    if (!o.step_converged) r.notes.push_back("iteration limit or stall before step tolerance");
    if (!o.gradient_small) r.notes.push_back("residual gradient above tolerance");
    if (!(o.x[1] > 0.0)) r.notes.push_back("nonpositive rate");
  }
  return r;
}

/// Splits a buildup fit into T_D and P_e given T_R:
/// 1/T_D = rate - 1/T_R, P_e = amplitude (1 + T_D/T_R).
inline KineticsParams disentangle_buildup(const FitResult& fit, Minutes tr) {
  if (!(tr.count() > 0.0)) throw ValidationError("disentangle_buildup: T_R must be > 0");
  const double rate = fit.value("rate");
  const double amplitude = fit.value("amplitude");
  const double relax = 1.0 / tr.count();
  if (!(rate > relax)) {
    throw InconsistencyError("disentangle_buildup: fitted rate " + std::to_string(rate) +
                             " /min must exceed 1/T_R = " + std::to_string(relax) +
                             " /min (T_R = " + std::to_string(tr.count()) + " min)");
  }
  KineticsParams p;
  p.td = Minutes{1.0 / (rate - relax)};
  p.tr = tr;
  p.pe = amplitude * (1.0 + p.td / tr);
  p.pth = 0.0;
  return p;
}

struct DisentangledUncertainty {
  Minutes td{0.0};
  double pe = 0.0;
};

/// First-order propagation of the fit covariance through disentangle_buildup
/// (T_R treated as exact).
inline DisentangledUncertainty disentangled_uncertainty(const FitResult& fit, Minutes tr) {
  const auto p = disentangle_buildup(fit, tr);
  const double td = p.td.count();
  const double amplitude = fit.value("amplitude");
  // d T_D / d rate = -T_D^2;  d P_e / d amplitude = 1 + T_D/T_R;  d P_e / d rate = -A T_D^2 / T_R
  const Eigen::Vector2d g_td(0.0, -td * td);
  const Eigen::Vector2d g_pe(1.0 + td / tr.count(), -amplitude * td * td / tr.count());
  const Eigen::Matrix2d& c = fit.covariance;
  DisentangledUncertainty u;
  u.td = Minutes{std::sqrt(std::max(0.0, g_td.dot(c * g_td)))};
  u.pe = std::sqrt(std::max(0.0, g_pe.dot(c * g_pe)));
  return u;
}

struct RelaxationDecomposition {
  Minutes t1{0.0};
  Minutes tr{0.0};
  Minutes te{0.0};

  /// 1 / (1/T_1 + 1/T_e)
  Minutes recomposed_tr() const {
    return Minutes{1.0 / (1.0 / t1.count() + 1.0 / te.count())};
  }
};

/// T_e = 1 / (1/T_R - 1/T_1). T_1 may be +inf (no lattice relaxation).
inline RelaxationDecomposition decompose_relaxation(Minutes t1, Minutes tr) {
  if (!(tr.count() > 0.0)) throw ValidationError("decompose_relaxation: T_R must be > 0");
  if (!(t1 > tr)) {
    throw InconsistencyError("decompose_relaxation: T_1 = " + std::to_string(t1.count()) +
                             " min must exceed T_R = " + std::to_string(tr.count()) +
                             " min; no positive paramagnetic relaxation time exists");
  }
  return {t1, tr, Minutes{1.0 / (1.0 / tr.count() - 1.0 / t1.count())}};
}

struct NmrCalibration {
  double enhanced_signal = 0.0;
  double reference_signal = 1.0;
  double reference_thermal_polarization = 0.0;
  double spin_count_ratio = 1.0;  // reference 1H count / sample 1H count
  double gain_ratio = 1.0;

  void validate() const {
    if (reference_signal == 0.0 || !std::isfinite(reference_signal)) {
      throw ValidationError("calibration: reference_signal must be nonzero");
    }
    if (!(spin_count_ratio > 0.0)) throw ValidationError("calibration: spin_count_ratio must be > 0");
    if (!(gain_ratio > 0.0)) throw ValidationError("calibration: gain_ratio must be > 0");
    if (!(reference_thermal_polarization > 0.0)) {
      throw ValidationError("calibration: reference_thermal_polarization must be > 0");
    }
    if (!std::isfinite(enhanced_signal)) throw ValidationError("calibration: enhanced_signal must be finite");
  }
};

struct CalibratedPolarization {
  double polarization = 0.0;
  bool exceeds_unity = false;  // |P| > 1: correction factors are likely wrong
};

/// P = (S_enh / S_ref) * spin_count_ratio * gain_ratio * P_ref. Sign passes through.
inline CalibratedPolarization calibrate_polarization(const NmrCalibration& cal) {
  cal.validate();
  CalibratedPolarization out;
  out.polarization = cal.enhanced_signal / cal.reference_signal * cal.spin_count_ratio *
                     cal.gain_ratio * cal.reference_thermal_polarization;
  out.exceeds_unity = std::abs(out.polarization) > 1.0;
  return out;
}

}  // namespace tdnp::analysis
