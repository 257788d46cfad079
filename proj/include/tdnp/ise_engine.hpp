// ise_engine.hpp - Integrated Solid Effect shot model.
//
// One shot = laser pulse, then a microwave pulse during which the field is
// swept linearly across `sweep_span`. The electron-side passage is treated as
// a Landau-Zener crossing; a single bulk gain constant converts the passage
// probability into the per-shot fractional transfer epsilon toward P_e.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tdnp/errors.hpp"
#include "tdnp/kinetics.hpp"
#include "tdnp/units.hpp"

namespace tdnp::ise {

struct IseSequenceParams {
  double microwave_frequency_ghz = 17.2;
  Microseconds microwave_width{20.0};
  Microseconds laser_width{1.0};
  // Microwave start, measured from the start of the laser pulse.
  Microseconds microwave_start{2.0};
  double laser_wavelength_nm = 545.0;
  double repetition_rate_hz = 1000.0;
  double sweep_span_mt = 3.0;
  double b1_amplitude_mt = 0.0;
  double static_field_tesla = 0.64;

  Seconds shot_period() const { return Seconds{1.0 / repetition_rate_hz}; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(std::string("sequence: ") + name + " must be positive");
      }
    };
    positive(microwave_frequency_ghz, "microwave_frequency_ghz");
    positive(microwave_width.count(), "microwave_width_us");
    positive(laser_width.count(), "laser_width_us");
    positive(microwave_start.count(), "microwave_start_us");
    positive(laser_wavelength_nm, "laser_wavelength_nm");
    positive(repetition_rate_hz, "repetition_rate_hz");
    positive(sweep_span_mt, "sweep_span_mt");
    positive(b1_amplitude_mt, "b1_amplitude_mt");
    positive(static_field_tesla, "static_field_tesla");
    if (microwave_width > shot_period()) {
      throw ValidationError("sequence: microwave_width_us exceeds the shot period 1/repetition_rate_hz");
    }
    if (!(laser_width < microwave_start)) {
      throw ValidationError("sequence: laser pulse must end before the microwave starts "
                            "(laser_width_us < microwave_start_us)");
    }
    if (microwave_start + microwave_width > shot_period()) {
      throw ValidationError("sequence: microwave window extends past the shot period");
    }
  }
};

struct ShotModel {
  double epsilon = 0.0;
  Seconds shot_period{1e-3};

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw ValidationError("shot: epsilon must lie in [0, 1]");
    }
    if (!(shot_period.count() > 0.0)) throw ValidationError("shot: period must be > 0");
  }
};

/// B1 (mT) at which gamma_e B1 equals the 1H Larmor frequency gamma_H B0.
inline double hartmann_hahn_b1(double static_field_tesla,
                               double gamma_e_mhz_per_tesla = constants::kGammaElectronMHzPerTesla) {
  if (!(static_field_tesla > 0.0)) {
    throw ValidationError("hartmann_hahn_b1: static field must be > 0 T");
  }
  return 1e3 * static_field_tesla * constants::kGammaProtonMHzPerTesla / gamma_e_mhz_per_tesla;
}

/// 1H Larmor frequency in MHz.
inline double proton_larmor(double static_field_tesla) {
  if (!(static_field_tesla > 0.0)) {
    throw ValidationError("proton_larmor: static field must be > 0 T");
  }
  return constants::kGammaProtonMHzPerTesla * static_field_tesla;
}

/// Adiabaticity exponent pi omega_1^2 / (2 |dDelta/dt|) of the linear sweep.
/// Returns +inf for a zero sweep rate.
inline double adiabaticity(const IseSequenceParams& params,
                           double gamma_e_mhz_per_tesla = constants::kGammaElectronMHzPerTesla) {
  const double gamma = constants::kTwoPi * gamma_e_mhz_per_tesla * 1e6;  // rad s^-1 T^-1
  const double omega1 = gamma * params.b1_amplitude_mt * 1e-3;
  const double sweep_rate =
      gamma * params.sweep_span_mt * 1e-3 / Seconds(params.microwave_width).count();
  if (sweep_rate == 0.0) return std::numeric_limits<double>::infinity();
  return std::numbers::pi * omega1 * omega1 / (2.0 * std::abs(sweep_rate));
}

/// Landau-Zener adiabatic passage probability 1 - exp(-pi omega_1^2 / 2|dDelta/dt|).
/// A zero sweep rate is the adiabatic limit and yields 1.
inline double sweep_transfer_probability(
    const IseSequenceParams& params,
    double gamma_e_mhz_per_tesla = constants::kGammaElectronMHzPerTesla) {
  const double x = adiabaticity(params, gamma_e_mhz_per_tesla);
  if (std::isinf(x)) return 1.0;
  return std::clamp(-std::expm1(-x), 0.0, 1.0);
}

struct EffectiveBuildupTime {
  Minutes td{std::numeric_limits<double>::infinity()};
  bool infinite = true;
};

/// T_D = shot_period / epsilon.
inline EffectiveBuildupTime effective_buildup_time(const ShotModel& shot) {
  shot.validate();
  if (shot.epsilon == 0.0) return {};
  return {Minutes(shot.shot_period) / shot.epsilon, false};
}

/// Bulk gain g such that epsilon = g * p_LZ reproduces the measured T_D.
inline double calibrate_shot_gain(const IseSequenceParams& params, Minutes td,
                                  double gamma_e_mhz_per_tesla = constants::kGammaElectronMHzPerTesla) {
  params.validate();
  if (!(td.count() > 0.0)) throw ValidationError("calibrate_shot_gain: T_D must be > 0");
  const double p = sweep_transfer_probability(params, gamma_e_mhz_per_tesla);
  if (p == 0.0) throw ValidationError("calibrate_shot_gain: sweep transfer probability is 0");
  return (params.shot_period() / Minutes(td)) / p;
}

inline ShotModel make_shot_model(const IseSequenceParams& params, double gain,
                                 double gamma_e_mhz_per_tesla = constants::kGammaElectronMHzPerTesla) {
  params.validate();
  const double eps = gain * sweep_transfer_probability(params, gamma_e_mhz_per_tesla);
  return ShotModel{std::clamp(eps, 0.0, 1.0), params.shot_period()};
}

/// One shot: p + eps (P_e - p) - (dt / T_R)(p - P_th), clamped to [-1, 1].
inline double shot_map(double p_now, const ShotModel& shot, double pe, Minutes tr, double pth) {
  const double relax = Minutes(shot.shot_period) / tr;
  const double next = p_now + shot.epsilon * (pe - p_now) - relax * (p_now - pth);
  return std::clamp(next, -1.0, 1.0);
}

/// Per-shot trace hook: (shot index, time, polarization after the shot).
using ShotTrace = std::function<void(long, Minutes, double)>;

/// Iterates shot_map and samples the polarization at each grid time (the state
/// after floor(t / period) shots, with round-off slack).
inline kinetics::BuildupCurve simulate_shots(const ShotModel& shot, double pe, Minutes tr,
                                             double pth, std::span<const Minutes> grid,
                                             double p0 = 0.0, const ShotTrace& trace = {}) {
  shot.validate();
  if (!(tr.count() > 0.0)) throw ValidationError("simulate_shots: T_R must be > 0");
  std::vector<kinetics::Sample> out;
  out.reserve(grid.size());
  double p = p0;
  long done = 0;
  const Minutes period(shot.shot_period);
  for (const Minutes t : grid) {
    const auto target = static_cast<long>(std::floor(t / period + 1e-9));
    for (; done < target; ++done) {
      p = shot_map(p, shot, pe, tr, pth);
      if (trace) trace(done + 1, period * static_cast<double>(done + 1), p);
    }
    out.push_back({t, p});
  }
  auto curve = kinetics::BuildupCurve{std::move(out), kinetics::ValueKind::polarization};
  curve.validate();
  return curve;
}

}  // namespace tdnp::ise
