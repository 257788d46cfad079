// kinetics.hpp - phenomenological 1H buildup / relaxation model.
//
//   dP/dt = (P_e - P) / T_D - (P - P_th) / T_R
//
// Every time in this header is in minutes (tdnp::Minutes).
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdnp/errors.hpp"
#include "tdnp/units.hpp"

namespace tdnp::kinetics {

struct KineticsParams {
  double pe = 0.0;
  Minutes td{1.0};
  Minutes tr{1.0};
  double pth = 0.0;

  void validate() const {
    if (!(td.count() > 0.0)) throw ValidationError("kinetics: td_minutes must be > 0");
    if (!(tr.count() > 0.0)) throw ValidationError("kinetics: tr_minutes must be > 0");
    if (!(std::abs(pe) <= 1.0)) throw ValidationError("kinetics: |pe| must be <= 1");
    if (!(std::abs(pth) <= 1.0)) throw ValidationError("kinetics: |pth| must be <= 1");
  }

  /// Combined approach rate 1/T_D + 1/T_R, per minute.
  double total_rate() const { return 1.0 / td.count() + 1.0 / tr.count(); }
};

enum class ValueKind { polarization, raw_signal };

inline const char* to_string(ValueKind kind) {
  return kind == ValueKind::polarization ? "polarization" : "raw_signal";
}

struct Sample {
  Minutes time{0.0};
  double value = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Time-ordered samples. Construct through `make`, which enforces the ordering.
struct BuildupCurve {
  std::vector<Sample> samples;
  ValueKind value_kind = ValueKind::polarization;

  static BuildupCurve make(std::vector<Sample> samples,
                           ValueKind kind = ValueKind::polarization) {
    BuildupCurve c{std::move(samples), kind};
    c.validate();
    return c;
  }

  void validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!(samples[i].time.count() >= 0.0)) {
        throw ValidationError("curve: sample " + std::to_string(i) + " has negative time");
      }
      if (i > 0 && !(samples[i].time > samples[i - 1].time)) {
        throw ValidationError("curve: times must be strictly increasing (sample " +
                              std::to_string(i) + ")");
      }
    }
  }

  std::size_t size() const { return samples.size(); }

  friend bool operator==(const BuildupCurve&, const BuildupCurve&) = default;
};

/// P(t) = P_e / (1 + T_D/T_R) * (1 - exp(-t (1/T_D + 1/T_R))), P_th omitted.
inline double buildup_closed_form(const KineticsParams& params, Minutes t) {
  if (!(t.count() >= 0.0)) throw ValidationError("buildup_closed_form: t must be >= 0");
  const double amplitude = params.pe / (1.0 + params.td / params.tr);
  return amplitude * -std::expm1(-t.count() * params.total_rate());
}

inline double final_polarization(const KineticsParams& params) {
  return params.pe / (1.0 + params.td / params.tr);
}

/// Fixed point of the rate equation including the thermal term.
inline double steady_state_with_pth(const KineticsParams& params) {
  if (params.pth == 0.0) return final_polarization(params);
  const double kd = 1.0 / params.td.count();
  const double kr = 1.0 / params.tr.count();
  return (params.pe * kd + params.pth * kr) / (kd + kr);
}

inline double relaxation_decay(double p0, Minutes t_const, Minutes t, double pth = 0.0) {
  if (!(t_const.count() > 0.0)) {
    throw ValidationError("relaxation_decay: time constant must be > 0");
  }
  if (!(t.count() >= 0.0)) throw ValidationError("relaxation_decay: t must be >= 0");
  return pth + (p0 - pth) * std::exp(-t / t_const);
}

/// Thermal-equilibrium 1H polarization tanh(h nu_H / 2 k_B T). Field magnitude only.
inline double thermal_polarization(double field_tesla, double temperature_kelvin) {
  if (!(temperature_kelvin > 0.0)) {
    throw ValidationError("thermal_polarization: temperature must be > 0 K");
  }
  if (!(field_tesla >= 0.0)) {
    throw ValidationError("thermal_polarization: field magnitude must be >= 0 T");
  }
  const double nu_hz = constants::kGammaProtonMHzPerTesla * 1e6 * field_tesla;
  return std::tanh(constants::kPlanck * nu_hz /
                   (2.0 * constants::kBoltzmann * temperature_kelvin));
}

/// Integrates the rate equation on `t_grid` with classic RK4. The internal step
/// never exceeds min(T_D, T_R) / 1000. With `include_pth` false the thermal
/// term is dropped (P_th = 0). The initial value defaults to P_th (or 0).
inline BuildupCurve buildup_ode(const KineticsParams& params, std::span<const Minutes> t_grid,
                                bool include_pth, std::optional<double> initial = std::nullopt) {
  params.validate();
  if (t_grid.empty()) throw ValidationError("buildup_ode: empty time grid");
  if (t_grid.front().count() != 0.0) throw ValidationError("buildup_ode: grid must start at 0");

  const double kd = 1.0 / params.td.count();
  const double kr = 1.0 / params.tr.count();
  const double pth = include_pth ? params.pth : 0.0;
  const double max_step = std::min(params.td.count(), params.tr.count()) / 1000.0;
  auto rhs = [&](double p) { return (params.pe - p) * kd - (p - pth) * kr; };

  std::vector<Sample> out;
  out.reserve(t_grid.size());
  double p = initial.value_or(pth);
  out.push_back({t_grid.front(), p});
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double span = (t_grid[i] - t_grid[i - 1]).count();
    if (!(span > 0.0)) throw ValidationError("buildup_ode: grid must be strictly increasing");
    const auto steps = static_cast<long>(std::ceil(span / max_step));
    const double h = span / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
      const double k1 = rhs(p);
      const double k2 = rhs(p + 0.5 * h * k1);
      const double k3 = rhs(p + 0.5 * h * k2);
      const double k4 = rhs(p + h * k3);
      p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back({t_grid[i], p});
  }
  return BuildupCurve{std::move(out), ValueKind::polarization};
}

/// Evenly spaced grid 0, step, 2 step, ..., ending exactly at `duration`.
inline std::vector<Minutes> uniform_grid(Minutes duration, Minutes step) {
  if (!(duration.count() >= 0.0)) throw ValidationError("grid: duration must be >= 0");
  if (!(step.count() > 0.0)) throw ValidationError("grid: step must be > 0");
  std::vector<Minutes> grid{Minutes{0.0}};
  if (duration.count() == 0.0) return grid;
  const auto n = static_cast<long>(std::ceil(duration / step - 1e-9));
  for (long i = 1; i < n; ++i) grid.push_back(step * static_cast<double>(i));
  grid.push_back(duration);
  return grid;
}

}  // namespace tdnp::kinetics
