// units.hpp - physical constants and time units shared by the toolkit.
#pragma once

#include <chrono>
#include <numbers>

namespace tdnp {

/// Kinetics time constants are carried in minutes; seconds convert implicitly.
using Minutes = std::chrono::duration<double, std::ratio<60>>;
using Seconds = std::chrono::duration<double>;
using Microseconds = std::chrono::duration<double, std::micro>;

namespace constants {

/// Free-electron gyromagnetic ratio, gamma_e / 2pi.
inline constexpr double kGammaElectronMHzPerTesla = 28024.9;
/// Proton gyromagnetic ratio, gamma_H / 2pi.
inline constexpr double kGammaProtonMHzPerTesla = 42.577;

inline constexpr double kPlanck = 6.62607015e-34;      // J s
inline constexpr double kBoltzmann = 1.380649e-23;     // J / K

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace constants
}  // namespace tdnp
