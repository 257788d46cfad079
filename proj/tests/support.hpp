// Shared fixed-seed generators for the property tests.
#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <random>

#include "tdnp/triplet_spin.hpp"

namespace testing_support {

inline constexpr std::uint64_t kSeed = 20241014;
inline constexpr int kCases = 1000;

struct Draw {
  std::mt19937_64 rng{kSeed};

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }

  std::array<double, 3> simplex() {
    std::exponential_distribution<double> e(1.0);
    std::array<double, 3> p{e(rng), e(rng), e(rng)};
    const double s = p[0] + p[1] + p[2];
    for (auto& v : p) v /= s;
    p[2] = 1.0 - p[0] - p[1];
    return p;
  }

  tdnp::triplet::TripletParameters triplet() {
    tdnp::triplet::TripletParameters t;
    t.d_mhz = uniform(-3000.0, 3000.0);
    t.e_mhz = uniform(-1.0, 1.0) * std::abs(t.d_mhz) / 3.0;
    t.zf_populations = simplex();
    return t;
  }

  tdnp::triplet::MagneticFieldSetting field() {
    return {uniform(0.0, 2.0), uniform(0.0, std::numbers::pi), uniform(0.0, 2.0 * std::numbers::pi)};
  }
};

}  // namespace testing_support
