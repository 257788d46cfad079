// triplet_spin.hpp - photoexcited triplet (S = 1) spin model.
//
// All matrices are expressed in the zero-field basis {T_x, T_y, T_z} and in
// frequency units (MHz). In this basis the spin operators are
// (S_k)_ij = -i eps_kij, so S_x^2 = diag(0,1,1), S_y^2 = diag(1,0,1),
// S_z^2 = diag(1,1,0) and the zero-field splitting term is diagonal.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "tdnp/errors.hpp"
#include "tdnp/units.hpp"

namespace tdnp::triplet {

using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

/// Index of a zero-field sublevel in the {T_x, T_y, T_z} basis.
enum ZeroFieldState : int { kTx = 0, kTy = 1, kTz = 2 };

struct TripletParameters {
  double d_mhz = 0.0;
  double e_mhz = 0.0;
  // Occupations of T_x, T_y, T_z right after intersystem crossing.
  std::array<double, 3> zf_populations{1.0 / 3, 1.0 / 3, 1.0 / 3};
  // Isotropic g; gamma_e / 2pi.
  double gamma_e_mhz_per_tesla = constants::kGammaElectronMHzPerTesla;

  /// Pentacene in p-terphenyl, from the triplet EPR literature.
  static TripletParameters pentacene() {
    return TripletParameters{1395.57, -53.35, {0.76, 0.16, 0.08},
                             constants::kGammaElectronMHzPerTesla};
  }

  void validate() const {
    for (int k = 0; k < 3; ++k) {
      if (!(zf_populations[k] >= 0.0)) {
        throw ValidationError("triplet: zero-field population p_" + std::string(1, "xyz"[k]) +
                              " must be nonnegative");
      }
    }
    const double sum = zf_populations[0] + zf_populations[1] + zf_populations[2];
    if (std::abs(sum - 1.0) > 1e-12) {
      throw ValidationError("triplet: zero-field populations must sum to 1 (p_x + p_y + p_z = " +
                            std::to_string(sum) + ")");
    }
    if (!std::isfinite(d_mhz) || !std::isfinite(e_mhz)) {
      throw ValidationError("triplet: D and E must be finite");
    }
    if (std::abs(e_mhz) > std::abs(d_mhz) / 3.0 * (1.0 + 1e-12)) {
      throw ValidationError("triplet: |E| <= |D|/3 violated (D = " + std::to_string(d_mhz) +
                            " MHz, E = " + std::to_string(e_mhz) + " MHz)");
    }
    if (!(gamma_e_mhz_per_tesla > 0.0)) {
      throw ValidationError("triplet: gamma_e must be positive");
    }
  }
};

struct MagneticFieldSetting {
  double magnitude_tesla = 0.0;
  // Polar and azimuthal angle of B in the zero-field-splitting principal frame.
  double theta_rad = 0.0;
  double phi_rad = 0.0;

  Eigen::Vector3d direction() const {
    return {std::sin(theta_rad) * std::cos(phi_rad), std::sin(theta_rad) * std::sin(phi_rad),
            std::cos(theta_rad)};
  }

  void validate() const {
    if (!(magnitude_tesla >= 0.0) || !std::isfinite(magnitude_tesla)) {
      throw ValidationError("field: magnitude must be >= 0 T");
    }
    if (!(theta_rad >= 0.0 && theta_rad <= std::numbers::pi)) {
      throw ValidationError("field: theta must lie in [0, pi]");
    }
    if (!(phi_rad >= 0.0 && phi_rad < constants::kTwoPi)) {
      throw ValidationError("field: phi must lie in [0, 2 pi)");
    }
  }
};

struct SpinHamiltonian {
  Matrix3c matrix = Matrix3c::Zero();
};

/// Eigenvalues ascending; column i of `eigenvectors` belongs to eigenvalue i.
/// Each column is phased so its first nonzero component is real positive.
struct EigenSystem {
  std::array<double, 3> eigenvalues{};
  Matrix3c eigenvectors = Matrix3c::Identity();
};

struct FieldPopulations {
  std::array<double, 3> populations{};
};

/// S_x, S_y, S_z for S = 1 in the zero-field basis.
inline const std::array<Matrix3c, 3>& spin_operators() {
  static const std::array<Matrix3c, 3> ops = [] {
    using namespace std::complex_literals;
    std::array<Matrix3c, 3> s;
    for (int k = 0; k < 3; ++k) {
      s[k].setZero();
      const int i = (k + 1) % 3;
      const int j = (k + 2) % 3;
      s[k](i, j) = -1.0i;
      s[k](j, i) = 1.0i;
    }
    return s;
  }();
  return ops;
}

/// Zero-field energies of T_x, T_y, T_z.
inline std::array<double, 3> zero_field_energies(const TripletParameters& params) {
  return {params.d_mhz / 3.0 - params.e_mhz, params.d_mhz / 3.0 + params.e_mhz,
          -2.0 * params.d_mhz / 3.0};
}

/// H = D (S_z^2 - 2/3) + E (S_x^2 - S_y^2) + gamma_e B . S
inline SpinHamiltonian build_hamiltonian(const TripletParameters& params,
                                         const MagneticFieldSetting& field) {
  params.validate();
  field.validate();

  SpinHamiltonian h;
  const auto zf = zero_field_energies(params);
  for (int k = 0; k < 3; ++k) h.matrix(k, k) = zf[k];

  const Eigen::Vector3d b =
      params.gamma_e_mhz_per_tesla * field.magnitude_tesla * field.direction();
  const auto& s = spin_operators();
  for (int k = 0; k < 3; ++k) h.matrix += b[k] * s[k];
  return h;
}

inline bool is_hermitian(const Matrix3c& m, double tol = 1e-12) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline EigenSystem eigensystem(const SpinHamiltonian& h) {
  if (!is_hermitian(h.matrix)) {
    throw ValidationError("eigensystem: Hamiltonian is not Hermitian within 1e-12");
  }
  // Solve on the exactly symmetrized matrix so round-off asymmetry cannot leak in.
  const Matrix3c sym = 0.5 * (h.matrix + h.matrix.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix3c> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw ValidationError("eigensystem: eigen decomposition failed");
  }

  EigenSystem out;
  for (int i = 0; i < 3; ++i) out.eigenvalues[i] = solver.eigenvalues()[i];
  out.eigenvectors = solver.eigenvectors();

  for (int i = 0; i < 3; ++i) {
    auto col = out.eigenvectors.col(i);
    col.normalize();
    for (int k = 0; k < 3; ++k) {
      if (std::abs(col[k]) > 1e-10) {
        col *= std::conj(col[k]) / std::abs(col[k]);
        col[k] = std::abs(col[k]);
        break;
      }
    }
  }
  return out;
}

/// Sudden approximation: zero-field occupations project onto dressed states,
/// p_i = sum_k |<psi_i|T_k>|^2 p_k.
inline FieldPopulations project_populations(const EigenSystem& eig,
                                            const TripletParameters& params) {
  FieldPopulations out;
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    double p = 0.0;
    for (int k = 0; k < 3; ++k) p += std::norm(eig.eigenvectors(k, i)) * params.zf_populations[k];
    out.populations[i] = p;
    total += p;
  }
  if (total > 0.0) {
    for (auto& p : out.populations) p /= total;
  }
  return out;
}

/// P_e = sum_i p_i <psi_i| n.S |psi_i>, n the field direction.
inline double electron_polarization(const EigenSystem& eig, const FieldPopulations& pops,
                                    const MagneticFieldSetting& field) {
  const Eigen::Vector3d n = field.direction();
  const auto& s = spin_operators();
  const Matrix3c s_b = n[0] * s[0] + n[1] * s[1] + n[2] * s[2];
  double pe = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vector3c psi = eig.eigenvectors.col(i);
    pe += pops.populations[i] * (psi.adjoint() * s_b * psi)(0, 0).real();
  }
  return std::clamp(pe, -1.0, 1.0);
}

/// Population contrast (p_i - p_j) / (p_i + p_j) of the transition between two
/// dressed levels, the electron polarization seen by a microwave driving it.
/// Zero when both levels are empty.
inline double transition_polarization(const FieldPopulations& pops, int i, int j) {
  const double a = pops.populations.at(i);
  const double b = pops.populations.at(j);
  return a + b > 0.0 ? (a - b) / (a + b) : 0.0;
}

/// Pairwise level splittings |lambda_i - lambda_j| in MHz, ascending.
inline std::array<double, 3> transition_frequencies(const EigenSystem& eig) {
  const auto& l = eig.eigenvalues;
  std::array<double, 3> f{std::abs(l[1] - l[0]), std::abs(l[2] - l[0]), std::abs(l[2] - l[1])};
  std::sort(f.begin(), f.end());
  return f;
}

/// Convenience: full chain from parameters to P_e.
inline double electron_polarization(const TripletParameters& params,
                                    const MagneticFieldSetting& field) {
  const auto eig = eigensystem(build_hamiltonian(params, field));
  return electron_polarization(eig, project_populations(eig, params), field);
}

}  // namespace tdnp::triplet
