#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles/spin_oracle.hpp"
#include "support.hpp"
#include "tdnp/triplet_spin.hpp"

namespace {

using namespace tdnp::triplet;
using testing_support::Draw;
using testing_support::kCases;

constexpr double kGamma = tdnp::constants::kGammaElectronMHzPerTesla;

TripletParameters zeeman_only() {
  TripletParameters p;
  p.d_mhz = 0.0;
  p.e_mhz = 0.0;
  return p;
}

double relative_frobenius(const Matrix3c& a, const Matrix3c& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Matrix3c reconstruct(const EigenSystem& eig) {
  Eigen::Vector3cd l(eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]);
  return eig.eigenvectors * l.asDiagonal() * eig.eigenvectors.adjoint();
}

TEST(BuildHamiltonian, ZeroFieldIsDiagonal) {
  const auto p = TripletParameters::pentacene();
  const auto h = build_hamiltonian(p, {0.0, 0.0, 0.0}).matrix;
  EXPECT_DOUBLE_EQ(h(kTx, kTx).real(), p.d_mhz / 3 - p.e_mhz);
  EXPECT_DOUBLE_EQ(h(kTy, kTy).real(), p.d_mhz / 3 + p.e_mhz);
  EXPECT_DOUBLE_EQ(h(kTz, kTz).real(), -2 * p.d_mhz / 3);
  EXPECT_EQ((h - Matrix3c(h.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildHamiltonian, ZeemanLimitEigenvalues) {
  const auto eig = eigensystem(build_hamiltonian(zeeman_only(), {0.64, 0.0, 0.0}));
  const double gb = kGamma * 0.64;
  EXPECT_NEAR(eig.eigenvalues[0], -gb, 1e-9);
  EXPECT_NEAR(eig.eigenvalues[1], 0.0, 1e-9);
  EXPECT_NEAR(eig.eigenvalues[2], gb, 1e-9);
}

TEST(BuildHamiltonian, MatchesLadderOperatorConstructionAtPaperField) {
  const auto p = TripletParameters::pentacene();
  const auto h = build_hamiltonian(p, {0.64, 0.0, 0.0}).matrix;
  const auto ref = oracle::hamiltonian(p.d_mhz, p.e_mhz, kGamma * 0.64, 0.0, 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(h(i, j).real(), ref(i, j).real(), 1e-9) << i << "," << j;
      EXPECT_NEAR(h(i, j).imag(), ref(i, j).imag(), 1e-9) << i << "," << j;
    }
  }
}

TEST(BuildHamiltonian, MatchesLadderOperatorConstructionRandomized) {
  Draw draw;
  for (int n = 0; n < kCases; ++n) {
    const auto p = draw.triplet();
    const auto f = draw.field();
    const auto h = build_hamiltonian(p, f).matrix;
    const auto ref =
        oracle::hamiltonian(p.d_mhz, p.e_mhz, kGamma * f.magnitude_tesla, f.theta_rad, f.phi_rad);
    ASSERT_LT((h - ref).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, ref.norm())) << n;
  }
}

TEST(BuildHamiltonian, HermitianAndTraceless) {
  Draw draw;
  for (int n = 0; n < kCases; ++n) {
    const auto h = build_hamiltonian(draw.triplet(), draw.field()).matrix;
    ASSERT_LE((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_LE(std::abs(h.trace()), 1e-9);
  }
}

TEST(BuildHamiltonian, RejectsInvalidParameters) {
  auto p = TripletParameters::pentacene();
  p.zf_populations = {0.5, 0.3, 0.1};
  try {
    build_hamiltonian(p, {0.64, 0.0, 0.0});
    FAIL() << "expected ValidationError";
  } catch (const tdnp::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sum to 1"), std::string::npos);
  }

  p = TripletParameters::pentacene();
  p.zf_populations = {1.1, -0.1, 0.0};
  EXPECT_THROW(build_hamiltonian(p, {0.64, 0.0, 0.0}), tdnp::ValidationError);

  p = TripletParameters::pentacene();
  p.e_mhz = p.d_mhz / 3.0 * 1.01;
  try {
    build_hamiltonian(p, {0.64, 0.0, 0.0});
    FAIL() << "expected ValidationError";
  } catch (const tdnp::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("|E| <= |D|/3"), std::string::npos);
  }

  p = TripletParameters::pentacene();
  EXPECT_THROW(build_hamiltonian(p, {-1.0, 0.0, 0.0}), tdnp::ValidationError);
  EXPECT_THROW(build_hamiltonian(p, {0.64, 4.0, 0.0}), tdnp::ValidationError);
  EXPECT_THROW(build_hamiltonian(p, {0.64, 0.0, 2.0 * std::numbers::pi}), tdnp::ValidationError);
}

TEST(Eigensystem, ZeroFieldSorted) {
  const auto p = TripletParameters::pentacene();
  const auto eig = eigensystem(build_hamiltonian(p, {0.0, 0.0, 0.0}));
  std::array<double, 3> expected{-2 * p.d_mhz / 3, p.d_mhz / 3 - p.e_mhz, p.d_mhz / 3 + p.e_mhz};
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(eig.eigenvalues[i], expected[i], 1e-12 * std::abs(expected[i]));
  }
}

TEST(Eigensystem, MatchesCharacteristicPolynomialRoots) {
  Draw draw;
  for (int n = 0; n < kCases; ++n) {
    Matrix3c a;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = {draw.normal(), draw.normal()};
    }
    SpinHamiltonian h{(a + a.adjoint()) * 100.0};
    const auto eig = eigensystem(h);
    const auto roots = oracle::characteristic_roots(h.matrix);
    for (int i = 0; i < 3; ++i) {
      ASSERT_NEAR(eig.eigenvalues[i], roots[i], 1e-9 * h.matrix.norm()) << n << " root " << i;
    }
  }
}

TEST(Eigensystem, RejectsNonHermitian) {
  SpinHamiltonian h;
  h.matrix(0, 1) = 1.0;
  EXPECT_THROW(eigensystem(h), tdnp::ValidationError);
}

TEST(Eigensystem, ZeemanEigenvectorsAreMStates) {
  for (const auto& [theta, phi] : {std::pair{0.0, 0.0}, std::pair{1.0, 2.0}, std::pair{2.5, 5.0}}) {
    MagneticFieldSetting f{0.64, theta, phi};
    const auto eig = eigensystem(build_hamiltonian(zeeman_only(), f));
    const Eigen::Vector3d n = f.direction();
    const auto s = oracle::spin_operators_zero_field_basis();
    const Matrix3c s_n = n[0] * s[0] + n[1] * s[1] + n[2] * s[2];
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3cd v = eig.eigenvectors.col(i);
      // eigenvector of n.S with m = -1, 0, +1
      EXPECT_LT((s_n * v - double(i - 1) * v).norm(), 1e-10) << "theta " << theta << " state " << i;
    }
  }
  // Along z the m = 0 state is T_z and m = +-1 live in the {T_x, T_y} plane.
  const auto eig = eigensystem(build_hamiltonian(zeeman_only(), {0.64, 0.0, 0.0}));
  const auto u = oracle::zero_field_basis_in_m_basis();  // rows: m = +1, 0, -1
  EXPECT_NEAR(std::abs(eig.eigenvectors(kTz, 1)), 1.0, 1e-12);
  const Eigen::Vector3cd m_minus = u.row(2).adjoint();
  const Eigen::Vector3cd m_plus = u.row(0).adjoint();
  EXPECT_NEAR(std::abs(m_minus.dot(eig.eigenvectors.col(0))), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(m_plus.dot(eig.eigenvectors.col(2))), 1.0, 1e-12);
}

TEST(Eigensystem, PhaseConventionFirstNonzeroRealPositive) {
  Draw draw;
  for (int n = 0; n < 200; ++n) {
    const auto eig = eigensystem(build_hamiltonian(draw.triplet(), draw.field()));
    for (int i = 0; i < 3; ++i) {
      const auto col = eig.eigenvectors.col(i);
      int k = 0;
      while (std::abs(col[k]) <= 1e-10) ++k;
      EXPECT_GT(col[k].real(), 0.0);
      EXPECT_EQ(col[k].imag(), 0.0);
    }
  }
}

TEST(Eigensystem, ReconstructionAndUnitarity) {
  Draw draw;
  double worst = 0.0;
  for (int n = 0; n < kCases; ++n) {
    const auto h = build_hamiltonian(draw.triplet(), draw.field());
    const auto eig = eigensystem(h);
    worst = std::max(worst, relative_frobenius(reconstruct(eig), h.matrix));
    ASSERT_LT((eig.eigenvectors.adjoint() * eig.eigenvectors - Matrix3c::Identity()).norm(), 1e-10);
    ASSERT_LT(std::abs(eig.eigenvalues[0] + eig.eigenvalues[1] + eig.eigenvalues[2]), 1e-9);
    ASSERT_LE(eig.eigenvalues[0], eig.eigenvalues[1]);
    ASSERT_LE(eig.eigenvalues[1], eig.eigenvalues[2]);
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(ProjectPopulations, ZeroFieldIsIdentity) {
  const auto p = TripletParameters::pentacene();
  const auto eig = eigensystem(build_hamiltonian(p, {0.0, 0.0, 0.0}));
  const auto pops = project_populations(eig, p);
  for (int i = 0; i < 3; ++i) {
    int k = 0;
    eig.eigenvectors.col(i).cwiseAbs().maxCoeff(&k);
    EXPECT_NEAR(pops.populations[i], p.zf_populations[k], 1e-15);
  }
}

TEST(ProjectPopulations, EqualPopulationsStayEqual) {
  Draw draw;
  auto p = TripletParameters::pentacene();
  p.zf_populations = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int n = 0; n < 100; ++n) {
    const auto pops = project_populations(eigensystem(build_hamiltonian(p, draw.field())), p);
    for (double v : pops.populations) EXPECT_NEAR(v, 1.0 / 3, 1e-12);
  }
}

TEST(ProjectPopulations, PentaceneMatchesOverlapTable) {
  const auto p = TripletParameters::pentacene();
  for (double theta : {0.0, 0.7, std::numbers::pi / 2}) {
    const auto eig = eigensystem(build_hamiltonian(p, {0.64, theta, 0.3}));
    const auto pops = project_populations(eig, p);
    for (int i = 0; i < 3; ++i) {
      double expect = 0.0;
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3cd tk = Eigen::Vector3cd::Unit(k);
        expect += std::norm(eig.eigenvectors.col(i).dot(tk)) * p.zf_populations[k];
      }
      EXPECT_NEAR(pops.populations[i], expect, 1e-14);
    }
  }
}

TEST(ProjectPopulations, ConservedAndNonnegative) {
  Draw draw;
  for (int n = 0; n < kCases; ++n) {
    const auto p = draw.triplet();
    const auto pops = project_populations(eigensystem(build_hamiltonian(p, draw.field())), p);
    ASSERT_NEAR(pops.populations[0] + pops.populations[1] + pops.populations[2], 1.0, 1e-10);
    for (double v : pops.populations) ASSERT_GE(v, 0.0);
  }
}

TEST(ElectronPolarization, EqualPopulationsGiveZero) {
  Draw draw;
  auto p = TripletParameters::pentacene();
  p.zf_populations = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int n = 0; n < 100; ++n) EXPECT_NEAR(electron_polarization(p, draw.field()), 0.0, 1e-12);
}

TEST(ElectronPolarization, LowestZeemanStateIsMinusOne) {
  MagneticFieldSetting f{0.64, 0.4, 1.1};
  const auto eig = eigensystem(build_hamiltonian(zeeman_only(), f));
  EXPECT_NEAR(electron_polarization(eig, FieldPopulations{{1.0, 0.0, 0.0}}, f), -1.0, 1e-12);
  EXPECT_NEAR(electron_polarization(eig, FieldPopulations{{0.0, 0.0, 1.0}}, f), 1.0, 1e-12);
}

TEST(ElectronPolarization, PentaceneMatchesBruteForceExpectation) {
  const auto p = TripletParameters::pentacene();
  const auto s = oracle::spin_operators_zero_field_basis();
  for (double theta : {0.0, 0.3, 1.2, std::numbers::pi / 2, 2.9}) {
    MagneticFieldSetting f{0.64, theta, 0.8};
    const auto eig = eigensystem(build_hamiltonian(p, f));
    const auto pops = project_populations(eig, p);
    const Eigen::Vector3d n = f.direction();
    const Matrix3c s_n = n[0] * s[0] + n[1] * s[1] + n[2] * s[2];
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3cd v = eig.eigenvectors.col(i);
      expect += pops.populations[i] * v.dot(s_n * v).real();
    }
    const double pe = electron_polarization(eig, pops, f);
    EXPECT_NEAR(pe, expect, 1e-12);
    EXPECT_LE(std::abs(pe), 1.0);
  }
}

TEST(ElectronPolarization, BoundedForRandomInputs) {
  Draw draw;
  for (int n = 0; n < kCases; ++n) {
    ASSERT_LE(std::abs(electron_polarization(draw.triplet(), draw.field())), 1.0);
  }
}

TEST(ElectronPolarization, ContinuousInOrientation) {
  const auto p = TripletParameters::pentacene();
  double prev = electron_polarization(p, {0.64, 0.0, 0.5});
  for (double theta = 1e-4; theta <= std::numbers::pi; theta += 1e-4) {
    const double cur = electron_polarization(p, {0.64, theta, 0.5});
    ASSERT_LT(std::abs(cur - prev), 1e-2) << theta;
    prev = cur;
  }
}

TEST(TransitionPolarization, PentaceneAlongXExceedsSeventyPercent) {
  // Field along the x axis: the m = 0 level inherits T_x (p_x = 0.76).
  const auto p = TripletParameters::pentacene();
  MagneticFieldSetting f{0.64, std::numbers::pi / 2, 0.0};
  const auto eig = eigensystem(build_hamiltonian(p, f));
  const auto pops = project_populations(eig, p);
  const double pol = transition_polarization(pops, 1, 0);
  EXPECT_GT(pol, 0.70);
  EXPECT_NEAR(pol, (0.76 - 0.12) / (0.76 + 0.12), 0.01);
  EXPECT_DOUBLE_EQ(transition_polarization(pops, 0, 1), -pol);
  EXPECT_EQ(transition_polarization(FieldPopulations{{0.0, 0.0, 1.0}}, 0, 1), 0.0);
}

TEST(TransitionFrequencies, ZeroFieldGaps) {
  const auto p = TripletParameters::pentacene();
  const auto f = transition_frequencies(eigensystem(build_hamiltonian(p, {0.0, 0.0, 0.0})));
  std::array<double, 3> expect{std::abs(p.d_mhz - p.e_mhz), std::abs(p.d_mhz + p.e_mhz),
                               std::abs(2 * p.e_mhz)};
  std::sort(expect.begin(), expect.end());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(f[i], expect[i], 1e-9);
}

TEST(TransitionFrequencies, ZeemanOnlyAtWorkingField) {
  const auto f = transition_frequencies(eigensystem(build_hamiltonian(zeeman_only(), {0.64, 0.0, 0.0})));
  EXPECT_NEAR(f[0], 17935.936, 1e-6);
  EXPECT_NEAR(f[1], 17935.936, 1e-6);
  EXPECT_NEAR(f[2], 35871.872, 1e-6);
}

TEST(TransitionFrequencies, Degenerate) {
  const auto f = transition_frequencies(eigensystem(build_hamiltonian(zeeman_only(), {0.0, 0.0, 0.0})));
  for (double v : f) EXPECT_EQ(v, 0.0);
}

}  // namespace
