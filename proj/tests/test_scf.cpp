#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include "dlvmc/basis.hpp"
#include "dlvmc/errors.hpp"
#include "dlvmc/integrals.hpp"
#include "dlvmc/scf.hpp"
#include "helpers.hpp"

using namespace dlvmc;
using namespace dlvmc::testing;

namespace {

// value of a contracted s AO and its analytic Laplacian (quadrature oracle)
double ao_s_value(const BasisFunction& f, double x, double y, double z) {
  const double r2 = (Eigen::Vector3d(x, y, z) - f.center).squaredNorm();
  double v = 0.0;
  for (std::size_t i = 0; i < f.exponents.size(); ++i)
    v += f.coeffs[i] * std::exp(-f.exponents[i] * r2);
  return v;
}


// independent s-only electron repulsion integral (closed form per primitive)
double eri_ssss(const BasisFunction& fa, const BasisFunction& fb, const BasisFunction& fc,
                const BasisFunction& fd) {
  constexpr double pi = 3.14159265358979323846;
  double total = 0.0;
  for (std::size_t i = 0; i < fa.exponents.size(); ++i)
    for (std::size_t j = 0; j < fb.exponents.size(); ++j)
      for (std::size_t k = 0; k < fc.exponents.size(); ++k)
        for (std::size_t l = 0; l < fd.exponents.size(); ++l) {
          const double a = fa.exponents[i], b = fb.exponents[j];
          const double c = fc.exponents[k], d = fd.exponents[l];
          const double p = a + b, q = c + d;
          const Eigen::Vector3d pp = (a * fa.center + b * fb.center) / p;
          const Eigen::Vector3d qq = (c * fc.center + d * fd.center) / q;
          const double alpha = p * q / (p + q);
          const double kab = std::exp(-a * b / p * (fa.center - fb.center).squaredNorm());
          const double kcd = std::exp(-c * d / q * (fc.center - fd.center).squaredNorm());
          total += fa.coeffs[i] * fb.coeffs[j] * fc.coeffs[k] * fd.coeffs[l] * 2.0 *
                   std::pow(pi, 2.5) / (p * q * std::sqrt(p + q)) * kab * kcd *
                   boys_f0(alpha * (pp - qq).squaredNorm());
        }
  return total;
}

}  // namespace

TEST_SUITE("scf") {

TEST_CASE("boys f0 basics") {
  CHECK(boys_f0(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  // erf(sqrt(30)) = 1 to double precision: closed-form asymptote applies
  const double t = 30.0;
  CHECK(boys_f0(t) ==
        doctest::Approx(0.5 * std::sqrt(3.14159265358979323846 / t)).epsilon(1e-10));
  CHECK_THROWS_AS(boys_f0(-1e-9), NumericError);
}

TEST_CASE("boys f0 against quadrature at t=1") {
  // F0(t) = int_0^1 exp(-t u^2) du
  const Quad1d q = composite_gl(0.0, 1.0, 20, 8);
  double ref = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) ref += q.w[i] * std::exp(-1.0 * q.x[i] * q.x[i]);
  CHECK(boys_f0(1.0) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("boys sequence consistent across branches") {
  // downward-series and upward-erf branches must agree near the switchover
  for (double t : {29.9, 30.1}) {
    double f[5];
    boys_sequence(4, t, f);
    CHECK(f[0] == doctest::Approx(boys_f0(t)).epsilon(1e-12));
    // recurrence residual: F_{m+1} = ((2m+1) F_m - e^-t) / (2t)
    for (int m = 0; m < 4; ++m)
      CHECK(f[m + 1] == doctest::Approx(((2 * m + 1) * f[m] - std::exp(-t)) / (2 * t))
                            .epsilon(1e-9));
  }
}

TEST_CASE("normalized self overlap") {
  const Molecule mol = h2();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  const IntegralTables tab = compute_integrals(mol, basis);
  for (int i = 0; i < tab.n_ao; ++i) CHECK(tab.s(i, i) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gaussian product theorem overlap") {
  // two normalized unit-exponent s primitives 1.4 bohr apart
  BasisFunction a, b;
  a.center = Eigen::Vector3d(0, 0, 0);
  b.center = Eigen::Vector3d(0, 0, 1.4);
  const double norm = std::pow(2.0 / 3.14159265358979323846, 0.75);
  a.exponents = {1.0};
  a.coeffs = {norm};
  b.exponents = {1.0};
  b.coeffs = {norm};
  BasisSet bs;
  bs.functions = {a, b};
  Molecule mol = h2();
  const IntegralTables tab = compute_integrals(mol, bs);
  // K = exp(-mu |AB|^2), mu = ab/(a+b) = 1/2, |AB|^2 = 1.96
  CHECK(tab.s(0, 1) == doctest::Approx(std::exp(-0.98)).epsilon(1e-12));
}

namespace {

// 1D quadrature of (x - bx)^m exp(-a (x-ax)^2) exp(-b (x-bx)^2), m in {0, 2}
double pair_moment_1d(double a, double ax, double b, double bx, int m) {
  const double lo = std::min(ax, bx) - 16.0, hi = std::max(ax, bx) + 16.0;
  const Quad1d q = composite_gl(lo, hi, 320, 8);
  double total = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    const double x = q.x[i];
    double f = std::exp(-a * (x - ax) * (x - ax) - b * (x - bx) * (x - bx));
    if (m == 2) f *= (x - bx) * (x - bx);
    total += q.w[i] * f;
  }
  return total;
}

}  // namespace

TEST_CASE("h2 sto-6g one-electron integrals against quadrature") {
  const Molecule mol = h2();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  const IntegralTables tab = compute_integrals(mol, basis);

  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      const auto& fa = basis.functions[i];
      const auto& fb = basis.functions[j];
      // overlap and kinetic via per-primitive separable 1D quadratures;
      // the laplacian of an s Gaussian is applied analytically
      double s_ref = 0.0, t_ref = 0.0;
      for (std::size_t pi = 0; pi < fa.exponents.size(); ++pi)
        for (std::size_t pj = 0; pj < fb.exponents.size(); ++pj) {
          const double a = fa.exponents[pi], b = fb.exponents[pj];
          const double cc = fa.coeffs[pi] * fb.coeffs[pj];
          double i0[3], i2[3];
          for (int d = 0; d < 3; ++d) {
            i0[d] = pair_moment_1d(a, fa.center[d], b, fb.center[d], 0);
            i2[d] = pair_moment_1d(a, fa.center[d], b, fb.center[d], 2);
          }
          s_ref += cc * i0[0] * i0[1] * i0[2];
          // -1/2 del^2 e^{-b r^2} = (3b - 2b^2 r^2) e^{-b r^2}
          t_ref += cc * (3.0 * b * i0[0] * i0[1] * i0[2] -
                         2.0 * b * b *
                             (i2[0] * i0[1] * i0[2] + i0[0] * i2[1] * i0[2] +
                              i0[0] * i0[1] * i2[2]));
        }
      CHECK(tab.s(i, j) == doctest::Approx(s_ref).epsilon(1e-10));
      CHECK(tab.t(i, j) == doctest::Approx(t_ref).epsilon(1e-10));

      double v_ref = 0.0;
      for (const auto& nuc : mol.nuclei)
        v_ref -= nuc.charge * integrate_coulomb(
                                  [&](double x, double y, double z) {
                                    return ao_s_value(fa, x, y, z) * ao_s_value(fb, x, y, z);
                                  },
                                  nuc.position, 16.0, 60, 32, 64);
      CHECK(tab.v_ne(i, j) == doctest::Approx(v_ref).epsilon(1e-8));
    }
}

TEST_CASE("s-only eri against independent closed form") {
  const Molecule mol = h2();
  const BasisSet basis = build_basis(mol, BasisKind::Sto3g);
  const IntegralTables tab = compute_integrals(mol, basis);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          const double ref = eri_ssss(basis.functions[i], basis.functions[j],
                                      basis.functions[k], basis.functions[l]);
          CHECK(tab.eri_at(i, j, k, l) == doctest::Approx(ref).epsilon(1e-12));
        }
}

TEST_CASE("eri permutational symmetry on a p-bearing system") {
  const Molecule mol = water();
  const BasisSet basis = build_basis(mol, BasisKind::Sto3g);
  const IntegralTables tab = compute_integrals(mol, basis);
  const int n = tab.n_ao;
  // spot-check orbit equality on pseudo-random index quadruples
  for (std::uint64_t trial = 0; trial < 40; ++trial) {
    const int i = int(rng_word(7, RngStream::Misc, trial, 0, 0) % n);
    const int j = int(rng_word(7, RngStream::Misc, trial, 1, 0) % n);
    const int k = int(rng_word(7, RngStream::Misc, trial, 2, 0) % n);
    const int l = int(rng_word(7, RngStream::Misc, trial, 3, 0) % n);
    const double v = tab.eri_at(i, j, k, l);
    CHECK(tab.eri_at(j, i, k, l) == v);
    CHECK(tab.eri_at(i, j, l, k) == v);
    CHECK(tab.eri_at(k, l, i, j) == v);
  }
}

TEST_CASE("hydrogen atom scf reproduces the 1x1 eigenproblem") {
  const Molecule mol = hydrogen();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  REQUIRE(basis.n_ao() == 1);
  const IntegralTables tab = compute_integrals(mol, basis);
  const ScfResult scf = run_scf(tab, mol);
  REQUIRE(scf.converged);
  const double direct = (tab.t(0, 0) + tab.v_ne(0, 0)) / tab.s(0, 0);
  CHECK(scf.energy == doctest::Approx(direct).epsilon(1e-10));
  // 6-Gaussian fit of the exact ground state: close to -0.5 Ha
  CHECK(scf.energy == doctest::Approx(-0.4998).epsilon(2e-4));
}

TEST_CASE("h2 sto-3g total energy: oracle and textbook value") {
  const Molecule mol = h2(1.4);
  const BasisSet basis = build_basis(mol, BasisKind::Sto3g);
  const IntegralTables tab = compute_integrals(mol, basis);
  const ScfResult scf = run_scf(tab, mol);
  REQUIRE(scf.converged);
  const double oracle = oracle_rhf_energy(tab, mol);
  CHECK(scf.energy == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(std::abs(scf.energy - oracle) < 1e-6);
  CHECK(scf.energy == doctest::Approx(-1.1167).epsilon(5e-4));
}

TEST_CASE("helium scf respects the variational bound") {
  const Molecule mol = helium();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  const ScfResult scf = run_scf(compute_integrals(mol, basis), mol);
  REQUIRE(scf.converged);
  CHECK(scf.energy >= -2.903724);
  CHECK(scf.energy < -2.5);
}

TEST_CASE("density trace and monotone convergence across systems") {
  for (const Molecule& mol : {hydrogen(), helium(), lithium(), h2(), water(), n2()}) {
    const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
    const IntegralTables tab = compute_integrals(mol, basis);
    const ScfResult scf = run_scf(tab, mol);
    REQUIRE(scf.converged);
    const double tr = (scf.density * tab.s).trace();
    CHECK(tr == doctest::Approx(double(mol.n_el)).epsilon(1e-8));
    for (std::size_t i = 1; i < scf.energy_history.size(); ++i)
      CHECK(scf.energy_history[i] <= scf.energy_history[i - 1] + 1e-9);
  }
}

TEST_CASE("orbital evaluation") {
  const Molecule mol = lithium();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  const IntegralTables tab = compute_integrals(mol, basis);
  const ScfResult scf = run_scf(tab, mol);
  REQUIRE(scf.converged);

  SUBCASE("gaussian decay far from all nuclei") {
    Mat far(1, 3);
    far << 50.0, 0.0, 0.0;
    const OrbitalValues v = eval_orbitals(scf, basis, far);
    for (int k = 0; k < v.up.cols(); ++k) CHECK(std::abs(v.up(0, k)) < 1e-20);
  }

  SUBCASE("monte carlo orthonormality") {
    const int n_samples = 200000;
    const double sigma = 2.5;
    Mat pts(n_samples, 3);
    for (int s = 0; s < n_samples; ++s)
      for (int a = 0; a < 3; ++a)
        pts(s, a) = sigma * rng_gaussian(11, RngStream::Misc, std::uint64_t(s), a, 0);
    const OrbitalValues v = eval_orbitals(scf, basis, pts);
    const double norm_const =
        std::pow(2.0 * 3.14159265358979323846 * sigma * sigma, 1.5);
    Mat gram = Mat::Zero(scf.n_up, scf.n_up);
    for (int s = 0; s < n_samples; ++s) {
      const double q = std::exp(-pts.row(s).squaredNorm() / (2.0 * sigma * sigma)) / norm_const;
      gram += v.up.row(s).transpose() * v.up.row(s) / q;
    }
    gram /= double(n_samples);
    for (int i = 0; i < scf.n_up; ++i)
      for (int j = 0; j < scf.n_up; ++j)
        CHECK(gram(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(0.05));
  }
}

TEST_CASE("diatomic orbital parity") {
  // symmetric H2: occupied sigma_g orbital is even under the midplane mirror
  const Molecule mol = h2(1.4);
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  const ScfResult scf = run_scf(compute_integrals(mol, basis), mol);
  REQUIRE(scf.converged);
  Mat pts(2, 3);
  pts << 0.3, -0.2, 0.1, 0.3, -0.2, 1.3;  // mirror images about z = 0.7
  const OrbitalValues v = eval_orbitals(scf, basis, pts);
  CHECK(std::abs(std::abs(v.up(0, 0)) - std::abs(v.up(1, 0))) < 1e-8);
}

TEST_CASE("unsupported elements and angular momenta") {
  CHECK_THROWS_AS(atom_basis(26, BasisKind::Sto6g), UnsupportedBasisError);  // Fe: 3d occupied
  BasisFunction d;
  d.center = Eigen::Vector3d::Zero();
  d.lx = 2;
  d.exponents = {1.0};
  d.coeffs = {1.0};
  BasisSet bs;
  bs.functions = {d};
  CHECK_THROWS_AS(compute_integrals(hydrogen(), bs), UnsupportedBasisError);
}

TEST_CASE("integral dump writes a versioned table") {
  const Molecule mol = hydrogen();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  const IntegralTables tab = compute_integrals(mol, basis);
  const ScfResult scf = run_scf(tab, mol);
  const std::string path = "/tmp/dlvmc_test_integrals.txt";
  dump_integrals(tab, &scf, path);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == "dlvmc-integrals v1");
}

}  // TEST_SUITE
