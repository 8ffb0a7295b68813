#include <doctest.h>

#include "dlvmc/frames.hpp"
#include "helpers.hpp"

using namespace dlvmc;
using namespace dlvmc::testing;

namespace {

struct Prepared {
  Molecule mol;
  BasisSet basis;
  ScfResult scf;
};

Prepared prepare(const Molecule& mol, double tol = 1e-11) {
  Prepared p{mol, build_basis(mol, BasisKind::Sto6g), {}};
  ScfOptions opts;
  opts.tol_density = tol;
  opts.tol_energy = 1e-13;
  opts.max_iter = 500;
  p.scf = run_scf(compute_integrals(p.mol, p.basis), p.mol, opts);
  REQUIRE(p.scf.converged);
  return p;
}

Molecule rotated(const Molecule& mol, const Eigen::Matrix3d& q) {
  Molecule out = mol;
  for (auto& n : out.nuclei) n.position = q * n.position;
  return out;
}

}  // namespace

TEST_SUITE("frames") {

TEST_CASE("single atom gets the identity frame") {
  const auto p = prepare(lithium());
  const FrameSet fs = compute_frames(p.scf, p.basis, p.mol);
  CHECK(fs.u[0].isIdentity(1e-15));
}

TEST_CASE("closed-shell p block is twice the identity") {
  const auto p = prepare(atom(10, 5, 5));  // neon
  Eigen::Matrix3d block;
  REQUIRE(p_block(p.scf, p.basis, 0, &block));
  CHECK((block - 2.0 * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((block - block.transpose()).cwiseAbs().maxCoeff() == 0.0);  // exactly symmetric
}

TEST_CASE("n2 axes align with the bond") {
  const auto p = prepare(n2());
  const FrameSet fs = compute_frames(p.scf, p.basis, p.mol);
  for (int j = 0; j < 2; ++j) {
    CHECK(fs.degenerate[j]);
    // exactly one eigenvector lies along z; its sign points to the neighbor
    int axis = -1;
    for (int c = 0; c < 3; ++c)
      if (std::abs(fs.u[j](2, c)) > 0.999) axis = c;
    REQUIRE(axis >= 0);
    const double toward = j == 0 ? 1.0 : -1.0;
    CHECK(fs.u[j](2, axis) * toward > 0.999);
    CHECK(fs.u[j].determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("orthogonality and diagonalization invariants") {
  const auto p = prepare(water());
  const FrameSet fs = compute_frames(p.scf, p.basis, p.mol);
  for (int j = 0; j < p.mol.n_nuc(); ++j) {
    CHECK((fs.u[j].transpose() * fs.u[j] - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK(fs.u[j].determinant() == doctest::Approx(1.0).epsilon(1e-10));
  }
  // oxygen carries the p block; U^T D U diagonal in the non-degenerate case
  Eigen::Matrix3d block;
  REQUIRE(p_block(p.scf, p.basis, 0, &block));
  REQUIRE_FALSE(fs.degenerate[0]);
  const Eigen::Matrix3d diag = fs.u[0].transpose() * block * fs.u[0];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c) CHECK(std::abs(diag(r, c)) < 1e-10);
  // eigenvalues sorted descending
  CHECK(fs.eigenvalues[0][0] >= fs.eigenvalues[0][1]);
  CHECK(fs.eigenvalues[0][1] >= fs.eigenvalues[0][2]);
}

TEST_CASE("hydrogens adopt the frame of the nearest p-bearing nucleus") {
  const auto p = prepare(water());
  const FrameSet fs = compute_frames(p.scf, p.basis, p.mol);
  CHECK((fs.u[1] - fs.u[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fs.u[2] - fs.u[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hydrogen-only systems fall back to identity frames") {
  const auto p = prepare(h2());
  const FrameSet fs = compute_frames(p.scf, p.basis, p.mol);
  CHECK(fs.u[0].isIdentity(1e-15));
  CHECK(fs.u[1].isIdentity(1e-15));
}

TEST_CASE("covariance under global rotations (generic bent chain)") {
  const auto base = prepare(bent_chain());
  const FrameSet fs = compute_frames(base.scf, base.basis, base.mol);
  for (int j = 0; j < base.mol.n_nuc(); ++j) REQUIRE_FALSE(fs.degenerate[j]);
  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    const Eigen::Matrix3d q = random_rotation(2024, trial);
    const auto rot = prepare(rotated(base.mol, q));
    const FrameSet fs_rot = compute_frames(rot.scf, rot.basis, rot.mol);
    for (int j = 0; j < base.mol.n_nuc(); ++j)
      CHECK((fs_rot.u[j] - q * fs.u[j]).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("determinism") {
  const auto p = prepare(water());
  const FrameSet a = compute_frames(p.scf, p.basis, p.mol);
  const FrameSet b = compute_frames(p.scf, p.basis, p.mol);
  for (int j = 0; j < p.mol.n_nuc(); ++j)
    CHECK((a.u[j] - b.u[j]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-converged scf is rejected") {
  const Molecule mol = water();
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  ScfOptions opts;
  opts.max_iter = 1;
  const ScfResult scf = run_scf(compute_integrals(mol, basis), mol, opts);
  REQUIRE_FALSE(scf.converged);
  CHECK_THROWS_AS(compute_frames(scf, basis, mol), NumericError);
}

}  // TEST_SUITE
