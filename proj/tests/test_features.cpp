#include <doctest.h>

#include "dlvmc/features.hpp"
#include "helpers.hpp"

using namespace dlvmc;
using namespace dlvmc::testing;

TEST_SUITE("features") {

TEST_CASE("dimensions per mode") {
  const Molecule mol = water();
  const Mat pos = random_positions(mol, 3, 0);
  for (auto mode : {FeatureMode::LocalFrames, FeatureMode::RawDiffs,
                    FeatureMode::DistancesOnly}) {
    FeatureConfig cfg{mode};
    FrameSet frames = FrameSet::identity(mol.n_nuc());
    const FeatureBatch fb = build_features(mol, &frames, pos, cfg);
    CHECK(fb.h0.rows() == mol.n_el);
    CHECK(fb.h0.cols() == cfg.h0_dim(mol.n_nuc()));
    CHECK(fb.v0.cols() == cfg.v0_dim());
    CHECK(fb.g0.rows() == mol.n_el * mol.n_el);
    CHECK(fb.g0.cols() == 1);
    CHECK(fb.rho_norms.rows() == mol.n_el);
    CHECK(fb.rho_norms.cols() == mol.n_nuc());
  }
}

TEST_CASE("electron at a nucleus gives zero feature entries") {
  const Molecule mol = h2();
  Mat pos(2, 3);
  pos << 0.0, 0.0, 0.0, 0.3, 0.2, 0.9;  // first electron exactly on nucleus 0
  FeatureConfig cfg{FeatureMode::RawDiffs};
  const FeatureBatch fb = build_features(mol, nullptr, pos, cfg);
  CHECK(fb.rho_norms(0, 0) == 0.0);
  for (int c = 0; c < 4; ++c) CHECK(fb.v0(0, c) == 0.0);  // (|rho|, rho) of pair (0,0)
  // zero diagonal of g0, symmetric distances
  CHECK(fb.g0(0 * 2 + 0, 0) == 0.0);
  CHECK(fb.g0(1 * 2 + 1, 0) == 0.0);
  CHECK(fb.g0(0 * 2 + 1, 0) == fb.g0(1 * 2 + 0, 0));
}

TEST_CASE("identity frames make local and raw modes identical bitwise") {
  const Molecule mol = lithium();
  const Mat pos = random_positions(mol, 5, 1);
  FrameSet frames = FrameSet::identity(mol.n_nuc());
  const FeatureBatch a = build_features(mol, &frames, pos, {FeatureMode::LocalFrames});
  const FeatureBatch b = build_features(mol, nullptr, pos, {FeatureMode::RawDiffs});
  CHECK(a.h0 == b.h0);
  CHECK(a.v0 == b.v0);
  CHECK(a.g0 == b.g0);
}

TEST_CASE("norms are preserved by the frame rotation") {
  const Molecule mol = water();
  const Mat pos = random_positions(mol, 8, 2);
  FrameSet frames = FrameSet::identity(mol.n_nuc());
  for (int j = 0; j < mol.n_nuc(); ++j) frames.u[j] = random_rotation(31, j);
  FeatureConfig cfg{FeatureMode::LocalFrames};
  const FeatureBatch fb = build_features(mol, &frames, pos, cfg);
  for (int e = 0; e < mol.n_el; ++e)
    for (int nI = 0; nI < mol.n_nuc(); ++nI) {
      const double norm_part = fb.v0(e * mol.n_nuc() + nI, 0);
      const double vec_norm = fb.v0.row(e * mol.n_nuc() + nI).segment(1, 3).norm();
      CHECK(norm_part == doctest::Approx(vec_norm).epsilon(1e-10));
    }
}

TEST_CASE("translation invariance") {
  const Molecule mol = water();
  const Mat pos = random_positions(mol, 17, 3);
  const Eigen::RowVector3d shift(0.37, -1.2, 2.05);
  Molecule shifted = mol;
  for (auto& n : shifted.nuclei) n.position += shift.transpose();
  Mat pos_shifted = pos;
  pos_shifted.rowwise() += shift;
  FrameSet frames = FrameSet::identity(mol.n_nuc());
  for (auto mode : {FeatureMode::LocalFrames, FeatureMode::RawDiffs,
                    FeatureMode::DistancesOnly}) {
    const FeatureBatch a = build_features(mol, &frames, pos, {mode});
    const FeatureBatch b = build_features(shifted, &frames, pos_shifted, {mode});
    CHECK((a.h0 - b.h0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.v0 - b.v0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.g0 - b.g0).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rotation invariance with covariant frames") {
  const Molecule mol = water();
  const Mat pos = random_positions(mol, 23, 4);
  FrameSet frames = FrameSet::identity(mol.n_nuc());
  for (int j = 0; j < mol.n_nuc(); ++j) frames.u[j] = random_rotation(77, j);

  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3d q = random_rotation(123, trial);
    Molecule rot = mol;
    for (auto& n : rot.nuclei) n.position = q * n.position;
    Mat pos_rot = pos * q.transpose();
    FrameSet frames_rot = frames;
    for (int j = 0; j < mol.n_nuc(); ++j) frames_rot.u[j] = q * frames.u[j];

    const FeatureBatch a = build_features(mol, &frames, pos, {FeatureMode::LocalFrames});
    const FeatureBatch b =
        build_features(rot, &frames_rot, pos_rot, {FeatureMode::LocalFrames});
    CHECK((a.h0 - b.h0).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.g0 - b.g0).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("permutation equivariance of feature rows") {
  const Molecule mol = lithium();
  const Mat pos = random_positions(mol, 29, 5);
  Mat perm = pos;
  perm.row(0).swap(perm.row(1));  // swap the two spin-up electrons
  FeatureConfig cfg{FeatureMode::RawDiffs};
  const FeatureBatch a = build_features(mol, nullptr, pos, cfg);
  const FeatureBatch b = build_features(mol, nullptr, perm, cfg);
  CHECK((a.h0.row(0) - b.h0.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.h0.row(1) - b.h0.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.h0.row(2) - b.h0.row(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("local mode requires frames") {
  const Molecule mol = h2();
  const Mat pos = random_positions(mol, 3, 6);
  CHECK_THROWS_AS(build_features(mol, nullptr, pos, {FeatureMode::LocalFrames}), ConfigError);
}

}  // TEST_SUITE
