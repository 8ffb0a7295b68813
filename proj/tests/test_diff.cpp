#include <doctest.h>

#include <cmath>

#include "dlvmc/local_energy.hpp"
#include "dlvmc/sampler.hpp"
#include "helpers.hpp"

using namespace dlvmc;
using namespace dlvmc::testing;

namespace {

struct FdErrors {
  double grad = 0.0;
  double lap = 0.0;
};

FdErrors fd_check(const WfParams& params, const Molecule& mol, const FrameSet* frames,
                  const Mat& pos) {
  const WfJets jets = log_psi_jets(params, mol, frames, pos, 1);
  FdErrors err;
  const double hg = 1e-4, hl = 1e-3;
  for (int i = 0; i < mol.n_el; ++i)
    for (int a = 0; a < 3; ++a) {
      Mat pp = pos, pm = pos;
      pp(i, a) += hg;
      pm(i, a) -= hg;
      const double fd_g = (log_psi(params, mol, frames, pp).log_abs -
                           log_psi(params, mol, frames, pm).log_abs) /
                          (2 * hg);
      const double rel_g = std::abs(jets.dlog(0, 3 * i + a) - fd_g) /
                           std::max(1.0, std::abs(fd_g));
      err.grad = std::max(err.grad, rel_g);

      pp = pos;
      pm = pos;
      pp(i, a) += hl;
      pm(i, a) -= hl;
      const double f0 = log_psi(params, mol, frames, pos).log_abs;
      const double fd_h = (log_psi(params, mol, frames, pp).log_abs - 2 * f0 +
                           log_psi(params, mol, frames, pm).log_abs) /
                          (hl * hl);
      const double rel_h = std::abs(jets.d2log(0, 3 * i + a) - fd_h) /
                           std::max(1.0, std::abs(fd_h));
      err.lap = std::max(err.lap, rel_h);
    }
  return err;
}

}  // namespace

TEST_SUITE("diff") {

TEST_CASE("exact hydrogenic ansatz: analytic gradient and laplacian") {
  const Molecule mol = hydrogen();
  const WfParams params = hydrogenic_params(mol, 1.0);
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Mat pos = random_positions(mol, 200 + trial, trial);
    const double r = pos.row(0).norm();
    const Mat g = grad_log_psi(params, mol, nullptr, pos);
    // grad log|psi| = -r_hat
    CHECK((g.row(0) + pos.row(0) / r).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(laplacian_log_psi(params, mol, nullptr, pos) ==
          doctest::Approx(-2.0 / r).epsilon(1e-12));
    const LocalEnergyParts parts = local_energy(params, mol, nullptr, pos);
    CHECK(parts.total() == doctest::Approx(-0.5).epsilon(1e-12));
  }
}

TEST_CASE("hydrogen-like ion: zero variance at omega = Z") {
  Molecule ion = atom(2, 1, 0);  // He+
  const WfParams params = hydrogenic_params(ion, 2.0);
  Eigen::VectorXd energies(20);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const Mat pos = random_positions(ion, 300 + trial, trial, 0.7);
    energies[trial] = local_energy(params, ion, nullptr, pos).total();
    CHECK(energies[trial] == doctest::Approx(-2.0).epsilon(1e-11));
  }
  const double var = (energies.array() - energies.mean()).square().mean();
  CHECK(var < 1e-10);
}

TEST_CASE("finite-difference oracles across systems") {
  // configurations are drawn from psi^2 like production sampling; random
  // unweighted points can sit arbitrarily close to a node, where the FD
  // oracle itself loses validity
  int configs = 0;
  for (const Molecule& mol : {h2(), lithium(), beryllium()}) {
    const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
    const WfParams params = init_params(cfg, mol, 71);
    const auto target = wavefunction_target(params, mol, nullptr);
    SamplerOptions sopts;
    WalkerBatch batch = init_walkers(mol, 12, 19, target, sopts);
    decorrelate(batch, target, mol, 50, sopts, true);
    for (int w = 0; w < batch.n_walkers; ++w) {
      const Mat pos = batch.positions.middleRows(Eigen::Index(w) * mol.n_el, mol.n_el);
      const FdErrors err = fd_check(params, mol, nullptr, pos);
      CHECK(err.grad < 1e-6);
      CHECK(err.lap < 1e-4);
      ++configs;
    }
  }
  CHECK(configs == 36);
}

TEST_CASE("coulomb arithmetic") {
  Molecule mol;
  mol.nuclei = {{Eigen::Vector3d(0, 0, 1), 1}, {Eigen::Vector3d(0, 0, -1), 1}};
  mol.n_el = 1;
  mol.n_up = 1;
  mol.n_dn = 0;
  mol.validate();
  const WfParams params = hydrogenic_params(mol, 1.0);
  Mat pos(1, 3);
  pos << 0.0, 0.0, 0.0;
  const LocalEnergyParts parts = local_energy(params, mol, nullptr, pos);
  CHECK(parts.v_en == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(parts.v_nn == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("v_nn is walker independent and v_ee symmetric") {
  const Molecule mol = lithium();
  const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
  const WfParams params = init_params(cfg, mol, 73);
  Mat pos = random_positions(mol, 500, 0);
  Mat relabeled = pos;
  relabeled.row(0).swap(relabeled.row(1));
  CHECK(coulomb_ee(mol, pos) == doctest::Approx(coulomb_ee(mol, relabeled)).epsilon(1e-14));
  const auto a = local_energy(params, mol, nullptr, pos);
  const auto b = local_energy(params, mol, nullptr, relabeled);
  CHECK(a.v_nn == b.v_nn);
}

TEST_CASE("translation of electron and nucleus together leaves the gradient unchanged") {
  Molecule mol = hydrogen();
  const WfParams params = hydrogenic_params(mol, 1.0);
  Mat pos(1, 3);
  pos << 0.4, -0.7, 0.2;
  const Mat g0 = grad_log_psi(params, mol, nullptr, pos);

  Molecule shifted = mol;
  const Eigen::Vector3d t(1.1, 0.3, -2.0);
  shifted.nuclei[0].position += t;
  Mat pos_shifted = pos;
  pos_shifted.row(0) += t.transpose();
  const Mat g1 = grad_log_psi(params, shifted, nullptr, pos_shifted);
  CHECK((g0 - g1).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("gaussian toy laplacian via the jet engine") {
  // log f = -|r|^2 / 2 summed over electrons: laplacian = -3 n_el exactly
  const int n_el = 3;
  BatchLayout lay{1, n_el, 2, 1};
  JetEngine eng(3 * n_el);
  Mat pos = Mat::Random(n_el, 3);
  auto r = eng.positions(pos);
  auto n = eng.norm_rows(r);
  auto n2 = eng.hadamard(n, n);
  double lap = 0.0;
  for (int k = 0; k < 3 * n_el; ++k) lap += -0.5 * n2.hk(k).sum();
  CHECK(lap == doctest::Approx(-3.0 * n_el).epsilon(1e-12));
}

TEST_CASE("particle coincidences are rejected") {
  const Molecule mol = helium();
  const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
  const WfParams params = init_params(cfg, mol, 79);
  Mat on_nucleus(2, 3);
  on_nucleus << 0.0, 0.0, 0.0, 0.5, 0.5, 0.5;
  CHECK_THROWS_AS(local_energy(params, mol, nullptr, on_nucleus),
                  RejectedConfigurationError);
  Mat coincident(2, 3);
  coincident << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;
  CHECK_THROWS_AS(local_energy(params, mol, nullptr, coincident),
                  RejectedConfigurationError);
}

TEST_CASE("batched local energies agree with single-walker evaluation") {
  const Molecule mol = lithium();
  const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
  const WfParams params = init_params(cfg, mol, 83);
  const int n_walkers = 70;  // spans multiple thread blocks
  Mat pos(n_walkers * mol.n_el, 3);
  for (int w = 0; w < n_walkers; ++w)
    pos.middleRows(w * mol.n_el, mol.n_el) = random_positions(mol, 600, w);
  const LocalEnergyBatch batch = local_energy_batch(params, mol, nullptr, pos, n_walkers);
  for (int w : {0, 13, 37, 69}) {
    const auto single =
        local_energy(params, mol, nullptr, pos.middleRows(w * mol.n_el, mol.n_el));
    CHECK(batch.e_local[w] == doctest::Approx(single.total()).epsilon(1e-12));
  }
}

}  // TEST_SUITE
