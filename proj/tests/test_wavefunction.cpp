#include <doctest.h>

#include <cmath>

#include "dlvmc/checkpoint.hpp"
#include "dlvmc/wavefunction.hpp"
#include "helpers.hpp"

using namespace dlvmc;
using namespace dlvmc::testing;

TEST_SUITE("wavefunction") {

TEST_CASE("envelope arithmetic") {
  const Molecule mol = hydrogen();
  WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                DetMode::Dense, 1);
  WfParams p = init_params(cfg, mol, 1);

  SUBCASE("unit coefficients at zero distance") {
    p.env_pi[0].setOnes();
    p.env_omega[0].setOnes();
    Mat rho(1, 1);
    rho << 0.0;
    CHECK(envelopes(p, rho, 0)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("exponential decay at large distance") {
    Mat rho(1, 1);
    rho << 60.0;
    CHECK(std::abs(envelopes(p, rho, 0)(0, 0)) < 1e-20);
  }
}

TEST_CASE("two-nucleus envelope sum") {
  // pi = (1,1), omega = (1,2), |rho| = (0.5, 0.5):
  // exp(-0.5) + exp(-1.0) = 0.97441010088...
  const Molecule mol = h2();
  WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                DetMode::Dense, 1);
  WfParams p = init_params(cfg, mol, 1);
  p.env_pi[0].row(0) << 1.0, 1.0;
  p.env_omega[0].row(0) << 1.0, 2.0;
  Mat rho(1, 2);
  rho << 0.5, 0.5;
  const double expected = std::exp(-0.5) + std::exp(-1.0);
  CHECK(envelopes(p, rho, 0)(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(envelopes(p, rho, 0)(0, 0) == doctest::Approx(0.9744101008840757).epsilon(1e-13));
}

TEST_CASE("negative raw exponents act through their magnitude") {
  const Molecule mol = hydrogen();
  WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
  WfParams p = init_params(cfg, mol, 1);
  p.env_pi[0].setOnes();
  p.env_omega[0].setConstant(-1.5);
  Mat rho(1, 1);
  rho << 2.0;
  CHECK(envelopes(p, rho, 0)(0, 0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
}

TEST_CASE("antisymmetry under same-spin exchange") {
  const Molecule mol = beryllium();
  for (auto det : {DetMode::Dense, DetMode::Block}) {
    const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined, det);
    const WfParams params = init_params(cfg, mol, 17);
    for (std::uint64_t trial = 0; trial < 30; ++trial) {
      Mat pos = random_positions(mol, 1000 + trial, trial);
      Mat swapped = pos;
      swapped.row(0).swap(swapped.row(1));
      const LogPsi a = log_psi(params, mol, nullptr, pos);
      const LogPsi b = log_psi(params, mol, nullptr, swapped);
      CHECK(a.sign == -b.sign);
      CHECK(a.log_abs == doctest::Approx(b.log_abs).epsilon(1e-10));
    }
  }
}

TEST_CASE("opposite-spin exchange is not a symmetry") {
  const Molecule mol = helium();
  const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
  const WfParams params = init_params(cfg, mol, 23);
  Mat pos = random_positions(mol, 3, 0);
  Mat swapped = pos;
  swapped.row(0).swap(swapped.row(1));
  const LogPsi a = log_psi(params, mol, nullptr, pos);
  const LogPsi b = log_psi(params, mol, nullptr, swapped);
  CHECK(a.log_abs != b.log_abs);  // generic parameters break opposite-spin exchange
}

TEST_CASE("single electron single determinant collapse") {
  const Molecule mol = hydrogen();
  WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                DetMode::Dense, 1);
  const WfParams params = init_params(cfg, mol, 29);
  const Mat pos = random_positions(mol, 31, 0);

  ValueEngine eng;
  auto bound = bind_wf(eng, params);
  BatchLayout lay{1, 1, 1, 1};
  auto feats = build_feature_tensors(eng, pos, mol, nullptr, lay, cfg.features);
  auto m = forward_orbitals(eng, bound, params, feats, lay);
  const double entry = m.m_up(0, 0);  // Lambda_11 * Omega_1
  const LogPsi lp = log_psi(params, mol, nullptr, pos);
  CHECK(lp.log_abs == doctest::Approx(std::log(std::abs(entry))).epsilon(1e-13));
  CHECK(lp.sign == (entry > 0 ? 1.0 : -1.0));
}

TEST_CASE("determinant multilinearity in the orbital projection") {
  const Molecule mol = lithium();
  WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                DetMode::Dense, 1);
  WfParams params = init_params(cfg, mol, 37);
  const Mat pos = random_positions(mol, 41, 0);
  const LogPsi base = log_psi(params, mol, nullptr, pos);
  const double c = 1.7;
  params.w_orb[0] *= c;
  params.w_orb[1] *= c;
  const LogPsi scaled = log_psi(params, mol, nullptr, pos);
  CHECK(scaled.log_abs ==
        doctest::Approx(base.log_abs + mol.n_el * std::log(c)).epsilon(1e-12));
  CHECK(scaled.sign == base.sign);
}

TEST_CASE("physics-based envelope initialization") {
  const Molecule mol = atom(7, 4, 3);  // nitrogen, quartet
  WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                DetMode::Dense, 2);
  const WfParams p = init_params(cfg, mol, 1);
  // k = 1 -> n = 1; k in 2..5 -> n = 2; k in 6..14 -> n = 3
  CHECK(principal_quantum_number(1) == 1);
  CHECK(principal_quantum_number(2) == 2);
  CHECK(principal_quantum_number(5) == 2);
  CHECK(principal_quantum_number(6) == 3);
  CHECK(principal_quantum_number(14) == 3);
  CHECK(principal_quantum_number(15) == 4);
  for (int d = 0; d < cfg.n_det; ++d) {
    CHECK(p.env_omega[0](d * p.n_orb_up + 0, 0) == 7.0);
    for (int k = 1; k < 5 && k < p.n_orb_up; ++k)
      CHECK(p.env_omega[0](d * p.n_orb_up + k, 0) == 3.5);
  }
  CHECK((p.env_pi[0].array() == 1.0).all());

  WfConfig legacy = cfg;
  legacy.envelope_init = EnvelopeInit::Ones;
  const WfParams pl = init_params(legacy, mol, 1);
  CHECK((pl.env_omega[0].array() == 1.0).all());
  CHECK((pl.env_omega[1].array() == 1.0).all());
}

TEST_CASE("parameter count: closed-form hand count for the smallest net") {
  // H atom, L=1, widths (256,32), z=32, n_det=1, dense, raw_diffs (h0=4, v0=4)
  Molecule mol = hydrogen();
  WfConfig cfg;
  cfg.n_det = 1;
  cfg.det_mode = DetMode::Dense;
  cfg.features.mode = FeatureMode::RawDiffs;
  cfg.embedding.iterations = 1;
  cfg.embedding.width_one = 256;
  cfg.embedding.width_aux = 32;
  cfg.embedding.z_emb_dim = 32;
  const WfParams p = init_params(cfg, mol, 1);

  const long f_in = 3 * 4 + 32 + 32;                     // [h0, mu, md, s_el, s_nuc]
  const long a_one = 256 * f_in + 256;
  const long a_same = 32 * 1 + 32, a_diff = a_same;
  const long a_nuc = 32 * 4 + 32;
  const long b_same = 32 * 1 + 32, b_diff = b_same;
  const long b_nuc = 32 * 4 + 32;
  const long c_same = 32 * 4 + 32, c_diff = c_same;
  const long c_nuc = 32 * 32 + 32;
  const long z_emb = 1 * 32;
  const long orbitals = 2 * (1 * 256);  // one orbital per spin channel, dense
  const long envelopes = 2 * (1 * 1) * 2;  // pi and omega for both channels
  const long expected = a_one + a_same + a_diff + a_nuc + b_same + b_diff + b_nuc + c_same +
                        c_diff + c_nuc + z_emb + orbitals + envelopes;
  CHECK(count_params(p) == expected);
}

TEST_CASE("dense mode has strictly more parameters than block mode") {
  const Molecule mol = n2();
  WfConfig dense = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                  DetMode::Dense, 4);
  WfConfig block = dense;
  block.det_mode = DetMode::Block;
  CHECK(count_params(init_params(dense, mol, 1)) > count_params(init_params(block, mol, 1)));
}

TEST_CASE("doubling the determinant count doubles the orbital parameters") {
  const Molecule mol = lithium();
  WfConfig one = tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined,
                                DetMode::Dense, 2);
  WfConfig two = one;
  two.n_det = 4;
  const WfParams p1 = init_params(one, mol, 1);
  const WfParams p2 = init_params(two, mol, 1);
  for (int s = 0; s < 2; ++s) {
    CHECK(p2.w_orb[s].size() == 2 * p1.w_orb[s].size());
    CHECK(p2.env_pi[s].size() == 2 * p1.env_pi[s].size());
    CHECK(p2.env_omega[s].size() == 2 * p1.env_omega[s].size());
  }
}

TEST_CASE("square integrability proxy: decay along random rays") {
  const Molecule mol = lithium();
  const WfConfig cfg = tiny_wf_config(FeatureMode::RawDiffs);
  const WfParams params = init_params(cfg, mol, 43);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Eigen::RowVector3d dir;
    for (int a = 0; a < 3; ++a) dir[a] = rng_gaussian(7, RngStream::Misc, trial, a, 0);
    dir.normalize();
    Mat pos = random_positions(mol, 100 + trial, 0, 0.8);
    double prev = 0.0;
    for (int step = 0; step < 8; ++step) {
      Mat p = pos;
      p.row(0) = dir * (10.0 + 5.0 * step);
      const double la = log_psi(params, mol, nullptr, p).log_abs;
      if (step > 0) CHECK(la < prev);
      prev = la;
    }
  }
}

TEST_CASE("rotation invariance of log|psi| in local-frame mode") {
  const Molecule mol = water();
  const WfConfig cfg = tiny_wf_config(FeatureMode::LocalFrames);
  const WfParams params = init_params(cfg, mol, 47);
  FrameSet frames = FrameSet::identity(mol.n_nuc());
  for (int j = 0; j < mol.n_nuc(); ++j) frames.u[j] = random_rotation(17, j);
  const Mat pos = random_positions(mol, 53, 0);
  const double base = log_psi(params, mol, &frames, pos).log_abs;

  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3d q = random_rotation(59, trial);
    Molecule rot = mol;
    for (auto& n : rot.nuclei) n.position = q * n.position;
    Mat pos_rot = pos * q.transpose();
    FrameSet frames_rot = frames;
    for (int j = 0; j < mol.n_nuc(); ++j) frames_rot.u[j] = q * frames.u[j];
    const double rot_val = log_psi(params, rot, &frames_rot, pos_rot).log_abs;
    CHECK(rot_val == doctest::Approx(base).epsilon(1e-8));
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Molecule mol = helium();
  const WfConfig cfg = tiny_wf_config();
  WfParams params = init_params(cfg, mol, 61);
  WalkerBatch batch;
  batch.n_walkers = 3;
  batch.n_el = 2;
  batch.positions = Mat::Random(6, 3);
  batch.log_abs = Eigen::VectorXd::Random(3);
  batch.sign = Eigen::VectorXd::Ones(3);
  batch.stepsize = 0.37;
  batch.acceptance_ema = 0.518;
  batch.seed = 0xDEADBEEFCAFEBABEull;
  batch.mc_step = 123456789ull;
  AdamState adam;
  auto refs = param_refs(params);
  adam.init_like(refs);
  adam.t = 77;
  adam.m[0].setRandom();
  adam.v[0].setRandom();

  const std::string path = "/tmp/dlvmc_test_checkpoint.bin";
  save_checkpoint(path, params, batch, adam, 4242);

  WfParams loaded = init_params(cfg, mol, 999);  // different seed: different bits
  const CheckpointData data = load_checkpoint(path, loaded);
  auto refs_new = param_refs(loaded);
  for (std::size_t i = 0; i < refs.size(); ++i) CHECK(*refs[i].mat == *refs_new[i].mat);
  CHECK(data.batch.positions == batch.positions);
  CHECK(data.batch.log_abs == batch.log_abs);
  CHECK(data.batch.stepsize == batch.stepsize);
  CHECK(data.batch.acceptance_ema == batch.acceptance_ema);
  CHECK(data.batch.seed == batch.seed);
  CHECK(data.batch.mc_step == batch.mc_step);
  CHECK(data.adam.t == adam.t);
  CHECK(data.adam.m[0] == adam.m[0]);
  CHECK(data.adam.v[0] == adam.v[0]);
  CHECK(data.opt_step == 4242);
}

}  // TEST_SUITE
