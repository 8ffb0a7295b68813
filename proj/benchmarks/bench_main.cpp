#include <benchmark/benchmark.h>

#include "dlvmc/local_energy.hpp"
#include "dlvmc/rng.hpp"
#include "dlvmc/sampler.hpp"
#include "dlvmc/scf.hpp"
#include "dlvmc/train.hpp"
#include "dlvmc/wavefunction.hpp"

namespace {

using namespace dlvmc;

struct Fixture {
  Molecule mol;
  WfParams params;
  Mat positions;
  int n_walkers;

  Fixture(int z, int n_up, int n_dn, int n_walkers_in, int width_one, int width_aux)
      : n_walkers(n_walkers_in) {
    mol.nuclei = {{Eigen::Vector3d::Zero(), z}};
    mol.n_el = n_up + n_dn;
    mol.n_up = n_up;
    mol.n_dn = n_dn;
    WfConfig cfg;
    cfg.n_det = 4;
    cfg.features.mode = FeatureMode::RawDiffs;
    cfg.embedding.iterations = 2;
    cfg.embedding.width_one = width_one;
    cfg.embedding.width_aux = width_aux;
    cfg.embedding.z_emb_dim = width_aux;
    params = init_params(cfg, mol, 1);
    positions.resize(Eigen::Index(n_walkers) * mol.n_el, 3);
    for (Eigen::Index r = 0; r < positions.rows(); ++r)
      for (int a = 0; a < 3; ++a)
        positions(r, a) = rng_gaussian(3, RngStream::Misc, std::uint64_t(r), a, 0);
  }
};

void bm_log_psi_value(benchmark::State& state) {
  Fixture f(int(state.range(0)), int((state.range(0) + 1) / 2), int(state.range(0) / 2), 64,
            64, 16);
  for (auto _ : state) {
    auto out = log_psi_batch(f.params, f.mol, nullptr, f.positions, f.n_walkers);
    benchmark::DoNotOptimize(out.log_abs.sum());
  }
  state.SetItemsProcessed(state.iterations() * f.n_walkers);
}
BENCHMARK(bm_log_psi_value)->Arg(2)->Arg(4)->Arg(7);

void bm_local_energy_jets(benchmark::State& state) {
  Fixture f(int(state.range(0)), int((state.range(0) + 1) / 2), int(state.range(0) / 2), 32,
            64, 16);
  for (auto _ : state) {
    auto out = local_energy_batch(f.params, f.mol, nullptr, f.positions, f.n_walkers);
    benchmark::DoNotOptimize(out.e_local.sum());
  }
  state.SetItemsProcessed(state.iterations() * f.n_walkers);
}
BENCHMARK(bm_local_energy_jets)->Arg(2)->Arg(4)->Arg(7);

void bm_parameter_gradient(benchmark::State& state) {
  Fixture f(int(state.range(0)), int((state.range(0) + 1) / 2), int(state.range(0) / 2), 32,
            64, 16);
  Eigen::VectorXd e(f.n_walkers);
  for (int w = 0; w < f.n_walkers; ++w) e[w] = -1.0 - 0.01 * w;
  for (auto _ : state) {
    auto g = vmc_gradient(f.params, f.mol, nullptr, f.positions, f.n_walkers, e);
    benchmark::DoNotOptimize(grad_norm(g));
  }
  state.SetItemsProcessed(state.iterations() * f.n_walkers);
}
BENCHMARK(bm_parameter_gradient)->Arg(2)->Arg(4);

void bm_mh_sweep(benchmark::State& state) {
  Fixture f(2, 1, 1, 256, 64, 16);
  const auto target = wavefunction_target(f.params, f.mol, nullptr);
  SamplerOptions opts;
  WalkerBatch batch = init_walkers(f.mol, f.n_walkers, 5, target, opts);
  for (auto _ : state) {
    mh_step(batch, target, f.mol, opts);
    benchmark::DoNotOptimize(batch.log_abs.sum());
  }
  state.SetItemsProcessed(state.iterations() * f.n_walkers);
}
BENCHMARK(bm_mh_sweep);

void bm_scf_water(benchmark::State& state) {
  Molecule mol;
  mol.nuclei = {{Eigen::Vector3d(0.0, 0.0, 0.0), 8},
                {Eigen::Vector3d(0.0, 1.43, 1.11), 1},
                {Eigen::Vector3d(0.0, -1.43, 1.11), 1}};
  mol.n_el = 10;
  mol.n_up = 5;
  mol.n_dn = 5;
  const BasisSet basis = build_basis(mol, BasisKind::Sto6g);
  for (auto _ : state) {
    const IntegralTables tab = compute_integrals(mol, basis);
    const ScfResult scf = run_scf(tab, mol);
    benchmark::DoNotOptimize(scf.energy);
  }
}
BENCHMARK(bm_scf_water)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
