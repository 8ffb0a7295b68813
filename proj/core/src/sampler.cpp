#include "dlvmc/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "dlvmc/errors.hpp"
#include "dlvmc/rng.hpp"
#include "dlvmc/threads.hpp"

namespace dlvmc {

LogAbsTarget wavefunction_target(const WfParams& p, const Molecule& mol,
                                 const FrameSet* frames) {
  return [&p, &mol, frames](const Mat& positions, int n_walkers) {
    const LogPsiBatch b = log_psi_batch(p, mol, frames, positions, n_walkers);
    TargetEval out;
    out.log_abs = b.log_abs;
    out.ok.resize(n_walkers);
    for (int w = 0; w < n_walkers; ++w) out.ok[w] = b.sign[w] != 0.0 ? 1.0 : 0.0;
    return out;
  };
}

double acceptance_probability(double log_abs_new, double log_abs_old) {
  return std::min(1.0, std::exp(2.0 * (log_abs_new - log_abs_old)));
}

namespace {

// Z-proportional electron counts per nucleus for one spin channel,
// largest-remainder rounding, ties to lower nucleus index.
std::vector<int> spin_quota(const Molecule& mol, int n_spin) {
  const int n_nuc = mol.n_nuc();
  double z_total = 0.0;
  for (const auto& n : mol.nuclei) z_total += n.charge;
  std::vector<int> quota(n_nuc, 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int i = 0; i < n_nuc; ++i) {
    const double exact = n_spin * mol.nuclei[i].charge / z_total;
    quota[i] = static_cast<int>(std::floor(exact));
    assigned += quota[i];
    remainders.push_back({exact - quota[i], i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < n_spin - assigned; ++k) quota[remainders[k % n_nuc].second]++;
  return quota;
}

void eval_target_parallel(const LogAbsTarget& target, const Mat& positions, int n_walkers,
                          int n_el, Eigen::VectorXd* log_abs, Eigen::VectorXd* ok) {
  log_abs->resize(n_walkers);
  ok->resize(n_walkers);
  parallel_blocks(n_walkers, [&](int begin, int end) {
    const int nb = end - begin;
    const TargetEval ev =
        target(positions.middleRows(Eigen::Index(begin) * n_el, Eigen::Index(nb) * n_el), nb);
    log_abs->segment(begin, nb) = ev.log_abs;
    ok->segment(begin, nb) = ev.ok;
  });
}

bool near_nucleus(const Molecule& mol, const Eigen::Matrix<double, 1, 3>& r) {
  for (const auto& nuc : mol.nuclei)
    if ((r.transpose() - nuc.position).norm() < 1e-12) return true;
  return false;
}

void sweep(WalkerBatch& batch, const LogAbsTarget& target, const Molecule& mol,
           const SamplerOptions& opts, int electron /* -1 = all */) {
  const int n_el = batch.n_el;
  Mat proposal = batch.positions;
  for (int w = 0; w < batch.n_walkers; ++w) {
    for (int i = 0; i < n_el; ++i) {
      if (electron >= 0 && i != electron) continue;
      for (int a = 0; a < 3; ++a) {
        const double step =
            batch.stepsize * rng_gaussian(batch.seed, RngStream::Proposal, batch.mc_step,
                                          std::uint64_t(w), std::uint64_t(i) * 3 + a);
        proposal(Eigen::Index(w) * n_el + i, a) += step;
      }
    }
  }

  Eigen::VectorXd new_log, new_ok;
  eval_target_parallel(target, proposal, batch.n_walkers, n_el, &new_log, &new_ok);

  int accepted = 0;
  for (int w = 0; w < batch.n_walkers; ++w) {
    bool reject = new_ok[w] == 0.0;
    if (!reject) {
      for (int i = 0; i < n_el && !reject; ++i)
        reject = near_nucleus(mol, proposal.row(Eigen::Index(w) * n_el + i));
    }
    if (!reject) {
      const double u =
          rng_uniform(batch.seed, RngStream::Accept, batch.mc_step, std::uint64_t(w),
                      std::uint64_t(electron >= 0 ? electron : 0));
      reject = u >= acceptance_probability(new_log[w], batch.log_abs[w]);
    }
    if (!reject) {
      batch.walker(w) = proposal.middleRows(Eigen::Index(w) * n_el, n_el);
      batch.log_abs[w] = new_log[w];
      batch.sign[w] = 1.0;
      ++accepted;
    }
  }
  const double frac = double(accepted) / double(batch.n_walkers);
  batch.acceptance_ema = opts.acceptance_ema_decay * batch.acceptance_ema +
                         (1.0 - opts.acceptance_ema_decay) * frac;
  batch.mc_step++;
}

}  // namespace

WalkerBatch init_walkers(const Molecule& mol, int n_walkers, std::uint64_t seed,
                         const LogAbsTarget& target, const SamplerOptions& opts) {
  if (n_walkers < 1) throw ConfigError("init_walkers: n_walkers must be >= 1");
  WalkerBatch b;
  b.n_walkers = n_walkers;
  b.n_el = mol.n_el;
  b.seed = seed;
  b.stepsize = opts.initial_stepsize;
  b.acceptance_ema = opts.target_acceptance;
  b.positions.resize(Eigen::Index(n_walkers) * mol.n_el, 3);

  // nucleus of each electron index: up block then down block
  std::vector<int> center(mol.n_el);
  {
    const auto qu = spin_quota(mol, mol.n_up);
    const auto qd = spin_quota(mol, mol.n_dn);
    int idx = 0;
    for (int nuc = 0; nuc < mol.n_nuc(); ++nuc)
      for (int c = 0; c < qu[nuc]; ++c) center[idx++] = nuc;
    for (int nuc = 0; nuc < mol.n_nuc(); ++nuc)
      for (int c = 0; c < qd[nuc]; ++c) center[idx++] = nuc;
  }

  for (int w = 0; w < n_walkers; ++w)
    for (int i = 0; i < mol.n_el; ++i)
      for (int a = 0; a < 3; ++a)
        b.positions(Eigen::Index(w) * mol.n_el + i, a) =
            mol.nuclei[center[i]].position[a] +
            rng_gaussian(seed, RngStream::WalkerInit, std::uint64_t(w),
                         std::uint64_t(i), std::uint64_t(a));

  Eigen::VectorXd ok;
  eval_target_parallel(target, b.positions, n_walkers, mol.n_el, &b.log_abs, &ok);
  b.sign = ok;
  return b;
}

void mh_step(WalkerBatch& batch, const LogAbsTarget& target, const Molecule& mol,
             const SamplerOptions& opts) {
  if (opts.move_mode == MoveMode::AllElectron) {
    sweep(batch, target, mol, opts, -1);
  } else {
    for (int i = 0; i < batch.n_el; ++i) sweep(batch, target, mol, opts, i);
  }
}

void adapt_stepsize(WalkerBatch& batch, const SamplerOptions& opts) {
  batch.stepsize *=
      std::exp(opts.adapt_kappa * (batch.acceptance_ema - opts.target_acceptance));
  batch.stepsize = std::clamp(batch.stepsize, opts.stepsize_min, opts.stepsize_max);
}

void decorrelate(WalkerBatch& batch, const LogAbsTarget& target, const Molecule& mol,
                 int n_steps, const SamplerOptions& opts, bool adapt) {
  if (n_steps < 1) throw ConfigError("decorrelate: n_steps must be >= 1");
  for (int s = 0; s < n_steps; ++s) {
    mh_step(batch, target, mol, opts);
    if (adapt) adapt_stepsize(batch, opts);
  }
}

}  // namespace dlvmc
