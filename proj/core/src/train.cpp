#include "dlvmc/train.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "dlvmc/errors.hpp"
#include "dlvmc/rng.hpp"
#include "dlvmc/threads.hpp"

namespace dlvmc {

void TrainConfig::validate() const {
  if (n_pretrain < 0 || n_opt < 0 || eval_steps < 0) throw ConfigError("negative step counts");
  if (n_walkers < 1) throw ConfigError("n_walkers must be >= 1");
  if (decorrelation_steps < 1) throw ConfigError("decorrelation_steps must be >= 1");
  if (eval_decorrelation_steps < 1) throw ConfigError("eval_decorrelation_steps must be >= 1");
  if (lr0 <= 0.0 || pretrain_lr <= 0.0) throw ConfigError("learning rates must be positive");
  if (lr_decay_steps <= 0.0) throw ConfigError("lr_decay_steps must be positive");
  if (norm_constraint <= 0.0) throw ConfigError("norm_constraint must be positive");
  if (clip_window <= 0.0) throw ConfigError("clip_window must be positive");
}

double lr_at(const TrainConfig& cfg, long t) {
  return cfg.lr0 / (1.0 + double(t) / cfg.lr_decay_steps);
}

namespace {

double median_of(Eigen::VectorXd v) {
  const auto n = v.size();
  std::sort(v.data(), v.data() + n);
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Eigen::VectorXd clip_local_energy(const Eigen::VectorXd& e, double window,
                                  double* clip_fraction) {
  if (e.size() == 0) throw ConfigError("clip_local_energy: empty batch");
  const double med = median_of(e);
  const double mad = median_of((e.array() - med).abs().matrix());
  if (clip_fraction) *clip_fraction = 0.0;
  if (mad == 0.0) return e;  // all-equal batch
  const double lo = med - window * mad;
  const double hi = med + window * mad;
  Eigen::VectorXd out = e;
  long clipped = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] < lo) {
      out[i] = lo;
      ++clipped;
    } else if (out[i] > hi) {
      out[i] = hi;
      ++clipped;
    }
  }
  if (clip_fraction) *clip_fraction = double(clipped) / double(out.size());
  return out;
}

GradList vmc_gradient(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                      const Mat& positions, int n_walkers,
                      const Eigen::VectorXd& e_clipped) {
  const double e_mean = e_clipped.mean();
  WfParams& pm = const_cast<WfParams&>(p);  // refs only enumerate shapes/names
  auto refs = param_refs(pm);

  const int n_blocks = (n_walkers + kWalkerBlock - 1) / kWalkerBlock;
  std::vector<GradList> block_grads(n_blocks);
  std::exception_ptr error;
  std::mutex error_mutex;

  parallel_blocks(n_walkers, [&](int begin, int end) {
    try {
      const int nb = end - begin;
      const int block_idx = begin / kWalkerBlock;
      const Mat block =
          positions.middleRows(Eigen::Index(begin) * mol.n_el, Eigen::Index(nb) * mol.n_el);
      WfTapeForward fwd = log_psi_tape(p, mol, frames, block, nb);
      Mat seed(nb, 1);
      for (int w = 0; w < nb; ++w)
        seed(w, 0) = 2.0 * (e_clipped[begin + w] - e_mean) / double(n_walkers);
      fwd.tape->backward(fwd.log_psi, seed);
      GradList g;
      g.reserve(refs.size());
      for (std::size_t i = 0; i < refs.size(); ++i) {
        const Mat& adj = fwd.tape->adjoint(fwd.param_nodes[i]);
        g.push_back(adj.size() == 0 ? Mat(Mat::Zero(refs[i].mat->rows(), refs[i].mat->cols()))
                                    : adj);
      }
      block_grads[block_idx] = std::move(g);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);

  GradList total;
  total.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    total.push_back(Mat::Zero(refs[i].mat->rows(), refs[i].mat->cols()));
  for (int b = 0; b < n_blocks; ++b)
    for (std::size_t i = 0; i < refs.size(); ++i) total[i] += block_grads[b][i];
  return total;
}

double grad_norm(const GradList& g) {
  double s = 0.0;
  for (const auto& m : g) s += m.squaredNorm();
  return std::sqrt(s);
}

double apply_norm_constraint(GradList& g, double cap) {
  const double n = grad_norm(g);
  if (n > cap && n > 0.0) {
    const double scale = cap / n;
    for (auto& m : g) m *= scale;
    return cap;
  }
  return n;
}

void AdamState::init_like(const std::vector<ParamRef>& refs) {
  m.clear();
  v.clear();
  for (const auto& r : refs) {
    m.push_back(Mat::Zero(r.mat->rows(), r.mat->cols()));
    v.push_back(Mat::Zero(r.mat->rows(), r.mat->cols()));
  }
  t = 0;
}

void AdamState::step(std::vector<ParamRef>& refs, const GradList& g, double lr,
                     const TrainConfig& cfg) {
  ++t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(t));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
    v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i].cwiseProduct(g[i]);
    const Mat mhat = m[i] / bc1;
    const Mat vhat = v[i] / bc2;
    refs[i].mat->array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.adam_eps);
  }
}

double blocking_stderr(const Eigen::VectorXd& series, double* autocorr_time) {
  const auto n = series.size();
  if (n < 2) {
    if (autocorr_time) *autocorr_time = 1.0;
    return 0.0;
  }
  auto stderr_of = [](const Eigen::VectorXd& x) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / double(x.size() - 1);
    return std::sqrt(var / double(x.size()));
  };
  const double naive = stderr_of(series);
  double best = naive;
  Eigen::VectorXd level = series;
  while (level.size() >= 32) {
    const auto half = level.size() / 2;
    Eigen::VectorXd next(half);
    for (Eigen::Index i = 0; i < half; ++i) next[i] = 0.5 * (level[2 * i] + level[2 * i + 1]);
    level = std::move(next);
    if (level.size() < 2) break;
    best = std::max(best, stderr_of(level));
  }
  if (autocorr_time)
    *autocorr_time = naive > 0.0 ? (best / naive) * (best / naive) : 1.0;
  return best;
}

double pretrain(WfParams& p, const ScfResult& scf, const BasisSet& basis, const Molecule& mol,
                const FrameSet* frames, WalkerBatch& batch, const TrainConfig& cfg,
                const SamplerOptions& sopts, const LogSink& log) {
  if (!scf.converged) throw NumericError("pretrain: SCF reference did not converge");
  if (cfg.n_pretrain == 0) return 0.0;

  auto refs = param_refs(p);
  AdamState adam;
  adam.init_like(refs);

  const LogAbsTarget psi_target = wavefunction_target(p, mol, frames);
  const LogAbsTarget hf_target = [&](const Mat& positions, int n_walkers) {
    TargetEval ev;
    ev.log_abs.resize(n_walkers);
    ev.ok = Eigen::VectorXd::Ones(n_walkers);
    for (int w = 0; w < n_walkers; ++w)
      ev.log_abs[w] =
          0.5 * hf_log_density(scf, basis, mol, positions.middleRows(
                                                  Eigen::Index(w) * mol.n_el, mol.n_el));
    return ev;
  };

  const int n_det = p.cfg.n_det;
  const int b_rows_up = batch.n_walkers * mol.n_up;
  const int b_rows_dn = batch.n_walkers * mol.n_dn;
  double loss = 0.0;
  bool cache_is_psi = true;

  for (int step = 0; step < cfg.n_pretrain; ++step) {
    // 50/50 mixture: each sweep follows psi^2 or the HF density; the cache is
    // refreshed whenever the target changes.
    const bool use_psi =
        rng_uniform(batch.seed, RngStream::MixtureChoice, batch.mc_step, 0, 0) < 0.5;
    const LogAbsTarget& target = use_psi ? psi_target : hf_target;
    if (use_psi != cache_is_psi) {
      const TargetEval ev = target(batch.positions, batch.n_walkers);
      batch.log_abs = ev.log_abs;
      batch.sign = ev.ok;
      cache_is_psi = use_psi;
    }
    mh_step(batch, target, mol, sopts);
    adapt_stepsize(batch, sopts);

    // HF orbital targets at the current positions. The targets are
    // block-diagonal; in dense mode the down block occupies orbital rows
    // n_up..n_el-1 of the full matrix, so its columns are offset.
    const int dn_row_offset = p.cfg.det_mode == DetMode::Dense ? mol.n_up : 0;
    OrbitalValues orb = eval_orbitals(scf, basis, batch.positions);
    Mat t_up = Mat::Zero(b_rows_up, Eigen::Index(n_det) * p.n_orb_up);
    Mat t_dn = Mat::Zero(b_rows_dn, Eigen::Index(n_det) * p.n_orb_dn);
    for (int w = 0; w < batch.n_walkers; ++w) {
      for (int i = 0; i < mol.n_up; ++i)
        for (int k = 0; k < mol.n_up; ++k)
          for (int d = 0; d < n_det; ++d)
            t_up(Eigen::Index(w) * mol.n_up + i, Eigen::Index(d) * p.n_orb_up + k) =
                orb.up(Eigen::Index(w) * mol.n_el + i, k);
      for (int i = 0; i < mol.n_dn; ++i)
        for (int k = 0; k < mol.n_dn; ++k)
          for (int d = 0; d < n_det; ++d)
            t_dn(Eigen::Index(w) * mol.n_dn + i,
                 Eigen::Index(d) * p.n_orb_dn + dn_row_offset + k) =
                orb.dn(Eigen::Index(w) * mol.n_el + (mol.n_up + i), k);
    }

    // forward to the orbital matrices, squared-error loss over all entries
    const int n_blocks = (batch.n_walkers + kWalkerBlock - 1) / kWalkerBlock;
    std::vector<GradList> block_grads(n_blocks);
    std::vector<double> block_loss(n_blocks, 0.0);
    std::exception_ptr error;
    std::mutex error_mutex;
    const double total_entries =
        double(t_up.size() + t_dn.size());

    parallel_blocks(batch.n_walkers, [&](int begin, int end) {
      try {
        const int nb = end - begin;
        const int block_idx = begin / kWalkerBlock;
        const Mat block = batch.positions.middleRows(Eigen::Index(begin) * mol.n_el,
                                                     Eigen::Index(nb) * mol.n_el);
        WfTapeForward fwd = log_psi_tape(p, mol, frames, block, nb, /*stop_at_orbitals=*/true);
        TapeEngine eng(*fwd.tape);
        const Mat tu = t_up.middleRows(Eigen::Index(begin) * mol.n_up,
                                       Eigen::Index(nb) * mol.n_up);
        const Mat td = t_dn.middleRows(Eigen::Index(begin) * mol.n_dn,
                                       Eigen::Index(nb) * mol.n_dn);
        auto du = eng.sub(fwd.m_up, eng.constant(tu));
        auto dd = eng.sub(fwd.m_dn, eng.constant(td));
        auto su = eng.mean_all(eng.hadamard(du, du));
        auto sd = eng.mean_all(eng.hadamard(dd, dd));
        // block contribution to the whole-batch mean squared error
        Tape::Ref loss_ref;
        if (tu.size() > 0 && td.size() > 0)
          loss_ref = eng.add(eng.scale(su, double(tu.size()) / total_entries),
                             eng.scale(sd, double(td.size()) / total_entries));
        else
          loss_ref = tu.size() > 0 ? eng.scale(su, double(tu.size()) / total_entries)
                                   : eng.scale(sd, double(td.size()) / total_entries);
        block_loss[block_idx] = fwd.tape->value(loss_ref)(0, 0);
        Mat seed(1, 1);
        seed(0, 0) = 1.0;
        fwd.tape->backward(loss_ref, seed);
        GradList g;
        auto refs_local = param_refs(p);
        for (std::size_t i = 0; i < refs_local.size(); ++i) {
          const Mat& adj = fwd.tape->adjoint(fwd.param_nodes[i]);
          g.push_back(adj.size() == 0
                          ? Mat(Mat::Zero(refs_local[i].mat->rows(), refs_local[i].mat->cols()))
                          : adj);
        }
        block_grads[block_idx] = std::move(g);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
    if (error) std::rethrow_exception(error);

    GradList grads;
    for (std::size_t i = 0; i < refs.size(); ++i)
      grads.push_back(Mat::Zero(refs[i].mat->rows(), refs[i].mat->cols()));
    loss = 0.0;
    for (int b = 0; b < n_blocks; ++b) {
      loss += block_loss[b];
      for (std::size_t i = 0; i < refs.size(); ++i) grads[i] += block_grads[b][i];
    }

    // envelope exponents keep their initialization during pretraining
    for (std::size_t i = 0; i < refs.size(); ++i)
      if (refs[i].name.rfind("envelope.omega", 0) == 0) grads[i].setZero();

    adam.step(refs, grads, cfg.pretrain_lr, cfg);

    if (log) {
      TrainLogRow row;
      row.step = step;
      row.energy_mean = loss;  // pretraining logs carry the loss in this column
      row.acceptance = batch.acceptance_ema;
      row.stepsize = batch.stepsize;
      row.lr = cfg.pretrain_lr;
      log(row);
    }
  }

  // leave the walkers on the psi^2 distribution
  const TargetEval ev = psi_target(batch.positions, batch.n_walkers);
  batch.log_abs = ev.log_abs;
  batch.sign = ev.ok;
  return loss;
}

void optimize(WfParams& p, const Molecule& mol, const FrameSet* frames, WalkerBatch& batch,
              const TrainConfig& cfg, const SamplerOptions& sopts, AdamState& adam,
              const LogSink& log, const CheckpointSink& checkpoint) {
  auto refs = param_refs(p);
  if (adam.m.empty()) adam.init_like(refs);
  const LogAbsTarget target = wavefunction_target(p, mol, frames);

  for (long step = 0; step < cfg.n_opt; ++step) {
    decorrelate(batch, target, mol, cfg.decorrelation_steps, sopts, /*adapt=*/true);

    const LocalEnergyBatch el = local_energy_batch(p, mol, frames, batch.positions,
                                                   batch.n_walkers);
    double clip_fraction = 0.0;
    const Eigen::VectorXd e_clip = clip_local_energy(el.e_local, cfg.clip_window,
                                                     &clip_fraction);
    const double e_mean = e_clip.mean();
    const double e_var =
        (el.e_local.array() - el.e_local.mean()).square().sum() / double(batch.n_walkers);

    GradList g = vmc_gradient(p, mol, frames, batch.positions, batch.n_walkers, e_clip);
    const double gnorm = apply_norm_constraint(g, cfg.norm_constraint);

    if (!std::isfinite(e_mean) || !std::isfinite(gnorm)) {
      if (checkpoint) checkpoint(step, p, batch, adam);
      throw NumericError("optimize: non-finite energy or gradient at step " +
                         std::to_string(step));
    }

    adam.step(refs, g, lr_at(cfg, step), cfg);

    if (log) {
      TrainLogRow row;
      row.step = step;
      row.energy_mean = e_mean;
      row.energy_var = e_var;
      row.acceptance = batch.acceptance_ema;
      row.stepsize = batch.stepsize;
      row.lr = lr_at(cfg, step);
      row.clip_fraction = clip_fraction;
      row.grad_norm = gnorm;
      log(row);
    }
    if (checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0)
      checkpoint(step + 1, p, batch, adam);
  }
}

EnergyEstimate evaluate(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                        WalkerBatch& batch, const TrainConfig& cfg, const SamplerOptions& sopts,
                        const LogSink& log) {
  const LogAbsTarget target = wavefunction_target(p, mol, frames);
  Eigen::VectorXd step_means(cfg.eval_steps);
  double var_sum = 0.0;

  for (int step = 0; step < cfg.eval_steps; ++step) {
    decorrelate(batch, target, mol, cfg.eval_decorrelation_steps, sopts, /*adapt=*/false);
    const LocalEnergyBatch el = local_energy_batch(p, mol, frames, batch.positions,
                                                   batch.n_walkers);
    step_means[step] = el.e_local.mean();
    var_sum += (el.e_local.array() - el.e_local.mean()).square().sum() /
               std::max(1, batch.n_walkers - 1);
    if (log) {
      TrainLogRow row;
      row.step = step;
      row.energy_mean = step_means[step];
      row.acceptance = batch.acceptance_ema;
      row.stepsize = batch.stepsize;
      log(row);
    }
  }

  EnergyEstimate est;
  est.mean = step_means.mean();
  est.stderr_ = blocking_stderr(step_means, &est.autocorr_time);
  est.variance = var_sum / std::max(1, cfg.eval_steps);
  est.n_samples = long(cfg.eval_steps) * batch.n_walkers;
  return est;
}

}  // namespace dlvmc
