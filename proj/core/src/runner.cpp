#include "dlvmc/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "dlvmc/checkpoint.hpp"
#include "dlvmc/errors.hpp"
#include "dlvmc/frames.hpp"
#include "dlvmc/report.hpp"
#include "dlvmc/threads.hpp"

namespace dlvmc {

namespace {

std::string timestamp_name() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "run-%Y%m%d-%H%M%S", std::localtime(&t));
  return buf;
}

// full-precision, locale-independent CSV cell
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvLog {
 public:
  CsvLog(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw ParseError("cannot open log file: " + path);
    out_ << header << "\n";
  }
  void row(const TrainLogRow& r) {
    out_ << r.step << "," << fmt(r.energy_mean) << "," << fmt(r.energy_var) << ","
         << fmt(r.acceptance) << "," << fmt(r.stepsize) << "," << fmt(r.lr) << ","
         << fmt(r.clip_fraction) << "," << fmt(r.grad_norm) << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

constexpr const char* kLogHeader =
    "step,energy_mean,energy_var,acceptance,stepsize,lr,clip_fraction,grad_norm";

}  // namespace

SystemBundle prepare_system(const RunConfig& cfg, bool need_scf) {
  SystemBundle sys;
  sys.mol = cfg.molecule();
  const bool need_frames = cfg.wf.features.needs_frames();
  if (need_scf || need_frames) {
    sys.basis = build_basis(sys.mol, cfg.basis);
    const IntegralTables tables = compute_integrals(sys.mol, *sys.basis);
    sys.scf = run_scf(tables, sys.mol, cfg.scf);
    if (!sys.scf->converged)
      throw NumericError("SCF did not converge for the configured system");
  }
  if (need_frames) sys.frames = compute_frames(*sys.scf, *sys.basis, sys.mol);
  return sys;
}

std::string make_run_dir(const RunConfig& cfg, const std::string& suffix) {
  std::string name = cfg.run_name.empty() ? timestamp_name() : cfg.run_name;
  if (!suffix.empty()) name += "-" + suffix;
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / name;
  std::filesystem::create_directories(dir);
  std::ofstream cfg_out(dir / "config.json");
  cfg_out << cfg.resolved_json();
  return dir.string();
}

void write_energy_json(const std::string& path, const EnergyEstimate& e,
                       const std::string& system_label) {
  nlohmann::json j;
  j["mean"] = e.mean;
  j["stderr"] = e.stderr_;
  j["variance"] = e.variance;
  j["n_samples"] = e.n_samples;
  j["autocorr_time"] = e.autocorr_time;
  j["system"] = system_label;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

RunResult run_train(const RunConfig& cfg, const std::string& run_dir) {
  set_thread_count(cfg.threads);
  const bool want_pretrain = cfg.train.n_pretrain > 0;
  SystemBundle sys = prepare_system(cfg, want_pretrain);

  WfParams params = init_params(cfg.wf, sys.mol, cfg.seed);
  std::cout << "system: " << run_dir << "  n_el=" << sys.mol.n_el
            << "  parameters=" << count_params(params) << "\n";

  const LogAbsTarget target = wavefunction_target(params, sys.mol, sys.frames_ptr());
  WalkerBatch batch = init_walkers(sys.mol, cfg.n_walkers, cfg.seed, target, cfg.sampler);
  if (cfg.burnin_steps > 0)
    decorrelate(batch, target, sys.mol, cfg.burnin_steps, cfg.sampler, /*adapt=*/true);

  RunResult res;
  res.run_dir = run_dir;

  if (want_pretrain) {
    CsvLog plog(run_dir + "/pretrain.csv", kLogHeader);
    res.final_pretrain_loss =
        pretrain(params, *sys.scf, *sys.basis, sys.mol, sys.frames_ptr(), batch, cfg.train,
                 cfg.sampler, [&](const TrainLogRow& r) { plog.row(r); });
    // fresh adaptation phase after the parameters moved
    decorrelate(batch, target, sys.mol, cfg.burnin_steps > 0 ? cfg.burnin_steps : 1,
                cfg.sampler, /*adapt=*/true);
  }

  AdamState adam;
  const std::string ckpt_path = run_dir + "/checkpoint.bin";
  {
    CsvLog tlog(run_dir + "/log.csv", kLogHeader);
    optimize(params, sys.mol, sys.frames_ptr(), batch, cfg.train, cfg.sampler, adam,
             [&](const TrainLogRow& r) { tlog.row(r); },
             [&](long step, const WfParams& p, const WalkerBatch& b, const AdamState& a) {
               (void)step;
               save_checkpoint(ckpt_path, const_cast<WfParams&>(p), b, a, step);
             });
  }
  save_checkpoint(ckpt_path, params, batch, adam, cfg.train.n_opt);

  {
    CsvLog elog(run_dir + "/eval.csv", kLogHeader);
    res.energy = evaluate(params, sys.mol, sys.frames_ptr(), batch, cfg.train, cfg.sampler,
                          [&](const TrainLogRow& r) { elog.row(r); });
  }
  write_energy_json(run_dir + "/energy.json", res.energy,
                    std::filesystem::path(run_dir).filename().string());
  return res;
}

RunResult run_pretrain(const RunConfig& cfg, const std::string& run_dir) {
  set_thread_count(cfg.threads);
  SystemBundle sys = prepare_system(cfg, /*need_scf=*/true);
  WfParams params = init_params(cfg.wf, sys.mol, cfg.seed);
  const LogAbsTarget target = wavefunction_target(params, sys.mol, sys.frames_ptr());
  WalkerBatch batch = init_walkers(sys.mol, cfg.n_walkers, cfg.seed, target, cfg.sampler);
  if (cfg.burnin_steps > 0)
    decorrelate(batch, target, sys.mol, cfg.burnin_steps, cfg.sampler, true);

  RunResult res;
  res.run_dir = run_dir;
  CsvLog plog(run_dir + "/pretrain.csv", kLogHeader);
  res.final_pretrain_loss =
      pretrain(params, *sys.scf, *sys.basis, sys.mol, sys.frames_ptr(), batch, cfg.train,
               cfg.sampler, [&](const TrainLogRow& r) { plog.row(r); });
  AdamState adam;
  auto refs = param_refs(params);
  adam.init_like(refs);
  save_checkpoint(run_dir + "/checkpoint.bin", params, batch, adam, 0);
  return res;
}

RunResult run_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                       const std::string& run_dir) {
  set_thread_count(cfg.threads);
  if (!std::filesystem::exists(checkpoint_path))
    throw ConfigError("evaluate: checkpoint not found: " + checkpoint_path);
  SystemBundle sys = prepare_system(cfg, /*need_scf=*/false);
  WfParams params = init_params(cfg.wf, sys.mol, cfg.seed);
  CheckpointData data = load_checkpoint(checkpoint_path, params);

  RunResult res;
  res.run_dir = run_dir;
  CsvLog elog(run_dir + "/eval.csv", kLogHeader);
  res.energy = evaluate(params, sys.mol, sys.frames_ptr(), data.batch, cfg.train, cfg.sampler,
                        [&](const TrainLogRow& r) { elog.row(r); });
  write_energy_json(run_dir + "/energy.json", res.energy,
                    std::filesystem::path(run_dir).filename().string());
  return res;
}

double run_scf_cmd(const RunConfig& cfg, const std::string& dump_path) {
  const Molecule mol = cfg.molecule();
  const BasisSet basis = build_basis(mol, cfg.basis);
  const IntegralTables tables = compute_integrals(mol, basis);
  const ScfResult scf = run_scf(tables, mol, cfg.scf);
  std::cout << "scf: converged=" << (scf.converged ? "yes" : "no")
            << " iterations=" << scf.iterations;
  std::cout.precision(12);
  std::cout << " energy=" << scf.energy << " Ha\n";
  if (!dump_path.empty()) dump_integrals(tables, &scf, dump_path);
  return scf.energy;
}

void run_frames_cmd(const RunConfig& cfg, const std::string& dump_path) {
  const Molecule mol = cfg.molecule();
  const BasisSet basis = build_basis(mol, cfg.basis);
  const IntegralTables tables = compute_integrals(mol, basis);
  const ScfResult scf = run_scf(tables, mol, cfg.scf);
  if (!scf.converged) throw NumericError("frames: SCF did not converge");
  const FrameSet frames = compute_frames(scf, basis, mol);
  std::cout.precision(12);
  for (int j = 0; j < frames.n_nuc(); ++j) {
    std::cout << "nucleus " << j << " eigenvalues " << frames.eigenvalues[j].transpose()
              << (frames.degenerate[j] ? " (degenerate)" : "") << "\n"
              << frames.u[j] << "\n";
  }
  if (!dump_path.empty()) dump_frames(frames, dump_path);
}

std::vector<AblationCell> expand_ablation(const RunConfig& base, const std::string& preset) {
  if (preset != "waterfall-lite")
    throw ConfigError("unknown ablation preset: " + preset);
  struct SystemSpec {
    const char* label;
    const char* xyz;
  };
  const SystemSpec systems[] = {
      {"li", "1\n\nLi 0 0 0\n"},
      {"h2", "2\n\nH 0 0 0\nH 0 0 1.4\n"},
  };
  struct Axis {
    const char* label;
    void (*apply)(RunConfig&);
  };
  const Axis axes[] = {
      {"full", [](RunConfig&) {}},
      {"block_det", [](RunConfig& c) { c.wf.det_mode = DetMode::Block; }},
      {"ferminet_embedding",
       [](RunConfig& c) { c.wf.embedding.variant = EmbeddingVariant::FerminetLike; }},
      {"raw_features", [](RunConfig& c) { c.wf.features.mode = FeatureMode::RawDiffs; }},
      {"ones_init", [](RunConfig& c) { c.wf.envelope_init = EnvelopeInit::Ones; }},
  };
  std::vector<AblationCell> cells;
  for (const auto& s : systems) {
    for (const auto& a : axes) {
      AblationCell cell;
      cell.system = s.label;
      cell.cell = a.label;
      cell.geometry = s.xyz;
      cell.cfg = base;
      cell.cfg.geometry_inline = s.xyz;
      cell.cfg.geometry_path.clear();
      cell.cfg.unit = LengthUnit::Bohr;
      a.apply(cell.cfg);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<RunResult> run_ablate(const RunConfig& base, const std::string& preset,
                                  const std::string& out_dir) {
  const auto cells = expand_ablation(base, preset);
  std::vector<RunResult> results;
  std::vector<std::string> dirs;
  for (const auto& cell : cells) {
    RunConfig cfg = cell.cfg;
    cfg.output_dir = out_dir;
    cfg.run_name = cell.system + "_" + cell.cell;
    const std::string dir = make_run_dir(cfg);
    std::cout << "ablate: " << cfg.run_name << "\n";
    results.push_back(run_train(cfg, dir));
    dirs.push_back(dir);
  }
  write_report(dirs, out_dir);
  return results;
}

}  // namespace dlvmc
