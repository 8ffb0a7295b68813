#include "dlvmc/local_energy.hpp"

#include <mutex>

#include "dlvmc/errors.hpp"
#include "dlvmc/threads.hpp"

namespace dlvmc {

namespace {
constexpr double kCoincidenceEps = 1e-12;
}

double coulomb_ee(const Molecule& mol, const Mat& positions) {
  double v = 0.0;
  for (int i = 0; i < mol.n_el; ++i)
    for (int j = i + 1; j < mol.n_el; ++j)
      v += 1.0 / (positions.row(i) - positions.row(j)).norm();
  return v;
}

double coulomb_en(const Molecule& mol, const Mat& positions) {
  double v = 0.0;
  for (int i = 0; i < mol.n_el; ++i)
    for (const auto& nuc : mol.nuclei)
      v -= double(nuc.charge) / (positions.row(i).transpose() - nuc.position).norm();
  return v;
}

void check_no_coincidence(const Molecule& mol, const Mat& positions) {
  for (int i = 0; i < mol.n_el; ++i) {
    for (int j = i + 1; j < mol.n_el; ++j)
      if ((positions.row(i) - positions.row(j)).norm() < kCoincidenceEps)
        throw RejectedConfigurationError("electron-electron coincidence");
    for (const auto& nuc : mol.nuclei)
      if ((positions.row(i).transpose() - nuc.position).norm() < kCoincidenceEps)
        throw RejectedConfigurationError("electron-nucleus coincidence");
  }
}

Mat grad_log_psi(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                 const Mat& positions) {
  const WfJets jets = log_psi_jets(p, mol, frames, positions, 1);
  Mat g(mol.n_el, 3);
  for (int i = 0; i < mol.n_el; ++i)
    for (int a = 0; a < 3; ++a) g(i, a) = jets.dlog(0, 3 * i + a);
  return g;
}

double laplacian_log_psi(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                         const Mat& positions) {
  const WfJets jets = log_psi_jets(p, mol, frames, positions, 1);
  return jets.d2log.row(0).sum();
}

LocalEnergyParts local_energy(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                              const Mat& positions) {
  check_no_coincidence(mol, positions);
  const WfJets jets = log_psi_jets(p, mol, frames, positions, 1);
  LocalEnergyParts parts;
  parts.e_kin = -0.5 * (jets.d2log.row(0).sum() + jets.dlog.row(0).squaredNorm());
  parts.v_ee = coulomb_ee(mol, positions);
  parts.v_en = coulomb_en(mol, positions);
  parts.v_nn = mol.nuclear_repulsion();
  return parts;
}

LocalEnergyBatch local_energy_batch(const WfParams& p, const Molecule& mol,
                                    const FrameSet* frames, const Mat& positions,
                                    int n_walkers) {
  LocalEnergyBatch out;
  out.e_kin.resize(n_walkers);
  out.v_ee.resize(n_walkers);
  out.v_en.resize(n_walkers);
  out.e_local.resize(n_walkers);
  out.v_nn = mol.nuclear_repulsion();

  std::exception_ptr error;
  std::mutex error_mutex;
  parallel_blocks(n_walkers, [&](int begin, int end) {
    try {
      const int nb = end - begin;
      const Mat block = positions.middleRows(Eigen::Index(begin) * mol.n_el,
                                             Eigen::Index(nb) * mol.n_el);
      for (int w = 0; w < nb; ++w)
        check_no_coincidence(mol, block.middleRows(Eigen::Index(w) * mol.n_el, mol.n_el));
      const WfJets jets = log_psi_jets(p, mol, frames, block, nb);
      for (int w = 0; w < nb; ++w) {
        const double kin = -0.5 * (jets.d2log.row(w).sum() + jets.dlog.row(w).squaredNorm());
        const Mat wpos = block.middleRows(Eigen::Index(w) * mol.n_el, mol.n_el);
        out.e_kin[begin + w] = kin;
        out.v_ee[begin + w] = coulomb_ee(mol, wpos);
        out.v_en[begin + w] = coulomb_en(mol, wpos);
        out.e_local[begin + w] = kin + out.v_ee[begin + w] + out.v_en[begin + w] + out.v_nn;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace dlvmc
