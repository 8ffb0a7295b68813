#include "dlvmc/engine.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace detail {

Mat affine_v(const Mat& w, const Mat& b, const Mat& x) {
  Mat out = x * w.transpose();
  out.rowwise() += b.col(0).transpose();
  return out;
}

Mat linear_v(const Mat& w, const Mat& x) { return x * w.transpose(); }

Mat spin_mean_v(const Mat& x, const BatchLayout& lay, int spin) {
  Mat out = Mat::Zero(x.rows(), x.cols());
  const int ns = lay.n_spin(spin);
  if (ns == 0) return out;  // empty spin channel contributes a zero vector
  const int offset = spin == 0 ? 0 : lay.n_up;
  for (int w = 0; w < lay.n_walkers; ++w) {
    const int base = w * lay.n_el;
    Eigen::RowVectorXd mean = x.middleRows(base + offset, ns).colwise().sum() / double(ns);
    out.middleRows(base, lay.n_el).rowwise() = mean;
  }
  return out;
}

Mat spin_rows_v(const Mat& x, const BatchLayout& lay, int spin) {
  const int ns = lay.n_spin(spin);
  const int offset = spin == 0 ? 0 : lay.n_up;
  Mat out(lay.n_walkers * ns, x.cols());
  for (int w = 0; w < lay.n_walkers; ++w)
    out.middleRows(w * ns, ns) = x.middleRows(w * lay.n_el + offset, ns);
  return out;
}

Mat pair_mix_v(const Mat& gbs, const Mat& gbd, const Mat& hcs, const Mat& hcd,
               const BatchLayout& lay) {
  Mat out = Mat::Zero(lay.el_rows(), gbs.cols());
  for (int w = 0; w < lay.n_walkers; ++w)
    for (int i = 0; i < lay.n_el; ++i) {
      const int e_i = w * lay.n_el + i;
      const bool i_up = i < lay.n_up;
      for (int j = 0; j < lay.n_el; ++j) {
        const int p = e_i * lay.n_el + j;
        const int e_j = w * lay.n_el + j;
        const bool same = (j < lay.n_up) == i_up;
        if (same)
          out.row(e_i) += gbs.row(p).cwiseProduct(hcs.row(e_j));
        else
          out.row(e_i) += gbd.row(p).cwiseProduct(hcd.row(e_j));
      }
    }
  return out;
}

bool pair_is_same_spin(const BatchLayout& lay, Eigen::Index p) {
  const int i = static_cast<int>((p / lay.n_el) % lay.n_el);
  const int j = static_cast<int>(p % lay.n_el);
  return (i < lay.n_up) == (j < lay.n_up);
}

Mat pair_select_v(const Mat& a, const Mat& b, const BatchLayout& lay) {
  Mat out(a.rows(), a.cols());
  for (Eigen::Index p = 0; p < a.rows(); ++p)
    out.row(p) = pair_is_same_spin(lay, p) ? a.row(p) : b.row(p);
  return out;
}

Mat pair_sum_v(const Mat& g, const BatchLayout& lay) {
  Mat out = Mat::Zero(lay.el_rows(), g.cols());
  for (int e = 0; e < lay.el_rows(); ++e)
    out.row(e) = g.middleRows(e * lay.n_el, lay.n_el).colwise().sum();
  return out;
}

Mat nuc_convolve_v(const Mat& vb, const Mat& zc, const BatchLayout& lay) {
  Mat out = Mat::Zero(lay.el_rows(), vb.cols());
  for (int e = 0; e < lay.el_rows(); ++e)
    for (int nI = 0; nI < lay.n_nuc; ++nI)
      out.row(e) += vb.row(e * lay.n_nuc + nI).cwiseProduct(zc.row(nI));
  return out;
}

Mat envelope_v(const Mat& rho, const Mat& pi, const Mat& omega) {
  const int n_orb = static_cast<int>(pi.rows());
  Mat out = Mat::Zero(rho.rows(), n_orb);
  for (int ko = 0; ko < n_orb; ++ko)
    for (int nI = 0; nI < rho.cols(); ++nI)
      out.col(ko) += pi(ko, nI) * (-std::abs(omega(ko, nI)) * rho.col(nI).array()).exp().matrix();
  return out;
}

Mat nuc_diff_v(const Mat& r, const Mat& nuclei, const BatchLayout& lay) {
  Mat out(lay.nuc_rows(), 3);
  for (int e = 0; e < lay.el_rows(); ++e)
    for (int nI = 0; nI < lay.n_nuc; ++nI)
      out.row(e * lay.n_nuc + nI) = r.row(e) - nuclei.row(nI);
  return out;
}

Mat rotate_local_v(const Mat& rho, const std::vector<Eigen::Matrix3d>& u,
                   const BatchLayout& lay) {
  Mat out(rho.rows(), 3);
  for (int e = 0; e < lay.el_rows(); ++e)
    for (int nI = 0; nI < lay.n_nuc; ++nI) {
      const int row = e * lay.n_nuc + nI;
      out.row(row) = rho.row(row) * u[nI];  // components in the local frame: U^T rho
    }
  return out;
}

Mat pair_diff_v(const Mat& r, const BatchLayout& lay) {
  Mat out(lay.pair_rows(), 3);
  for (int w = 0; w < lay.n_walkers; ++w)
    for (int i = 0; i < lay.n_el; ++i)
      for (int j = 0; j < lay.n_el; ++j)
        out.row((w * lay.n_el + i) * lay.n_el + j) =
            r.row(w * lay.n_el + i) - r.row(w * lay.n_el + j);
  return out;
}

Mat regroup_nuc_v(const Mat& x, const BatchLayout& lay) {
  const int c = static_cast<int>(x.cols());
  Mat out(lay.el_rows(), c * lay.n_nuc);
  for (int e = 0; e < lay.el_rows(); ++e)
    for (int nI = 0; nI < lay.n_nuc; ++nI)
      out.block(e, nI * c, 1, c) = x.row(e * lay.n_nuc + nI);
  return out;
}

DetFactor det_factor_impl(const Mat& a, bool with_inverse) {
  DetFactor f;
  const int n = static_cast<int>(a.rows());
  if (n == 0) {
    f.log_abs = 0.0;
    f.sign = 1.0;
    if (with_inverse) f.inverse = Mat(0, 0);
    return f;
  }
  Eigen::PartialPivLU<Mat> lu(a);
  double log_abs = 0.0;
  double sign = static_cast<double>(lu.permutationP().determinant());
  for (int i = 0; i < n; ++i) {
    const double d = lu.matrixLU()(i, i);
    if (d == 0.0) {
      f.log_abs = -std::numeric_limits<double>::infinity();
      f.sign = 0.0;
      return f;
    }
    log_abs += std::log(std::abs(d));
    if (d < 0.0) sign = -sign;
  }
  f.log_abs = log_abs;
  f.sign = sign;
  if (with_inverse) f.inverse = lu.inverse();
  return f;
}

DetFactor det_factor(const Mat& a) { return det_factor_impl(a, true); }

Mat assemble_det(const Mat& m_up, const Mat& m_dn, const BatchLayout& lay, int w, int d,
                 DetMode mode, int spin_block) {
  if (mode == DetMode::Block) {
    const int ns = lay.n_spin(spin_block);
    const Mat& src = spin_block == 0 ? m_up : m_dn;
    Mat a(ns, ns);
    for (int i = 0; i < ns; ++i)
      for (int k = 0; k < ns; ++k) a(k, i) = src(w * ns + i, d * ns + k);
    return a;
  }
  const int n = lay.n_el;
  Mat a(n, n);
  for (int i = 0; i < n; ++i) {
    const bool up = i < lay.n_up;
    const int row = up ? w * lay.n_up + i : w * lay.n_dn() + (i - lay.n_up);
    const Mat& src = up ? m_up : m_dn;
    for (int k = 0; k < n; ++k) a(k, i) = src(row, d * n + k);
  }
  return a;
}

namespace {

struct SignedLse {
  double log_abs;
  double sign;
  Eigen::VectorXd weights;  // det_d / psi; zero row if psi == 0
};

SignedLse signed_lse(const Eigen::VectorXd& log_dets, const Eigen::VectorXd& signs) {
  SignedLse r;
  r.weights = Eigen::VectorXd::Zero(log_dets.size());
  double m = -std::numeric_limits<double>::infinity();
  for (int d = 0; d < log_dets.size(); ++d)
    if (signs[d] != 0.0 && log_dets[d] > m) m = log_dets[d];
  if (!std::isfinite(m)) {
    r.log_abs = -std::numeric_limits<double>::infinity();
    r.sign = 0.0;
    return r;
  }
  double u = 0.0;
  for (int d = 0; d < log_dets.size(); ++d)
    if (signs[d] != 0.0) u += signs[d] * std::exp(log_dets[d] - m);
  if (u == 0.0) {
    r.log_abs = -std::numeric_limits<double>::infinity();
    r.sign = 0.0;
    return r;
  }
  r.log_abs = m + std::log(std::abs(u));
  r.sign = u > 0.0 ? 1.0 : -1.0;
  for (int d = 0; d < log_dets.size(); ++d)
    if (signs[d] != 0.0) r.weights[d] = signs[d] * std::exp(log_dets[d] - m) / u;
  return r;
}

}  // namespace
}  // namespace detail

// ---------------------------------------------------------------------------
// ValueEngine

using detail::affine_v;
using detail::linear_v;

Mat ValueEngine::affine(P w, P b, const T& x) { return affine_v(*w, *b, x); }
Mat ValueEngine::linear(P w, const T& x) { return linear_v(*w, x); }
Mat ValueEngine::tanh_(const T& x) { return x.array().tanh(); }
Mat ValueEngine::add(const T& a, const T& b) { return a + b; }

Mat ValueEngine::concat_cols(const std::vector<const T*>& xs) {
  Eigen::Index rows = xs.front()->rows(), cols = 0;
  for (const T* x : xs) cols += x->cols();
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const T* x : xs) {
    out.middleCols(at, x->cols()) = *x;
    at += x->cols();
  }
  return out;
}

Mat ValueEngine::spin_mean(const T& x, const BatchLayout& lay, int spin) {
  return detail::spin_mean_v(x, lay, spin);
}
Mat ValueEngine::spin_rows(const T& x, const BatchLayout& lay, int spin) {
  return detail::spin_rows_v(x, lay, spin);
}
Mat ValueEngine::pair_mix(const T& gbs, const T& gbd, const T& hcs, const T& hcd,
                          const BatchLayout& lay) {
  return detail::pair_mix_v(gbs, gbd, hcs, hcd, lay);
}
Mat ValueEngine::pair_sum(const T& g, const BatchLayout& lay) {
  return detail::pair_sum_v(g, lay);
}
Mat ValueEngine::pair_select(const T& a, const T& b, const BatchLayout& lay) {
  return detail::pair_select_v(a, b, lay);
}
Mat ValueEngine::nuc_convolve(const T& vb, const T& zc, const BatchLayout& lay) {
  return detail::nuc_convolve_v(vb, zc, lay);
}
Mat ValueEngine::hadamard(const T& a, const T& b) { return a.cwiseProduct(b); }
Mat ValueEngine::envelope_eval(const T& rho, P pi, P omega) {
  return detail::envelope_v(rho, *pi, *omega);
}

SlaterResult<Mat> ValueEngine::slater_logsumexp(const T& m_up, const T& m_dn,
                                                const BatchLayout& lay, int n_det,
                                                DetMode mode) {
  SlaterResult<Mat> out;
  out.log_psi.resize(lay.n_walkers, 1);
  out.sign.resize(lay.n_walkers);
  for (int w = 0; w < lay.n_walkers; ++w) {
    Eigen::VectorXd logs(n_det), signs(n_det);
    for (int d = 0; d < n_det; ++d) {
      if (mode == DetMode::Dense) {
        const Mat a = detail::assemble_det(m_up, m_dn, lay, w, d, mode, -1);
        const auto f = detail::det_factor_impl(a, false);
        logs[d] = f.log_abs;
        signs[d] = f.sign;
      } else {
        const auto fu =
            detail::det_factor_impl(detail::assemble_det(m_up, m_dn, lay, w, d, mode, 0), false);
        const auto fd =
            detail::det_factor_impl(detail::assemble_det(m_up, m_dn, lay, w, d, mode, 1), false);
        logs[d] = fu.log_abs + fd.log_abs;
        signs[d] = fu.sign * fd.sign;
      }
    }
    const auto lse = detail::signed_lse(logs, signs);
    out.log_psi(w, 0) = lse.log_abs;
    out.sign[w] = lse.sign;
  }
  return out;
}

Mat ValueEngine::nuc_diff(const T& r, const Mat& nuclei, const BatchLayout& lay) {
  return detail::nuc_diff_v(r, nuclei, lay);
}
Mat ValueEngine::rotate_local(const T& rho, const std::vector<Eigen::Matrix3d>& u,
                              const BatchLayout& lay) {
  return detail::rotate_local_v(rho, u, lay);
}
Mat ValueEngine::norm_rows(const T& x) { return x.rowwise().norm(); }
Mat ValueEngine::pair_diff(const T& r, const BatchLayout& lay) {
  return detail::pair_diff_v(r, lay);
}
Mat ValueEngine::pair_norm(const T& pd, const BatchLayout& lay) {
  Mat out = pd.rowwise().norm();
  for (int e = 0; e < lay.el_rows(); ++e) {
    const int i = e % lay.n_el;
    out(e * lay.n_el + i, 0) = 0.0;  // diagonal pairs are identically zero
  }
  return out;
}
Mat ValueEngine::regroup_nuc(const T& x, const BatchLayout& lay) {
  return detail::regroup_nuc_v(x, lay);
}

// ---------------------------------------------------------------------------
// JetEngine

namespace {

// out = phi(x): out.g = phi1 .* x.g, out.h = phi2 .* x.g^2 + phi1 .* x.h,
// with phi1/phi2 evaluated on x.v and broadcast across the K channels.
JetBatch unary_chain(const JetBatch& x, Mat value, const Mat& phi1, const Mat& phi2) {
  JetBatch out;
  out.k = x.k;
  out.v = std::move(value);
  if (x.is_const()) return out;
  const auto rows = x.v.rows();
  out.g.resize(x.g.rows(), x.g.cols());
  out.h.resize(x.h.rows(), x.h.cols());
  for (int k = 0; k < x.k; ++k) {
    const auto gk = x.g.middleRows(k * rows, rows).array();
    const auto hk = x.h.middleRows(k * rows, rows).array();
    out.g.middleRows(k * rows, rows) = phi1.array() * gk;
    out.h.middleRows(k * rows, rows) = phi2.array() * gk.square() + phi1.array() * hk;
  }
  return out;
}

// materialize a constant jet so channel blocks can be indexed uniformly
const JetBatch& with_grad(const JetBatch& x, JetBatch& storage, int k) {
  if (!x.is_const()) return x;
  storage = JetBatch::zeros_like(x.v, k);
  return storage;
}

// row-gather helper applied to v and every channel of g/h
template <class F>
JetBatch row_op(const JetBatch& x, Eigen::Index out_rows, F&& fn) {
  JetBatch out;
  out.k = x.k;
  out.v.resize(out_rows, x.v.cols());
  fn(x.v, out.v);
  if (x.is_const()) return out;
  out.g.resize(out_rows * x.k, x.v.cols());
  out.h.resize(out_rows * x.k, x.v.cols());
  const auto rows = x.v.rows();
  for (int k = 0; k < x.k; ++k) {
    auto gk = out.g.middleRows(k * out_rows, out_rows);
    auto hk = out.h.middleRows(k * out_rows, out_rows);
    Mat tmp_in = x.g.middleRows(k * rows, rows);
    fn(tmp_in, gk);
    tmp_in = x.h.middleRows(k * rows, rows);
    fn(tmp_in, hk);
  }
  return out;
}

}  // namespace

JetBatch JetEngine::affine(P w, P b, const T& x) {
  JetBatch out;
  out.k = k;
  out.v = affine_v(*w, *b, x.v);
  if (!x.is_const()) {
    out.g = x.g * w->transpose();
    out.h = x.h * w->transpose();
  }
  return out;
}

JetBatch JetEngine::linear(P w, const T& x) {
  JetBatch out;
  out.k = k;
  out.v = linear_v(*w, x.v);
  if (!x.is_const()) {
    out.g = x.g * w->transpose();
    out.h = x.h * w->transpose();
  }
  return out;
}

JetBatch JetEngine::tanh_(const T& x) {
  Mat y = x.v.array().tanh();
  if (x.is_const()) return JetBatch::constant(std::move(y), k);
  Mat phi1 = (1.0 - y.array().square()).matrix();
  Mat phi2 = (-2.0 * y.array() * (1.0 - y.array().square())).matrix();
  return unary_chain(x, std::move(y), phi1, phi2);
}

JetBatch JetEngine::add(const T& a, const T& b) {
  JetBatch out;
  out.k = k;
  out.v = a.v + b.v;
  if (a.is_const() && b.is_const()) return out;
  if (a.is_const()) {
    out.g = b.g;
    out.h = b.h;
  } else if (b.is_const()) {
    out.g = a.g;
    out.h = a.h;
  } else {
    out.g = a.g + b.g;
    out.h = a.h + b.h;
  }
  return out;
}

JetBatch JetEngine::concat_cols(const std::vector<const T*>& xs) {
  JetBatch out;
  out.k = k;
  Eigen::Index rows = xs.front()->v.rows(), cols = 0;
  bool any_grad = false;
  for (const T* x : xs) {
    cols += x->v.cols();
    any_grad |= !x->is_const();
  }
  out.v.resize(rows, cols);
  if (any_grad) {
    out.g = Mat::Zero(rows * k, cols);
    out.h = Mat::Zero(rows * k, cols);
  }
  Eigen::Index at = 0;
  for (const T* x : xs) {
    out.v.middleCols(at, x->v.cols()) = x->v;
    if (any_grad && !x->is_const()) {
      out.g.middleCols(at, x->v.cols()) = x->g;
      out.h.middleCols(at, x->v.cols()) = x->h;
    }
    at += x->v.cols();
  }
  return out;
}

JetBatch JetEngine::spin_mean(const T& x, const BatchLayout& lay, int spin) {
  return row_op(x, x.v.rows(), [&](const Mat& in, Eigen::Ref<Mat> out) {
    out = detail::spin_mean_v(in, lay, spin);
  });
}

JetBatch JetEngine::spin_rows(const T& x, const BatchLayout& lay, int spin) {
  return row_op(x, Eigen::Index(lay.n_walkers) * lay.n_spin(spin),
                [&](const Mat& in, Eigen::Ref<Mat> out) {
                  out = detail::spin_rows_v(in, lay, spin);
                });
}

JetBatch JetEngine::pair_sum(const T& g, const BatchLayout& lay) {
  return row_op(g, lay.el_rows(), [&](const Mat& in, Eigen::Ref<Mat> out) {
    out = detail::pair_sum_v(in, lay);
  });
}

JetBatch JetEngine::pair_select(const T& a_in, const T& b_in, const BatchLayout& lay) {
  JetBatch sa, sb;
  const JetBatch& a = with_grad(a_in, sa, k);
  const JetBatch& b = with_grad(b_in, sb, k);
  JetBatch out;
  out.k = k;
  out.v = detail::pair_select_v(a.v, b.v, lay);
  const auto rows = a.v.rows();
  out.g.resize(rows * k, a.v.cols());
  out.h.resize(rows * k, a.v.cols());
  for (int kk = 0; kk < k; ++kk) {
    out.g.middleRows(kk * rows, rows) = detail::pair_select_v(
        a.g.middleRows(kk * rows, rows), b.g.middleRows(kk * rows, rows), lay);
    out.h.middleRows(kk * rows, rows) = detail::pair_select_v(
        a.h.middleRows(kk * rows, rows), b.h.middleRows(kk * rows, rows), lay);
  }
  return out;
}

JetBatch JetEngine::pair_mix(const T& gbs_in, const T& gbd_in, const T& hcs_in, const T& hcd_in,
                             const BatchLayout& lay) {
  JetBatch sg, sd, shs, shd;
  const JetBatch& gbs = with_grad(gbs_in, sg, k);
  const JetBatch& gbd = with_grad(gbd_in, sd, k);
  const JetBatch& hcs = with_grad(hcs_in, shs, k);
  const JetBatch& hcd = with_grad(hcd_in, shd, k);
  JetBatch out;
  out.k = k;
  out.v = detail::pair_mix_v(gbs.v, gbd.v, hcs.v, hcd.v, lay);
  const Eigen::Index erows = lay.el_rows();
  const Eigen::Index prows = lay.pair_rows();
  out.g = Mat::Zero(erows * k, out.v.cols());
  out.h = Mat::Zero(erows * k, out.v.cols());
  for (int w = 0; w < lay.n_walkers; ++w)
    for (int i = 0; i < lay.n_el; ++i) {
      const int e_i = w * lay.n_el + i;
      const bool i_up = i < lay.n_up;
      for (int j = 0; j < lay.n_el; ++j) {
        const int p = e_i * lay.n_el + j;
        const int e_j = w * lay.n_el + j;
        const bool same = (j < lay.n_up) == i_up;
        const JetBatch& gb = same ? gbs : gbd;
        const JetBatch& hc = same ? hcs : hcd;
        for (int kk = 0; kk < k; ++kk) {
          const auto gv = gb.v.row(p).array();
          const auto hv = hc.v.row(e_j).array();
          const auto gg = gb.g.row(kk * prows + p).array();
          const auto hg = hc.g.row(kk * erows + e_j).array();
          const auto gh = gb.h.row(kk * prows + p).array();
          const auto hh = hc.h.row(kk * erows + e_j).array();
          out.g.row(kk * erows + e_i).array() += gg * hv + gv * hg;
          out.h.row(kk * erows + e_i).array() += gh * hv + 2.0 * gg * hg + gv * hh;
        }
      }
    }
  return out;
}

JetBatch JetEngine::nuc_convolve(const T& vb_in, const T& zc, const BatchLayout& lay) {
  JetBatch sv;
  const JetBatch& vb = with_grad(vb_in, sv, k);
  JetBatch out;
  out.k = k;
  out.v = detail::nuc_convolve_v(vb.v, zc.v, lay);
  const Eigen::Index erows = lay.el_rows();
  const Eigen::Index nrows = lay.nuc_rows();
  out.g = Mat::Zero(erows * k, out.v.cols());
  out.h = Mat::Zero(erows * k, out.v.cols());
  const bool zc_const = zc.is_const();
  for (Eigen::Index e = 0; e < erows; ++e)
    for (int nI = 0; nI < lay.n_nuc; ++nI) {
      const Eigen::Index row = e * lay.n_nuc + nI;
      for (int kk = 0; kk < k; ++kk) {
        const auto vv = vb.v.row(row).array();
        const auto zv = zc.v.row(nI).array();
        const auto vg = vb.g.row(kk * nrows + row).array();
        const auto vh = vb.h.row(kk * nrows + row).array();
        if (zc_const) {
          out.g.row(kk * erows + e).array() += vg * zv;
          out.h.row(kk * erows + e).array() += vh * zv;
        } else {
          const auto zg = zc.g.row(kk * lay.n_nuc + nI).array();
          const auto zh = zc.h.row(kk * lay.n_nuc + nI).array();
          out.g.row(kk * erows + e).array() += vg * zv + vv * zg;
          out.h.row(kk * erows + e).array() += vh * zv + 2.0 * vg * zg + vv * zh;
        }
      }
    }
  return out;
}

JetBatch JetEngine::hadamard(const T& a, const T& b) {
  JetBatch out;
  out.k = k;
  out.v = a.v.cwiseProduct(b.v);
  if (a.is_const() && b.is_const()) return out;
  const auto rows = a.v.rows();
  out.g.resize(rows * k, a.v.cols());
  out.h.resize(rows * k, a.v.cols());
  for (int kk = 0; kk < k; ++kk) {
    auto og = out.g.middleRows(kk * rows, rows).array();
    auto oh = out.h.middleRows(kk * rows, rows).array();
    if (a.is_const()) {
      og = a.v.array() * b.gk(kk).array();
      oh = a.v.array() * b.hk(kk).array();
    } else if (b.is_const()) {
      og = a.gk(kk).array() * b.v.array();
      oh = a.hk(kk).array() * b.v.array();
    } else {
      og = a.gk(kk).array() * b.v.array() + a.v.array() * b.gk(kk).array();
      oh = a.hk(kk).array() * b.v.array() + 2.0 * a.gk(kk).array() * b.gk(kk).array() +
           a.v.array() * b.hk(kk).array();
    }
  }
  return out;
}

JetBatch JetEngine::envelope_eval(const T& rho_in, P pi, P omega) {
  JetBatch srho;
  const JetBatch& rho = with_grad(rho_in, srho, k);
  JetBatch out;
  out.k = k;
  const int n_orb = static_cast<int>(pi->rows());
  const auto rows = rho.v.rows();
  out.v = Mat::Zero(rows, n_orb);
  out.g = Mat::Zero(rows * k, n_orb);
  out.h = Mat::Zero(rows * k, n_orb);
  if (rows == 0) return out;
  for (int ko = 0; ko < n_orb; ++ko)
    for (int nI = 0; nI < rho.v.cols(); ++nI) {
      const double wexp = std::abs((*omega)(ko, nI));
      const double p = (*pi)(ko, nI);
      const Eigen::ArrayXd e = (-wexp * rho.v.col(nI).array()).exp();
      out.v.col(ko) += (p * e).matrix();
      for (int kk = 0; kk < k; ++kk) {
        const auto rg = rho.g.col(nI).segment(kk * rows, rows).array();
        const auto rh = rho.h.col(nI).segment(kk * rows, rows).array();
        const Eigen::ArrayXd ug = -wexp * rg;
        const Eigen::ArrayXd uh = -wexp * rh;
        out.g.col(ko).segment(kk * rows, rows).array() += p * e * ug;
        out.h.col(ko).segment(kk * rows, rows).array() += p * e * (ug.square() + uh);
      }
    }
  return out;
}

SlaterResult<JetBatch> JetEngine::slater_logsumexp(const T& m_up, const T& m_dn,
                                                   const BatchLayout& lay, int n_det,
                                                   DetMode mode) {
  SlaterResult<JetBatch> out;
  out.sign.resize(lay.n_walkers);
  out.log_psi.k = k;
  out.log_psi.v.resize(lay.n_walkers, 1);
  out.log_psi.g = Mat::Zero(Eigen::Index(lay.n_walkers) * k, 1);
  out.log_psi.h = Mat::Zero(Eigen::Index(lay.n_walkers) * k, 1);

  auto jet_of_block = [&](int w, int d, int spin_block, Eigen::VectorXd& lg,
                          Eigen::VectorXd& lh) -> detail::DetFactor {
    const Mat a = detail::assemble_det(m_up.v, m_dn.v, lay, w, d, mode, spin_block);
    auto f = detail::det_factor_impl(a, true);
    lg.setZero(k);
    lh.setZero(k);
    if (f.sign == 0.0) return f;
    const int n = static_cast<int>(a.rows());
    for (int kk = 0; kk < k; ++kk) {
      Mat ag(n, n), ah(n, n);
      for (int i = 0; i < n; ++i) {
        int row;
        const JetBatch* s;
        if (mode == DetMode::Block) {
          const int nsb = lay.n_spin(spin_block);
          s = spin_block == 0 ? &m_up : &m_dn;
          row = w * nsb + i;
        } else {
          const bool up = i < lay.n_up;
          s = up ? &m_up : &m_dn;
          row = up ? w * lay.n_up + i : w * lay.n_dn() + (i - lay.n_up);
        }
        const int n_orb = static_cast<int>(s->v.cols()) / n_det;
        const auto srows = s->v.rows();
        for (int kcol = 0; kcol < n; ++kcol) {
          ag(kcol, i) = s->g(kk * srows + row, d * n_orb + kcol);
          ah(kcol, i) = s->h(kk * srows + row, d * n_orb + kcol);
        }
      }
      const Mat x = f.inverse * ag;
      lg[kk] = x.trace();
      lh[kk] = (f.inverse.array() * ah.transpose().array()).sum() -
               (x.array() * x.transpose().array()).sum();
    }
    return f;
  };

  for (int w = 0; w < lay.n_walkers; ++w) {
    Eigen::VectorXd logs(n_det), signs(n_det);
    Mat gs = Mat::Zero(n_det, k), hs = Mat::Zero(n_det, k);
    for (int d = 0; d < n_det; ++d) {
      Eigen::VectorXd lg, lh;
      if (mode == DetMode::Dense) {
        const auto f = jet_of_block(w, d, -1, lg, lh);
        logs[d] = f.log_abs;
        signs[d] = f.sign;
        gs.row(d) = lg.transpose();
        hs.row(d) = lh.transpose();
      } else {
        Eigen::VectorXd lg2, lh2;
        const auto fu = jet_of_block(w, d, 0, lg, lh);
        const auto fd = jet_of_block(w, d, 1, lg2, lh2);
        logs[d] = fu.log_abs + fd.log_abs;
        signs[d] = fu.sign * fd.sign;
        gs.row(d) = (lg + lg2).transpose();
        hs.row(d) = (lh + lh2).transpose();
      }
    }
    const auto lse = detail::signed_lse(logs, signs);
    out.log_psi.v(w, 0) = lse.log_abs;
    out.sign[w] = lse.sign;
    if (lse.sign == 0.0)
      throw RejectedConfigurationError("slater_logsumexp: derivative on the nodal set");
    for (int kk = 0; kk < k; ++kk) {
      double gsum = 0.0, curv = 0.0;
      for (int d = 0; d < n_det; ++d) {
        if (lse.weights[d] == 0.0) continue;
        gsum += lse.weights[d] * gs(d, kk);
        curv += lse.weights[d] * (hs(d, kk) + gs(d, kk) * gs(d, kk));
      }
      out.log_psi.g(kk * lay.n_walkers + w, 0) = gsum;
      out.log_psi.h(kk * lay.n_walkers + w, 0) = curv - gsum * gsum;
    }
  }
  return out;
}

JetBatch JetEngine::positions(const Mat& r) {
  JetBatch out = JetBatch::zeros_like(r, k);
  const auto rows = r.rows();
  const int n_el = k / 3;
  for (int e = 0; e < rows; ++e) {
    const int i = int(e) % n_el;
    for (int a = 0; a < 3; ++a) out.g((3 * i + a) * rows + e, a) = 1.0;
  }
  return out;
}

JetBatch JetEngine::nuc_diff(const T& r, const Mat& nuclei, const BatchLayout& lay) {
  // replicate rows per nucleus (derivatives unchanged), then shift the values
  JetBatch out = row_op(r, lay.nuc_rows(), [&](const Mat& in, Eigen::Ref<Mat> o) {
    for (int e = 0; e < lay.el_rows(); ++e)
      for (int nI = 0; nI < lay.n_nuc; ++nI) o.row(e * lay.n_nuc + nI) = in.row(e);
  });
  for (int e = 0; e < lay.el_rows(); ++e)
    for (int nI = 0; nI < lay.n_nuc; ++nI) out.v.row(e * lay.n_nuc + nI) -= nuclei.row(nI);
  return out;
}

JetBatch JetEngine::rotate_local(const T& rho, const std::vector<Eigen::Matrix3d>& u,
                                 const BatchLayout& lay) {
  return row_op(rho, rho.v.rows(), [&](const Mat& in, Eigen::Ref<Mat> out) {
    out = detail::rotate_local_v(in, u, lay);
  });
}

JetBatch JetEngine::norm_rows(const T& x) {
  JetBatch out;
  out.k = k;
  const auto rows = x.v.rows();
  out.v = x.v.rowwise().norm();
  out.g = Mat::Zero(rows * k, 1);
  out.h = Mat::Zero(rows * k, 1);
  for (Eigen::Index e = 0; e < rows; ++e) {
    const double n = out.v(e, 0);
    if (n == 0.0) continue;  // structurally zero rows keep zero derivatives
    for (int kk = 0; kk < k; ++kk) {
      double sg = 0.0, sh = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double xv = x.v(e, c);
        const double xg = x.g(kk * rows + e, c);
        const double xh = x.h(kk * rows + e, c);
        sg += xv * xg;
        sh += xg * xg + xv * xh;
      }
      const double ng = sg / n;
      out.g(kk * rows + e, 0) = ng;
      out.h(kk * rows + e, 0) = sh / n - ng * ng / n;
    }
  }
  return out;
}

JetBatch JetEngine::pair_diff(const T& r, const BatchLayout& lay) {
  return row_op(r, lay.pair_rows(), [&](const Mat& in, Eigen::Ref<Mat> out) {
    out = detail::pair_diff_v(in, lay);
  });
}

JetBatch JetEngine::pair_norm(const T& pd, const BatchLayout& lay) {
  JetBatch out = norm_rows(pd);
  const auto rows = pd.v.rows();
  for (int e = 0; e < lay.el_rows(); ++e) {
    const int i = e % lay.n_el;
    const Eigen::Index row = Eigen::Index(e) * lay.n_el + i;
    out.v(row, 0) = 0.0;
    for (int kk = 0; kk < k; ++kk) {
      out.g(kk * rows + row, 0) = 0.0;
      out.h(kk * rows + row, 0) = 0.0;
    }
  }
  return out;
}

JetBatch JetEngine::regroup_nuc(const T& x, const BatchLayout& lay) {
  JetBatch out;
  out.k = k;
  out.v = detail::regroup_nuc_v(x.v, lay);
  const auto in_rows = x.v.rows();
  const auto out_rows = out.v.rows();
  out.g.resize(out_rows * k, out.v.cols());
  out.h.resize(out_rows * k, out.v.cols());
  for (int kk = 0; kk < k; ++kk) {
    out.g.middleRows(kk * out_rows, out_rows) =
        detail::regroup_nuc_v(x.g.middleRows(kk * in_rows, in_rows), lay);
    out.h.middleRows(kk * out_rows, out_rows) =
        detail::regroup_nuc_v(x.h.middleRows(kk * in_rows, in_rows), lay);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape

void Tape::backward(Ref root, const Mat& seed) {
  for (auto& n : nodes_) n.adjoint.resize(0, 0);
  auto& r = nodes_[root];
  if (!r.track) return;
  r.adjoint = seed;
  for (int i = root; i >= 0; --i) {
    auto& n = nodes_[i];
    if (n.back && n.track && n.adjoint.size() != 0) n.back(*this);
  }
}

// ---------------------------------------------------------------------------
// TapeEngine

namespace {
bool any_tracked(const Tape& t, std::initializer_list<Tape::Ref> refs) {
  for (auto r : refs)
    if (t.tracked(r)) return true;
  return false;
}
}  // namespace

void TapeEngine::tapeback(Tape::Ref node, std::function<void(Tape&)> fn) {
  tape->set_back(node, std::move(fn));
}

Tape::Ref TapeEngine::affine(P w, P b, const T& x) {
  Mat v = affine_v(tape->value(w), tape->value(b), tape->value(x));
  const bool track = any_tracked(*tape, {w, b, x});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, w, b, x](Tape& t) {
    const Mat& adj = t.adjoint(out);
    if (t.tracked(x)) t.add_adjoint(x, adj * t.value(w));
    if (t.tracked(w)) t.add_adjoint(w, adj.transpose() * t.value(x));
    if (t.tracked(b)) t.add_adjoint(b, adj.colwise().sum().transpose());
  });
  return out;
}

Tape::Ref TapeEngine::linear(P w, const T& x) {
  Mat v = linear_v(tape->value(w), tape->value(x));
  const bool track = any_tracked(*tape, {w, x});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, w, x](Tape& t) {
    const Mat& adj = t.adjoint(out);
    if (t.tracked(x)) t.add_adjoint(x, adj * t.value(w));
    if (t.tracked(w)) t.add_adjoint(w, adj.transpose() * t.value(x));
  });
  return out;
}

Tape::Ref TapeEngine::tanh_(const T& x) {
  Mat v = tape->value(x).array().tanh();
  const bool track = tape->tracked(x);
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, x](Tape& t) {
    const Mat& y = t.value(out);
    t.add_adjoint(x, (t.adjoint(out).array() * (1.0 - y.array().square())).matrix());
  });
  return out;
}

Tape::Ref TapeEngine::add(const T& a, const T& b) {
  Mat v = tape->value(a) + tape->value(b);
  const bool track = any_tracked(*tape, {a, b});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, a, b](Tape& t) {
    if (t.tracked(a)) t.add_adjoint(a, t.adjoint(out));
    if (t.tracked(b)) t.add_adjoint(b, t.adjoint(out));
  });
  return out;
}

Tape::Ref TapeEngine::sub(const T& a, const T& b) {
  Mat v = tape->value(a) - tape->value(b);
  const bool track = any_tracked(*tape, {a, b});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, a, b](Tape& t) {
    if (t.tracked(a)) t.add_adjoint(a, t.adjoint(out));
    if (t.tracked(b)) t.add_adjoint(b, -t.adjoint(out));
  });
  return out;
}

Tape::Ref TapeEngine::scale(const T& x, double s) {
  Mat v = tape->value(x) * s;
  const bool track = tape->tracked(x);
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, x, s](Tape& t) { t.add_adjoint(x, t.adjoint(out) * s); });
  return out;
}

Tape::Ref TapeEngine::mean_all(const T& x) {
  const double n = double(tape->value(x).size());
  Mat v(1, 1);
  v(0, 0) = tape->value(x).sum() / n;
  const bool track = tape->tracked(x);
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, x, n](Tape& t) {
    const double a = t.adjoint(out)(0, 0) / n;
    t.add_adjoint(x, Mat::Constant(t.value(x).rows(), t.value(x).cols(), a));
  });
  return out;
}

Tape::Ref TapeEngine::concat_cols(const std::vector<const T*>& xs) {
  Eigen::Index rows = tape->value(*xs.front()).rows(), cols = 0;
  bool track = false;
  for (const T* x : xs) {
    cols += tape->value(*x).cols();
    track |= tape->tracked(*x);
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<Tape::Ref, Eigen::Index>> spans;
  for (const T* x : xs) {
    v.middleCols(at, tape->value(*x).cols()) = tape->value(*x);
    spans.emplace_back(*x, at);
    at += tape->value(*x).cols();
  }
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, spans](Tape& t) {
    for (const auto& [ref, start] : spans) {
      if (!t.tracked(ref)) continue;
      t.add_adjoint(ref, t.adjoint(out).middleCols(start, t.value(ref).cols()));
    }
  });
  return out;
}

Tape::Ref TapeEngine::spin_mean(const T& x, const BatchLayout& lay, int spin) {
  Mat v = detail::spin_mean_v(tape->value(x), lay, spin);
  const bool track = tape->tracked(x);
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, x, lay, spin](Tape& t) {
    const int ns = lay.n_spin(spin);
    if (ns == 0) return;
    const int offset = spin == 0 ? 0 : lay.n_up;
    const Mat& adj = t.adjoint(out);
    Mat dx = Mat::Zero(t.value(x).rows(), t.value(x).cols());
    for (int w = 0; w < lay.n_walkers; ++w) {
      const int base = w * lay.n_el;
      const Eigen::RowVectorXd total = adj.middleRows(base, lay.n_el).colwise().sum() / double(ns);
      dx.middleRows(base + offset, ns).rowwise() += total;
    }
    t.add_adjoint(x, dx);
  });
  return out;
}

Tape::Ref TapeEngine::spin_rows(const T& x, const BatchLayout& lay, int spin) {
  Mat v = detail::spin_rows_v(tape->value(x), lay, spin);
  const bool track = tape->tracked(x);
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, x, lay, spin](Tape& t) {
    const int ns = lay.n_spin(spin);
    const int offset = spin == 0 ? 0 : lay.n_up;
    const Mat& adj = t.adjoint(out);
    Mat dx = Mat::Zero(t.value(x).rows(), t.value(x).cols());
    for (int w = 0; w < lay.n_walkers; ++w)
      dx.middleRows(w * lay.n_el + offset, ns) = adj.middleRows(w * ns, ns);
    t.add_adjoint(x, dx);
  });
  return out;
}

Tape::Ref TapeEngine::pair_mix(const T& gbs, const T& gbd, const T& hcs, const T& hcd,
                               const BatchLayout& lay) {
  Mat v = detail::pair_mix_v(tape->value(gbs), tape->value(gbd), tape->value(hcs),
                             tape->value(hcd), lay);
  const bool track = any_tracked(*tape, {gbs, gbd, hcs, hcd});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, gbs, gbd, hcs, hcd, lay](Tape& t) {
    const Mat& adj = t.adjoint(out);
    Mat d_gbs = Mat::Zero(t.value(gbs).rows(), t.value(gbs).cols());
    Mat d_gbd = Mat::Zero(t.value(gbd).rows(), t.value(gbd).cols());
    Mat d_hcs = Mat::Zero(t.value(hcs).rows(), t.value(hcs).cols());
    Mat d_hcd = Mat::Zero(t.value(hcd).rows(), t.value(hcd).cols());
    for (int w = 0; w < lay.n_walkers; ++w)
      for (int i = 0; i < lay.n_el; ++i) {
        const int e_i = w * lay.n_el + i;
        const bool i_up = i < lay.n_up;
        for (int j = 0; j < lay.n_el; ++j) {
          const int p = e_i * lay.n_el + j;
          const int e_j = w * lay.n_el + j;
          const bool same = (j < lay.n_up) == i_up;
          if (same) {
            d_gbs.row(p) += adj.row(e_i).cwiseProduct(t.value(hcs).row(e_j));
            d_hcs.row(e_j) += adj.row(e_i).cwiseProduct(t.value(gbs).row(p));
          } else {
            d_gbd.row(p) += adj.row(e_i).cwiseProduct(t.value(hcd).row(e_j));
            d_hcd.row(e_j) += adj.row(e_i).cwiseProduct(t.value(gbd).row(p));
          }
        }
      }
    if (t.tracked(gbs)) t.add_adjoint(gbs, d_gbs);
    if (t.tracked(gbd)) t.add_adjoint(gbd, d_gbd);
    if (t.tracked(hcs)) t.add_adjoint(hcs, d_hcs);
    if (t.tracked(hcd)) t.add_adjoint(hcd, d_hcd);
  });
  return out;
}

Tape::Ref TapeEngine::pair_select(const T& a, const T& b, const BatchLayout& lay) {
  Mat v = detail::pair_select_v(tape->value(a), tape->value(b), lay);
  const bool track = any_tracked(*tape, {a, b});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, a, b, lay](Tape& t) {
    const Mat& adj = t.adjoint(out);
    Mat da = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    Mat db = Mat::Zero(t.value(b).rows(), t.value(b).cols());
    for (Eigen::Index p = 0; p < adj.rows(); ++p) {
      if (detail::pair_is_same_spin(lay, p))
        da.row(p) = adj.row(p);
      else
        db.row(p) = adj.row(p);
    }
    if (t.tracked(a)) t.add_adjoint(a, da);
    if (t.tracked(b)) t.add_adjoint(b, db);
  });
  return out;
}

Tape::Ref TapeEngine::pair_sum(const T& g, const BatchLayout& lay) {
  Mat v = detail::pair_sum_v(tape->value(g), lay);
  const bool track = tape->tracked(g);
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, g, lay](Tape& t) {
    const Mat& adj = t.adjoint(out);
    Mat dg(t.value(g).rows(), t.value(g).cols());
    for (int e = 0; e < lay.el_rows(); ++e)
      dg.middleRows(e * lay.n_el, lay.n_el).rowwise() = adj.row(e);
    t.add_adjoint(g, dg);
  });
  return out;
}

Tape::Ref TapeEngine::nuc_convolve(const T& vb, const T& zc, const BatchLayout& lay) {
  Mat v = detail::nuc_convolve_v(tape->value(vb), tape->value(zc), lay);
  const bool track = any_tracked(*tape, {vb, zc});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, vb, zc, lay](Tape& t) {
    const Mat& adj = t.adjoint(out);
    Mat d_vb = Mat::Zero(t.value(vb).rows(), t.value(vb).cols());
    Mat d_zc = Mat::Zero(t.value(zc).rows(), t.value(zc).cols());
    for (int e = 0; e < lay.el_rows(); ++e)
      for (int nI = 0; nI < lay.n_nuc; ++nI) {
        d_vb.row(e * lay.n_nuc + nI) = adj.row(e).cwiseProduct(t.value(zc).row(nI));
        d_zc.row(nI) += adj.row(e).cwiseProduct(t.value(vb).row(e * lay.n_nuc + nI));
      }
    if (t.tracked(vb)) t.add_adjoint(vb, d_vb);
    if (t.tracked(zc)) t.add_adjoint(zc, d_zc);
  });
  return out;
}

Tape::Ref TapeEngine::hadamard(const T& a, const T& b) {
  Mat v = tape->value(a).cwiseProduct(tape->value(b));
  const bool track = any_tracked(*tape, {a, b});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, a, b](Tape& t) {
    const Mat& adj = t.adjoint(out);
    if (t.tracked(a)) t.add_adjoint(a, adj.cwiseProduct(t.value(b)));
    if (t.tracked(b)) t.add_adjoint(b, adj.cwiseProduct(t.value(a)));
  });
  return out;
}

Tape::Ref TapeEngine::envelope_eval(const T& rho, P pi, P omega) {
  Mat v = detail::envelope_v(tape->value(rho), tape->value(pi), tape->value(omega));
  const bool track = any_tracked(*tape, {pi, omega});
  Tape::Ref out = tape->push(std::move(v), track, {});
  if (!track) return out;
  tapeback(out, [out, rho, pi, omega](Tape& t) {
    const Mat& adj = t.adjoint(out);
    const Mat& rv = t.value(rho);
    const Mat& pv = t.value(pi);
    const Mat& ov = t.value(omega);
    Mat d_pi = Mat::Zero(pv.rows(), pv.cols());
    Mat d_om = Mat::Zero(ov.rows(), ov.cols());
    for (int ko = 0; ko < pv.rows(); ++ko)
      for (int nI = 0; nI < rv.cols(); ++nI) {
        const double wraw = ov(ko, nI);
        const double wabs = std::abs(wraw);
        const double sgn = wraw > 0.0 ? 1.0 : (wraw < 0.0 ? -1.0 : 0.0);
        const Eigen::ArrayXd e = (-wabs * rv.col(nI).array()).exp();
        d_pi(ko, nI) = (adj.col(ko).array() * e).sum();
        d_om(ko, nI) =
            sgn * pv(ko, nI) * (adj.col(ko).array() * e * (-rv.col(nI).array())).sum();
      }
    if (t.tracked(pi)) t.add_adjoint(pi, d_pi);
    if (t.tracked(omega)) t.add_adjoint(omega, d_om);
  });
  return out;
}

SlaterResult<Tape::Ref> TapeEngine::slater_logsumexp(const T& m_up, const T& m_dn,
                                                     const BatchLayout& lay, int n_det,
                                                     DetMode mode) {
  const Mat& vu = tape->value(m_up);
  const Mat& vd = tape->value(m_dn);
  Mat logpsi(lay.n_walkers, 1);
  Eigen::VectorXd sign(lay.n_walkers);

  struct Saved {
    Mat weights;                      // (n_walkers, n_det)
    std::vector<Mat> inv_a, inv_b;    // per (w*n_det+d); dense uses inv_a only
  };
  auto saved = std::make_shared<Saved>();
  saved->weights.setZero(lay.n_walkers, n_det);
  saved->inv_a.resize(std::size_t(lay.n_walkers) * n_det);
  if (mode == DetMode::Block) saved->inv_b.resize(std::size_t(lay.n_walkers) * n_det);

  for (int w = 0; w < lay.n_walkers; ++w) {
    Eigen::VectorXd logs(n_det), signs(n_det);
    for (int d = 0; d < n_det; ++d) {
      const std::size_t slot = std::size_t(w) * n_det + d;
      if (mode == DetMode::Dense) {
        auto f = detail::det_factor_impl(detail::assemble_det(vu, vd, lay, w, d, mode, -1), true);
        logs[d] = f.log_abs;
        signs[d] = f.sign;
        saved->inv_a[slot] = std::move(f.inverse);
      } else {
        auto fu = detail::det_factor_impl(detail::assemble_det(vu, vd, lay, w, d, mode, 0), true);
        auto fd = detail::det_factor_impl(detail::assemble_det(vu, vd, lay, w, d, mode, 1), true);
        logs[d] = fu.log_abs + fd.log_abs;
        signs[d] = fu.sign * fd.sign;
        saved->inv_a[slot] = std::move(fu.inverse);
        saved->inv_b[slot] = std::move(fd.inverse);
      }
    }
    const auto lse = detail::signed_lse(logs, signs);
    logpsi(w, 0) = lse.log_abs;
    sign[w] = lse.sign;
    if (lse.sign == 0.0)
      throw RejectedConfigurationError("slater_logsumexp: gradient on the nodal set");
    saved->weights.row(w) = lse.weights.transpose();
  }

  const bool track = any_tracked(*tape, {m_up, m_dn});
  Tape::Ref out = tape->push(std::move(logpsi), track, {});
  SlaterResult<Tape::Ref> res;
  res.log_psi = out;
  res.sign = std::move(sign);
  if (!track) return res;

  tapeback(out, [out, m_up, m_dn, lay, n_det, mode, saved](Tape& t) {
    const Mat& adj = t.adjoint(out);
    Mat du = Mat::Zero(t.value(m_up).rows(), t.value(m_up).cols());
    Mat dd = Mat::Zero(t.value(m_dn).rows(), t.value(m_dn).cols());
    for (int w = 0; w < lay.n_walkers; ++w) {
      const double a = adj(w, 0);
      if (a == 0.0) continue;
      for (int d = 0; d < n_det; ++d) {
        const double wgt = saved->weights(w, d);
        if (wgt == 0.0) continue;
        const std::size_t slot = std::size_t(w) * n_det + d;
        const double c = a * wgt;
        if (mode == DetMode::Dense) {
          const Mat& inv = saved->inv_a[slot];
          const int n = lay.n_el;
          for (int i = 0; i < n; ++i) {
            const bool up = i < lay.n_up;
            const int row = up ? w * lay.n_up + i : w * lay.n_dn() + (i - lay.n_up);
            Mat& dst = up ? du : dd;
            for (int kk = 0; kk < n; ++kk) dst(row, d * n + kk) += c * inv(i, kk);
          }
        } else {
          const int nu = lay.n_up, ndn = lay.n_dn();
          const Mat& invu = saved->inv_a[slot];
          for (int i = 0; i < nu; ++i)
            for (int kk = 0; kk < nu; ++kk)
              du(w * nu + i, d * nu + kk) += c * invu(i, kk);
          const Mat& invd = saved->inv_b[slot];
          for (int i = 0; i < ndn; ++i)
            for (int kk = 0; kk < ndn; ++kk)
              dd(w * ndn + i, d * ndn + kk) += c * invd(i, kk);
        }
      }
    }
    if (t.tracked(m_up)) t.add_adjoint(m_up, du);
    if (t.tracked(m_dn) && dd.size() > 0) t.add_adjoint(m_dn, dd);
  });
  return res;
}

}  // namespace dlvmc
