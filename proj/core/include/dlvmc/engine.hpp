#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace dlvmc {

using Mat = Eigen::MatrixXd;

/// Row conventions for batched evaluation. Electron rows: w*n_el+i.
/// Pair rows: (w*n_el+i)*n_el+j. Electron-nucleus rows: (w*n_el+i)*n_nuc+I.
struct BatchLayout {
  int n_walkers = 0;
  int n_el = 0;
  int n_up = 0;
  int n_nuc = 0;

  int n_dn() const { return n_el - n_up; }
  int n_spin(int spin) const { return spin == 0 ? n_up : n_dn(); }
  int el_rows() const { return n_walkers * n_el; }
  int pair_rows() const { return n_walkers * n_el * n_el; }
  int nuc_rows() const { return n_walkers * n_el * n_nuc; }
};

/// Forward-mode bundle: values plus K directional first derivatives and K
/// pure (diagonal) second derivatives. Channel k occupies rows
/// [k*rows, (k+1)*rows) of g and h. Empty g/h mark a constant.
struct JetBatch {
  Mat v;
  Mat g;
  Mat h;
  int k = 0;

  bool is_const() const { return g.size() == 0; }
  Eigen::Block<Mat> gk(int kk) { return g.middleRows(kk * v.rows(), v.rows()); }
  Eigen::Block<Mat> hk(int kk) { return h.middleRows(kk * v.rows(), v.rows()); }
  Eigen::Block<const Mat> gk(int kk) const { return g.middleRows(kk * v.rows(), v.rows()); }
  Eigen::Block<const Mat> hk(int kk) const { return h.middleRows(kk * v.rows(), v.rows()); }
  static JetBatch constant(Mat v, int k) { return JetBatch{std::move(v), {}, {}, k}; }
  static JetBatch zeros_like(const Mat& v, int k) {
    JetBatch j{v, Mat::Zero(k * v.rows(), v.cols()), Mat::Zero(k * v.rows(), v.cols()), k};
    return j;
  }
};

/// Reverse-mode graph over matrix-valued nodes. Nodes are appended in
/// evaluation order; backward() walks them in reverse, which is a valid
/// topological order because ops only reference earlier nodes.
class Tape {
 public:
  using Ref = int;

  Ref constant(Mat value) { return push(std::move(value), false, {}); }
  Ref leaf(Mat value) { return push(std::move(value), true, {}); }

  const Mat& value(Ref r) const { return nodes_[r].value; }
  const Mat& adjoint(Ref r) const { return nodes_[r].adjoint; }
  bool tracked(Ref r) const { return nodes_[r].track; }

  /// Accumulate into an adjoint, allocating it on first touch.
  void add_adjoint(Ref r, const Mat& delta) {
    auto& n = nodes_[r];
    if (!n.track) return;
    if (n.adjoint.size() == 0) n.adjoint = Mat::Zero(n.value.rows(), n.value.cols());
    n.adjoint += delta;
  }

  void backward(Ref root, const Mat& seed);

  Ref push(Mat value, bool track, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(value), Mat(), track, std::move(back)});
    return static_cast<Ref>(nodes_.size()) - 1;
  }

  /// Attach the backward closure after the node's own ref is known.
  void set_back(Ref r, std::function<void(Tape&)> back) { nodes_[r].back = std::move(back); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat adjoint;
    bool track = false;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
};

template <class T>
struct SlaterResult {
  T log_psi;             // (n_walkers, 1)
  Eigen::VectorXd sign;  // -1/0/+1 per walker
};

enum class DetMode { Dense, Block };

/// Plain batched evaluation.
struct ValueEngine {
  using T = Mat;
  using P = const Mat*;

  P param(const Mat& m) { return &m; }
  T constant(const Mat& m) { return m; }
  /// Trainable array used as an activation (nucleus embeddings).
  T input_param(const Mat& m) { return m; }
  int cols(const T& x) const { return static_cast<int>(x.cols()); }

  T affine(P w, P b, const T& x);
  /// Row-wise select between two pair tensors: same-spin rows from a,
  /// different-spin rows from b.
  T pair_select(const T& a, const T& b, const BatchLayout& lay);
  T linear(P w, const T& x);
  T tanh_(const T& x);
  T add(const T& a, const T& b);
  T concat_cols(const std::vector<const T*>& xs);
  T spin_mean(const T& x, const BatchLayout& lay, int spin);
  T spin_rows(const T& x, const BatchLayout& lay, int spin);
  T pair_mix(const T& gb_same, const T& gb_diff, const T& hc_same, const T& hc_diff,
             const BatchLayout& lay);
  T pair_sum(const T& g, const BatchLayout& lay);
  T nuc_convolve(const T& vb, const T& zc, const BatchLayout& lay);
  T hadamard(const T& a, const T& b);
  T envelope_eval(const T& rho, P pi, P omega);
  SlaterResult<T> slater_logsumexp(const T& m_up, const T& m_dn, const BatchLayout& lay,
                                   int n_det, DetMode mode);

  // feature stage
  T positions(const Mat& r) { return r; }
  T nuc_diff(const T& r, const Mat& nuclei, const BatchLayout& lay);
  T rotate_local(const T& rho, const std::vector<Eigen::Matrix3d>& u, const BatchLayout& lay);
  T norm_rows(const T& x);
  T pair_diff(const T& r, const BatchLayout& lay);
  T pair_norm(const T& pd, const BatchLayout& lay);
  T regroup_nuc(const T& x, const BatchLayout& lay);
};

/// Forward jets: one evaluation yields d/dx_k and d^2/dx_k^2 of every output
/// for all K = 3*n_el electron coordinates at once.
struct JetEngine {
  using T = JetBatch;
  using P = const Mat*;

  int k = 0;
  explicit JetEngine(int k_channels) : k(k_channels) {}

  P param(const Mat& m) { return &m; }
  T constant(const Mat& m) { return JetBatch::constant(m, k); }
  T input_param(const Mat& m) { return constant(m); }
  int cols(const T& x) const { return static_cast<int>(x.v.cols()); }

  T affine(P w, P b, const T& x);
  T pair_select(const T& a, const T& b, const BatchLayout& lay);
  T linear(P w, const T& x);
  T tanh_(const T& x);
  T add(const T& a, const T& b);
  T concat_cols(const std::vector<const T*>& xs);
  T spin_mean(const T& x, const BatchLayout& lay, int spin);
  T spin_rows(const T& x, const BatchLayout& lay, int spin);
  T pair_mix(const T& gb_same, const T& gb_diff, const T& hc_same, const T& hc_diff,
             const BatchLayout& lay);
  T pair_sum(const T& g, const BatchLayout& lay);
  T nuc_convolve(const T& vb, const T& zc, const BatchLayout& lay);
  T hadamard(const T& a, const T& b);
  T envelope_eval(const T& rho, P pi, P omega);
  SlaterResult<T> slater_logsumexp(const T& m_up, const T& m_dn, const BatchLayout& lay,
                                   int n_det, DetMode mode);

  /// Seed: channel 3*i+a carries d/d r[electron i, axis a] for every walker.
  T positions(const Mat& r);
  T nuc_diff(const T& r, const Mat& nuclei, const BatchLayout& lay);
  T rotate_local(const T& rho, const std::vector<Eigen::Matrix3d>& u, const BatchLayout& lay);
  T norm_rows(const T& x);
  T pair_diff(const T& r, const BatchLayout& lay);
  T pair_norm(const T& pd, const BatchLayout& lay);
  T regroup_nuc(const T& x, const BatchLayout& lay);
};

/// Records the parameter-gradient graph. Inputs that depend only on electron
/// positions enter as constants; coordinate derivatives are the jet engine's
/// job (forward overlay), parameter derivatives are this engine's (reverse).
struct TapeEngine {
  using T = Tape::Ref;
  using P = Tape::Ref;

  Tape* tape;
  /// When set, every param() leaf ref is appended here (binding order).
  std::vector<Tape::Ref>* record = nullptr;
  explicit TapeEngine(Tape& t) : tape(&t) {}

  P param(const Mat& m) {
    const Tape::Ref r = tape->leaf(m);
    if (record) record->push_back(r);
    return r;
  }
  T constant(const Mat& m) { return tape->constant(m); }
  T input_param(const Mat& m) { return param(m); }
  int cols(const T& x) const { return static_cast<int>(tape->value(x).cols()); }

  T affine(P w, P b, const T& x);
  T pair_select(const T& a, const T& b, const BatchLayout& lay);
  T linear(P w, const T& x);
  T tanh_(const T& x);
  T add(const T& a, const T& b);
  T concat_cols(const std::vector<const T*>& xs);
  T spin_mean(const T& x, const BatchLayout& lay, int spin);
  T spin_rows(const T& x, const BatchLayout& lay, int spin);
  T pair_mix(const T& gb_same, const T& gb_diff, const T& hc_same, const T& hc_diff,
             const BatchLayout& lay);
  T pair_sum(const T& g, const BatchLayout& lay);
  T nuc_convolve(const T& vb, const T& zc, const BatchLayout& lay);
  T hadamard(const T& a, const T& b);
  T envelope_eval(const T& rho, P pi, P omega);
  SlaterResult<T> slater_logsumexp(const T& m_up, const T& m_dn, const BatchLayout& lay,
                                   int n_det, DetMode mode);

  // reduction helpers for scalar losses
  T sub(const T& a, const T& b);
  T mean_all(const T& x);
  T scale(const T& x, double s);

 private:
  void tapeback(Tape::Ref node, std::function<void(Tape&)> fn);
};

namespace detail {
// Shared value kernels; all engines route their value computation through
// these so the three paths agree bit for bit.
Mat affine_v(const Mat& w, const Mat& b, const Mat& x);
Mat linear_v(const Mat& w, const Mat& x);
Mat spin_mean_v(const Mat& x, const BatchLayout& lay, int spin);
Mat spin_rows_v(const Mat& x, const BatchLayout& lay, int spin);
Mat pair_mix_v(const Mat& gbs, const Mat& gbd, const Mat& hcs, const Mat& hcd,
               const BatchLayout& lay);
Mat pair_sum_v(const Mat& g, const BatchLayout& lay);
Mat nuc_convolve_v(const Mat& vb, const Mat& zc, const BatchLayout& lay);
Mat envelope_v(const Mat& rho, const Mat& pi, const Mat& omega);
Mat nuc_diff_v(const Mat& r, const Mat& nuclei, const BatchLayout& lay);
Mat rotate_local_v(const Mat& rho, const std::vector<Eigen::Matrix3d>& u, const BatchLayout& lay);
Mat pair_diff_v(const Mat& r, const BatchLayout& lay);
Mat regroup_nuc_v(const Mat& x, const BatchLayout& lay);

struct DetFactor {
  double log_abs;
  double sign;
  Mat inverse;  // empty when singular
};
DetFactor det_factor(const Mat& a);

/// Assemble the (w, d) determinant matrix column-by-electron from the
/// spin-channel orbital matrices (rows electron-major, cols det-major).
Mat assemble_det(const Mat& m_up, const Mat& m_dn, const BatchLayout& lay, int d, int n_det,
                 DetMode mode, int spin_block);
}  // namespace detail

}  // namespace dlvmc
