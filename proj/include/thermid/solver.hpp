#pragma once

// Solver for the constrained, l1-regularized least-squares problem
//
//   minimize  || y - Phi * theta ||_2^2 + lambda * || S theta ||_1
//   s.t.      A * theta_p <= b
//
// where S selects the transformed-disturbance block of theta. The solver
// is an ADMM operator splitting on the consensus form
//
//   minimize f(x) + g(z)   s.t.  M x = z,
//
// with f the smooth quadratic and g the separable constraint/penalty term,
// so the z-update is a per-coordinate clamp or shrink. Two equivalent
// reductions are implemented:
//
//   * PosPart (default): wbar = p - q with p, q >= 0 turns the problem
//     into a plain QP; the l1 term becomes the linear cost lambda*(p + q)
//     and every z block is a box projection.
//   * Prox: wbar stays a single block and the z-update soft-thresholds it.
//
// Either way the x-update reduces, by block elimination of the
// disturbance coordinates, to one cached 11x11 (or head-sized) Cholesky
// factorization, so a full iteration costs O(k_max). Internally the head
// columns are equilibrated and the cost normalized (temperature-scale
// data otherwise conditions the splitting poorly); convergence is checked
// on residuals mapped back to the original problem units. Iterations are
// deterministic: same data, options and warm start give the same iterates.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermid/constraints.hpp"
#include "thermid/regression.hpp"

namespace thermid {

enum class Splitting { kPosPart, kProx };

enum class SolveStatus { kConverged, kMaxIter, kInfeasibleDetected };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIter: return "max-iter";
    case SolveStatus::kInfeasibleDetected: return "infeasible-detected";
  }
  return "unknown";
}

struct SolverOptions {
  int max_iter = 50'000;
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double rho = 1.0;
  bool adaptive_rho = true;       ///< residual-balancing update of rho
  double over_relaxation = 1.6;   ///< alpha in [1, 2)
  double sigma = 1e-6;            ///< proximal regularization of the x-step
  int check_interval = 25;        ///< iterations between convergence checks
  Splitting splitting = Splitting::kPosPart;
  bool trace_merit = false;       ///< record the augmented-Lagrangian value

  void validate() const {
    if (max_iter < 1) throw std::invalid_argument("SolverOptions: max_iter >= 1");
    if (!(eps_abs > 0.0) || !(eps_rel > 0.0))
      throw std::invalid_argument("SolverOptions: tolerances must be > 0");
    if (!(rho > 0.0)) throw std::invalid_argument("SolverOptions: rho must be > 0");
    if (!(over_relaxation >= 1.0 && over_relaxation < 2.0))
      throw std::invalid_argument("SolverOptions: over_relaxation in [1, 2)");
    if (!(sigma > 0.0)) throw std::invalid_argument("SolverOptions: sigma must be > 0");
    if (check_interval < 1)
      throw std::invalid_argument("SolverOptions: check_interval >= 1");
  }
};

struct KktInfo {
  double primal_inf = 0.0;            ///< max constraint violation
  double stationarity_inf = 0.0;      ///< min-norm subgradient residual
  double duality_gap_estimate = 0.0;  ///< complementary-slackness residual
};

struct SolverResult {
  ThetaFull theta;             ///< head interpreted as plant coefficients
  Eigen::VectorXd solution;    ///< raw stacked solution [head; penalized tail]
  double objective = 0.0;
  double residual_norm = 0.0;  ///< || y - Phi theta ||_2
  double solution_norm = 0.0;  ///< || S theta ||_1
  int iterations = 0;
  SolveStatus status = SolveStatus::kMaxIter;
  KktInfo kkt;
  double r_prim = 0.0, r_dual = 0.0;      ///< final problem-level residuals
  double eps_prim = 0.0, eps_dual = 0.0;  ///< thresholds they were held to
  std::vector<double> merit_trace;        ///< filled when opts.trace_merit
};

/// Opaque warm-start state. Only meaningful when passed back to a solve of
/// the same problem instance (same data and splitting), e.g. along a
/// lambda path.
struct WarmStart {
  bool valid = false;
  double rho = 0.0;
  Eigen::VectorXd x, z, y;
};

namespace solver_detail {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double inf_norm(const VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline void soft_threshold(VectorXd& v, double t) {
  v = v.unaryExpr(
      [t](double a) { return a > t ? a - t : (a < -t ? a + t : 0.0); });
}

// Internal change of variables for the head block: x_head = L^T theta with
// L the Cholesky factor of the head-column Gram (plus a tiny ridge), so the
// scaled head columns are orthonormal. That neutralizes both the raw
// magnitude spread of the data columns and their near-collinearity (lagged
// outputs correlate at 0.999+), which a plain column scaling cannot fix.
// Constraint rows are normalized to unit length after the substitution.
// Penalized coordinates are never rescaled, which keeps the l1 weight and
// the reported disturbance in problem units.
struct Scaling {
  MatrixXd L;  // lower Cholesky factor; internal head = L^T * theta
  VectorXd e;  // per-constraint-row scale (internal row = e * mapped row)

  // head columns mapped to the internal coordinates: cols * L^{-T}
  MatrixXd map_cols(const MatrixXd& cols) const {
    return L.triangularView<Eigen::Lower>()
        .solve(cols.transpose())
        .transpose();
  }

  VectorXd to_natural_head(const VectorXd& x_head) const {
    return L.transpose().triangularView<Eigen::Upper>().solve(x_head);
  }

  // gradients transform with L (covariant to the substitution)
  VectorXd grad_to_natural(const VectorXd& g_head) const { return L * g_head; }

  // rows of A in internal coordinates are A * L^{-T}
  MatrixXd map_rows(const MatrixXd& A) const {
    return L.triangularView<Eigen::Lower>().solve(A.transpose()).transpose();
  }

  static Scaling from(const MatrixXd& head_cols, const MatrixXd& A) {
    Scaling s;
    MatrixXd gram = head_cols.transpose() * head_cols;
    const double ridge = 1e-12 * std::max(1.0, gram.trace());
    gram.diagonal().array() += ridge;
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("solver: head Gram factorization failed");
    s.L = llt.matrixL();
    const MatrixXd a_mapped = s.map_rows(A);
    s.e.resize(A.rows());
    for (Index i = 0; i < A.rows(); ++i) {
      const double n = a_mapped.row(i).norm();
      s.e(i) = n > 0.0 ? 1.0 / n : 1.0;
    }
    return s;
  }
};

// Model for the structured problem: Phi = [Psi | I], constraints on the
// head block only. All members operate in internal (scaled) units; the
// per-block unscale() maps dual-residual-like vectors back.
class StructuredModel {
 public:
  StructuredModel(const RegressionProblem& prob, const ConstraintSet& C,
                  double lambda, Splitting split)
      : yv_(prob.y),
        lambda_(lambda),
        split_(split),
        m_(prob.rows()),
        nc_(C.rows()) {
    if (C.cols() != 11)
      throw std::invalid_argument("solver: constraint set must have 11 columns");
    scal_ = Scaling::from(prob.data_cols, C.A);
    psi_ = scal_.map_cols(prob.data_cols);
    A_ = scal_.e.asDiagonal() * scal_.map_rows(C.A);
    b_ = scal_.e.asDiagonal() * C.b;
    gram_ = psi_.transpose() * psi_;
    ata_ = A_.transpose() * A_;

    const Index tail = split_ == Splitting::kProx ? m_ : 2 * m_;
    q_.resize(11 + tail);
    q_.head<11>() = -2.0 * (psi_.transpose() * yv_);
    if (split_ == Splitting::kProx) {
      q_.tail(m_) = -2.0 * yv_;
    } else {
      q_.segment(11, m_) = -2.0 * yv_;
      q_.tail(m_) = 2.0 * yv_;
      q_.segment(11, m_).array() += lambda_;
      q_.tail(m_).array() += lambda_;
    }
  }

  Index nx() const { return 11 + (split_ == Splitting::kProx ? m_ : 2 * m_); }
  Index nz() const { return nc_ + (split_ == Splitting::kProx ? m_ : 2 * m_); }
  Index head() const { return 11; }
  const VectorXd& qlin() const { return q_; }
  const Scaling& scaling() const { return scal_; }

  void factor(double rho, double sigma) {
    a_ = 2.0 + sigma + rho;
    const double c_theta =
        split_ == Splitting::kProx
            ? 2.0 * (sigma + rho) / (2.0 + sigma + rho)
            : 2.0 * (sigma + rho) / (4.0 + sigma + rho);
    Eigen::Matrix<double, 11, 11> Mth =
        c_theta * gram_ + rho * ata_ +
        sigma * Eigen::Matrix<double, 11, 11>::Identity();
    llt_.compute(Mth);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("solver: head-block factorization failed");
  }

  VectorXd kkt_solve(const VectorXd& rhs) const {
    VectorXd x(nx());
    if (split_ == Splitting::kProx) {
      const auto r_th = rhs.head<11>();
      const auto r_w = rhs.tail(m_);
      const Eigen::Matrix<double, 11, 1> rhs_th =
          r_th - (2.0 / a_) * (psi_.transpose() * r_w);
      const Eigen::Matrix<double, 11, 1> th = llt_.solve(rhs_th);
      x.head<11>() = th;
      x.tail(m_) = (r_w - 2.0 * (psi_ * th)) / a_;
    } else {
      const auto r_th = rhs.head<11>();
      const auto r_p = rhs.segment(11, m_);
      const auto r_q = rhs.tail(m_);
      const Eigen::Matrix<double, 11, 1> rhs_th =
          r_th - (2.0 / (a_ + 2.0)) * (psi_.transpose() * (r_p - r_q));
      const Eigen::Matrix<double, 11, 1> th = llt_.solve(rhs_th);
      const VectorXd t = psi_ * th;
      const double det = a_ * a_ - 4.0;
      const VectorXd rp = r_p - 2.0 * t;
      const VectorXd rq = r_q + 2.0 * t;
      x.head<11>() = th;
      x.segment(11, m_) = (a_ * rp + 2.0 * rq) / det;
      x.tail(m_) = (2.0 * rp + a_ * rq) / det;
    }
    return x;
  }

  VectorXd apply_M(const VectorXd& x) const {
    VectorXd z(nz());
    z.head(nc_) = A_ * x.head<11>();
    z.tail(nz() - nc_) = x.tail(nx() - 11);
    return z;
  }

  VectorXd apply_MT(const VectorXd& v) const {
    VectorXd x(nx());
    x.head<11>() = A_.transpose() * v.head(nc_);
    x.tail(nx() - 11) = v.tail(nz() - nc_);
    return x;
  }

  VectorXd apply_P(const VectorXd& x) const {
    const VectorXd bx = bx_of(x);
    VectorXd px(nx());
    px.head<11>() = 2.0 * (psi_.transpose() * bx);
    if (split_ == Splitting::kProx) {
      px.tail(m_) = 2.0 * bx;
    } else {
      px.segment(11, m_) = 2.0 * bx;
      px.tail(m_) = -2.0 * bx;
    }
    return px;
  }

  void prox(VectorXd& v, double rho) const {
    v.head(nc_) = v.head(nc_).cwiseMin(b_);
    if (split_ == Splitting::kProx) {
      VectorXd tail = v.tail(m_);
      soft_threshold(tail, lambda_ / rho);
      v.tail(m_) = tail;
    } else {
      v.tail(2 * m_) = v.tail(2 * m_).cwiseMax(0.0);
    }
  }

  double fval(const VectorXd& x) const {
    const VectorXd bx = bx_of(x);
    double f = (yv_ - bx).squaredNorm();
    if (split_ == Splitting::kPosPart)
      f += lambda_ * (x.segment(11, m_).sum() + x.tail(m_).sum());
    return f;
  }

  double gval(const VectorXd& z) const {
    if (split_ == Splitting::kProx)
      return lambda_ * z.tail(m_).template lpNorm<1>();
    return 0.0;
  }

  // Maps gradient-space vectors back to problem units (gradients are
  // covariant: natural head gradient = L * internal). Head and penalized
  // tail are reported separately: their natural scales differ by orders
  // of magnitude, and folding them into one norm would let the small
  // penalty-scale stationarity hide under the data-scale one.
  std::array<double, 2> dual_block_norms(const VectorXd& v) const {
    return {inf_norm(scal_.grad_to_natural(v.head(11))),
            inf_norm(v.tail(nx() - 11))};
  }

  // z-space vectors back to problem units (constraint rows were scaled
  // by e).
  double unscaled_prim_norm(const VectorXd& v) const {
    const double cons =
        nc_ == 0 ? 0.0
                 : inf_norm((v.head(nc_).array() / scal_.e.array()).matrix());
    const double tail = inf_norm(v.tail(nz() - nc_));
    return std::max(cons, tail);
  }

  // The reported solution takes theta_p from x and the disturbance block
  // from z, so shrink/clamp zeros are exact.
  VectorXd extract_theta(const VectorXd& x, const VectorXd& z) const {
    VectorXd th(11 + m_);
    th.head<11>() = scal_.to_natural_head(x.head<11>());
    if (split_ == Splitting::kProx)
      th.tail(m_) = z.tail(m_);
    else
      th.tail(m_) = z.segment(nc_, m_) - z.tail(m_);
    return th;
  }

 private:
  VectorXd bx_of(const VectorXd& x) const {
    if (split_ == Splitting::kProx)
      return psi_ * x.head<11>() + x.tail(m_);
    return psi_ * x.head<11>() + x.segment(11, m_) - x.tail(m_);
  }

  const VectorXd& yv_;
  MatrixXd psi_;
  MatrixXd A_;
  VectorXd b_;
  double lambda_;
  Splitting split_;
  Index m_, nc_;
  Scaling scal_;
  Eigen::Matrix<double, 11, 11> gram_, ata_;
  VectorXd q_;
  double a_ = 0.0;
  Eigen::LLT<Eigen::Matrix<double, 11, 11>> llt_;
};

// Dense model for small instances: Phi is explicit, coordinates past
// `head` carry the l1 penalty, constraints act on the head block.
class DenseModel {
 public:
  DenseModel(const MatrixXd& Phi, const VectorXd& y, Index head,
             const ConstraintSet& C, double lambda, Splitting split)
      : yv_(y), lambda_(lambda), split_(split), head_(head),
        tail_(Phi.cols() - head), nc_(C.rows()) {
    if (head < 0 || head > Phi.cols())
      throw std::invalid_argument("solver: head block out of range");
    if (C.cols() != head)
      throw std::invalid_argument(
          "solver: constraint set must act on the unpenalized head block");
    if (Phi.rows() != y.size())
      throw std::invalid_argument("solver: Phi/y dimension mismatch");

    scal_ = Scaling::from(Phi.leftCols(head_), C.A);
    const MatrixXd head_scaled = scal_.map_cols(Phi.leftCols(head_));

    const Index nx = split_ == Splitting::kProx ? Phi.cols() : head_ + 2 * tail_;
    B_.resize(Phi.rows(), nx);
    B_.leftCols(head_) = head_scaled;
    if (split_ == Splitting::kProx) {
      B_.rightCols(tail_) = Phi.rightCols(tail_);
    } else {
      B_.middleCols(head_, tail_) = Phi.rightCols(tail_);
      B_.rightCols(tail_) = -Phi.rightCols(tail_);
    }
    M_.setZero(nz(), nx);
    M_.topLeftCorner(nc_, head_) = scal_.e.asDiagonal() * scal_.map_rows(C.A);
    M_.bottomRightCorner(nx - head_, nx - head_).setIdentity();
    b_ = scal_.e.asDiagonal() * C.b;
    P_ = 2.0 * (B_.transpose() * B_);
    q_ = -2.0 * (B_.transpose() * yv_);
    if (split_ == Splitting::kPosPart) q_.tail(2 * tail_).array() += lambda_;
    mtm_ = M_.transpose() * M_;
  }

  Index nx() const { return B_.cols(); }
  Index nz() const { return nc_ + (split_ == Splitting::kProx ? tail_ : 2 * tail_); }
  Index head() const { return head_; }
  const VectorXd& qlin() const { return q_; }
  const Scaling& scaling() const { return scal_; }

  void factor(double rho, double sigma) {
    MatrixXd K = P_ + rho * mtm_;
    K.diagonal().array() += sigma;
    ldlt_.compute(K);
    if (ldlt_.info() != Eigen::Success)
      throw std::runtime_error("solver: dense factorization failed");
  }

  VectorXd kkt_solve(const VectorXd& rhs) const { return ldlt_.solve(rhs); }
  VectorXd apply_M(const VectorXd& x) const { return M_ * x; }
  VectorXd apply_MT(const VectorXd& v) const { return M_.transpose() * v; }
  VectorXd apply_P(const VectorXd& x) const { return P_ * x; }

  void prox(VectorXd& v, double rho) const {
    v.head(nc_) = v.head(nc_).cwiseMin(b_);
    if (split_ == Splitting::kProx) {
      VectorXd tail = v.tail(tail_);
      soft_threshold(tail, lambda_ / rho);
      v.tail(tail_) = tail;
    } else {
      v.tail(2 * tail_) = v.tail(2 * tail_).cwiseMax(0.0);
    }
  }

  double fval(const VectorXd& x) const {
    double f = (yv_ - B_ * x).squaredNorm();
    if (split_ == Splitting::kPosPart) f += lambda_ * x.tail(2 * tail_).sum();
    return f;
  }

  double gval(const VectorXd& z) const {
    if (split_ == Splitting::kProx)
      return lambda_ * z.tail(tail_).template lpNorm<1>();
    return 0.0;
  }

  std::array<double, 2> dual_block_norms(const VectorXd& v) const {
    return {head_ == 0 ? 0.0 : inf_norm(scal_.grad_to_natural(v.head(head_))),
            inf_norm(v.tail(nx() - head_))};
  }

  double unscaled_prim_norm(const VectorXd& v) const {
    const double cons =
        nc_ == 0 ? 0.0
                 : inf_norm((v.head(nc_).array() / scal_.e.array()).matrix());
    const double tail = inf_norm(v.tail(nz() - nc_));
    return std::max(cons, tail);
  }

  VectorXd extract_theta(const VectorXd& x, const VectorXd& z) const {
    VectorXd th(head_ + tail_);
    if (head_ > 0) th.head(head_) = scal_.to_natural_head(x.head(head_));
    if (split_ == Splitting::kProx)
      th.tail(tail_) = z.tail(tail_);
    else
      th.tail(tail_) = z.segment(nc_, tail_) - z.tail(tail_);
    return th;
  }

 private:
  VectorXd yv_;
  VectorXd b_;
  double lambda_;
  Splitting split_;
  Index head_, tail_, nc_;
  Scaling scal_;
  MatrixXd B_, M_, P_, mtm_;
  VectorXd q_;
  Eigen::LDLT<MatrixXd> ldlt_;
};

struct AdmmRaw {
  VectorXd x, z, y;
  int iterations = 0;
  SolveStatus status = SolveStatus::kMaxIter;
  double rho = 0.0;
  double r_prim = 0.0, r_dual = 0.0, eps_prim = 0.0, eps_dual = 0.0;
  std::vector<double> merit_trace;
};

template <class Model>
AdmmRaw run_admm(Model& model, const SolverOptions& opts, WarmStart* warm) {
  const Index nx = model.nx(), nz = model.nz();
  AdmmRaw st;
  st.rho = opts.rho;
  st.x = VectorXd::Zero(nx);
  st.z = VectorXd::Zero(nz);
  st.y = VectorXd::Zero(nz);
  if (warm && warm->valid && warm->x.size() == nx && warm->z.size() == nz) {
    st.x = warm->x;
    st.z = warm->z;
    st.y = warm->y;
    if (warm->rho > 0.0) st.rho = warm->rho;
  }
  model.factor(st.rho, opts.sigma);

  const double alpha = opts.over_relaxation;
  const VectorXd& q = model.qlin();
  const auto q_blocks = model.dual_block_norms(q);
  const double q_scale = std::max(q_blocks[0], q_blocks[1]);

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const VectorXd rhs =
        opts.sigma * st.x - q + model.apply_MT(st.rho * st.z - st.y);
    const VectorXd x_tilde = model.kkt_solve(rhs);
    const VectorXd mx_tilde = model.apply_M(x_tilde);

    st.x = alpha * x_tilde + (1.0 - alpha) * st.x;
    const VectorXd z_relaxed = alpha * mx_tilde + (1.0 - alpha) * st.z;
    VectorXd z_new = z_relaxed + st.y / st.rho;
    model.prox(z_new, st.rho);
    st.y += st.rho * (z_relaxed - z_new);
    st.z = z_new;

    if (opts.trace_merit) {
      const VectorXd mx = model.apply_M(st.x);
      const double merit = model.fval(st.x) + model.gval(st.z) +
                           st.y.dot(mx - st.z) +
                           0.5 * st.rho * (mx - st.z).squaredNorm();
      st.merit_trace.push_back(merit);
    }

    if ((it + 1) % opts.check_interval != 0 && it + 1 != opts.max_iter)
      continue;

    // residuals and thresholds in problem units, per dual block
    const VectorXd mx = model.apply_M(st.x);
    const VectorXd px = model.apply_P(st.x);
    const VectorXd mty = model.apply_MT(st.y);
    st.r_prim = model.unscaled_prim_norm(mx - st.z);
    const auto rd = model.dual_block_norms(px + q + mty);
    const auto px_b = model.dual_block_norms(px);
    const auto mty_b = model.dual_block_norms(mty);
    const double scale_prim = std::max(model.unscaled_prim_norm(mx),
                                       model.unscaled_prim_norm(st.z));
    const double eps_head =
        opts.eps_abs +
        opts.eps_rel * std::max({px_b[0], q_blocks[0], mty_b[0]});
    const double eps_tail =
        opts.eps_abs +
        opts.eps_rel * std::max({px_b[1], q_blocks[1], mty_b[1]});
    st.eps_prim = opts.eps_abs + opts.eps_rel * scale_prim;
    st.r_dual = std::max(rd[0], rd[1]);
    st.eps_dual = std::max(eps_head, eps_tail);

    if (st.r_prim <= st.eps_prim && rd[0] <= eps_head && rd[1] <= eps_tail) {
      st.status = SolveStatus::kConverged;
      ++it;
      break;
    }

    // runaway duals with a stuck primal residual indicate an infeasible
    // constraint set (cannot happen with build_constraints(), which
    // always admits theta = 0)
    if (inf_norm(st.y) > 1e12 * std::max(1.0, q_scale) &&
        st.r_prim > 1e3 * st.eps_prim) {
      st.status = SolveStatus::kInfeasibleDetected;
      ++it;
      break;
    }

    if (opts.adaptive_rho) {
      const double tiny = 1e-12;
      const double num = st.r_prim / std::max(scale_prim, tiny);
      const double den =
          std::max(rd[0] / std::max(eps_head / opts.eps_rel, tiny),
                   rd[1] / std::max(eps_tail / opts.eps_rel, tiny));
      if (num > tiny && den > tiny) {
        const double rho_new =
            std::clamp(st.rho * std::sqrt(num / den), 1e-6, 1e6);
        if (rho_new > 5.0 * st.rho || rho_new < st.rho / 5.0) {
          st.rho = rho_new;
          model.factor(st.rho, opts.sigma);
        }
      }
    }
  }
  st.iterations = it;

  if (warm) {
    warm->valid = true;
    warm->x = st.x;
    warm->z = st.z;
    warm->y = st.y;
    warm->rho = st.rho;
  }
  return st;
}

// Lawson-Hanson nonnegative least squares: minimize ||C mu - d|| s.t.
// mu >= 0. Sizes here are at most (head x active rows), so cost is nil.
inline VectorXd nnls(const MatrixXd& C, const VectorXd& d) {
  const Index n = C.cols();
  VectorXd mu = VectorXd::Zero(n);
  if (n == 0) return mu;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, inf_norm(d));
  const int max_outer = 3 * static_cast<int>(n) + 10;

  for (int outer = 0; outer < max_outer; ++outer) {
    const VectorXd grad = C.transpose() * (d - C * mu);
    Index best = -1;
    double best_val = tol;
    for (Index i = 0; i < n; ++i)
      if (!passive[static_cast<std::size_t>(i)] && grad(i) > best_val) {
        best_val = grad(i);
        best = i;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_outer; ++inner) {
      std::vector<Index> idx;
      for (Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
      MatrixXd Cp(C.rows(), static_cast<Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j)
        Cp.col(static_cast<Index>(j)) = C.col(idx[j]);
      const VectorXd s = Cp.colPivHouseholderQr().solve(d);
      if ((s.array() > 0.0).all()) {
        mu.setZero();
        for (std::size_t j = 0; j < idx.size(); ++j)
          mu(idx[j]) = s(static_cast<Index>(j));
        break;
      }
      double step = 1.0;
      for (std::size_t j = 0; j < idx.size(); ++j)
        if (s(static_cast<Index>(j)) <= 0.0) {
          const double mj = mu(idx[j]);
          step = std::min(step, mj / (mj - s(static_cast<Index>(j))));
        }
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double upd =
            mu(idx[j]) + step * (s(static_cast<Index>(j)) - mu(idx[j]));
        mu(idx[j]) = upd;
        if (upd <= 1e-14) {
          mu(idx[j]) = 0.0;
          passive[static_cast<std::size_t>(idx[j])] = false;
        }
      }
    }
  }
  return mu;
}

}  // namespace solver_detail

/// First-order optimality residuals of the full problem at a given point.
struct KktResidual {
  double primal_inf = 0.0;
  double stationarity_inf = 0.0;
  double complementarity = 0.0;
};

namespace solver_detail {

// Shared KKT computation on the gradient pieces. grad = 2 Phi^T (Phi th - y)
// split into head and penalized-tail parts.
inline KktResidual kkt_from_parts(const VectorXd& grad_head,
                                  const VectorXd& grad_tail,
                                  const VectorXd& tail_values,
                                  const ConstraintSet& C,
                                  const VectorXd& head_values, double lambda,
                                  double active_tol) {
  KktResidual out;
  VectorXd head_resid = grad_head;
  VectorXd slack;
  if (C.rows() > 0) {
    slack = C.A * head_values - C.b;
    out.primal_inf = std::max(0.0, slack.maxCoeff());
    std::vector<Index> active;
    for (Index r = 0; r < slack.size(); ++r)
      if (slack(r) >= -active_tol) active.push_back(r);
    if (!active.empty()) {
      MatrixXd Ct(C.cols(), static_cast<Index>(active.size()));
      for (std::size_t j = 0; j < active.size(); ++j)
        Ct.col(static_cast<Index>(j)) = C.A.row(active[j]).transpose();
      const VectorXd mu = nnls(Ct, -grad_head);
      head_resid = grad_head + Ct * mu;
      double comp = 0.0;
      for (std::size_t j = 0; j < active.size(); ++j)
        comp += mu(static_cast<Index>(j)) * std::abs(slack(active[j]));
      out.complementarity = comp;
    }
  }

  double tail_inf = 0.0;
  for (Index i = 0; i < tail_values.size(); ++i) {
    double s;
    if (tail_values(i) != 0.0) {
      s = grad_tail(i) + lambda * (tail_values(i) > 0.0 ? 1.0 : -1.0);
    } else {
      // best subgradient in [-lambda, lambda]
      s = std::abs(grad_tail(i)) <= lambda
              ? 0.0
              : grad_tail(i) - std::copysign(lambda, grad_tail(i));
    }
    tail_inf = std::max(tail_inf, std::abs(s));
  }
  out.stationarity_inf = std::max(inf_norm(head_resid), tail_inf);
  return out;
}

}  // namespace solver_detail

/// KKT residuals for the structured problem.
inline KktResidual kkt_residual(const RegressionProblem& prob,
                                const Selector& S, const ConstraintSet& C,
                                double lambda, const ThetaFull& theta,
                                double active_tol = 1e-7) {
  if (S.offset != 11 || S.count != prob.rows())
    throw std::invalid_argument("kkt_residual: selector mismatch");
  const Eigen::VectorXd resid =
      prob.data_cols * theta.theta_p.theta + theta.w_bar - prob.y;
  const Eigen::VectorXd grad_head =
      2.0 * (prob.data_cols.transpose() * resid);
  const Eigen::VectorXd grad_tail = 2.0 * resid;
  return solver_detail::kkt_from_parts(grad_head, grad_tail, theta.w_bar, C,
                                       theta.theta_p.theta, lambda,
                                       active_tol);
}

/// KKT residuals for a dense instance; coordinates past `head` are the
/// penalized ones.
inline KktResidual kkt_residual(const Eigen::MatrixXd& Phi,
                                const Eigen::VectorXd& y, Eigen::Index head,
                                const ConstraintSet& C, double lambda,
                                const Eigen::VectorXd& theta,
                                double active_tol = 1e-7) {
  const Eigen::VectorXd resid = Phi * theta - y;
  const Eigen::VectorXd grad = 2.0 * (Phi.transpose() * resid);
  return solver_detail::kkt_from_parts(
      grad.head(head), grad.tail(theta.size() - head),
      theta.tail(theta.size() - head), C, theta.head(head), lambda,
      active_tol);
}

/// Constraint set with no rows, for unconstrained instances.
inline ConstraintSet empty_constraints(Eigen::Index dim) {
  ConstraintSet C;
  C.A.resize(0, dim);
  C.b.resize(0);
  return C;
}

namespace solver_detail {

template <class Model>
SolverResult finish(Model& model, AdmmRaw&& raw, Eigen::Index head,
                    double lambda,
                    const std::function<KktResidual(const VectorXd&)>& kkt,
                    const std::function<double(const VectorXd&)>& resid_norm) {
  SolverResult res;
  res.solution = model.extract_theta(raw.x, raw.z);
  const VectorXd& theta = res.solution;
  res.theta.theta_p.theta.setZero();
  const Eigen::Index hcopy = std::min<Eigen::Index>(head, 11);
  res.theta.theta_p.theta.head(hcopy) = theta.head(hcopy);
  res.theta.w_bar = theta.tail(theta.size() - head);
  res.solution_norm = res.theta.w_bar.lpNorm<1>();
  res.residual_norm = resid_norm(theta);
  res.objective =
      res.residual_norm * res.residual_norm + lambda * res.solution_norm;
  res.iterations = raw.iterations;
  res.status = raw.status;
  res.r_prim = raw.r_prim;
  res.r_dual = raw.r_dual;
  res.eps_prim = raw.eps_prim;
  res.eps_dual = raw.eps_dual;
  res.merit_trace = std::move(raw.merit_trace);
  const KktResidual kk = kkt(theta);
  res.kkt.primal_inf = kk.primal_inf;
  res.kkt.stationarity_inf = kk.stationarity_inf;
  res.kkt.duality_gap_estimate = kk.complementarity;
  return res;
}

}  // namespace solver_detail

/// Solves the structured identification problem. The constraint set must
/// act on the 11 plant coefficients. `warm`, when given, both seeds and
/// receives the internal iterates (use along a lambda path).
inline SolverResult solve_sparse_identification(const RegressionProblem& prob,
                                                const Selector& S,
                                                const ConstraintSet& C,
                                                double lambda,
                                                const SolverOptions& opts = {},
                                                WarmStart* warm = nullptr) {
  opts.validate();
  if (!(lambda >= 0.0))
    throw std::invalid_argument("solve: lambda must be >= 0");
  if (S.offset != 11 || S.count != prob.rows())
    throw std::invalid_argument("solve: selector mismatch");

  solver_detail::StructuredModel model(prob, C, lambda, opts.splitting);
  auto raw = solver_detail::run_admm(model, opts, warm);
  auto kkt = [&](const Eigen::VectorXd& th) {
    return kkt_residual(prob, S, C, lambda, split_theta(th));
  };
  auto rnorm = [&](const Eigen::VectorXd& th) {
    return (prob.data_cols * th.head<11>() + th.tail(prob.rows()) - prob.y)
        .norm();
  };
  return solver_detail::finish(model, std::move(raw), 11, lambda, kkt, rnorm);
}

/// Solves a dense instance of the same problem family:
///   min ||y - Phi x||^2 + lambda * sum_{i >= head} |x_i|,  A x_head <= b.
inline SolverResult solve_l1_constrained_ls(const Eigen::MatrixXd& Phi,
                                            const Eigen::VectorXd& y,
                                            Eigen::Index head,
                                            const ConstraintSet& C,
                                            double lambda,
                                            const SolverOptions& opts = {},
                                            WarmStart* warm = nullptr) {
  opts.validate();
  if (!(lambda >= 0.0))
    throw std::invalid_argument("solve: lambda must be >= 0");

  solver_detail::DenseModel model(Phi, y, head, C, lambda, opts.splitting);
  auto raw = solver_detail::run_admm(model, opts, warm);
  auto kkt = [&](const Eigen::VectorXd& th) {
    return kkt_residual(Phi, y, head, C, lambda, th);
  };
  auto rnorm = [&](const Eigen::VectorXd& th) { return (Phi * th - y).norm(); };
  return solver_detail::finish(model, std::move(raw), head, lambda, kkt,
                               rnorm);
}

}  // namespace thermid
