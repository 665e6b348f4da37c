#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermid/rc_model.hpp"

namespace thermid {

/// Linear inequality set A x <= b on model coefficients. For the plant
/// coefficient vector the rows split into four blocks acting on disjoint
/// coordinate groups:
///   block 1 (rows 0-3):   stability of the denominator, on (t1, t2)
///   block 2 (rows 4-7):   qhvac numerator signs + DC gain, on (t3..t5)
///   block 3 (rows 8-10):  Toa numerator signs, on (t6..t8)
///   block 4 (rows 11-14): etasol numerator signs + DC gain, on (t9..t11)
struct ConstraintSet {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<int> block;  ///< per-row block tag (1..4); 0 if untagged

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
};

/// The fixed 15-row set on the 11 plant coefficients. Two further rows
/// that hold on this polytope anyway (t2 - t1 <= 1 from stability, and
/// the Toa DC-gain row -(t6+t7+t8) <= 0) are deliberately not included;
/// see dropped_rows().
inline ConstraintSet build_constraints() {
  ConstraintSet C;
  C.A = Eigen::MatrixXd::Zero(15, 11);
  C.b = Eigen::VectorXd::Zero(15);
  C.block.assign(15, 0);

  // block 1: -t1 <= 0, t2 <= 0, -t2 <= 1, t1 + t2 <= 1
  C.A(0, 0) = -1.0;
  C.A(1, 1) = 1.0;
  C.A(2, 1) = -1.0;
  C.b(2) = 1.0;
  C.A(3, 0) = 1.0;
  C.A(3, 1) = 1.0;
  C.b(3) = 1.0;

  // block 2: t3 <= 0, -t4 <= 0, -t5 <= 0, -(t3 + t4 + t5) <= 0
  C.A(4, 2) = 1.0;
  C.A(5, 3) = -1.0;
  C.A(6, 4) = -1.0;
  C.A.row(7).segment<3>(2).setConstant(-1.0);

  // block 3: -t6 <= 0, -t7 <= 0, -t8 <= 0
  C.A(8, 5) = -1.0;
  C.A(9, 6) = -1.0;
  C.A(10, 7) = -1.0;

  // block 4: t9 <= 0, -t10 <= 0, -t11 <= 0, -(t9 + t10 + t11) <= 0
  C.A(11, 8) = 1.0;
  C.A(12, 9) = -1.0;
  C.A(13, 10) = -1.0;
  C.A.row(14).segment<3>(8).setConstant(-1.0);

  for (int r = 0; r < 4; ++r) C.block[r] = 1;
  for (int r = 4; r < 8; ++r) C.block[r] = 2;
  for (int r = 8; r < 11; ++r) C.block[r] = 3;
  for (int r = 11; r < 15; ++r) C.block[r] = 4;
  return C;
}

/// A row a^T x <= rhs that is implied by build_constraints() and therefore
/// not part of it.
struct DroppedRow {
  Eigen::RowVector<double, 11> a;
  double rhs;
  std::string what;
};

inline std::array<DroppedRow, 2> dropped_rows() {
  std::array<DroppedRow, 2> rows;
  rows[0].a.setZero();
  rows[0].a(0) = -1.0;
  rows[0].a(1) = 1.0;
  rows[0].rhs = 1.0;
  rows[0].what = "t2 - t1 <= 1 (stability row implied by t2 <= 0, t1 >= 0)";
  rows[1].a.setZero();
  rows[1].a.segment<3>(5).setConstant(-1.0);
  rows[1].rhs = 0.0;
  rows[1].what = "-(t6 + t7 + t8) <= 0 (Toa DC gain implied by sign rows)";
  return rows;
}

/// Per-row constraint violation: slack = (A x - b)_row, positive when the
/// row is violated.
struct Violation {
  int row;
  int block;
  double slack;
};

inline Eigen::VectorXd slacks(const ConstraintSet& C,
                              const Eigen::VectorXd& x) {
  if (x.size() != C.cols())
    throw std::invalid_argument("slacks: dimension mismatch");
  return C.A * x - C.b;
}

/// Rows with A x - b > tol. Boundary contact (|A x - b| <= tol) is not a
/// violation; callers that care about degenerate boundary solutions can
/// inspect slacks() directly.
inline std::vector<Violation> check_feasible(const ConstraintSet& C,
                                             const Eigen::VectorXd& x,
                                             double tol) {
  if (!(tol >= 0.0))
    throw std::invalid_argument("check_feasible: tol must be >= 0");
  const Eigen::VectorXd s = slacks(C, x);
  std::vector<Violation> out;
  for (Eigen::Index r = 0; r < s.size(); ++r)
    if (s(r) > tol)
      out.push_back({static_cast<int>(r),
                     C.block.empty() ? 0 : C.block[static_cast<std::size_t>(r)],
                     s(r)});
  return out;
}

inline std::vector<Violation> check_feasible(const ConstraintSet& C,
                                             const PlantParams& p,
                                             double tol) {
  return check_feasible(C, Eigen::VectorXd(p.theta), tol);
}

/// Default per-row feasibility tolerance: well below solver convergence
/// tolerances so constraint checks never dominate an error budget.
inline constexpr double kFeasibilityTol = 1e-9;

/// True iff none of the three input channels is identically zero.
inline bool is_physically_meaningful(const PlantParams& p) {
  auto channel_alive = [&](int first) {
    return p.theta.segment<3>(first).cwiseAbs().maxCoeff() > 0.0;
  };
  return channel_alive(2) && channel_alive(5) && channel_alive(8);
}

/// Result of the active-set regularity check: a feasible point is regular
/// when the gradients of its active rows are linearly independent.
struct RegularityReport {
  bool regular;
  int active_count;
  int active_rank;
  std::vector<int> active_rows;
};

inline RegularityReport check_regularity(const ConstraintSet& C,
                                         const Eigen::VectorXd& x,
                                         double tol) {
  const Eigen::VectorXd s = slacks(C, x);
  if ((s.array() > tol).any())
    throw std::invalid_argument(
        "check_regularity: point is infeasible beyond tol");
  std::vector<int> active;
  for (Eigen::Index r = 0; r < s.size(); ++r)
    if (std::abs(s(r)) <= tol) active.push_back(static_cast<int>(r));

  RegularityReport rep;
  rep.active_rows = active;
  rep.active_count = static_cast<int>(active.size());
  if (active.empty()) {
    rep.active_rank = 0;
    rep.regular = true;  // vacuously regular in the interior
    return rep;
  }
  Eigen::MatrixXd Aact(active.size(), C.cols());
  for (std::size_t i = 0; i < active.size(); ++i)
    Aact.row(static_cast<Eigen::Index>(i)) = C.A.row(active[i]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Aact);
  qr.setThreshold(1e-10);
  rep.active_rank = static_cast<int>(qr.rank());
  rep.regular = rep.active_rank == rep.active_count;
  return rep;
}

inline RegularityReport check_regularity(const ConstraintSet& C,
                                         const PlantParams& p, double tol) {
  return check_regularity(C, Eigen::VectorXd(p.theta), tol);
}

}  // namespace thermid
