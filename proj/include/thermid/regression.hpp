#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermid/datagen.hpp"
#include "thermid/rc_model.hpp"

namespace thermid {

/// The linear system behind the identification problem. Row i (paper
/// sample k = i + 3) reads
///   y[k] = [y[k-1], y[k-2], u1[k-2..k], u2[k-2..k], u3[k-2..k]] * theta_p
///          + wbar[k].
/// Only the 11 data columns are stored; the trailing (k_max - 2)-wide
/// identity block that multiplies wbar is implicit, which keeps memory
/// linear in the record length. dense_phi() materializes the full matrix
/// for small systems.
struct RegressionProblem {
  Eigen::VectorXd y;          ///< stacked outputs, size m = k_max - 2
  Eigen::MatrixXd data_cols;  ///< m x 11 block of lagged signals
  std::size_t k_max = 0;

  Eigen::Index rows() const { return y.size(); }
  Eigen::Index cols() const { return y.size() + 11; }
};

inline RegressionProblem build_regression(const TimeSeriesDataset& d) {
  validate(d);
  const std::size_t n = d.size();
  const Eigen::Index m = static_cast<Eigen::Index>(n) - 2;

  RegressionProblem prob;
  prob.k_max = n;
  prob.y.resize(m);
  prob.data_cols.resize(m, 11);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);  // paper k = i + 3
    prob.y(i) = d.y[k + 2];
    prob.data_cols(i, 0) = d.y[k + 1];
    prob.data_cols(i, 1) = d.y[k];
    prob.data_cols(i, 2) = d.u1[k];
    prob.data_cols(i, 3) = d.u1[k + 1];
    prob.data_cols(i, 4) = d.u1[k + 2];
    prob.data_cols(i, 5) = d.u2[k];
    prob.data_cols(i, 6) = d.u2[k + 1];
    prob.data_cols(i, 7) = d.u2[k + 2];
    prob.data_cols(i, 8) = d.u3[k];
    prob.data_cols(i, 9) = d.u3[k + 1];
    prob.data_cols(i, 10) = d.u3[k + 2];
  }
  return prob;
}

/// Materialization threshold: above this many samples the dense regressor
/// matrix is refused and callers must go through the structured products.
inline constexpr std::size_t kDensePhiLimit = 5000;

inline Eigen::MatrixXd dense_phi(const RegressionProblem& prob,
                                 std::size_t limit = kDensePhiLimit) {
  if (prob.k_max > limit)
    throw std::length_error(
        "dense_phi: k_max = " + std::to_string(prob.k_max) +
        " exceeds the dense materialization limit " + std::to_string(limit));
  const Eigen::Index m = prob.rows();
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(m, m + 11);
  Phi.leftCols<11>() = prob.data_cols;
  Phi.rightCols(m).setIdentity();
  return Phi;
}

/// Phi * [theta_p; wbar] without materializing Phi.
inline Eigen::VectorXd apply_phi(const RegressionProblem& prob,
                                 const Eigen::VectorXd& theta_full) {
  if (theta_full.size() != prob.cols())
    throw std::invalid_argument("apply_phi: dimension mismatch");
  return prob.data_cols * theta_full.head<11>() + theta_full.tail(prob.rows());
}

/// Phi^T v without materializing Phi.
inline Eigen::VectorXd apply_phi_transpose(const RegressionProblem& prob,
                                           const Eigen::VectorXd& v) {
  if (v.size() != prob.rows())
    throw std::invalid_argument("apply_phi_transpose: dimension mismatch");
  Eigen::VectorXd out(prob.cols());
  out.head<11>() = prob.data_cols.transpose() * v;
  out.tail(prob.rows()) = v;
  return out;
}

/// The row-selector S with S * [theta_p; wbar] = wbar: a (k_max-2) x
/// (k_max+9) matrix of orthonormal rows, stored as an offset/count pair.
struct Selector {
  Eigen::Index offset = 11;
  Eigen::Index count = 0;

  Eigen::VectorXd apply(const Eigen::VectorXd& theta_full) const {
    if (theta_full.size() != offset + count)
      throw std::invalid_argument("Selector: dimension mismatch");
    return theta_full.segment(offset, count);
  }
  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(count, offset + count);
    S.rightCols(count).setIdentity();
    return S;
  }
};

inline Selector selector_matrix(std::size_t k_max) {
  if (k_max < 3)
    throw std::invalid_argument("selector_matrix: k_max must be >= 3");
  return Selector{11, static_cast<Eigen::Index>(k_max) - 2};
}

/// Plant coefficients plus transformed disturbance, in the stacking order
/// the regression uses.
struct ThetaFull {
  PlantParams theta_p;
  Eigen::VectorXd w_bar;

  Eigen::VectorXd stacked() const {
    Eigen::VectorXd v(11 + w_bar.size());
    v.head<11>() = theta_p.theta;
    v.tail(w_bar.size()) = w_bar;
    return v;
  }
};

inline ThetaFull split_theta(const Eigen::VectorXd& stacked) {
  if (stacked.size() < 11)
    throw std::invalid_argument("split_theta: vector shorter than 11");
  ThetaFull t;
  t.theta_p.theta = stacked.head<11>();
  t.w_bar = stacked.tail(stacked.size() - 11);
  return t;
}

/// Simulates the identified difference equation over the inputs of `d`.
/// By default this is a free run: the recursion uses its own outputs as
/// lags, seeded with the first two recorded outputs, which is what a
/// multi-step-ahead validation needs. With one_step_ahead = true the lags
/// come from the measured outputs instead.
inline std::vector<double> predict(const PlantParams& p,
                                   std::span<const double> w_bar,
                                   const TimeSeriesDataset& d,
                                   bool one_step_ahead = false) {
  validate(d);
  const std::size_t n = d.size();
  if (w_bar.size() != n - 2)
    throw std::invalid_argument(
        "predict: w_bar must have k_max - 2 entries, got " +
        std::to_string(w_bar.size()));
  const auto& t = p.theta;
  std::vector<double> yhat(n);
  yhat[0] = d.y[0];
  yhat[1] = d.y[1];
  for (std::size_t k = 2; k < n; ++k) {
    const double lag1 = one_step_ahead ? d.y[k - 1] : yhat[k - 1];
    const double lag2 = one_step_ahead ? d.y[k - 2] : yhat[k - 2];
    yhat[k] = t(0) * lag1 + t(1) * lag2 + t(2) * d.u1[k - 2] +
              t(3) * d.u1[k - 1] + t(4) * d.u1[k] + t(5) * d.u2[k - 2] +
              t(6) * d.u2[k - 1] + t(7) * d.u2[k] + t(8) * d.u3[k - 2] +
              t(9) * d.u3[k - 1] + t(10) * d.u3[k] + w_bar[k - 2];
  }
  return yhat;
}

}  // namespace thermid
