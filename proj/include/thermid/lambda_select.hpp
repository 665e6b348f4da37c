#pragma once

// Regularization-weight selection from the two norm-vs-lambda curves.
// A sweep solves the identification problem along an increasing lambda
// grid (warm-started); the dual-threshold rule then looks for
//
//   lambda1: smallest grid point past which the solution norm stays below
//            tau_sol, and
//   lambda2: largest grid point before which the residual norm stays below
//            tau_res,
//
// and accepts lambda* = lambda1 whenever lambda2 > lambda1. The retry
// schedule relaxes both thresholds geometrically until a pair accepts.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermid/solver.hpp"

namespace thermid {

struct LambdaPath {
  std::vector<double> lambdas;
  std::vector<double> solution_norms;
  std::vector<double> residual_norms;
  std::vector<SolverResult> results;

  std::size_t size() const { return lambdas.size(); }
};

/// Data-scaled default grid: 30 log-spaced weights spanning [1e-6, 1e2],
/// scaled so the top decade brackets an estimate of the weight at which
/// the disturbance block is forced to zero (twice the peak residual of the
/// plain 11-column least-squares fit).
inline std::vector<double> default_lambda_grid(const RegressionProblem& prob,
                                               int points = 30) {
  if (points < 1) throw std::invalid_argument("default_lambda_grid: points >= 1");
  const Eigen::VectorXd theta_ls =
      prob.data_cols.colPivHouseholderQr().solve(prob.y);
  const Eigen::VectorXd r = prob.y - prob.data_cols * theta_ls;
  double lambda_max_est = 2.0 * r.cwiseAbs().maxCoeff();
  if (!(lambda_max_est > 0.0)) lambda_max_est = 1.0;
  const double scale = lambda_max_est / 1e2;

  std::vector<double> grid(static_cast<std::size_t>(points));
  const double lo = std::log(1e-6), hi = std::log(1e2);
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        scale * std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                  std::max(1, points - 1));
  return grid;
}

/// One converged (or max-iter, marked as such) solve per grid point, in
/// increasing lambda order with warm starts carried along the path.
inline LambdaPath sweep(const RegressionProblem& prob, const Selector& S,
                        const ConstraintSet& C,
                        const std::vector<double>& grid,
                        const SolverOptions& opts = {}) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty lambda grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0))
      throw std::invalid_argument("sweep: lambdas must be > 0");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("sweep: grid must be strictly increasing");
  }
  LambdaPath path;
  path.lambdas = grid;
  WarmStart warm;
  for (double lambda : grid) {
    SolverResult res =
        solve_sparse_identification(prob, S, C, lambda, opts, &warm);
    path.solution_norms.push_back(res.solution_norm);
    path.residual_norms.push_back(res.residual_norm);
    path.results.push_back(std::move(res));
  }
  return path;
}

struct SelectionResult {
  bool accepted = false;
  double lambda_star = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::ptrdiff_t index1 = -1;
  std::ptrdiff_t index2 = -1;
  std::string diagnostic;
};

/// Pure function of the path arrays; never re-solves. "For all lambda
/// beyond/before" is evaluated over grid points only.
inline SelectionResult select_lambda(const LambdaPath& path, double tau_sol,
                                     double tau_res) {
  if (path.size() == 0)
    throw std::invalid_argument("select_lambda: empty path");
  if (!(tau_sol > 0.0) || !(tau_res > 0.0))
    throw std::invalid_argument("select_lambda: thresholds must be > 0");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(path.size());

  // first index from which every solution norm is below tau_sol
  std::ptrdiff_t first_small = n;
  for (std::ptrdiff_t i = n; i-- > 0;) {
    if (path.solution_norms[static_cast<std::size_t>(i)] < tau_sol)
      first_small = i;
    else
      break;
  }
  // first index at which the residual norm reaches tau_res
  std::ptrdiff_t first_big = n;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (path.residual_norms[static_cast<std::size_t>(i)] >= tau_res) {
      first_big = i;
      break;
    }
  }

  SelectionResult sel;
  sel.index1 = std::max<std::ptrdiff_t>(first_small - 1, 0);
  sel.lambda1 = path.lambdas[static_cast<std::size_t>(sel.index1)];
  sel.index2 = std::min<std::ptrdiff_t>(first_big, n - 1);
  sel.lambda2 = path.lambdas[static_cast<std::size_t>(sel.index2)];

  std::ostringstream diag;
  if (first_small == n)
    diag << "solution norm never drops below tau_sol=" << tau_sol << "; ";
  if (first_big == 0)
    diag << "residual norm exceeds tau_res=" << tau_res
         << " from the first grid point; ";
  sel.accepted = sel.lambda2 > sel.lambda1;
  if (sel.accepted) {
    sel.lambda_star = sel.lambda1;
    diag << "accepted lambda* = " << sel.lambda_star;
  } else {
    diag << "rejected: lambda2 <= lambda1";
  }
  sel.diagnostic = diag.str();
  return sel;
}

/// Threshold retry schedule for auto_select. The starting pair anchors
/// tau_sol to the median of the solution-norm curve (robust against the
/// degenerate blow-up the smallest grid weights produce) and tau_res to
/// the span of the residual curve; both relax geometrically on rejection.
struct ThresholdSchedule {
  double tau_sol_factor = 0.1;   ///< times the median solution norm
  double tau_res_factor = 0.02;  ///< times (max - min) residual span, above min
  double relax = 1.5;
  int max_rounds = 10;
};

struct AutoSelectResult {
  bool accepted = false;
  double lambda_star = 0.0;
  int rounds = 0;
  SelectionResult selection;
  LambdaPath path;  ///< kept for inspection, especially on failure
};

/// Sweeps once, then walks the threshold schedule until a pair accepts.
/// Returns a structured failure (accepted = false, full path attached)
/// when the schedule is exhausted.
inline AutoSelectResult auto_select(const RegressionProblem& prob,
                                    const Selector& S, const ConstraintSet& C,
                                    const SolverOptions& opts = {},
                                    std::vector<double> grid = {},
                                    const ThresholdSchedule& sched = {}) {
  if (grid.empty()) grid = default_lambda_grid(prob);
  AutoSelectResult out;
  out.path = sweep(prob, S, C, grid, opts);

  std::vector<double> sols = out.path.solution_norms;
  std::nth_element(sols.begin(), sols.begin() + sols.size() / 2, sols.end());
  const double med_sol = sols[sols.size() / 2];
  const double min_res = *std::min_element(out.path.residual_norms.begin(),
                                           out.path.residual_norms.end());
  const double max_res = *std::max_element(out.path.residual_norms.begin(),
                                           out.path.residual_norms.end());
  const double res_span = std::max(max_res - min_res, 1e-300);

  double tau_sol = std::max(sched.tau_sol_factor * med_sol, 1e-300);
  double tau_res = min_res + sched.tau_res_factor * res_span;
  for (int round = 1; round <= sched.max_rounds; ++round) {
    out.rounds = round;
    out.selection = select_lambda(out.path, tau_sol, tau_res);
    if (out.selection.accepted) {
      out.accepted = true;
      out.lambda_star = out.selection.lambda_star;
      return out;
    }
    tau_sol *= sched.relax;
    tau_res = min_res + (tau_res - min_res) * sched.relax;
  }
  return out;
}

}  // namespace thermid
