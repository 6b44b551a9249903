#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace racing {

/// Thrown when the Hessian is not numerically positive definite.
class QpSingularError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// min 0.5 x'Hx + g'x  s.t.  C x >= b   (H symmetric positive definite)
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd C;
  Eigen::VectorXd b;
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct QpResult {
  QpStatus status = QpStatus::Optimal;
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per row of C, zero when inactive
  std::vector<int> active_set;
  int iterations = 0;
  double objective = 0.0;
};

/// Dual active-set method of Goldfarb and Idnani. Starts from the
/// unconstrained minimizer and adds the most violated constraint each pass,
/// so the result is exact up to round-off once the active set settles.
class DenseQpSolver {
 public:
  QpResult solve(const QpProblem& problem) const;

  int max_iterations = 0;  // 0 selects 10 * (n + m)
};

/// Max of stationarity, primal infeasibility and complementarity residuals.
double kkt_residual(const QpProblem& problem, const QpResult& result);

}  // namespace racing
