#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace edgefit {

struct BvlsOptions {
  /// Termination threshold on the scaled KKT residual.
  double kktTol = 1e-10;
  int maxIterations = 0;  // 0: 10 * n + 50
};

struct BvlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double kktResidual = 0.0;
};

/// Bounded-variable least squares: min |A x - b|^2 s.t. lower <= x <= upper.
///
/// Active-set method (Stark & Parker). Bounds may be +-infinity. Free
/// subproblems use a complete orthogonal decomposition, so rank-deficient
/// columns yield the minimum-norm free solution. Returned x lies inside the
/// bounds exactly. Throws SolverError on non-convergence.
BvlsResult solveBvls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const BvlsOptions& options = {});

/// Scaled KKT residual of a candidate bounded least-squares solution.
double bvlsKktResidual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper);

/// Residual callback: fills r and, when J is non-null, the Jacobian dr/dx.
using ResidualFunction =
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J)>;

struct TrustRegionOptions {
  int maxIterations = 200;
  /// Stop when |dx| < stepTol * (|x| + stepTol).
  double stepTol = 1e-8;
  /// Stop when the relative cost decrease of an accepted step falls below this.
  double costTol = 1e-12;
};

struct TrustRegionReport {
  Eigen::VectorXd x;
  double initialCost = 0.0;
  double finalCost = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string stopReason;
};

/// Box-constrained nonlinear least squares, minimising |r(x)|^2.
///
/// Levenberg-Marquardt trust region with More's diagonal scaling. Each step
/// solves the damped linearised subproblem restricted to the box with
/// solveBvls, so iterates stay feasible. Only cost-decreasing steps are
/// accepted; the returned cost never exceeds the initial one.
TrustRegionReport minimizeBoxedLeastSquares(const ResidualFunction& residuals,
                                            Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                            const Eigen::VectorXd& upper,
                                            const TrustRegionOptions& options = {});

}  // namespace edgefit
