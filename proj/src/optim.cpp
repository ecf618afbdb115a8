#include "edgefit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "edgefit/errors.hpp"

namespace edgefit {

namespace {

enum class VarState { Free, AtLower, AtUpper };

double kktScale(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
  const double an = A.norm();
  return an * (b.norm() + an * x.norm()) + std::numeric_limits<double>::min();
}

// Minimiser of |J d + r|^2 + mu |D d|^2 over lo <= d <= hi. Variables with
// lo == hi do not move. The unconstrained solution is tried first; the
// bounded solver only runs when it leaves the box.
Eigen::VectorXd dampedStep(const Eigen::MatrixXd& J, const Eigen::VectorXd& r, const Eigen::VectorXd& diag,
                           double mu, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                           const std::vector<Eigen::Index>& movable) {
  const Eigen::Index n = J.cols();
  const auto k = static_cast<Eigen::Index>(movable.size());
  Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
  if (k == 0) return step;
  Eigen::MatrixXd Jm(J.rows(), k);
  Eigen::VectorXd dm(k), lom(k), him(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Jm.col(i) = J.col(movable[i]);
    dm[i] = diag[movable[i]];
    lom[i] = lo[movable[i]];
    him[i] = hi[movable[i]];
  }
  Eigen::MatrixXd H = Jm.transpose() * Jm;
  H.diagonal() += mu * dm.cwiseAbs2();
  const Eigen::LLT<Eigen::MatrixXd> llt(H);
  Eigen::VectorXd d;
  bool inside = false;
  if (llt.info() == Eigen::Success) {
    d = -llt.solve(Jm.transpose() * r);
    inside = d.allFinite() && (d.array() >= lom.array()).all() && (d.array() <= him.array()).all();
  }
  if (!inside) {
    Eigen::MatrixXd A(J.rows() + k, k);
    A.topRows(J.rows()) = Jm;
    A.bottomRows(k) = (std::sqrt(mu) * dm).asDiagonal();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(J.rows() + k);
    rhs.head(J.rows()) = -r;
    d = solveBvls(A, rhs, lom, him).x;
  }
  for (Eigen::Index i = 0; i < k; ++i) step[movable[i]] = d[i];
  return step;
}

}  // namespace

double bvlsKktResidual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper) {
  const Eigen::VectorXd w = A.transpose() * (b - A * x);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] < lower[j] || x[j] > upper[j]) return std::numeric_limits<double>::infinity();
    double v;
    if (lower[j] == upper[j]) {
      v = 0.0;
    } else if (x[j] == lower[j]) {
      v = std::max(w[j], 0.0);
    } else if (x[j] == upper[j]) {
      v = std::max(-w[j], 0.0);
    } else {
      v = std::abs(w[j]);
    }
    worst = std::max(worst, v);
  }
  return worst / kktScale(A, b, x);
}

BvlsResult solveBvls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const BvlsOptions& options) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size() || lower.size() != n || upper.size() != n) {
    throw InvalidArgument("solveBvls: dimension mismatch");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(lower[j] <= upper[j])) throw InvalidArgument("solveBvls: lower bound exceeds upper bound");
  }
  const int maxIter = options.maxIterations > 0 ? options.maxIterations : 10 * static_cast<int>(n) + 50;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n).cwiseMax(lower).cwiseMin(upper);
  std::vector<VarState> state(static_cast<std::size_t>(n), VarState::Free);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lower[j] == upper[j]) state[j] = VarState::AtLower;
  }

  std::vector<Eigen::Index> freeIdx;
  auto collectFree = [&] {
    freeIdx.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (state[j] == VarState::Free) freeIdx.push_back(j);
    }
  };

  // Solves the unconstrained problem over the free set with bound variables
  // held fixed; moves x towards that solution while staying feasible.
  auto innerLoop = [&] {
    for (int guard = 0; guard < 3 * n + 10; ++guard) {
      collectFree();
      if (freeIdx.empty()) return;
      const auto nf = static_cast<Eigen::Index>(freeIdx.size());
      Eigen::VectorXd rhs = b;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (state[j] != VarState::Free && x[j] != 0.0) rhs.noalias() -= A.col(j) * x[j];
      }
      Eigen::MatrixXd Af(A.rows(), nf);
      for (Eigen::Index k = 0; k < nf; ++k) Af.col(k) = A.col(freeIdx[k]);
      const Eigen::VectorXd z = Af.completeOrthogonalDecomposition().solve(rhs);

      double step = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index k = 0; k < nf; ++k) {
        const Eigen::Index j = freeIdx[k];
        double a = 1.0;
        if (z[k] < lower[j]) {
          a = (lower[j] - x[j]) / (z[k] - x[j]);
        } else if (z[k] > upper[j]) {
          a = (upper[j] - x[j]) / (z[k] - x[j]);
        } else {
          continue;
        }
        a = std::clamp(a, 0.0, 1.0);
        if (a < step || blocking < 0) {
          step = a;
          blocking = k;
        }
      }
      if (blocking < 0) {
        for (Eigen::Index k = 0; k < nf; ++k) x[freeIdx[k]] = z[k];
        return;
      }
      for (Eigen::Index k = 0; k < nf; ++k) {
        const Eigen::Index j = freeIdx[k];
        x[j] += step * (z[k] - x[j]);
        const double tolj = 1e-14 * (1.0 + std::abs(x[j]));
        const bool hitLow = z[k] < lower[j] && (k == blocking || x[j] <= lower[j] + tolj);
        const bool hitHigh = z[k] > upper[j] && (k == blocking || x[j] >= upper[j] - tolj);
        if (hitLow) {
          x[j] = lower[j];
          state[j] = VarState::AtLower;
        } else if (hitHigh) {
          x[j] = upper[j];
          state[j] = VarState::AtUpper;
        } else {
          x[j] = std::clamp(x[j], lower[j], upper[j]);
        }
      }
    }
  };

  innerLoop();
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  BvlsResult result;
  for (int iter = 0; iter < maxIter; ++iter) {
    result.iterations = iter + 1;
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    const double scale = kktScale(A, b, x);
    double freeViolation = 0.0;
    double best = 0.0;
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (lower[j] == upper[j]) continue;
      double v = 0.0;
      switch (state[j]) {
        case VarState::Free: freeViolation = std::max(freeViolation, std::abs(w[j])); continue;
        case VarState::AtLower: v = w[j]; break;
        case VarState::AtUpper: v = -w[j]; break;
      }
      if (v > best && !blocked[j]) {
        best = v;
        enter = j;
      }
    }
    result.kktResidual = std::max(best, freeViolation) / scale;
    if (result.kktResidual <= options.kktTol) {
      result.x = x;
      return result;
    }
    if (enter < 0 || best / scale <= options.kktTol) {
      // Only the free-set stationarity is off (round-off); one more solve.
      innerLoop();
      const double kkt = bvlsKktResidual(A, b, x, lower, upper);
      result.kktResidual = kkt;
      if (kkt <= options.kktTol || enter < 0) {
        result.x = x;
        return result;
      }
      continue;
    }
    const VarState before = state[enter];
    const Eigen::VectorXd xBefore = x;
    state[enter] = VarState::Free;
    innerLoop();
    if (state[enter] == before && x == xBefore) {
      blocked[enter] = 1;  // re-pinned immediately: round-off, skip it this round
    } else {
      std::fill(blocked.begin(), blocked.end(), 0);
    }
  }
  throw SolverError("bounded least squares did not converge", result.iterations);
}

TrustRegionReport minimizeBoxedLeastSquares(const ResidualFunction& residuals,
                                            Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                            const Eigen::VectorXd& upper,
                                            const TrustRegionOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw InvalidArgument("minimizeBoxedLeastSquares: bound dimension mismatch");
  }
  TrustRegionReport report;
  Eigen::VectorXd x = x0.cwiseMax(lower).cwiseMin(upper);
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  residuals(x, r, &J);
  report.evaluations = 1;
  double cost = r.squaredNorm();
  report.initialCost = cost;
  if (!std::isfinite(cost)) {
    report.x = x;
    report.finalCost = cost;
    report.stopReason = "non-finite initial cost";
    return report;
  }

  std::vector<Eigen::Index> movable;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lower[j] < upper[j]) movable.push_back(j);
  }
  Eigen::VectorXd diag = J.colwise().norm().transpose().cwiseMax(1e-12);
  double mu = 1e-3 * diag.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n, 1));
  double nu = 2.0;

  Eigen::VectorXd rNew;
  Eigen::MatrixXd JNew;
  report.stopReason = "max iterations";
  for (int iter = 0; iter < options.maxIterations; ++iter) {
    report.iterations = iter + 1;
    if (cost == 0.0) {
      report.stopReason = "zero cost";
      break;
    }
    const Eigen::VectorXd step = dampedStep(J, r, diag, mu, lower - x, upper - x, movable);

    if (step.norm() < options.stepTol * (x.norm() + options.stepTol)) {
      report.stopReason = "step tolerance";
      break;
    }
    const double predicted = cost - (J * step + r).squaredNorm();
    const Eigen::VectorXd xNew = (x + step).cwiseMax(lower).cwiseMin(upper);
    residuals(xNew, rNew, &JNew);
    ++report.evaluations;
    const double costNew = rNew.squaredNorm();

    if (std::isfinite(costNew) && costNew < cost && predicted > 0.0) {
      const double rho = (cost - costNew) / predicted;
      const double relDecrease = (cost - costNew) / cost;
      x = xNew;
      r.swap(rNew);
      J.swap(JNew);
      cost = costNew;
      diag = diag.cwiseMax(J.colwise().norm().transpose());
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (relDecrease < options.costTol) {
        report.stopReason = "cost tolerance";
        break;
      }
    } else {
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e30) {
        report.stopReason = "damping overflow";
        break;
      }
    }
  }
  report.x = x;
  report.finalCost = cost;
  return report;
}

}  // namespace edgefit
