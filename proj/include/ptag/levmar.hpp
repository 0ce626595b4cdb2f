#pragma once

#include <functional>

#include <Eigen/Core>

namespace ptag {

struct FitOptions {
  int max_iterations = 200;
  double step_tol = 1e-8;  // converged when relative step < step_tol
};

struct FitOutcome {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // inverse weighted normal matrix at optimum
  int iterations = 0;
  bool converged = false;
  double chi2 = 0;
};

/// Damped least squares (Levenberg-Marquardt) over a weighted residual
/// vector. residuals(p) must return (data - model) / sigma; the Jacobian is
/// taken by central differences. Steps producing non-finite residuals are
/// rejected by raising the damping, which is how positivity of rate-like
/// parameters is kept without explicit bounds. Throws std::runtime_error when
/// the normal matrix is numerically singular at the optimum (degenerate fit).
FitOutcome levmar_fit(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& initial, const FitOptions& opts = {});

}  // namespace ptag
