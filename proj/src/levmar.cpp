#include "ptag/levmar.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace ptag {
namespace {

Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& p, Eigen::Index n_res) {
  Eigen::MatrixXd J(n_res, p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = 1e-5 * std::max(std::abs(p[j]), 1e-3);
    Eigen::VectorXd lo = p, hi = p;
    lo[j] -= h;
    hi[j] += h;
    J.col(j) = (residuals(hi) - residuals(lo)) / (2.0 * h);
  }
  return J;
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

FitOutcome levmar_fit(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& initial, const FitOptions& opts) {
  FitOutcome out;
  Eigen::VectorXd p = initial;
  Eigen::VectorXd r = residuals(p);
  if (!finite(r))
    throw std::invalid_argument("initial parameters give non-finite residuals");
  double chi2 = r.squaredNorm();
  double lambda = 1e-3;

  for (out.iterations = 1; out.iterations <= opts.max_iterations;
       ++out.iterations) {
    const Eigen::MatrixXd J = numeric_jacobian(residuals, p, r.size());
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;

    bool stepped = false;
    for (int tries = 0; tries < 24 && !stepped; ++tries) {
      Eigen::MatrixXd damped = A;
      for (Eigen::Index k = 0; k < damped.rows(); ++k)
        damped(k, k) += lambda * std::max(A(k, k), 1e-30);
      const Eigen::VectorXd dp = damped.ldlt().solve(-g);
      if (!finite(dp)) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd cand = p + dp;
      const Eigen::VectorXd rc = residuals(cand);
      if (finite(rc) && rc.squaredNorm() < chi2) {
        const double rel_step =
            (dp.array().abs() / (p.array().abs() + 1e-12)).maxCoeff();
        p = cand;
        r = rc;
        chi2 = rc.squaredNorm();
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel_step < opts.step_tol) {
          out.converged = true;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!stepped) {
      // No downhill step found at any damping: already at a minimum.
      out.converged = true;
    }
    if (out.converged) break;
  }

  const Eigen::MatrixXd J = numeric_jacobian(residuals, p, r.size());
  const Eigen::MatrixXd A = J.transpose() * J;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  if (!(smax > 0) || smin < 1e-12 * smax)
    throw std::runtime_error("degenerate fit: normal matrix numerically singular");

  out.params = p;
  out.covariance = A.inverse();
  out.chi2 = chi2;
  return out;
}

}  // namespace ptag
