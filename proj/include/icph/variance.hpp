#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "icph/model.hpp"
#include "icph/numeric.hpp"

namespace icph {

// Per-subject gradients of the observed-data log-likelihood, one row per
// subject, columns ordered (beta, gamma, alpha). At an interior MLE the
// column sums vanish up to solver tolerance.
struct ScoreMatrix {
  MatrixXd scores;
  bool boundary = false;          // alpha or some gamma_l sits at 0
  bool zero_probability = false;  // some subject's interval has zero mass
};

inline ScoreMatrix score_rows(const Dataset& data, const ParameterVector& theta,
                              const Basis& basis) {
  const int n = static_cast<int>(data.size());
  const int r = static_cast<int>(theta.beta.size());
  const int k = static_cast<int>(theta.gamma.size());
  ScoreMatrix sm;
  sm.scores.setZero(n, r + k + 1);
  sm.boundary = (theta.alpha <= 0.0) || (theta.gamma.size() > 0 && theta.gamma.minCoeff() <= 0.0);

  std::vector<double> b1(k), b2(k);
  for (int i = 0; i < n; ++i) {
    const Observation& o = data.observations[i];
    const double e = std::exp(o.x.dot(theta.beta));
    auto row = sm.scores.row(i);
    if (!o.psi) {
      const double u = theta.alpha * e;
      if (u <= 0.0) {
        sm.zero_probability = true;
        row.setConstant(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const double s = u_over_expm1(u);
      row.head(r) = s * o.x.transpose();
      row(r + k) = e / std::expm1(u);
      continue;
    }
    basis.eval(o.t1, b1.data());
    double lam1 = 0.0;
    for (int l = 0; l < k; ++l) lam1 += theta.gamma(l) * b1[l];
    row(r + k) = -e;
    if (o.delta1) {
      const double mu = lam1 * e;
      if (mu <= 0.0) {
        sm.zero_probability = true;
        row.setConstant(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      row.head(r) = (u_over_expm1(mu) - theta.alpha * e) * o.x.transpose();
      const double em = std::expm1(mu);
      for (int l = 0; l < k; ++l) row(r + l) = b1[l] * e / em;
    } else if (o.delta2) {
      basis.eval(o.t2, b2.data());
      double lam2 = 0.0;
      for (int l = 0; l < k; ++l) lam2 += theta.gamma(l) * b2[l];
      const double nu = (lam2 - lam1) * e;
      if (nu <= 0.0) {
        sm.zero_probability = true;
        row.setConstant(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      row.head(r) = (u_over_expm1(nu) - lam1 * e - theta.alpha * e) * o.x.transpose();
      const double em = std::expm1(nu);
      for (int l = 0; l < k; ++l) row(r + l) = -b1[l] * e + (b2[l] - b1[l]) * e / em;
    } else {
      row.head(r) = (-lam1 * e - theta.alpha * e) * o.x.transpose();
      for (int l = 0; l < k; ++l) row(r + l) = -b1[l] * e;
    }
  }
  return sm;
}

// V = [n^{-1} sum_i s_i s_i']^{-1} with per-parameter standard errors read as
// SE_j = sqrt(V_jj / n). Inversion goes through a symmetric eigenfactorization
// with condition threshold 1e12; beyond it the estimate is flagged singular
// and no inverse is produced.
struct CovarianceEstimate {
  MatrixXd V;
  int n = 0;
  bool singular = false;
  double condition = 0.0;

  double se(int j) const {
    if (singular) throw std::runtime_error("covariance is singular");
    return std::sqrt(V(j, j) / n);
  }
};

inline CovarianceEstimate opg_covariance(const ScoreMatrix& sm) {
  CovarianceEstimate cov;
  cov.n = static_cast<int>(sm.scores.rows());
  if (sm.zero_probability || !sm.scores.allFinite()) {
    cov.singular = true;
    cov.condition = std::numeric_limits<double>::quiet_NaN();
    return cov;
  }
  const MatrixXd gram = sm.scores.transpose() * sm.scores / cov.n;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  const VectorXd& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  cov.condition = (lo > 0.0) ? hi / lo : kInf;
  if (!(hi > 0.0) || !(lo > hi / 1e12)) {
    cov.singular = true;
    return cov;
  }
  cov.V = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return cov;
}

inline std::pair<double, double> wald_interval(const ParameterVector& theta_hat,
                                               const CovarianceEstimate& cov, int j,
                                               double level = 0.95) {
  if (cov.singular) throw std::runtime_error("covariance is singular");
  const double z = norm_ppf(0.5 + level / 2.0);
  const double est = theta_hat.flatten()(j);
  const double se = cov.se(j);
  return {est - z * se, est + z * se};
}

// Delta-method interval for p = 1 - exp(-alpha), clipped to [0, 1].
inline std::pair<double, double> p_interval(const ParameterVector& theta_hat,
                                            const CovarianceEstimate& cov,
                                            double level = 0.95) {
  if (cov.singular) throw std::runtime_error("covariance is singular");
  const int j = static_cast<int>(theta_hat.beta.size() + theta_hat.gamma.size());
  const double z = norm_ppf(0.5 + level / 2.0);
  const double p = theta_hat.p();
  const double se_p = std::exp(-theta_hat.alpha) * cov.se(j);
  return {std::max(0.0, p - z * se_p), std::min(1.0, p + z * se_p)};
}

}  // namespace icph
