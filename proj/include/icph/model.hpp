#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icph/numeric.hpp"
#include "icph/spline.hpp"

namespace icph {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CensoringClass {
  bool psi;  // event did not occur at time zero
  bool delta1, delta2, delta3;
};

// Maps an interval (L, R] to the four supported outcomes:
//   L = R = 0          instantaneous failure (psi = 0)
//   0 = L < R < inf    left-censored  (delta1)
//   0 < L < R < inf    interval-censored (delta2)
//   0 < L < R = inf    right-censored (delta3)
inline CensoringClass classify_observation(double L, double R) {
  if (!(L >= 0.0) || std::isnan(R)) throw std::invalid_argument("invalid interval endpoints");
  if (L > R) throw std::invalid_argument("interval must satisfy L <= R");
  if (L == R) {
    if (L == 0.0) return {false, false, false, false};
    throw std::invalid_argument("exact failure times unsupported");
  }
  if (L == 0.0 && std::isinf(R))
    throw std::invalid_argument("uninformative interval (0, inf)");
  if (L == 0.0) return {true, true, false, false};
  if (std::isinf(R)) return {true, false, false, true};
  return {true, false, true, false};
}

// One subject: censoring interval, derived indicators and examination times,
// covariates. t1/t2 are the times whose cumulative hazards drive the latent
// rates: t1 = R for left-censored subjects and L otherwise; t2 = R for
// interval-censored and L for right-censored subjects.
struct Observation {
  double L = 0.0;
  double R = 0.0;
  VectorXd x;
  bool psi = false;
  bool delta1 = false, delta2 = false, delta3 = false;
  double t1 = 0.0, t2 = 0.0;
};

inline Observation make_observation(double L, double R, VectorXd x) {
  Observation o;
  o.L = L;
  o.R = R;
  o.x = std::move(x);
  const CensoringClass c = classify_observation(L, R);
  o.psi = c.psi;
  o.delta1 = c.delta1;
  o.delta2 = c.delta2;
  o.delta3 = c.delta3;
  o.t1 = c.delta1 ? R : L;
  o.t2 = c.delta2 ? R : (c.delta3 ? L : 0.0);
  return o;
}

struct Dataset {
  std::vector<Observation> observations;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return observations.size(); }
  int n_covariates() const {
    return observations.empty() ? static_cast<int>(covariate_names.size())
                                : static_cast<int>(observations.front().x.size());
  }

  void validate() const {
    if (observations.empty()) throw std::invalid_argument("dataset is empty");
    const auto r = observations.front().x.size();
    for (const auto& o : observations)
      if (o.x.size() != r) throw std::invalid_argument("covariate vectors of unequal length");
  }
};

// theta = (beta, gamma, alpha). gamma entries must be >= 0 and alpha >= 0;
// the baseline instantaneous-failure probability is p = 1 - exp(-alpha).
struct ParameterVector {
  VectorXd beta;
  VectorXd gamma;
  double alpha = 0.0;

  int dim() const { return static_cast<int>(beta.size() + gamma.size()) + 1; }
  double p() const { return -std::expm1(-alpha); }

  // Flat layout (beta, gamma, alpha), used by the score/covariance code.
  VectorXd flatten() const {
    VectorXd v(dim());
    v << beta, gamma, alpha;
    return v;
  }
  static ParameterVector unflatten(const VectorXd& v, int r, int k) {
    ParameterVector th;
    th.beta = v.head(r);
    th.gamma = v.segment(r, k);
    th.alpha = v(r + k);
    return th;
  }
};

inline double cumulative_hazard(const Basis& basis, const VectorXd& gamma, double t) {
  std::vector<double> b(basis.size());
  basis.eval(t, b.data());
  double s = 0.0;
  for (int l = 0; l < basis.size(); ++l) s += gamma(l) * b[l];
  return s;
}

// H(t|x): mass 1 - exp(-alpha e^{x'beta}) at zero, then the conditional PH
// law F(t|x) = 1 - exp{-Lambda0(t) e^{x'beta}} on (0, inf).
inline double mixture_cdf(double t, const VectorXd& x, const ParameterVector& theta,
                          const Basis& basis) {
  if (!(t >= 0.0)) throw std::invalid_argument("mixture_cdf: t must be >= 0");
  const double e = std::exp(x.dot(theta.beta));
  if (t == 0.0) return -std::expm1(-theta.alpha * e);
  const double lam = cumulative_hazard(basis, theta.gamma, t);
  return -std::expm1(-(theta.alpha + lam) * e);
}

inline double baseline_survival(double t, const ParameterVector& theta, const Basis& basis) {
  if (!(t >= 0.0)) throw std::invalid_argument("baseline_survival: t must be >= 0");
  if (t == 0.0) return std::exp(-theta.alpha);
  return std::exp(-(theta.alpha + cumulative_hazard(basis, theta.gamma, t)));
}

struct LogLikFlags {
  bool zero_probability_interval = false;
};

// Log-likelihood contribution of one subject. Returns -inf (and sets the
// flag) when the subject's interval carries zero probability under theta,
// e.g. gamma vanishing on its support.
inline double subject_loglik(const Observation& o, const ParameterVector& theta,
                             const Basis& basis, LogLikFlags* flags = nullptr) {
  const double e = std::exp(o.x.dot(theta.beta));
  if (!o.psi) {
    const double kappa = theta.alpha * e;
    if (kappa <= 0.0) {
      if (flags) flags->zero_probability_interval = true;
      return -kInf;
    }
    return log1mexp(kappa);
  }
  double ll = -theta.alpha * e;
  if (o.delta1) {
    const double mu = cumulative_hazard(basis, theta.gamma, o.t1) * e;
    if (mu <= 0.0) {
      if (flags) flags->zero_probability_interval = true;
      return -kInf;
    }
    ll += log1mexp(mu);
  } else if (o.delta2) {
    const double lam1 = cumulative_hazard(basis, theta.gamma, o.t1);
    const double lam2 = cumulative_hazard(basis, theta.gamma, o.t2);
    const double nu = (lam2 - lam1) * e;
    if (nu <= 0.0) {
      if (flags) flags->zero_probability_interval = true;
      return -kInf;
    }
    ll += -lam1 * e + log1mexp(nu);
  } else {
    ll += -cumulative_hazard(basis, theta.gamma, o.t1) * e;
  }
  return ll;
}

inline double observed_loglik(const Dataset& data, const ParameterVector& theta,
                              const Basis& basis, LogLikFlags* flags = nullptr) {
  double total = 0.0;
  for (const auto& o : data.observations) total += subject_loglik(o, theta, basis, flags);
  return total;
}

// Finite nonzero interval endpoints {L_i > 0} union {0 < R_i < inf}.
inline std::vector<double> finite_nonzero_endpoints(const Dataset& data) {
  std::vector<double> ep;
  ep.reserve(2 * data.size());
  for (const auto& o : data.observations) {
    if (o.L > 0.0 && std::isfinite(o.L)) ep.push_back(o.L);
    if (o.R > 0.0 && std::isfinite(o.R)) ep.push_back(o.R);
  }
  return ep;
}

inline BasisSpec default_knots(const Dataset& data, int n_interior, int degree = 2) {
  return default_knots_from_endpoints(finite_nonzero_endpoints(data), n_interior, degree);
}

}  // namespace icph
