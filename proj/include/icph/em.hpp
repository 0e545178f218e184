#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icph/model.hpp"
#include "icph/numeric.hpp"
#include "icph/variance.hpp"

namespace icph {

// Conditional means of the latent Poisson variables given the observed data
// and the current parameter value. Rows of EZl/EWl sum to EZ/EW; entries are
// zero outside the censoring class that makes them random (left-censored for
// Z, interval-censored for W, instantaneous for Y).
struct LatentExpectations {
  VectorXd EZ, EW, EY;
  MatrixXd EZl, EWl;
};

struct FitConfig {
  double tol = 1e-5;
  int max_iter = 5000;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  std::optional<ParameterVector> theta0;
  bool compute_covariance = true;
};

struct FitResult {
  ParameterVector theta_hat;
  std::vector<double> loglik_trace;  // observed log-likelihood, entry 0 at theta0
  int n_iter = 0;
  bool converged = false;
  std::optional<CovarianceEstimate> covariance;
  bool zero_probability_interval = false;
  double max_ascent_violation = 0.0;  // largest per-iteration decrease seen
};

struct NewtonError : std::runtime_error {
  NewtonError(const std::string& msg, VectorXd beta, double residual)
      : std::runtime_error(msg), last_beta(std::move(beta)), residual_norm(residual) {}
  VectorXd last_beta;
  double residual_norm;
};

namespace detail {

// Everything about (data, basis) that the EM iterations reuse: covariates,
// indicator masks, and the basis evaluated at the examination times. B1/B2
// hold b_l(t_i1)/b_l(t_i2); Bden holds (delta1+delta2) b_l(R) + delta3 b_l(L),
// the per-subject weights in the gamma denominators (zero for psi = 0).
struct EmWorkspace {
  int n = 0, r = 0, k = 0;
  MatrixXd X;
  Eigen::Array<bool, Eigen::Dynamic, 1> psi, d1, d2, d3;
  MatrixXd B1, B2, Bden;

  EmWorkspace(const Dataset& data, const Basis& basis) {
    data.validate();
    n = static_cast<int>(data.size());
    r = data.n_covariates();
    k = basis.size();
    X.resize(n, r);
    psi.resize(n);
    d1.resize(n);
    d2.resize(n);
    d3.resize(n);
    B1.setZero(n, k);
    B2.setZero(n, k);
    Bden.setZero(n, k);
    std::vector<double> buf(k);
    for (int i = 0; i < n; ++i) {
      const Observation& o = data.observations[i];
      X.row(i) = o.x.transpose();
      psi(i) = o.psi;
      d1(i) = o.delta1;
      d2(i) = o.delta2;
      d3(i) = o.delta3;
      if (!o.psi) continue;
      basis.eval(o.t1, buf.data());
      for (int l = 0; l < k; ++l) B1(i, l) = buf[l];
      if (o.delta2 || o.delta3) {
        basis.eval(o.t2, buf.data());
        for (int l = 0; l < k; ++l) B2(i, l) = buf[l];
      }
      Bden.row(i) = o.delta2 ? B2.row(i) : B1.row(i);
    }
  }
};

// Splits a total expectation across basis components with weights w >= 0.
// When the weights vanish (zero-probability interval) the split falls back to
// gamma-proportional, then uniform, so row sums are always preserved.
inline void split_row(double total, const Eigen::RowVectorXd& w, const VectorXd& gamma,
                      MatrixXd& out, int i) {
  const double denom = w.sum();
  if (denom > 0.0) {
    out.row(i) = (total / denom) * w;
    return;
  }
  const double gsum = gamma.sum();
  if (gsum > 0.0) {
    out.row(i) = (total / gsum) * gamma.transpose();
    return;
  }
  out.row(i).setConstant(total / w.size());
}

inline LatentExpectations e_step_ws(const EmWorkspace& ws, const ParameterVector& theta) {
  LatentExpectations lat;
  lat.EZ.setZero(ws.n);
  lat.EW.setZero(ws.n);
  lat.EY.setZero(ws.n);
  lat.EZl.setZero(ws.n, ws.k);
  lat.EWl.setZero(ws.n, ws.k);
  const VectorXd eta = ws.X * theta.beta;
  for (int i = 0; i < ws.n; ++i) {
    const double e = std::exp(eta(i));
    if (!ws.psi(i)) {
      lat.EY(i) = ztp_mean(theta.alpha * e);
      continue;
    }
    if (ws.d1(i)) {
      const Eigen::RowVectorXd w = ws.B1.row(i).cwiseProduct(theta.gamma.transpose());
      lat.EZ(i) = ztp_mean(w.sum() * e);
      split_row(lat.EZ(i), w, theta.gamma, lat.EZl, i);
    } else if (ws.d2(i)) {
      const Eigen::RowVectorXd w =
          (ws.B2.row(i) - ws.B1.row(i)).cwiseMax(0.0).cwiseProduct(theta.gamma.transpose());
      lat.EW(i) = ztp_mean(w.sum() * e);
      split_row(lat.EW(i), w, theta.gamma, lat.EWl, i);
    }
  }
  return lat;
}

// Profile pieces: with N_l = sum_i psi_i {E(Z_il) + delta_i2 E(W_il)} and
// N_Y = sum_i E(Y_i) fixed by the E-step, the beta estimating equation is the
// gradient of the concave function
//   c'beta - sum_l N_l log D_l(beta) - N_Y log D_Y(beta),
// where D_l(beta) = sum_i Bden_il e^{x_i'beta} and D_Y = sum_i e^{x_i'beta}.
struct ProfileParts {
  VectorXd Nl;   // k
  double NY = 0.0;
  VectorXd c;    // r
};

inline ProfileParts profile_parts(const EmWorkspace& ws, const LatentExpectations& lat) {
  ProfileParts pp;
  pp.Nl = (lat.EZl + lat.EWl).colwise().sum();
  pp.NY = lat.EY.sum();
  pp.c = ws.X.transpose() * (lat.EZ + lat.EW + lat.EY);
  return pp;
}

struct ProfileEval {
  VectorXd G;      // gradient (residual of the estimating equation)
  MatrixXd H;      // Jacobian, negative semidefinite
  VectorXd Dl;     // gamma denominators at this beta
  double DY = 0.0;
};

inline ProfileEval eval_profile(const EmWorkspace& ws, const ProfileParts& pp,
                                const VectorXd& beta) {
  ProfileEval ev;
  const VectorXd u = (ws.X * beta).array().exp();
  ev.DY = u.sum();
  ev.Dl = ws.Bden.transpose() * u;
  ev.G = pp.c;
  ev.H.setZero(ws.r, ws.r);
  const VectorXd sy = ws.X.transpose() * u;
  if (pp.NY > 0.0) {
    MatrixXd my = ws.X.transpose() * u.asDiagonal() * ws.X;
    ev.G -= (pp.NY / ev.DY) * sy;
    ev.H -= pp.NY * (my / ev.DY - sy * sy.transpose() / (ev.DY * ev.DY));
  }
  for (int l = 0; l < ws.k; ++l) {
    if (!(pp.Nl(l) > 0.0)) continue;
    if (!(ev.Dl(l) > 0.0)) throw std::runtime_error("basis function unsupported by data");
    const VectorXd wl = ws.Bden.col(l).cwiseProduct(u);
    const VectorXd sl = ws.X.transpose() * wl;
    MatrixXd ml = ws.X.transpose() * wl.asDiagonal() * ws.X;
    ev.G -= (pp.Nl(l) / ev.Dl(l)) * sl;
    ev.H -= pp.Nl(l) * (ml / ev.Dl(l) - sl * sl.transpose() / (ev.Dl(l) * ev.Dl(l)));
  }
  return ev;
}

inline VectorXd newton_beta(const EmWorkspace& ws, const ProfileParts& pp, VectorXd beta,
                            double tol, int max_iter) {
  if (ws.r == 0) return beta;
  ProfileEval ev = eval_profile(ws, pp, beta);
  double res = ev.G.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_iter; ++it) {
    if (res <= tol) return beta;
    const VectorXd step = ev.H.ldlt().solve(-ev.G);
    if (!step.allFinite())
      throw NewtonError("Newton step is not finite", beta, res);
    double s = 1.0;
    bool improved = false;
    for (int h = 0; h <= 30; ++h, s *= 0.5) {
      const VectorXd cand = beta + s * step;
      ProfileEval cev = eval_profile(ws, pp, cand);
      const double cres = cev.G.lpNorm<Eigen::Infinity>();
      if (cres < res) {
        beta = cand;
        ev = std::move(cev);
        res = cres;
        improved = true;
        break;
      }
    }
    if (!improved) {
      if (res <= tol) return beta;
      throw NewtonError("Newton step-halving exhausted", beta, res);
    }
  }
  if (res <= tol) return beta;
  throw NewtonError("Newton iteration limit reached", beta, res);
}

// Observed log-likelihood through the precomputed basis values.
inline double loglik_ws(const EmWorkspace& ws, const ParameterVector& theta, bool* zero_prob) {
  const VectorXd eta = ws.X * theta.beta;
  double total = 0.0;
  for (int i = 0; i < ws.n; ++i) {
    const double e = std::exp(eta(i));
    if (!ws.psi(i)) {
      const double kappa = theta.alpha * e;
      if (kappa <= 0.0) {
        *zero_prob = true;
        total = -kInf;
        break;
      }
      total += log1mexp(kappa);
      continue;
    }
    const double lam1 = ws.B1.row(i).dot(theta.gamma);
    double li = -theta.alpha * e;
    if (ws.d1(i)) {
      const double mu = lam1 * e;
      if (mu <= 0.0) {
        *zero_prob = true;
        total = -kInf;
        break;
      }
      li += log1mexp(mu);
    } else if (ws.d2(i)) {
      const double nu = (ws.B2.row(i).dot(theta.gamma) - lam1) * e;
      if (nu <= 0.0) {
        *zero_prob = true;
        total = -kInf;
        break;
      }
      li += -lam1 * e + log1mexp(nu);
    } else {
      li += -lam1 * e;
    }
    total += li;
  }
  return total;
}

}  // namespace detail

inline LatentExpectations e_step(const Dataset& data, const ParameterVector& theta,
                                 const Basis& basis) {
  return detail::e_step_ws(detail::EmWorkspace(data, basis), theta);
}

// Closed-form profile solution for gamma_l at a given beta. Errors when the
// denominator vanishes (no subject's likelihood involves basis function l).
inline double gamma_star(int l, const VectorXd& beta, const LatentExpectations& lat,
                         const Dataset& data, const Basis& basis) {
  const detail::EmWorkspace ws(data, basis);
  const VectorXd u = (ws.X * beta).array().exp();
  const double den = ws.Bden.col(l).dot(u);
  if (!(den > 0.0)) throw std::runtime_error("basis function unsupported by data");
  return (lat.EZl.col(l).sum() + lat.EWl.col(l).sum()) / den;
}

inline double alpha_star(const VectorXd& beta, const LatentExpectations& lat,
                         const Dataset& data) {
  double den = 0.0;
  for (const auto& o : data.observations) den += std::exp(o.x.dot(beta));
  return lat.EY.sum() / den;
}

inline VectorXd beta_update(const LatentExpectations& lat, const Dataset& data,
                            const Basis& basis, const VectorXd& beta_init,
                            double tol = 1e-10, int max_iter = 50) {
  const detail::EmWorkspace ws(data, basis);
  return detail::newton_beta(ws, detail::profile_parts(ws, lat), beta_init, tol, max_iter);
}

inline ParameterVector default_start(int r, int k) {
  ParameterVector th;
  th.beta = VectorXd::Zero(r);
  th.gamma = VectorXd::Ones(k);
  th.alpha = 0.1;
  return th;
}

// EM loop: closed-form E-step, Newton solve for beta on the profiled system,
// closed-form gamma/alpha updates, until the full parameter vector moves less
// than tol in sup norm.
inline FitResult fit(const Dataset& data, const Basis& basis, const FitConfig& config = {}) {
  const detail::EmWorkspace ws(data, basis);
  if (!ws.psi.any())
    throw std::invalid_argument("all observations are instantaneous failures");

  ParameterVector theta = config.theta0 ? *config.theta0 : default_start(ws.r, ws.k);
  if (theta.beta.size() != ws.r || theta.gamma.size() != ws.k)
    throw std::invalid_argument("theta0 has wrong dimensions");

  FitResult out;
  bool zero_prob = false;
  out.loglik_trace.push_back(detail::loglik_ws(ws, theta, &zero_prob));
  for (int d = 0; d < config.max_iter; ++d) {
    const LatentExpectations lat = detail::e_step_ws(ws, theta);
    const detail::ProfileParts pp = detail::profile_parts(ws, lat);
    ParameterVector next;
    next.beta = detail::newton_beta(ws, pp, theta.beta, config.newton_tol,
                                    config.newton_max_iter);
    const detail::ProfileEval ev = detail::eval_profile(ws, pp, next.beta);
    next.gamma.resize(ws.k);
    for (int l = 0; l < ws.k; ++l) {
      if (!(pp.Nl(l) > 0.0)) {
        next.gamma(l) = 0.0;
      } else if (!(ev.Dl(l) > 0.0)) {
        throw std::runtime_error("basis function unsupported by data");
      } else {
        next.gamma(l) = pp.Nl(l) / ev.Dl(l);
      }
    }
    next.alpha = pp.NY / ev.DY;

    double delta = std::abs(next.alpha - theta.alpha);
    if (ws.r > 0)
      delta = std::max(delta, (next.beta - theta.beta).lpNorm<Eigen::Infinity>());
    if (ws.k > 0)
      delta = std::max(delta, (next.gamma - theta.gamma).lpNorm<Eigen::Infinity>());

    theta = std::move(next);
    const double ll = detail::loglik_ws(ws, theta, &zero_prob);
    const double prev = out.loglik_trace.back();
    if (std::isfinite(ll) || std::isfinite(prev)) {
      const double drop = prev - ll;  // -inf transitions never produce NaN here
      if (drop > out.max_ascent_violation) out.max_ascent_violation = drop;
    }
    out.loglik_trace.push_back(ll);
    out.n_iter = d + 1;
    if (delta < config.tol) {
      out.converged = true;
      break;
    }
  }
  out.theta_hat = theta;
  out.zero_probability_interval = zero_prob;
  if (config.compute_covariance && !zero_prob)
    out.covariance = opg_covariance(score_rows(data, theta, basis));
  return out;
}

}  // namespace icph
