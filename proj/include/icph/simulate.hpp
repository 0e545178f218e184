#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "icph/em.hpp"
#include "icph/model.hpp"
#include "icph/rng.hpp"
#include "icph/spline.hpp"
#include "icph/variance.hpp"

namespace icph {

enum class BaselineTruth { LogHazard, LinearHazard };
enum class ObsProcess { ExpMean10, DiscreteUniform1to17 };

struct GenConfig {
  BaselineTruth baseline = BaselineTruth::LogHazard;
  ObsProcess obs_process = ObsProcess::ExpMean10;
  double beta1 = -0.5;
  double beta2 = -0.5;
  double p = 0.3;
  int n = 100;
  int reps = 500;
  std::uint64_t seed = 1;
};

inline double true_cumulative_hazard(BaselineTruth b, double t) {
  return b == BaselineTruth::LogHazard ? std::log1p(t) / std::log(11.0) : 0.1 * t;
}

// Inverse of the true baseline cumulative hazard: t with Lambda0(t) = s.
inline double invert_baseline(BaselineTruth b, double s) {
  return b == BaselineTruth::LogHazard ? std::expm1(s * std::log(11.0)) : 10.0 * s;
}

inline double true_baseline_survival(const GenConfig& cfg, double t) {
  return (1.0 - cfg.p) * std::exp(-true_cumulative_hazard(cfg.baseline, t));
}

// Current-status generator. Per subject: covariates x1 ~ N(0,1) and
// x2 ~ Bernoulli(0.5); an instantaneous failure with probability
// 1 - (1-p)^{e^{x'beta}}; otherwise T by inversion of F(.|x) and a single
// examination time O, yielding (0, O] when T <= O and (O, inf) otherwise.
// Deterministic in (seed, rep_index, subject index).
inline Dataset generate_dataset(const GenConfig& cfg, int rep_index) {
  const double alpha = -std::log1p(-cfg.p);
  Dataset data;
  data.covariate_names = {"x1", "x2"};
  data.observations.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    SubjectRng rng(cfg.seed, static_cast<std::uint64_t>(rep_index),
                   static_cast<std::uint64_t>(i));
    VectorXd x(2);
    x(0) = rng.normal();
    x(1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double xb = cfg.beta1 * x(0) + cfg.beta2 * x(1);
    if (rng.uniform() < -std::expm1(-alpha * std::exp(xb))) {
      data.observations.push_back(make_observation(0.0, 0.0, std::move(x)));
      continue;
    }
    const double s = -std::log1p(-rng.uniform()) * std::exp(-xb);
    const double t = invert_baseline(cfg.baseline, s);
    const double o = cfg.obs_process == ObsProcess::ExpMean10
                         ? rng.exponential(10.0)
                         : static_cast<double>(rng.uniform_int_1_to(17));
    if (t <= o)
      data.observations.push_back(make_observation(0.0, o, std::move(x)));
    else
      data.observations.push_back(make_observation(o, kInf, std::move(x)));
  }
  return data;
}

enum class ModelId { M1, M2, M3, M4 };

inline std::string model_name(ModelId m) {
  switch (m) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
  }
  return "?";
}

// M1: gamma1*log(1+t); M2: gamma1*t; M3: gamma1*t + gamma2*t^2;
// M4: I-splines of degree 2 with one interior knot at the median endpoint.
inline BasisSpec model_basis_spec(ModelId m, const Dataset& data) {
  BasisSpec spec;
  switch (m) {
    case ModelId::M1: spec.kind = BasisKind::Log; return spec;
    case ModelId::M2: spec.kind = BasisKind::Linear; return spec;
    case ModelId::M3: spec.kind = BasisKind::Quadratic; return spec;
    case ModelId::M4: return resolve_knots(default_knots(data, 1, 2));
  }
  return spec;
}

inline std::string scenario_name(const GenConfig& cfg) {
  std::string s = cfg.baseline == BaselineTruth::LogHazard ? "log" : "linear";
  s += cfg.obs_process == ObsProcess::ExpMean10 ? "_exp" : "_unif";
  s += '_';
  s += cfg.beta1 < 0 ? 'm' : 'p';
  s += cfg.beta2 < 0 ? 'm' : 'p';
  return s;
}

// 101 equally spaced points spanning the data-supported range: from 0 to the
// 95th percentile of the observation-time process.
inline std::vector<double> survival_grid(const GenConfig& cfg) {
  const double upper = cfg.obs_process == ObsProcess::ExpMean10
                           ? -10.0 * std::log(0.05)
                           : 17.0;
  std::vector<double> grid(101);
  for (int i = 0; i <= 100; ++i) grid[i] = upper * i / 100.0;
  return grid;
}

struct FailureRecord {
  int rep = 0;
  std::string reason;
};

struct ParamSummary {
  std::string name;
  double truth = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  bool sd_defined = false;
  double ese = 0.0;
  double cp95 = 0.0;
};

struct ModelCell {
  ModelId model = ModelId::M1;
  int n_used = 0;
  std::vector<FailureRecord> failures;
  ParamSummary beta1, beta2, p;
  std::vector<double> curve_mean, curve_q025, curve_q975;
};

struct StudySummary {
  GenConfig config;
  std::string scenario;
  std::vector<double> grid;
  std::vector<double> s0_true;
  std::vector<ModelId> models;
  std::vector<ModelCell> cells;
  int total_fits = 0;
  int total_failures = 0;
  int ascent_violations = 0;        // fits with a loglik drop beyond 1e-8
  double max_ascent_violation = 0.0;
};

namespace detail {

struct RepFit {
  bool ok = false;
  std::string failure_reason;
  double est[3] = {0, 0, 0};  // beta1, beta2, p
  double se[3] = {0, 0, 0};
  bool cover[3] = {false, false, false};
  std::vector<double> s0;
  double ascent_violation = 0.0;
};

inline RepFit fit_one(const Dataset& data, ModelId model, const GenConfig& cfg,
                      const std::vector<double>& grid, const FitConfig& fit_config) {
  RepFit rf;
  try {
    const Basis basis(model_basis_spec(model, data));
    const FitResult fr = fit(data, basis, fit_config);
    rf.ascent_violation = fr.max_ascent_violation;
    if (!fr.converged) {
      rf.failure_reason = "non-convergence";
      return rf;
    }
    if (fr.zero_probability_interval) {
      rf.failure_reason = "zero-probability interval";
      return rf;
    }
    if (!fr.covariance || fr.covariance->singular) {
      rf.failure_reason = "singular OPG";
      return rf;
    }
    const ParameterVector& th = fr.theta_hat;
    const CovarianceEstimate& cov = *fr.covariance;
    const int aj = static_cast<int>(th.beta.size() + th.gamma.size());
    const double truth[3] = {cfg.beta1, cfg.beta2, cfg.p};
    rf.est[0] = th.beta(0);
    rf.est[1] = th.beta(1);
    rf.est[2] = th.p();
    rf.se[0] = cov.se(0);
    rf.se[1] = cov.se(1);
    rf.se[2] = std::exp(-th.alpha) * cov.se(aj);
    for (int j = 0; j < 2; ++j) {
      const auto ci = wald_interval(th, cov, j);
      rf.cover[j] = ci.first <= truth[j] && truth[j] <= ci.second;
    }
    const auto pci = p_interval(th, cov);
    rf.cover[2] = pci.first <= truth[2] && truth[2] <= pci.second;
    rf.s0.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
      rf.s0[g] = baseline_survival(grid[g], th, basis);
    rf.ok = true;
  } catch (const std::exception& ex) {
    rf.failure_reason = ex.what();
  }
  return rf;
}

}  // namespace detail

// Fits every requested model to every replicate and aggregates bias, SD,
// mean estimated SE, and 95% Wald coverage for (beta1, beta2, p), plus the
// pointwise mean and 2.5/97.5% quantiles of the estimated baseline survival
// curves. Replicate fits run on `jobs` threads; results are identical for
// any jobs value. Failed fits are excluded and reported, never dropped
// silently.
inline StudySummary run_study(const GenConfig& cfg, const std::vector<ModelId>& models,
                              const FitConfig& fit_config = {}, int jobs = 1) {
  StudySummary out;
  out.config = cfg;
  out.scenario = scenario_name(cfg);
  out.grid = survival_grid(cfg);
  out.s0_true.resize(out.grid.size());
  for (std::size_t g = 0; g < out.grid.size(); ++g)
    out.s0_true[g] = true_baseline_survival(cfg, out.grid[g]);
  out.models = models;

  // rep-major results table, filled by a work-stealing pool
  std::vector<std::vector<detail::RepFit>> results(cfg.reps);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.reps) return;
      const Dataset data = generate_dataset(cfg, rep);
      auto& row = results[rep];
      row.reserve(models.size());
      for (ModelId m : models) row.push_back(detail::fit_one(data, m, cfg, out.grid, fit_config));
    }
  };
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const double truth[3] = {cfg.beta1, cfg.beta2, cfg.p};
  const char* pname[3] = {"beta1", "beta2", "p"};
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    ModelCell cell;
    cell.model = models[mi];
    std::vector<double> est[3], se[3];
    double cover[3] = {0, 0, 0};
    std::vector<const std::vector<double>*> curves;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      const detail::RepFit& rf = results[rep][mi];
      out.total_fits += 1;
      if (rf.ascent_violation > out.max_ascent_violation)
        out.max_ascent_violation = rf.ascent_violation;
      if (rf.ascent_violation > 1e-8) out.ascent_violations += 1;
      if (!rf.ok) {
        cell.failures.push_back({rep, rf.failure_reason});
        continue;
      }
      for (int j = 0; j < 3; ++j) {
        est[j].push_back(rf.est[j]);
        se[j].push_back(rf.se[j]);
        cover[j] += rf.cover[j];
      }
      curves.push_back(&rf.s0);
    }
    cell.n_used = static_cast<int>(curves.size());
    out.total_failures += static_cast<int>(cell.failures.size());
    ParamSummary* ps[3] = {&cell.beta1, &cell.beta2, &cell.p};
    for (int j = 0; j < 3; ++j) {
      ps[j]->name = pname[j];
      ps[j]->truth = truth[j];
      if (cell.n_used == 0) continue;
      double mean = 0.0, mean_se = 0.0;
      for (std::size_t i = 0; i < est[j].size(); ++i) {
        mean += est[j][i];
        mean_se += se[j][i];
      }
      mean /= cell.n_used;
      mean_se /= cell.n_used;
      ps[j]->bias = mean - truth[j];
      ps[j]->ese = mean_se;
      ps[j]->cp95 = cover[j] / cell.n_used;
      if (cell.n_used >= 2) {
        double ss = 0.0;
        for (double v : est[j]) ss += (v - mean) * (v - mean);
        ps[j]->sd = std::sqrt(ss / (cell.n_used - 1));
        ps[j]->sd_defined = true;
      }
    }
    if (cell.n_used > 0) {
      const std::size_t G = out.grid.size();
      cell.curve_mean.resize(G);
      cell.curve_q025.resize(G);
      cell.curve_q975.resize(G);
      std::vector<double> col(cell.n_used);
      for (std::size_t g = 0; g < G; ++g) {
        double mean = 0.0;
        for (int i = 0; i < cell.n_used; ++i) {
          col[i] = (*curves[i])[g];
          mean += col[i];
        }
        cell.curve_mean[g] = mean / cell.n_used;
        std::sort(col.begin(), col.end());
        cell.curve_q025[g] = quantile_type7(col, 0.025);
        cell.curve_q975[g] = quantile_type7(col, 0.975);
      }
    }
    out.cells.push_back(std::move(cell));
  }
  return out;
}

// The sixteen generating mechanisms: 2 baselines x 2 observation processes
// x 4 sign patterns for (beta1, beta2).
inline std::vector<GenConfig> all_scenarios(int n, int reps, std::uint64_t seed) {
  std::vector<GenConfig> v;
  for (BaselineTruth b : {BaselineTruth::LogHazard, BaselineTruth::LinearHazard})
    for (ObsProcess o : {ObsProcess::ExpMean10, ObsProcess::DiscreteUniform1to17})
      for (double b1 : {-0.5, 0.5})
        for (double b2 : {-0.5, 0.5}) {
          GenConfig cfg;
          cfg.baseline = b;
          cfg.obs_process = o;
          cfg.beta1 = b1;
          cfg.beta2 = b2;
          cfg.n = n;
          cfg.reps = reps;
          cfg.seed = seed;
          v.push_back(cfg);
        }
  return v;
}

}  // namespace icph
