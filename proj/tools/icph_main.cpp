// Command-line front end: fit a model to a CSV dataset, generate simulated
// current-status data, or run a replication study over the generating
// mechanisms and emit summary tables and survival-curve grids.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "icph/icph.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNoConverge = 2;
constexpr int kExitStudyFailures = 3;

void write_manifest(const fs::path& dir, const json& j) {
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

icph::BasisSpec make_fit_spec(const std::string& baseline, int degree, int interior,
                              const icph::Dataset& data) {
  using icph::BasisKind;
  icph::BasisSpec spec;
  if (baseline == "log") {
    spec.kind = BasisKind::Log;
  } else if (baseline == "linear") {
    spec.kind = BasisKind::Linear;
  } else if (baseline == "quadratic") {
    spec.kind = BasisKind::Quadratic;
  } else if (baseline == "ispline") {
    spec = icph::resolve_knots(icph::default_knots(data, interior, degree));
  } else {
    throw icph::InputError("unknown baseline '" + baseline + "'");
  }
  return spec;
}

int run_fit(const std::string& data_path, const std::string& baseline, int degree,
            int interior, double tol, int max_iter, const std::string& out_dir,
            const std::string& command) {
  icph::LoadedDataset loaded;
  try {
    loaded = icph::read_dataset_csv(data_path);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  }

  const std::string started = icph::iso8601_now();
  icph::FitResult fr;
  icph::BasisSpec spec;
  try {
    spec = make_fit_spec(baseline, degree, interior, loaded.data);
    icph::Basis basis(spec);
    icph::FitConfig cfg;
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    fr = icph::fit(loaded.data, basis, cfg);

    fs::create_directories(out_dir);
    const icph::ParameterVector& th = fr.theta_hat;
    const bool have_cov = fr.covariance && !fr.covariance->singular;
    std::vector<icph::EstimateRow> rows;
    const int r = static_cast<int>(th.beta.size());
    const int k = static_cast<int>(th.gamma.size());
    for (int j = 0; j < r + k + 1; ++j) {
      icph::EstimateRow row;
      if (j < r)
        row.parameter = "beta:" + loaded.data.covariate_names[j];
      else if (j < r + k)
        row.parameter = "gamma" + std::to_string(j - r + 1);
      else
        row.parameter = "alpha";
      row.estimate = th.flatten()(j);
      row.inference = have_cov;
      if (have_cov) {
        row.se = fr.covariance->se(j);
        const auto ci = icph::wald_interval(th, *fr.covariance, j);
        row.lo = ci.first;
        row.hi = ci.second;
      }
      rows.push_back(row);
    }
    icph::EstimateRow prow;
    prow.parameter = "p";
    prow.estimate = th.p();
    prow.inference = have_cov;
    if (have_cov) {
      prow.se = std::exp(-th.alpha) * fr.covariance->se(r + k);
      const auto ci = icph::p_interval(th, *fr.covariance);
      prow.lo = ci.first;
      prow.hi = ci.second;
    }
    rows.push_back(prow);
    icph::write_estimates_csv((fs::path(out_dir) / "estimates.csv").string(), rows);

    const auto endpoints = icph::finite_nonzero_endpoints(loaded.data);
    const double upper = *std::max_element(endpoints.begin(), endpoints.end());
    std::vector<double> grid(101), s0(101);
    for (int g = 0; g <= 100; ++g) {
      grid[g] = upper * g / 100.0;
      s0[g] = icph::baseline_survival(grid[g], th, basis);
    }
    icph::write_survival_csv((fs::path(out_dir) / "baseline_survival.csv").string(), grid, s0);

    const bool boundary_alpha = th.alpha <= 1e-12;
    json manifest = {
        {"command", command},
        {"version", icph::kVersion},
        {"started_at", started},
        {"finished_at", icph::iso8601_now()},
        {"data", data_path},
        {"config",
         {{"baseline", baseline},
          {"degree", degree},
          {"interior_knots", interior},
          {"tol", tol},
          {"max_iter", max_iter}}},
        {"diagnostics",
         {{"n", loaded.data.size()},
          {"iterations", fr.n_iter},
          {"converged", fr.converged},
          {"loglik", fr.loglik_trace.back()},
          {"covariance_available", have_cov},
          {"zero_probability_interval", fr.zero_probability_interval},
          {"alpha_at_boundary", boundary_alpha}}}};
    write_manifest(out_dir, manifest);
    if (boundary_alpha)
      std::cerr << "warning: no instantaneous failures observed; p is estimated at the "
                   "boundary (p=0)\n";
    if (!have_cov)
      std::cerr << "warning: covariance unavailable (singular OPG or zero-probability "
                   "interval); SEs reported as NA\n";
  } catch (const icph::InputError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  }
  if (!fr.converged) {
    std::cerr << "warning: EM did not converge within the iteration limit\n";
    return kExitNoConverge;
  }
  return kExitOk;
}

bool parse_scenario_token(const std::string& tok, icph::GenConfig* cfg) {
  // e.g. log_exp_mm, linear_unif_pm
  auto pos1 = tok.find('_');
  auto pos2 = tok.rfind('_');
  if (pos1 == std::string::npos || pos2 == pos1 || tok.size() - pos2 != 3) return false;
  const std::string b = tok.substr(0, pos1);
  const std::string o = tok.substr(pos1 + 1, pos2 - pos1 - 1);
  const std::string s = tok.substr(pos2 + 1);
  if (b == "log")
    cfg->baseline = icph::BaselineTruth::LogHazard;
  else if (b == "linear")
    cfg->baseline = icph::BaselineTruth::LinearHazard;
  else
    return false;
  if (o == "exp")
    cfg->obs_process = icph::ObsProcess::ExpMean10;
  else if (o == "unif")
    cfg->obs_process = icph::ObsProcess::DiscreteUniform1to17;
  else
    return false;
  if ((s[0] != 'm' && s[0] != 'p') || (s[1] != 'm' && s[1] != 'p')) return false;
  cfg->beta1 = s[0] == 'm' ? -0.5 : 0.5;
  cfg->beta2 = s[1] == 'm' ? -0.5 : 0.5;
  return true;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proportional-hazards mixture models for interval-censored data with "
               "instantaneous failures"};
  app.set_version_flag("--version", icph::kVersion);
  app.require_subcommand(1);
  const std::string command = join_args(argc, argv);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV dataset");
  std::string data_path, baseline = "ispline", out_dir = "icph_fit";
  int degree = 2, interior = 1, max_iter = 5000;
  double tol = 1e-5;
  fit_cmd->add_option("data", data_path, "input CSV (id,L,R,x...)")->required();
  fit_cmd->add_option("--baseline", baseline, "log|linear|quadratic|ispline")
      ->check(CLI::IsMember({"log", "linear", "quadratic", "ispline"}));
  fit_cmd->add_option("--degree", degree, "I-spline degree");
  fit_cmd->add_option("--interior-knots", interior, "number of interior knots");
  fit_cmd->add_option("--tol", tol, "EM convergence tolerance");
  fit_cmd->add_option("--max-iter", max_iter, "EM iteration limit");
  fit_cmd->add_option("--out", out_dir, "output directory")->required();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate one simulated dataset");
  std::string sim_baseline = "log", sim_obs = "exp", sim_out = "icph_sim";
  double beta1 = -0.5, beta2 = -0.5, p = 0.3;
  int n = 100, rep_index = 0;
  std::uint64_t seed = 1;
  sim_cmd->add_option("--baseline", sim_baseline, "log|linear")
      ->check(CLI::IsMember({"log", "linear"}));
  sim_cmd->add_option("--obs", sim_obs, "exp|unif")->check(CLI::IsMember({"exp", "unif"}));
  sim_cmd->add_option("--beta1", beta1, "coefficient of x1");
  sim_cmd->add_option("--beta2", beta2, "coefficient of x2");
  sim_cmd->add_option("--p", p, "baseline instantaneous-failure probability");
  sim_cmd->add_option("--n", n, "sample size");
  sim_cmd->add_option("--rep-index", rep_index, "replicate index within the seed stream");
  sim_cmd->add_option("--seed", seed, "RNG seed");
  sim_cmd->add_option("--out", sim_out, "output directory")->required();

  // study
  auto* study_cmd = app.add_subcommand("study", "Run a replication study");
  std::string config_path, models_arg, scenarios_arg, study_out = "icph_study";
  int reps = -1, study_n = -1, jobs = 1;
  std::uint64_t study_seed = 0;
  bool seed_given = false;
  study_cmd->add_option("--config", config_path, "key=value config file");
  study_cmd->add_option("--reps", reps, "replicates per scenario");
  study_cmd->add_option("--models", models_arg, "comma list of M1,M2,M3,M4");
  study_cmd->add_option("--scenarios", scenarios_arg, "all or comma list (e.g. log_exp_mm)");
  study_cmd->add_option("--jobs", jobs, "replicate-level worker threads");
  study_cmd->add_option("--n", study_n, "sample size per replicate");
  study_cmd->add_option("--seed", study_seed, "RNG seed")->each([&](const std::string&) {
    seed_given = true;
  });
  study_cmd->add_option("--out", study_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (fit_cmd->parsed())
    return run_fit(data_path, baseline, degree, interior, tol, max_iter, out_dir, command);

  if (sim_cmd->parsed()) {
    const std::string started = icph::iso8601_now();
    icph::GenConfig cfg;
    cfg.baseline = sim_baseline == "log" ? icph::BaselineTruth::LogHazard
                                         : icph::BaselineTruth::LinearHazard;
    cfg.obs_process =
        sim_obs == "exp" ? icph::ObsProcess::ExpMean10 : icph::ObsProcess::DiscreteUniform1to17;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.p = p;
    cfg.n = n;
    cfg.seed = seed;
    if (!(p >= 0.0 && p < 1.0) || n < 1) {
      std::cerr << "error: invalid scenario (need 0 <= p < 1 and n >= 1)\n";
      return kExitInput;
    }
    try {
      fs::create_directories(sim_out);
      const icph::Dataset data = icph::generate_dataset(cfg, rep_index);
      icph::write_dataset_csv((fs::path(sim_out) / "data.csv").string(), data);
      json manifest = {{"command", command},
                       {"version", icph::kVersion},
                       {"started_at", started},
                       {"finished_at", icph::iso8601_now()},
                       {"seed", seed},
                       {"config",
                        {{"baseline", sim_baseline},
                         {"obs", sim_obs},
                         {"beta1", beta1},
                         {"beta2", beta2},
                         {"p", p},
                         {"n", n},
                         {"rep_index", rep_index}}}};
      write_manifest(sim_out, manifest);
    } catch (const std::exception& ex) {
      std::cerr << "error: " << ex.what() << '\n';
      return kExitInput;
    }
    return kExitOk;
  }

  // study
  const std::string started = icph::iso8601_now();
  try {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = icph::parse_config_file(config_path);
    auto kv_or = [&](const std::string& key, const std::string& dflt) {
      auto it = kv.find(key);
      return it == kv.end() ? dflt : it->second;
    };
    if (reps < 0) reps = std::stoi(kv_or("reps", "500"));
    if (study_n < 0) study_n = std::stoi(kv_or("n", "100"));
    if (!seed_given) study_seed = std::stoull(kv_or("seed", "1"));
    if (models_arg.empty()) models_arg = kv_or("models", "M1,M2,M3,M4");
    if (scenarios_arg.empty()) scenarios_arg = kv_or("scenarios", "all");
    if (reps < 1 || study_n < 1) throw icph::InputError("need reps >= 1 and n >= 1");

    std::vector<icph::ModelId> models;
    for (const auto& tok : split_list(models_arg)) {
      if (tok == "M1")
        models.push_back(icph::ModelId::M1);
      else if (tok == "M2")
        models.push_back(icph::ModelId::M2);
      else if (tok == "M3")
        models.push_back(icph::ModelId::M3);
      else if (tok == "M4")
        models.push_back(icph::ModelId::M4);
      else
        throw icph::InputError("unknown model '" + tok + "'");
    }
    if (models.empty()) throw icph::InputError("no models selected");

    std::vector<icph::GenConfig> scenarios;
    if (scenarios_arg == "all") {
      scenarios = icph::all_scenarios(study_n, reps, study_seed);
    } else {
      for (const auto& tok : split_list(scenarios_arg)) {
        icph::GenConfig cfg;
        cfg.n = study_n;
        cfg.reps = reps;
        cfg.seed = study_seed;
        if (!parse_scenario_token(tok, &cfg))
          throw icph::InputError("bad scenario token '" + tok + "'");
        scenarios.push_back(cfg);
      }
    }

    std::vector<icph::StudySummary> summaries;
    int total_fits = 0, total_failures = 0, ascent_violations = 0;
    for (const auto& sc : scenarios) {
      summaries.push_back(icph::run_study(sc, models, {}, jobs));
      total_fits += summaries.back().total_fits;
      total_failures += summaries.back().total_failures;
      ascent_violations += summaries.back().ascent_violations;
    }

    fs::create_directories(study_out);
    icph::write_summary_csv((fs::path(study_out) / "summary.csv").string(), summaries);
    icph::write_curves_csv((fs::path(study_out) / "curves.csv").string(), summaries);
    icph::write_failures_csv((fs::path(study_out) / "failures.csv").string(), summaries);

    json per_scenario = json::array();
    for (const auto& s : summaries) {
      json cell_counts = json::object();
      for (const auto& c : s.cells)
        cell_counts[icph::model_name(c.model)] = {{"used", c.n_used},
                                                  {"failed", c.failures.size()}};
      per_scenario.push_back({{"scenario", s.scenario}, {"cells", cell_counts}});
    }
    const double success_rate =
        total_fits > 0 ? 1.0 - static_cast<double>(total_failures) / total_fits : 1.0;
    json manifest = {{"command", command},
                     {"version", icph::kVersion},
                     {"started_at", started},
                     {"finished_at", icph::iso8601_now()},
                     {"seed", study_seed},
                     {"config",
                      {{"reps", reps},
                       {"n", study_n},
                       {"models", models_arg},
                       {"scenarios", scenarios_arg},
                       {"jobs", jobs}}},
                     {"diagnostics",
                      {{"total_fits", total_fits},
                       {"total_failures", total_failures},
                       {"success_rate", success_rate},
                       {"ascent_violations", ascent_violations},
                       {"per_scenario", per_scenario}}}};
    write_manifest(study_out, manifest);

    if (success_rate < 0.95) {
      std::cerr << "warning: only " << 100.0 * success_rate
                << "% of replicate fits succeeded; see failures.csv\n";
      return kExitStudyFailures;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
