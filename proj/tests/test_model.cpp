#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "icph/model.hpp"
#include "icph/simulate.hpp"
#include "oracles.hpp"

using namespace icph;

namespace {

ParameterVector theta_of(std::initializer_list<double> beta, std::initializer_list<double> gamma,
                         double alpha) {
  ParameterVector th;
  th.beta.resize(beta.size());
  int i = 0;
  for (double b : beta) th.beta(i++) = b;
  th.gamma.resize(gamma.size());
  i = 0;
  for (double g : gamma) th.gamma(i++) = g;
  th.alpha = alpha;
  return th;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd x(v.size());
  int i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

}  // namespace

TEST_CASE("classify_observation", "[model]") {
  auto c = classify_observation(0.0, 0.0);
  CHECK_FALSE(c.psi);
  c = classify_observation(0.0, 4.2);
  CHECK((c.psi && c.delta1 && !c.delta2 && !c.delta3));
  c = classify_observation(1.5, 4.2);
  CHECK((c.psi && c.delta2));
  c = classify_observation(3.1, kInf);
  CHECK((c.psi && c.delta3));
  CHECK_THROWS_WITH(classify_observation(2.0, 2.0),
                    Catch::Matchers::ContainsSubstring("exact failure times unsupported"));
  CHECK_THROWS(classify_observation(5.0, 3.0));
  CHECK_THROWS(classify_observation(-1.0, 3.0));
  CHECK_THROWS(classify_observation(0.0, kInf));
}

TEST_CASE("examination times t1/t2", "[model]") {
  auto o = make_observation(0.0, 4.0, vec({0.0}));
  CHECK(o.t1 == 4.0);
  CHECK(o.t2 == 0.0);
  o = make_observation(2.0, 5.0, vec({0.0}));
  CHECK(o.t1 == 2.0);
  CHECK(o.t2 == 5.0);
  o = make_observation(3.0, kInf, vec({0.0}));
  CHECK(o.t1 == 3.0);
  CHECK(o.t2 == 3.0);
}

TEST_CASE("mixture_cdf examples", "[model]") {
  Basis blog = parametric_basis(BasisKind::Log);
  const double a = -std::log(0.7);

  // instantaneous mass at zero
  auto th = theta_of({0.0, 0.0}, {1.0 / std::log(11.0)}, a);
  CHECK(mixture_cdf(0.0, vec({0.0, 0.0}), th, blog) == Catch::Approx(0.3).epsilon(1e-12));

  auto th0 = theta_of({0.0, 0.0}, {1.0 / std::log(11.0)}, 0.0);
  CHECK(mixture_cdf(0.0, vec({1.3, -0.4}), th0, blog) == 0.0);

  // Lambda0(10) = 1 under the scaled log hazard
  CHECK(mixture_cdf(10.0, vec({0.0, 0.0}), th, blog) ==
        Catch::Approx(1.0 - 0.7 * std::exp(-1.0)).epsilon(1e-12));

  CHECK_THROWS(mixture_cdf(-0.5, vec({0.0, 0.0}), th, blog));
}

TEST_CASE("mixture_cdf is nondecreasing in t", "[model]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  BasisSpec spec;
  spec.kind = BasisKind::ISpline;
  spec.degree = 2;
  spec.t_min = 0.0;
  spec.t_max = 8.0;
  spec.interior_knots = {3.0};
  Basis b(spec);
  for (int trial = 0; trial < 20; ++trial) {
    auto th = theta_of({unif(rng) - 0.5}, {2 * unif(rng), 2 * unif(rng), 2 * unif(rng)},
                       unif(rng));
    const VectorXd x = vec({2.0 * unif(rng) - 1.0});
    double prev = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double t = 10.0 * i / 100.0;
      const double h = mixture_cdf(t, x, th, b);
      CHECK(h >= prev - 1e-14);
      CHECK(h <= 1.0);
      prev = h;
    }
  }
}

TEST_CASE("baseline_survival examples", "[model]") {
  Basis blin = parametric_basis(BasisKind::Linear);
  const double a = -std::log(0.7);
  auto th = theta_of({0.0, 0.0}, {0.1}, a);
  CHECK(baseline_survival(0.0, th, blin) == Catch::Approx(0.7).epsilon(1e-12));
  CHECK(baseline_survival(1e-12, th, blin) == Catch::Approx(0.7).epsilon(1e-9));
  auto th0 = theta_of({0.0, 0.0}, {0.1}, 0.0);
  CHECK(baseline_survival(0.0, th0, blin) == 1.0);
  CHECK(baseline_survival(10.0, th, blin) ==
        Catch::Approx(0.7 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("observed_loglik examples", "[model]") {
  Basis blin = parametric_basis(BasisKind::Linear);
  const double a = -std::log(0.7);

  Dataset one;
  one.covariate_names = {"x1"};
  one.observations.push_back(make_observation(0.0, 0.0, vec({0.0})));
  auto th = theta_of({0.0}, {0.1}, a);
  CHECK(observed_loglik(one, th, blin) == Catch::Approx(std::log(0.3)).epsilon(1e-12));

  // right-censored subject with no hazard accumulated and alpha = 0
  Dataset rc;
  rc.covariate_names = {"x1"};
  rc.observations.push_back(make_observation(2.0, kInf, vec({0.4})));
  auto th_zero = theta_of({0.3}, {0.0}, 0.0);
  CHECK(observed_loglik(rc, th_zero, blin) == 0.0);

  // independence: two-subject value is the sum of the singles
  Dataset two = one;
  two.observations.push_back(make_observation(0.0, 3.0, vec({0.5})));
  Dataset second;
  second.covariate_names = {"x1"};
  second.observations.push_back(two.observations[1]);
  CHECK(observed_loglik(two, th, blin) ==
        Catch::Approx(observed_loglik(one, th, blin) + observed_loglik(second, th, blin))
            .epsilon(1e-14));
}

TEST_CASE("zero-probability interval is flagged as -inf", "[model]") {
  Basis blin = parametric_basis(BasisKind::Linear);
  Dataset d;
  d.covariate_names = {"x1"};
  d.observations.push_back(make_observation(0.0, 3.0, vec({0.0})));
  auto th = theta_of({0.0}, {0.0}, 0.2);  // gamma = 0 kills the interval mass
  LogLikFlags flags;
  const double ll = observed_loglik(d, th, blin, &flags);
  CHECK(ll == -kInf);
  CHECK(flags.zero_probability_interval);
}

TEST_CASE("alpha = 0 reduces to the classical PH interval likelihood", "[model]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GenConfig cfg;
  cfg.p = 0.0;  // no instantaneous failures
  cfg.beta1 = 0.4;
  cfg.beta2 = -0.3;
  cfg.n = 40;
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset data = generate_dataset(cfg, rep);
    BasisSpec spec = resolve_knots(default_knots(data, 1, 2));
    Basis b(spec);
    ParameterVector th;
    th.beta = vec({unif(rng) - 0.5, unif(rng) - 0.5});
    th.gamma.resize(b.size());
    for (int l = 0; l < b.size(); ++l) th.gamma(l) = 0.2 + unif(rng);
    th.alpha = 0.0;
    const double full = observed_loglik(data, th, b);
    const double reduced = oracle::classical_ph_loglik(data, th.beta, th.gamma, b);
    CHECK(full == Catch::Approx(reduced).margin(1e-10));
  }
}

TEST_CASE("observed likelihood equals the lattice-marginalized augmented likelihood",
          "[model]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  BasisSpec spec;
  spec.kind = BasisKind::ISpline;
  spec.degree = 1;
  spec.t_min = 0.0;
  spec.t_max = 5.0;
  Basis b(spec);  // k = 1
  for (int trial = 0; trial < 5; ++trial) {
    auto th = theta_of({0.3}, {0.5 + unif(rng)}, 0.2 + unif(rng));
    const VectorXd x = vec({2.0 * unif(rng) - 1.0});
    for (auto [L, R] : std::vector<std::pair<double, double>>{
             {0.0, 0.0}, {0.0, 2.0}, {1.0, 3.5}, {2.5, kInf}}) {
      const Observation o = make_observation(L, R, x);
      Dataset d;
      d.covariate_names = {"x1"};
      d.observations.push_back(o);
      const double direct = std::exp(observed_loglik(d, th, b));
      const double lattice = oracle::lattice_marginal(o, th, b);
      CHECK(direct == Catch::Approx(lattice).margin(1e-10));
    }
  }
}
