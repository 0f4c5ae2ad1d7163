#include "helpers.hpp"

#include "hetdid/avsq.hpp"
#include "hetdid/dyn_tests.hpp"
#include "hetdid/errors.hpp"
#include "hetdid/simlab.hpp"

#include <doctest.h>

#include <cmath>

using namespace hetdid;

namespace {

BootstrapPlan small_plan() {
  BootstrapPlan p;
  p.replications = 40;
  p.allow_partial = true;
  return p;
}

OraclePanel simulate(DesignGen design, int K, std::vector<double> beta, double noise,
                     std::uint64_t seed = 1, int G = 300, int T = 6) {
  SimConfig c;
  c.G = G;
  c.T = T;
  c.design = design;
  c.K = K;
  c.beta_mean = std::move(beta);
  c.noise_sd = noise;
  c.seed = seed;
  return generate(c);
}

}  // namespace

TEST_CASE("reversion test is infeasible at horizon one and without reverters") {
  const OraclePanel o = simulate(DesignGen::one_exit, 0, {1.0}, 1.0);
  const DesignInfo info = analyze_design(o.panel);
  CHECK_THROWS_AS(test_reversion(1, o.panel, info, small_plan()), TestInfeasible);

  const OraclePanel s = simulate(DesignGen::staggered, 0, {1.0}, 1.0);
  const DesignInfo sinfo = analyze_design(s.panel);
  for (int ell = 2; ell < 6; ++ell) {
    CHECK_THROWS_AS(test_reversion(ell, s.panel, sinfo, small_plan()), TestInfeasible);
  }
  CHECK_THROWS_AS(test_reversion_grid(5, s.panel, sinfo, small_plan()), TestInfeasible);
  CHECK_THROWS_AS(test_reversion_grid(6, s.panel, sinfo, small_plan()), ConfigError);
}

TEST_CASE("subsamples keep every group and cut the right cells") {
  const testing::Rows d{{0, 1, 0, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}, {0, 0, 2, 2}};
  const Panel p = testing::make_panel(testing::zeros_like(d), d);
  const DesignInfo info = analyze_design(p);
  const Panel rev = reversion_subsample(2, p, info);
  CHECK(rev.num_groups() == 4);
  CHECK(rev.last_observed(0) == 4);
  CHECK(rev.last_observed(1) == 1);
  CHECK(rev.last_observed(2) == 4);
  CHECK(rev.last_observed(3) == 2);
  const Panel bal = balanced_subsample(2, p, info);
  CHECK(bal.last_observed(0) == 1);
  CHECK(bal.last_observed(1) == 4);
  CHECK(bal.last_observed(2) == 4);
  CHECK(bal.last_observed(3) == 4);
  CHECK_FALSE(bal.balanced());
}

TEST_CASE("static effects produce zero reversion effects") {
  const OraclePanel o = simulate(DesignGen::one_exit, 0, {2.0}, 0.0);
  const DesignInfo info = analyze_design(o.panel);
  const DynTestResult r = test_reversion_grid(5, o.panel, info, small_plan());
  REQUIRE_FALSE(r.horizons.empty());
  for (std::size_t j = 0; j < r.horizons.size(); ++j) {
    CHECK(r.horizons[j] >= 2);
    CHECK(std::fabs(r.estimates[j]) <= 1e-12);
    CHECK(r.n_obs[j] > 0);
  }
}

TEST_CASE("reversion effect equals the event-study effect on the subsample") {
  const OraclePanel o = simulate(DesignGen::markov_binary, 1, {1.0, 0.7}, 1.0, 4);
  const DesignInfo info = analyze_design(o.panel);
  const DynTestResult r = test_reversion(3, o.panel, info, small_plan());
  const Panel sub = reversion_subsample(3, o.panel, info);
  const EventStudyResult e = avsq_hat(3, sub, analyze_design(sub));
  CHECK(r.estimates.at(0) == doctest::Approx(e.estimate).epsilon(1e-14));
  CHECK(r.n_obs.at(0) == e.n_switchers);
  CHECK(r.ses.at(0) > 0.0);
  REQUIRE(r.joint);
  CHECK(r.joint->df == 1);
}

TEST_CASE("balanced test uses one switcher set") {
  const OraclePanel o = simulate(DesignGen::dose_staggered, 1, {1.0, 0.5}, 1.0);
  const DesignInfo info = analyze_design(o.panel);
  const DynTestResult r = test_balanced(3, o.panel, info, small_plan());
  CHECK(r.horizons == std::vector<int>{1, 2, 3});
  const Panel sub = balanced_subsample(3, o.panel, info);
  const DesignInfo sinfo = analyze_design(sub);
  EventStudy es(sub, sinfo);
  CHECK(r.switchers == es.switchers(3));
  for (int ell = 1; ell <= 3; ++ell) {
    CHECK(r.n_obs[ell - 1] == static_cast<int>(r.switchers.size()));
    CHECK(r.estimates[ell - 1] == doctest::Approx(es.effect(ell, r.switchers).estimate));
  }
  REQUIRE(r.joint);
  CHECK(r.joint->df == 2);
  CHECK(r.restricted_groups == o.panel.num_groups());
}

TEST_CASE("balanced estimates coincide under static effects") {
  const OraclePanel o = simulate(DesignGen::dose_staggered, 0, {1.3}, 0.0);
  const DesignInfo info = analyze_design(o.panel);
  const DynTestResult r = test_balanced(3, o.panel, info, small_plan());
  for (double e : r.estimates) CHECK(std::fabs(e - r.estimates[0]) <= 1e-12);
  // Zero bootstrap variance of the contrasts.
  CHECK_FALSE(r.joint.has_value());
}

TEST_CASE("balanced test detects a lag effect") {
  const OraclePanel o = simulate(DesignGen::dose_staggered, 1, {1.0, 1.0}, 0.5, 2, 800);
  const DesignInfo info = analyze_design(o.panel);
  BootstrapPlan plan;
  plan.replications = 100;
  const DynTestResult r = test_balanced(2, o.panel, info, plan);
  REQUIRE(r.joint_pvalue);
  CHECK(*r.joint_pvalue < 0.01);
  CHECK(r.estimates[1] > r.estimates[0]);
}

TEST_CASE("balanced horizon bounds") {
  const OraclePanel o = simulate(DesignGen::dose_staggered, 0, {1.0}, 1.0);
  const DesignInfo info = analyze_design(o.panel);
  CHECK_THROWS_AS(test_balanced(1, o.panel, info, small_plan()), ConfigError);
  CHECK_THROWS_AS(test_balanced(6, o.panel, info, small_plan()), ConfigError);
  const Panel p = testing::make_panel({{0, 1, 2}, {0, 0, 0}}, {{0, 1, 0}, {0, 0, 0}});
  CHECK_THROWS_AS(test_balanced(2, p, analyze_design(p), small_plan()), TestInfeasible);
}

TEST_CASE("json shape") {
  const OraclePanel o = simulate(DesignGen::one_exit, 0, {1.0}, 1.0);
  const DynTestResult r = test_reversion_grid(4, o.panel, analyze_design(o.panel), small_plan());
  const nlohmann::json j = to_json(r);
  CHECK(j["variant"] == "reversion");
  CHECK(j["rows"].size() == r.horizons.size());
  CHECK(j["rows"][0].contains("se"));
}
