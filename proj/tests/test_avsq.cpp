#include "helpers.hpp"
#include "oracles.hpp"

#include "hetdid/avsq.hpp"
#include "hetdid/errors.hpp"
#include "hetdid/simlab.hpp"

#include <doctest.h>

#include <cmath>

using namespace hetdid;
using testing::make_panel;
using testing::zeros_like;

TEST_CASE("three-group example") {
  // The switcher gains 5; the controls gain 1 and 3.
  const Panel p = make_panel({{0, 5}, {0, 1}, {0, 3}}, {{0, 1}, {0, 0}, {0, 0}});
  const EventStudyResult r = avsq_hat(1, p, analyze_design(p));
  CHECK(r.defined);
  CHECK(r.estimate == 3.0);
  CHECK(r.n_switchers == 1);
  CHECK(r.switchers == std::vector<int>{0});
  CHECK(r.paths.size() == 1);
  CHECK(r.paths[0].signature == std::vector<double>{0, 1});

  const Panel out = make_panel({{0, 5}, {0, 1}, {0, 3}}, {{1, 0}, {1, 1}, {1, 1}});
  CHECK(avsq_hat(1, out, analyze_design(out)).estimate == -3.0);
}

TEST_CASE("all stayers leave the effect undefined") {
  const Panel p = make_panel({{0, 5}, {0, 1}}, {{1, 1}, {0, 0}});
  const EventStudyResult r = avsq_hat(1, p, analyze_design(p));
  CHECK_FALSE(r.defined);
  CHECK(r.estimate == 0.0);
  CHECK(r.n_switchers == 0);
  CHECK_THROWS_AS(normalize(1, p, analyze_design(p)), Undefined);
}

TEST_CASE("control sets") {
  const testing::Rows d{{0, 1, 1}, {0, 0, 0}, {1, 1, 1}, {0, 0, 1}};
  const Panel p = make_panel(zeros_like(d), d);
  const DesignInfo info = analyze_design(p);
  CHECK(control_set(0, 1, p, info) == std::vector<int>{1, 3});
  CHECK(control_set(0, 2, p, info) == std::vector<int>{1});
  CHECK(control_set(3, 1, p, info) == std::vector<int>{1});
  CHECK(control_set(2, 1, p, info).empty());

  const testing::Rows u{{0, 1, 1}, {0, 0, 0}, {5, 6, 6}};
  const Panel q = make_panel(zeros_like(u), u);
  CHECK(control_set(2, 1, q, analyze_design(q)).empty());
  CHECK(avsq_hat(1, q, analyze_design(q)).switchers == std::vector<int>{0});
}

TEST_CASE("control sets are nonempty up to the never-treated horizon") {
  SimConfig c;
  c.G = 100;
  c.T = 6;
  c.never_share = 0.3;
  const OraclePanel o = generate(c);
  const DesignInfo info = analyze_design(o.panel);
  for (int g = 0; g < c.G; ++g) {
    if (!info.is_switcher(g)) continue;
    for (int ell = 1; ell <= c.T - info.F[g] + 1; ++ell) {
      CHECK_FALSE(control_set(g, ell, o.panel, info).empty());
    }
  }
}

TEST_CASE("estimator matches the brute-force definition on every design") {
  for (DesignGen gen : {DesignGen::staggered, DesignGen::one_exit, DesignGen::dose_staggered,
                        DesignGen::baseline_varying, DesignGen::markov_binary}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      SimConfig c;
      c.G = 90;
      c.T = 6;
      c.design = gen;
      c.beta_sd = {1.0};
      c.seed = seed;
      const OraclePanel o = generate(c);
      const DesignInfo info = analyze_design(o.panel);
      for (int ell = 1; ell < c.T; ++ell) {
        const oracle::AvsqOracle ref = oracle::avsq(ell, o.panel.outcome(), o.panel.treatment());
        const EventStudyResult r = avsq_hat(ell, o.panel, info);
        CHECK(r.defined == ref.defined);
        CHECK(r.n_switchers == ref.n);
        CHECK(r.estimate == doctest::Approx(ref.estimate).epsilon(1e-12).scale(1.0));
        if (r.defined) {
          const EventStudyResult n = normalize(ell, o.panel, info);
          CHECK(n.dose_delta == doctest::Approx(ref.dose_delta).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("binary staggered effect at horizon one is DID_M") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimConfig c;
    c.G = 150;
    c.T = 6;
    c.seed = seed;
    c.beta_sd = {0.5};
    const OraclePanel o = generate(c);
    const double did = oracle::did_m(o.panel.outcome(), o.panel.treatment());
    CHECK(std::fabs(avsq_hat(1, o.panel, analyze_design(o.panel)).estimate - did) <= 1e-12);
  }
}

TEST_CASE("placebos") {
  SUBCASE("undefined when every switcher moves at period 2") {
    const Panel p = make_panel({{0, 1, 2}, {0, 0, 0}, {0, 1, 1}}, {{0, 1, 1}, {0, 0, 0}, {0, 1, 1}});
    CHECK_THROWS_AS(avsq_placebo(1, p, analyze_design(p)), PlaceboUndefined);
  }
  SUBCASE("a linear pre-trend of c per period gives -c") {
    const double c = 0.75;
    // Switchers at F=4 trend by c per period, stayers by 0.1.
    const testing::Rows d{{0, 0, 0, 1, 1}, {0, 0, 0, 1, 1}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}};
    testing::Rows y = zeros_like(d);
    for (int t = 0; t < 5; ++t) {
      y[0][t] = c * t;
      y[1][t] = c * t;
      y[2][t] = 0.1 * t;
      y[3][t] = 0.1 * t;
    }
    const Panel p = make_panel(y, d);
    const DesignInfo info = analyze_design(p);
    const EventStudyResult pl = avsq_placebo(1, p, info);
    CHECK(pl.horizon == -1);
    CHECK(pl.estimate == doctest::Approx(-(c - 0.1)));
    const EventStudyResult pl2 = avsq_placebo(2, p, info);
    CHECK(pl2.estimate == doctest::Approx(-2 * (c - 0.1)));
    // Dose change copied from horizon 2.
    CHECK(pl2.dose_delta == normalize(2, p, info).dose_delta);
  }
  SUBCASE("same switchers as the effect, restricted to F-1-ell >= 1") {
    SimConfig c;
    c.G = 200;
    c.T = 7;
    c.design = DesignGen::markov_binary;
    const OraclePanel o = generate(c);
    const DesignInfo info = analyze_design(o.panel);
    for (int ell = 1; ell <= 3; ++ell) {
      const EventStudyResult eff = avsq_hat(ell, o.panel, info);
      const EventStudyResult pl = avsq_placebo(ell, o.panel, info);
      std::vector<int> expect;
      for (int g : eff.switchers) {
        if (info.F[g] - 1 - ell >= 1) expect.push_back(g);
      }
      CHECK(pl.switchers == expect);
      CHECK(pl.normalized == doctest::Approx(pl.estimate / normalize(ell, o.panel, info).dose_delta));
    }
  }
}

TEST_CASE("normalization") {
  SUBCASE("binary staggered: dose change ell, equal lag shares") {
    SimConfig c;
    c.G = 100;
    c.T = 6;
    const OraclePanel o = generate(c);
    const DesignInfo info = analyze_design(o.panel);
    for (int ell = 1; ell <= 4; ++ell) {
      const EventStudyResult r = normalize(ell, o.panel, info);
      CHECK(r.dose_delta == doctest::Approx(ell).epsilon(1e-14));
      for (double s : r.omega_shares) CHECK(s == doctest::Approx(1.0 / ell).epsilon(1e-14));
      CHECK(r.normalized == doctest::Approx(r.estimate / r.dose_delta));
    }
  }
  SUBCASE("intensity 2 doubles the dose change") {
    const testing::Rows d{{0, 2, 2, 2}, {0, 0, 2, 2}, {0, 0, 0, 0}, {0, 0, 0, 0}};
    const Panel p = make_panel(zeros_like(d), d);
    const DesignInfo info = analyze_design(p);
    CHECK(normalize(1, p, info).dose_delta == 2.0);
    CHECK(normalize(2, p, info).dose_delta == 4.0);
  }
  SUBCASE("single ramp path (0,1,2)") {
    const testing::Rows d{{0, 1, 2}, {0, 0, 0}, {0, 0, 0}};
    const Panel p = make_panel(zeros_like(d), d);
    const EventStudyResult r = normalize(2, p, analyze_design(p));
    CHECK(r.dose_delta == 3.0);
    REQUIRE(r.omega_shares.size() == 2);
    CHECK(r.omega_shares[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.omega_shares[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("lag shares sum to one and are nonnegative without crossings") {
  for (DesignGen gen : {DesignGen::one_exit, DesignGen::dose_staggered, DesignGen::markov_binary,
                        DesignGen::baseline_varying}) {
    SimConfig c;
    c.G = 150;
    c.T = 7;
    c.design = gen;
    c.seed = 5;
    const OraclePanel o = generate(c);
    const DesignInfo info = analyze_design(o.panel);
    for (int ell = 1; ell < c.T; ++ell) {
      const EventStudyResult r = avsq_hat(ell, o.panel, info);
      if (!r.defined) continue;
      const EventStudyResult n = normalize(ell, o.panel, info);
      double sum = 0.0;
      for (double s : n.omega_shares) {
        sum += s;
        CHECK(s >= 0.0);
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("normalized effect equals the weighted slope average of the potential outcomes") {
  for (DesignGen gen : {DesignGen::markov_binary, DesignGen::one_exit, DesignGen::dose_staggered,
                        DesignGen::baseline_varying}) {
    for (OutcomeModel model : {OutcomeModel::k_lag, OutcomeModel::interaction}) {
      SimConfig c;
      c.G = 200;
      c.T = 7;
      c.K = 2;
      c.design = gen;
      c.model = model;
      c.noise_sd = 0.0;
      c.beta_mean = {1.0};
      c.beta_sd = {0.8};
      c.beta_corr_F = {0.5};
      const OraclePanel o = generate(c);
      const DesignInfo info = analyze_design(o.panel);
      for (int ell = 1; ell < c.T; ++ell) {
        if (!avsq_hat(ell, o.panel, info).defined) continue;
        const EventStudyResult n = normalize(ell, o.panel, info);
        CHECK(std::fabs(n.estimate - oracle_avsq(ell, o, info)) <= 1e-10);
        CHECK(std::fabs(n.normalized - oracle_normalized(ell, o, info)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("path effects") {
  SUBCASE("homogeneous staggered design has one path per horizon") {
    SimConfig c;
    c.G = 80;
    c.T = 5;
    const OraclePanel o = generate(c);
    const DesignInfo info = analyze_design(o.panel);
    const auto pe = path_effects(1, o.panel, info, 1);
    REQUIRE(pe.size() == 1);
    CHECK(pe[0].result->estimate == doctest::Approx(avsq_hat(1, o.panel, info).estimate));
  }
  SUBCASE("two switcher paths decompose the aggregate") {
    // Paths (0,0,4), (0,1,2) and stayers (0,0,0).
    const testing::Rows d{{0, 0, 4}, {0, 0, 4}, {0, 1, 2}, {0, 0, 0}, {0, 0, 0}};
    const testing::Rows y{{0, 1, 9}, {0, 2, 7}, {0, 3, 4}, {0, 1, 1}, {0, 0.5, 2}};
    const Panel p = make_panel(y, d);
    const DesignInfo info = analyze_design(p);
    const EventStudyResult agg = avsq_hat(1, p, info);
    const auto pe = path_effects(1, p, info, 1);
    REQUIRE(pe.size() == 2);
    double combined = 0.0;
    int total = 0;
    for (const auto& e : pe) {
      combined += e.path.share * e.result->estimate;
      total += e.path.count;
    }
    CHECK(total == agg.n_switchers);
    CHECK(combined == doctest::Approx(agg.estimate).epsilon(1e-14));
    CHECK(pe[0].path.signature == std::vector<double>{0, 4});
    CHECK(pe[0].path.count == 2);
  }
  SUBCASE("rare paths are reported by frequency only") {
    const testing::Rows d{{0, 0, 4}, {0, 0, 4}, {0, 1, 2}, {0, 0, 0}, {0, 0, 0}};
    const Panel p = make_panel(zeros_like(d), d);
    const auto pe = path_effects(2, p, analyze_design(p), 2);
    REQUIRE(pe.size() == 1);
    CHECK(pe[0].path.signature == std::vector<double>{0, 1, 2});
    CHECK_FALSE(pe[0].result.has_value());
  }
}

TEST_CASE("ACE") {
  SUBCASE("staggered binary: share-weighted average over horizons") {
    SimConfig c;
    c.G = 150;
    c.T = 6;
    c.beta_sd = {1.0};
    const OraclePanel o = generate(c);
    const DesignInfo info = analyze_design(o.panel);
    double num = 0.0, den = 0.0;
    for (int ell = 1; ell < c.T; ++ell) {
      const auto ref = oracle::avsq(ell, o.panel.outcome(), o.panel.treatment());
      num += ref.n * ref.estimate;
      den += ref.n;
    }
    const AceResult a = ace(o.panel, info);
    CHECK(a.ace == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(a.max_horizon == c.T - 1);
  }
  SUBCASE("cost threshold") {
    const Panel p = make_panel({{0, 5, 6}, {0, 1, 2}, {0, 1, 2}}, {{0, 1, 1}, {0, 0, 0}, {0, 0, 0}});
    const DesignInfo info = analyze_design(p);
    AceOptions o;
    o.costs = std::vector<double>{1.0};
    const AceResult a = ace(p, info, o);
    CHECK(a.ace == doctest::Approx(4.0));
    CHECK(*a.threshold_c == doctest::Approx(1.0));
    CHECK(*a.beneficial);
    o.costs = std::vector<double>{10.0, 1.0};
    const AceResult b = ace(p, info, o);
    CHECK(*b.threshold_c == doctest::Approx(5.5));
    CHECK_FALSE(*b.beneficial);
    o.costs = std::vector<double>{1.0, 1.0, 1.0};
    CHECK(ace(p, info, o).threshold_c.has_value());
  }
  SUBCASE("mixed signs need a side") {
    const testing::Rows d{{0, 1, 1}, {0, 0, 0}, {1, 0, 0}, {1, 1, 1}};
    const testing::Rows y{{0, 2, 2}, {0, 0, 0}, {0, -3, -3}, {0, 0, 0}};
    const Panel p = make_panel(y, d);
    const DesignInfo info = analyze_design(p);
    CHECK_THROWS_AS(ace(p, info), MixedSignDesign);
    AceOptions in;
    in.side = AceOptions::Side::switchers_in;
    CHECK(ace(p, info, in).ace == doctest::Approx(2.0));
    AceOptions out;
    out.side = AceOptions::Side::switchers_out;
    CHECK(ace(p, info, out).ace == doctest::Approx(3.0));
  }
  SUBCASE("no switchers") {
    const Panel p = make_panel({{0, 1}, {0, 1}}, {{0, 0}, {1, 1}});
    CHECK_THROWS_AS(ace(p, analyze_design(p)), AceDegenerate);
  }
  SUBCASE("constant effect per dose is recovered") {
    SimConfig c;
    c.G = 4000;
    c.T = 6;
    c.design = DesignGen::dose_staggered;
    c.beta_mean = {1.5};
    c.noise_sd = 0.5;
    c.seed = 2;
    const OraclePanel o = generate(c);
    CHECK(ace(o.panel, analyze_design(o.panel)).ace == doctest::Approx(1.5).epsilon(0.03));
  }
}

TEST_CASE("monotone design has nonnegative effects") {
  SimConfig c;
  c.G = 300;
  c.T = 6;
  c.design = DesignGen::dose_staggered;
  c.K = 1;
  c.beta_mean = {0.5, 0.3};
  c.beta_sd = {0.0};
  c.noise_sd = 0.0;
  const OraclePanel o = generate(c);
  const DesignInfo info = analyze_design(o.panel);
  for (int ell = 1; ell < c.T; ++ell) {
    const EventStudyResult r = avsq_hat(ell, o.panel, info);
    if (r.defined) CHECK(r.estimate >= -1e-12);
  }
}

TEST_CASE("group weights reweight switchers and controls") {
  const testing::Rows d{{0, 1}, {0, 1}, {0, 0}, {0, 0}};
  const testing::Rows y{{0, 4}, {0, 8}, {0, 1}, {0, 3}};
  const Panel p(std::vector<std::string>{"1", "2", "3", "4"}, {1, 2}, testing::to_matrix(y),
                testing::to_matrix(d), Eigen::VectorXd(Eigen::Vector4d(1, 3, 1, 3)));
  const EventStudyResult r = avsq_hat(1, p, analyze_design(p));
  // Weighted switcher gain 7, weighted control gain 2.5.
  CHECK(r.estimate == doctest::Approx(4.5));
  CHECK(r.weighted);
}

TEST_CASE("same horizon check") {
  const Panel p = make_panel({{0, 5}, {0, 1}}, {{0, 1}, {0, 0}});
  CHECK_THROWS_AS(avsq_hat(0, p, analyze_design(p)), ConfigError);
  CHECK_THROWS_AS(avsq_hat(2, p, analyze_design(p)), ConfigError);
}
