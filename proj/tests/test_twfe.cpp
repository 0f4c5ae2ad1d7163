#include "helpers.hpp"
#include "oracles.hpp"

#include "hetdid/errors.hpp"
#include "hetdid/simlab.hpp"
#include "hetdid/twfe.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace hetdid;

namespace {

OraclePanel sim(DesignGen design, int K, std::uint64_t seed, int G = 120, int T = 7,
                double noise = 1.0) {
  SimConfig c;
  c.G = G;
  c.T = T;
  c.K = K;
  c.design = design;
  c.beta_sd = {0.7};
  c.noise_sd = noise;
  c.seed = seed;
  return generate(c);
}

// Y = alpha_g + gamma_t + sum_k beta_{g,k} D_{t-k} with pre-sample doses at D_1.
PathMatrix lag_outcome(const PathMatrix& D, const Eigen::MatrixXd& beta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  const int G = static_cast<int>(D.rows()), T = static_cast<int>(D.cols());
  Eigen::VectorXd gamma(T);
  for (int t = 0; t < T; ++t) gamma(t) = N(rng);
  PathMatrix Y(G, T);
  for (int g = 0; g < G; ++g) {
    const double a = N(rng);
    for (int t = 0; t < T; ++t) {
      double y = a + gamma(t);
      for (int k = 0; k < beta.cols(); ++k) y += beta(g, k) * D(g, std::max(0, t - k));
      Y(g, t) = y;
    }
  }
  return Y;
}

}  // namespace

TEST_CASE("two-by-two regression is the difference in differences") {
  const Panel p = testing::make_panel({{1, 4}, {2, 3}}, {{0, 1}, {0, 0}});
  const WeightDecomposition w = fit_distributed_lag(p, 0);
  CHECK(w.beta_hat(0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("demeaned regression matches least squares on explicit dummies") {
  for (DesignGen gen : {DesignGen::staggered, DesignGen::markov_binary, DesignGen::dose_staggered,
                        DesignGen::baseline_varying}) {
    for (int K = 0; K <= 2; ++K) {
      const OraclePanel o = sim(gen, K, 7 + K, 60);
      const Eigen::VectorXd ref = oracle::twfe_dummies(o.panel.outcome(), o.panel.treatment(), K);
      const WeightDecomposition w = fit_distributed_lag(o.panel, K);
      for (int j = 0; j <= K; ++j) CHECK(w.beta_hat(j) == doctest::Approx(ref(j)).epsilon(1e-8));
    }
  }
}

TEST_CASE("weighted regression matches weighted dummies") {
  SimConfig c;
  c.G = 50;
  c.T = 6;
  c.K = 1;
  c.design = DesignGen::markov_binary;
  c.weights = true;
  const OraclePanel o = generate(c);
  REQUIRE(o.panel.has_weights());
  const int G = 50, T = 6, K = 1, R = T - K;
  const Eigen::VectorXd& w = *o.panel.weights();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(G * R, 2 + G + R - 1);
  Eigen::VectorXd y(G * R);
  for (int g = 0; g < G; ++g) {
    for (int r = 0; r < R; ++r) {
      const int t = K + 1 + r, i = g * R + r;
      const double s = std::sqrt(w(g));
      y(i) = s * o.panel.y(g, t);
      X(i, 0) = s * o.panel.d(g, t);
      X(i, 1) = s * o.panel.d(g, t - 1);
      X(i, 2 + g) = s;
      if (r > 0) X(i, 2 + G + r - 1) = s;
    }
  }
  const Eigen::VectorXd ref = X.colPivHouseholderQr().solve(y);
  const WeightDecomposition fit = fit_distributed_lag(o.panel, 1);
  CHECK(fit.weighted);
  CHECK(fit.beta_hat(0) == doctest::Approx(ref(0)).epsilon(1e-8));
  CHECK(fit.beta_hat(1) == doctest::Approx(ref(1)).epsilon(1e-8));
  TwfeOptions plain;
  plain.K = 1;
  plain.use_weights = false;
  CHECK_FALSE(fit_distributed_lag(o.panel, plain).weighted);
}

TEST_CASE("weight identities and the partialled-out ratio") {
  for (DesignGen gen : {DesignGen::staggered, DesignGen::one_exit, DesignGen::markov_binary,
                        DesignGen::dose_staggered}) {
    for (int K = 0; K <= 2; ++K) {
      const OraclePanel o = sim(gen, K, 30 + K);
      const WeightDecomposition w = decompose_weights(o.panel, K);
      const int G = o.panel.num_groups();
      const int R = w.last_period - w.first_period + 1;
      for (int j = 0; j <= K; ++j) {
        for (int jp = 0; jp <= K; ++jp) {
          const double mean = w.W[j][jp].sum() / G;
          CHECK(std::fabs(mean - (j == jp ? 1.0 : 0.0)) <= 1e-10);
        }
        double num = 0.0, den = 0.0;
        for (int g = 0; g < G; ++g) {
          for (int r = 0; r < R; ++r) {
            const int t = w.first_period + r;
            num += w.eta[j](g, r) * o.panel.y(g, t);
            den += w.eta[j](g, r) * o.panel.d(g, t - j);
          }
        }
        CHECK(std::fabs(num / den - w.beta_hat(j)) <= 1e-9);
      }
      CHECK(w.diagnostics.size() == static_cast<std::size_t>((K + 1) * (K + 1)));
    }
  }
}

TEST_CASE("noise-free heterogeneous slopes are reconstructed from the weights") {
  for (int K = 0; K <= 2; ++K) {
    const OraclePanel o = sim(DesignGen::markov_binary, K, 50 + K, 150, 7, 0.0);
    const WeightDecomposition w = decompose_weights(o.panel, K);
    const Eigen::VectorXd rec = reconstruct_beta_from_weights(w, o.lag_betas());
    for (int j = 0; j <= K; ++j) CHECK(std::fabs(rec(j) - w.beta_hat(j)) <= 1e-8);
  }
}

TEST_CASE("estimates do not depend on group order") {
  const OraclePanel o = sim(DesignGen::dose_staggered, 1, 3);
  const int G = o.panel.num_groups();
  std::vector<int> perm(G);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Panel q = o.panel.select_groups(perm);
  const WeightDecomposition a = decompose_weights(o.panel, 1);
  const WeightDecomposition b = decompose_weights(q, 1);
  CHECK((a.beta_hat - b.beta_hat).cwiseAbs().maxCoeff() <= 1e-10);
  for (int i = 0; i < G; ++i) {
    CHECK(std::fabs(a.W[0][1](perm[i]) - b.W[0][1](i)) <= 1e-9);
  }
}

TEST_CASE("collinear regressors are reported") {
  SUBCASE("common path") {
    const testing::Rows d{{0, 1, 1, 1}, {0, 1, 1, 1}, {0, 1, 1, 1}};
    const Panel p = testing::make_panel({{1, 2, 3, 4}, {0, 1, 0, 2}, {3, 1, 2, 2}}, d);
    try {
      fit_distributed_lag(p, 0);
      FAIL("expected RankDeficient");
    } catch (const RankDeficient& e) {
      CHECK(e.code() == ErrorCode::RankDeficient);
      CHECK(e.combination().size() == 1);
    }
  }
  SUBCASE("lag collinear with the current dose") {
    // Every group switches at period 3 or never; on t = 2..4 with T = 4,
    // D_{t-1} spans nothing beyond D_t and the fixed effects for one cohort.
    const testing::Rows d{{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 0, 0}};
    const Panel p = testing::make_panel({{1, 2, 3, 4}, {0, 1, 0, 2}, {3, 1, 2, 2}}, d);
    CHECK_THROWS_AS(fit_distributed_lag(p, 2), RankDeficient);
  }
}

TEST_CASE("configuration errors") {
  const OraclePanel o = sim(DesignGen::staggered, 0, 1, 30, 4);
  CHECK_THROWS_AS(fit_distributed_lag(o.panel, 3), ConfigError);
  TwfeOptions lead;
  lead.K = 1;
  lead.leads = 2;
  CHECK_THROWS_AS(fit_distributed_lag(o.panel, lead), ConfigError);
  const Panel r = o.panel.select_groups({0, 1, 2});
  std::vector<int> last{4, 3, 4};
  const Panel unb(r.groups(), r.period_labels(), r.outcome(), r.treatment(), std::nullopt, last);
  CHECK_THROWS_AS(fit_distributed_lag(unb, 0), ConfigError);
}

TEST_CASE("leads enter as extra regressors") {
  const OraclePanel o = sim(DesignGen::markov_binary, 1, 9, 200, 8);
  TwfeOptions opt;
  opt.K = 1;
  opt.leads = 1;
  const WeightDecomposition w = decompose_weights(o.panel, opt);
  CHECK(w.offsets == std::vector<int>{0, 1, -1});
  CHECK(w.last_period == 7);
  for (int j = 0; j < 3; ++j) {
    for (int jp = 0; jp < 3; ++jp) {
      CHECK(std::fabs(w.W[j][jp].sum() / 200 - (j == jp ? 1.0 : 0.0)) <= 1e-10);
    }
  }
  // No anticipation in the data: the lead coefficient is noise around zero.
  CHECK(std::fabs(w.beta_hat(2)) < 0.5);
}

TEST_CASE("contamination weights reverse the sign under nonnegative effects") {
  SimConfig c;
  c.G = 200;
  c.T = 6;
  c.design = DesignGen::staggered;
  const OraclePanel o = generate(c);
  const PathMatrix& D = o.panel.treatment();
  const WeightDecomposition w0 = decompose_weights(o.panel, 1);
  // Diagnostics are ordered (0,0), (0,1), (1,0), (1,1).
  CHECK(w0.diagnostics[1].k_prime == 1);
  CHECK(w0.diagnostics[1].negative_share > 0.0);
  // No contemporaneous effect; a unit lag effect where W^{0,1} is negative.
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(c.G, 2);
  for (int g = 0; g < c.G; ++g) beta(g, 1) = w0.W[0][1](g) < 0.0 ? 1.0 : 0.0;
  const Panel p(o.panel.groups(), o.panel.period_labels(), lag_outcome(D, beta, 4), D);
  const WeightDecomposition w = decompose_weights(p, 1);
  CHECK(beta.minCoeff() >= 0.0);
  CHECK(w.beta_hat(0) < -0.05);
  CHECK(w.beta_hat(0) == doctest::Approx(reconstruct_beta_from_weights(w, beta)(0)).epsilon(1e-8));
}

TEST_CASE("json has one diagnostics row per weight pair") {
  const OraclePanel o = sim(DesignGen::markov_binary, 1, 2);
  const nlohmann::json j = to_json(decompose_weights(o.panel, 1));
  CHECK(j["diagnostics"].size() == 4);
  CHECK(j["beta_hat"].size() == 2);
}
