#pragma once

#include "hetdid/design.hpp"
#include "hetdid/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace hetdid {

enum class DesignGen {
  // D_t = 1{t >= F}, D_1 = 0.
  staggered,
  // D_t = 1{E >= t >= F}.
  one_exit,
  // D_t = I * 1{t >= F} with I uniform on 1..dose_levels.
  dose_staggered,
  // D_1 uniform on 0..dose_levels-1, then a single move of +-1 at F.
  baseline_varying,
  // D_1 is 0 or 1, then the dose flips with probability switch_prob each period.
  markov_binary,
  // D_1 ~ U(0,1) and D_t = D_1 + N(0,1) for t >= 2, so F = 2 everywhere.
  no_stayers_continuous,
  // Paths drawn uniformly from SimConfig::support.
  fixed_paths,
};

enum class OutcomeModel {
  // sum_{k=0}^K beta_k d_{t-k}.
  k_lag,
  // sum_{k=0}^{T-2} beta_k d_{t-k}.
  full_lag,
  // k_lag plus sum_{k<k'} beta_{k,k'} d_{t-k} d_{t-k'}.
  interaction,
};

const char* to_string(DesignGen d);
const char* to_string(OutcomeModel m);
DesignGen design_gen_from_string(const std::string& s);
OutcomeModel outcome_model_from_string(const std::string& s);

// Vectors of per-coefficient settings broadcast when they hold one value.
// Coefficients are ordered like the RC design columns (lags, then
// interactions).
struct SimConfig {
  int G = 200;
  int T = 6;
  DesignGen design = DesignGen::staggered;
  OutcomeModel model = OutcomeModel::k_lag;
  int K = 0;

  // beta_{g,j} = mean_j + corr_F_j z_F + corr_dose_j z_D + sd_j N(0,1), with
  // z_F and z_D the standardized first-switch date and mean dose of g.
  std::vector<double> beta_mean{1.0};
  std::vector<double> beta_sd{0.0};
  std::vector<double> beta_corr_F{0.0};
  std::vector<double> beta_corr_dose{0.0};

  // Common time effects gamma_1..gamma_T; empty draws a random walk.
  std::vector<double> gamma;
  double alpha_sd = 1.0;
  double noise_sd = 1.0;

  // Share of groups that never switch (staggered-type designs).
  double never_share = 0.2;
  int dose_levels = 3;
  double switch_prob = 0.3;
  std::vector<std::vector<double>> support;
  // Draw positive group weights.
  bool weights = false;

  std::uint64_t seed = 1;
};

// Number of outcome coefficients of a configuration.
int num_coefficients(const SimConfig& config);

// Synthetic panel with every coefficient and error stored, so potential
// outcomes are known for any treatment path.
struct OraclePanel {
  SimConfig config;
  Panel panel;
  Eigen::VectorXd alpha;
  Eigen::VectorXd gamma;
  // G x P coefficients.
  Eigen::MatrixXd beta;
  // G x T errors (part of Y_t(0)).
  Eigen::MatrixXd noise;

  // Y_{g,t}(d_1..d_t); `path` holds at least t doses. Doses before period 1
  // equal d_1.
  double potential_outcome(int g, int t, const std::vector<double>& path) const;
  // The lag-offset columns of beta, G x (K+1) (lags only, no interactions).
  Eigen::MatrixXd lag_betas() const;
  std::vector<double> observed_path(int g) const;
};

OraclePanel generate(const SimConfig& config);

// Average of S_g (Y_{g,F-1+ell} - Y_{g,F-1+ell}(d_1,..,d_1)) over the
// switchers the estimator uses at horizon ell. Throws Undefined when empty.
double oracle_avsq(int ell, const OraclePanel& oracle, const DesignInfo& info);

struct SlopeOracle {
  int g = 0;
  // SL^ell_k and omega^ell_k, k = 0..ell-1.
  std::vector<double> slope;
  std::vector<double> omega;
};

// Slopes of the potential outcome when lag k moves from d_1 to its actual
// value, earlier doses at their actual values and later ones at d_1 (0/0 = 0),
// for every switcher the estimator uses at horizon ell. omega uses the sample
// cumulative dose change over those switchers.
std::vector<SlopeOracle> oracle_slopes(int ell, const OraclePanel& oracle,
                                       const DesignInfo& info);

// Weighted average of sum_k omega_k SL_k over the slope oracles.
double oracle_normalized(int ell, const OraclePanel& oracle, const DesignInfo& info);

// Betas, gamma, alpha and the configuration; the panel itself goes to CSV.
nlohmann::json oracle_sidecar(const OraclePanel& oracle);
nlohmann::json to_json(const SimConfig& config);

}  // namespace hetdid
