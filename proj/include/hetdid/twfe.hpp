#pragma once

#include "hetdid/panel.hpp"

#include <Eigen/Dense>

#include <vector>

#include <json.hpp>

namespace hetdid {

struct TwfeOptions {
  // Lags D_t .. D_{t-K}.
  int K = 0;
  // Leads D_{t+1} .. D_{t+leads}; the sample then ends at T - leads.
  int leads = 0;
  // Use the panel's group weights (weighted least squares) when present.
  bool use_weights = true;
  double demean_tol = 1e-12;
  int max_sweeps = 1000;
};

struct WeightSummary {
  int k = 0;
  int k_prime = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
  // Quantiles at 1, 25, 50, 75 and 99 percent.
  double q01 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q99 = 0.0;
  double negative_share = 0.0;
};

struct WeightDecomposition {
  int K = 0;
  int leads = 0;
  // Offset of each regressor: regressor j is D_{t - offsets[j]}. Lags 0..K
  // come first, then leads -1..-leads.
  std::vector<int> offsets;
  // Regression sample is t = first_period..last_period.
  int first_period = 0;
  int last_period = 0;
  Eigen::VectorXd beta_hat;
  bool weighted = false;
  int sweeps = 0;

  // Filled by decompose_weights.
  // eta[j](g, t - first_period): residual of the demeaned D_{t-offsets[j]} on
  // the other demeaned regressors.
  std::vector<PathMatrix> eta;
  // W[j][j'](g) = sum_t eta^j_{g,t} D_{g,t-offsets[j']} divided by the
  // (weighted) cross-group mean of sum_t eta^j D_{t-offsets[j]}.
  std::vector<std::vector<Eigen::VectorXd>> W;
  // Group weights normalized to mean one (all ones when unweighted).
  Eigen::VectorXd group_weight;
  std::vector<WeightSummary> diagnostics;

  int num_regressors() const noexcept { return static_cast<int>(offsets.size()); }
};

// Regression of Y_{g,t} on group and period effects and the lagged doses over
// t >= K+1. Throws RankDeficient with the null combination of regressors.
WeightDecomposition fit_distributed_lag(const Panel& panel, const TwfeOptions& options);
WeightDecomposition fit_distributed_lag(const Panel& panel, int K);

WeightDecomposition decompose_weights(const Panel& panel, const TwfeOptions& options);
WeightDecomposition decompose_weights(const Panel& panel, int K);

// (1/G) sum_g sum_j' W_g^{j,j'} beta_{g,j'} for every j; betas is G x J with
// columns ordered like decomp.offsets.
Eigen::VectorXd reconstruct_beta_from_weights(const WeightDecomposition& decomp,
                                              const Eigen::MatrixXd& betas);

nlohmann::json to_json(const WeightDecomposition& decomp);

}  // namespace hetdid
