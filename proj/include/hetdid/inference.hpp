#pragma once

#include "hetdid/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

namespace hetdid {

struct BootstrapPlan {
  int replications = 100;
  std::uint64_t seed = 1;
  double level = 0.95;
  // Percentile intervals instead of estimate +/- z * se.
  bool percentile = false;
  // A component undefined in more than this share of replications is unstable.
  double max_invalid_share = 0.2;
  // Report unstable components with NaN se instead of throwing.
  bool allow_partial = false;
  int threads = 0;
};

struct BootstrapResult {
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  // Covariance over replications where every component is defined.
  Eigen::MatrixXd covariance;
  // replications x components; NaN marks an undefined value.
  Eigen::MatrixXd draws;
  std::vector<int> valid;
  std::vector<char> unstable;
  int replications = 0;
  // Replications where the statistic threw.
  int failed_replications = 0;
  int complete_replications = 0;
};

// Statistic over a resampled list of group indices (duplicates allowed).
// Undefined components are reported as NaN.
using IndexStatistic = std::function<Eigen::VectorXd(const std::vector<int>& draw)>;
using PanelStatistic = std::function<Eigen::VectorXd(const Panel& panel)>;

// Draw r of a plan: num_groups indices sampled with replacement from a
// substream that depends only on (seed, r).
std::vector<int> bootstrap_draw(std::uint64_t seed, int replication, int num_groups);

BootstrapResult bootstrap(const BootstrapPlan& plan, int num_groups,
                          const Eigen::VectorXd& estimate, const IndexStatistic& statistic);

// Resamples whole groups of `panel`; the estimate is statistic(panel).
BootstrapResult bootstrap(const BootstrapPlan& plan, const Panel& panel,
                          const PanelStatistic& statistic);

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double pvalue = 1.0;
};

// H0: all components equal. Contrasts theta_j - theta_1, pseudo-inverse of
// the contrast covariance, chi-square with rank degrees of freedom.
WaldResult wald_equal(const Eigen::VectorXd& estimates, const Eigen::MatrixXd& covariance);
// H0: all components are zero.
WaldResult wald_zero(const Eigen::VectorXd& estimates, const Eigen::MatrixXd& covariance);

double normal_quantile(double p);
// Two-sided normal p-value of estimate / se.
double normal_pvalue(double estimate, double se);

struct KsResult {
  double statistic = 0.0;
  double pvalue = 1.0;
};
// One-sample Kolmogorov-Smirnov test against U(0,1).
KsResult ks_uniform(std::vector<double> values);

nlohmann::json to_json(const WaldResult& w);

}  // namespace hetdid
