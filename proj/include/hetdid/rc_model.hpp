#pragma once

#include "hetdid/inference.hpp"
#include "hetdid/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hetdid {

struct RcVariant {
  enum class Kind { k_lag, full_lag, interaction };
  Kind kind = Kind::k_lag;
  // Lag count for k_lag and interaction; ignored for full_lag.
  int K = 0;

  static RcVariant k_lag(int K) { return {Kind::k_lag, K}; }
  static RcVariant full_lag() { return {Kind::full_lag, 0}; }
  static RcVariant interaction(int K) { return {Kind::interaction, K}; }
  std::string name() const;
};

// First-differenced design of every group: dY_g = Gamma + M_g B_g + eps_g.
struct RcDesign {
  RcVariant variant;
  // Period of the first row of M (rows run from here to T).
  int first_period = 0;
  std::vector<std::string> columns;
  std::vector<Eigen::MatrixXd> M;
  std::vector<Eigen::VectorXd> dY;

  int rows() const { return M.empty() ? 0 : static_cast<int>(M.front().rows()); }
  int cols() const { return static_cast<int>(columns.size()); }
};

// Column order:
//   k_lag(K): dD_t, dD_{t-1}, ..., dD_{t-K}; rows t = K+2..T.
//   full_lag: dD_t, dD_{t-1}, ..., dD_{t-T+2} (zero before period 2); rows t = 2..T.
//   interaction(K): the k_lag columns, then d(D_{t-k} D_{t-k'}) for k < k' in
//   the order (0,1), (0,2), ..., (K-1,K); rows t = K+2..T.
RcDesign build_M(const Panel& panel, const RcVariant& variant);

// Singular values of M at or below this times the largest count as zero.
inline constexpr double kRcRankTolerance = 1e-10;
// e_k is in Im(M') when ||M'M'^+ e_k - e_k|| <= kMembershipTolerance, the
// precision to which e_k' M^+ M = e_k' then holds.
inline constexpr double kMembershipTolerance = 1e-10;

struct RcOptions {
  // Keep only groups with ||M'^+ e_k|| <= trim_C.
  std::optional<double> trim_C;
  bool use_weights = true;
};

struct BetaBarEstimate {
  int k = 0;
  std::string name;
  bool identified = false;
  double estimate = kNaN;
  double se = kNaN;
  // Groups with e_k in Im(M_g') (and within the trimming bound).
  std::vector<int> eligible;
  int n_obs() const { return static_cast<int>(eligible.size()); }
};

struct RCEstimate {
  RcVariant variant;
  std::optional<double> trim_C;
  RcDesign design;
  Eigen::VectorXd gamma_hat;
  Eigen::VectorXd gamma_se;
  std::vector<BetaBarEstimate> coefficients;
  std::vector<std::string> warnings;
  bool weighted = false;
};

// Per-group pseudo-inverses and projectors, computed once and shared by the
// point estimate and every bootstrap replication.
class RcModel {
 public:
  RcModel(const Panel& panel, const RcVariant& variant, const RcOptions& options = {});
  RcModel(RcDesign design, std::optional<Eigen::VectorXd> weights, const RcOptions& options = {});

  const RcDesign& design() const noexcept { return design_; }
  int num_groups() const noexcept { return static_cast<int>(design_.M.size()); }

  const Eigen::MatrixXd& projector(int g) const { return pi_[g]; }
  const Eigen::MatrixXd& pinv(int g) const { return pinv_[g]; }
  // e_k in Im(M_g') and, when trimming, ||M_g'^+ e_k|| <= C.
  bool eligible(int g, int k) const;
  bool in_row_space(int g, int k) const { return member_[g][k] != 0; }
  double pinv_row_norm(int g, int k) const { return row_norm_[g](k); }

  // Gamma hat over the listed groups (duplicates allowed; empty = all groups).
  // Throws DesignNotIdentified when the mean projector is singular.
  Eigen::VectorXd gamma(const std::vector<int>& draw = {}) const;
  // Throws CoefficientNotIdentified when no listed group is eligible.
  BetaBarEstimate beta_bar(int k, const Eigen::VectorXd& gamma,
                           const std::vector<int>& draw = {}) const;
  // Gamma followed by every coefficient; NaN where a coefficient is not
  // identified in the draw.
  Eigen::VectorXd stacked(const std::vector<int>& draw = {}) const;

 private:
  void prepare();
  std::vector<int> all_or(const std::vector<int>& draw) const;

  RcDesign design_;
  Eigen::VectorXd weight_;
  RcOptions options_;
  std::vector<Eigen::MatrixXd> pi_;
  std::vector<Eigen::MatrixXd> pinv_;
  std::vector<std::vector<char>> member_;
  std::vector<Eigen::VectorXd> row_norm_;
  // Pi_g dY_g, cached for Gamma.
  std::vector<Eigen::VectorXd> pi_dy_;
};

Eigen::VectorXd estimate_gamma(const RcDesign& design);
BetaBarEstimate estimate_beta_bar(const RcDesign& design, const Eigen::VectorXd& gamma, int k,
                                  std::optional<double> trim_C = std::nullopt);

// Gamma hat and every identifiable coefficient; with a plan, bootstrap
// standard errors re-estimating Gamma and the coefficients jointly.
RCEstimate rc_full_report(const Panel& panel, const RcVariant& variant,
                          const RcOptions& options = {},
                          const std::optional<BootstrapPlan>& plan = std::nullopt);

nlohmann::json to_json(const RCEstimate& r);

}  // namespace hetdid
