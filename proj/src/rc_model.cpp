#include "hetdid/rc_model.hpp"

#include "hetdid/errors.hpp"
#include "hetdid/linalg.hpp"
#include "hetdid/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hetdid {

namespace {

// Treatments with more distinct values than this are treated as continuous.
constexpr std::size_t kContinuousDistinctDoses = 20;

}  // namespace

std::string RcVariant::name() const {
  switch (kind) {
    case Kind::k_lag: return "k_lag(" + std::to_string(K) + ")";
    case Kind::full_lag: return "full_lag";
    case Kind::interaction: return "interaction(" + std::to_string(K) + ")";
  }
  return "";
}

RcDesign build_M(const Panel& panel, const RcVariant& variant) {
  if (!panel.balanced()) throw ConfigError("the random-coefficients model requires a balanced panel");
  const int G = panel.num_groups();
  const int T = panel.num_periods();
  RcDesign out;
  out.variant = variant;
  if (variant.kind == RcVariant::Kind::full_lag) {
    out.first_period = 2;
    for (int k = 0; k <= T - 2; ++k) out.columns.push_back("beta_" + std::to_string(k));
  } else {
    if (variant.K < 0 || T <= variant.K + 1) {
      throw ConfigError("need T > K + 1 (K=" + std::to_string(variant.K) +
                        ", T=" + std::to_string(T) + ")");
    }
    out.first_period = variant.K + 2;
    for (int k = 0; k <= variant.K; ++k) out.columns.push_back("beta_" + std::to_string(k));
    if (variant.kind == RcVariant::Kind::interaction) {
      for (int k = 0; k <= variant.K; ++k) {
        for (int kp = k + 1; kp <= variant.K; ++kp) {
          out.columns.push_back("beta_" + std::to_string(k) + "x" + std::to_string(kp));
        }
      }
    }
  }
  const int R = T - out.first_period + 1;
  const int P = out.cols();
  out.M.reserve(static_cast<std::size_t>(G));
  out.dY.reserve(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) {
    auto dd = [&](int t) { return t >= 2 ? panel.d(g, t) - panel.d(g, t - 1) : 0.0; };
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(R, P);
    Eigen::VectorXd dY(R);
    for (int r = 0; r < R; ++r) {
      const int t = out.first_period + r;
      dY(r) = panel.y(g, t) - panel.y(g, t - 1);
      if (variant.kind == RcVariant::Kind::full_lag) {
        for (int k = 0; k <= t - 2; ++k) M(r, k) = dd(t - k);
        continue;
      }
      int c = 0;
      for (int k = 0; k <= variant.K; ++k) M(r, c++) = dd(t - k);
      if (variant.kind == RcVariant::Kind::interaction) {
        for (int k = 0; k <= variant.K; ++k) {
          for (int kp = k + 1; kp <= variant.K; ++kp) {
            M(r, c++) = panel.d(g, t - k) * panel.d(g, t - kp) -
                        panel.d(g, t - 1 - k) * panel.d(g, t - 1 - kp);
          }
        }
      }
    }
    out.M.push_back(std::move(M));
    out.dY.push_back(std::move(dY));
  }
  return out;
}

RcModel::RcModel(const Panel& panel, const RcVariant& variant, const RcOptions& options)
    : RcModel(build_M(panel, variant),
              options.use_weights ? panel.weights() : std::optional<Eigen::VectorXd>{},
              options) {}

RcModel::RcModel(RcDesign design, std::optional<Eigen::VectorXd> weights,
                 const RcOptions& options)
    : design_(std::move(design)), options_(options) {
  const int G = num_groups();
  if (G == 0) throw ConfigError("no groups");
  if (options_.trim_C && !(*options_.trim_C > 0.0)) {
    throw ConfigError("trimming constant must be positive");
  }
  weight_ = weights ? *weights : Eigen::VectorXd::Ones(G);
  if (weight_.size() != G) throw DimensionMismatch("one weight per group expected");
  prepare();
}

void RcModel::prepare() {
  const int G = num_groups();
  const int R = design_.rows();
  const int P = design_.cols();
  pi_.resize(G);
  pinv_.resize(G);
  member_.assign(G, std::vector<char>(P, 0));
  row_norm_.resize(G);
  pi_dy_.resize(G);
  parallel_for(G, [&](int g) {
    const Eigen::MatrixXd& M = design_.M[g];
    const linalg::TruncatedSvd svd = linalg::truncated_svd(M, kRcRankTolerance);
    pi_[g] = svd.rank == R ? Eigen::MatrixXd::Zero(R, R) : linalg::complement_projector(svd, R);
    pinv_[g] = svd.rank > 0 ? linalg::pseudo_inverse(svd) : Eigen::MatrixXd::Zero(P, R);
    row_norm_[g] = pinv_[g].rowwise().norm();
    for (int k = 0; k < P; ++k) {
      // M' M'^+ e_k - e_k, evaluated as the product so that eligibility
      // certifies the computed identity e_k' M^+ M = e_k'.
      Eigen::RowVectorXd r = pinv_[g].row(k) * M;
      r(k) -= 1.0;
      member_[g][k] = r.norm() <= kMembershipTolerance;
    }
    pi_dy_[g] = pi_[g] * design_.dY[g];
  });
}

bool RcModel::eligible(int g, int k) const {
  if (!member_[g][k]) return false;
  return !options_.trim_C || row_norm_[g](k) <= *options_.trim_C;
}

std::vector<int> RcModel::all_or(const std::vector<int>& draw) const {
  if (!draw.empty()) return draw;
  std::vector<int> all(static_cast<std::size_t>(num_groups()));
  for (int g = 0; g < num_groups(); ++g) all[g] = g;
  return all;
}

Eigen::VectorXd RcModel::gamma(const std::vector<int>& draw) const {
  const int R = design_.rows();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(R, R);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(R);
  double wsum = 0.0;
  for (int g : all_or(draw)) {
    P.noalias() += weight_(g) * pi_[g];
    b.noalias() += weight_(g) * pi_dy_[g];
    wsum += weight_(g);
  }
  P /= wsum;
  b /= wsum;
  // Projectors have unit spectral norm at most, so the rank cut is absolute;
  // a mean of round-off-sized projectors must not pass as invertible.
  linalg::TruncatedSvd svd = linalg::truncated_svd(P, kRcRankTolerance);
  while (svd.rank > 0 && svd.sigma(svd.rank - 1) <= kRcRankTolerance) --svd.rank;
  if (svd.rank < R) {
    Eigen::JacobiSVD<Eigen::MatrixXd> full(P, Eigen::ComputeFullV);
    svd.null_space = full.matrixV().rightCols(R - svd.rank);
    std::vector<std::vector<double>> dirs;
    for (Eigen::Index c = 0; c < svd.null_space.cols(); ++c) {
      const Eigen::VectorXd v = svd.null_space.col(c);
      dirs.emplace_back(v.data(), v.data() + v.size());
    }
    throw DesignNotIdentified("the mean of Pi(M_g) is singular (rank " +
                                  std::to_string(svd.rank) + " of " + std::to_string(R) +
                                  "); common trends are not identified",
                              std::move(dirs));
  }
  return linalg::pseudo_inverse(svd) * b;
}

BetaBarEstimate RcModel::beta_bar(int k, const Eigen::VectorXd& gamma,
                                  const std::vector<int>& draw) const {
  if (k < 0 || k >= design_.cols()) throw ConfigError("coefficient index out of range");
  BetaBarEstimate out;
  out.k = k;
  out.name = design_.columns[k];
  double num = 0.0, den = 0.0;
  std::set<int> seen;
  for (int g : all_or(draw)) {
    if (!eligible(g, k)) continue;
    num += weight_(g) * pinv_[g].row(k).dot(design_.dY[g] - gamma);
    den += weight_(g);
    seen.insert(g);
  }
  if (seen.empty()) {
    throw CoefficientNotIdentified("no group has e_" + std::to_string(k) + " (" + out.name +
                                   ") in the row space of its design matrix" +
                                   (options_.trim_C ? " within the trimming bound" : ""));
  }
  out.identified = true;
  out.estimate = num / den;
  out.eligible.assign(seen.begin(), seen.end());
  return out;
}

Eigen::VectorXd RcModel::stacked(const std::vector<int>& draw) const {
  const int R = design_.rows();
  const int P = design_.cols();
  Eigen::VectorXd out(R + P);
  const Eigen::VectorXd g = gamma(draw);
  out.head(R) = g;
  for (int k = 0; k < P; ++k) {
    try {
      out(R + k) = beta_bar(k, g, draw).estimate;
    } catch (const CoefficientNotIdentified&) {
      out(R + k) = kNaN;
    }
  }
  return out;
}

Eigen::VectorXd estimate_gamma(const RcDesign& design) {
  return RcModel(design, std::nullopt).gamma();
}

BetaBarEstimate estimate_beta_bar(const RcDesign& design, const Eigen::VectorXd& gamma, int k,
                                  std::optional<double> trim_C) {
  RcOptions o;
  o.trim_C = trim_C;
  return RcModel(design, std::nullopt, o).beta_bar(k, gamma);
}

RCEstimate rc_full_report(const Panel& panel, const RcVariant& variant,
                          const RcOptions& options, const std::optional<BootstrapPlan>& plan) {
  const RcModel model(panel, variant, options);
  RCEstimate out;
  out.variant = variant;
  out.trim_C = options.trim_C;
  out.design = model.design();
  out.weighted = options.use_weights && panel.has_weights();
  out.gamma_hat = model.gamma();
  const int R = model.design().rows();
  const int P = model.design().cols();
  for (int k = 0; k < P; ++k) {
    try {
      out.coefficients.push_back(model.beta_bar(k, out.gamma_hat));
    } catch (const CoefficientNotIdentified&) {
      BetaBarEstimate b;
      b.k = k;
      b.name = model.design().columns[k];
      out.coefficients.push_back(b);
    }
  }

  std::set<double> doses(panel.treatment().data(),
                         panel.treatment().data() + panel.treatment().size());
  if (!options.trim_C && doses.size() > kContinuousDistinctDoses) {
    out.warnings.push_back("treatment takes " + std::to_string(doses.size()) +
                           " distinct values and no trimming constant is set; the "
                           "untrimmed estimator can have unbounded variance with "
                           "continuous doses");
  }

  if (plan) {
    std::vector<int> ids;
    for (int k = 0; k < P; ++k) {
      if (out.coefficients[k].identified) ids.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(R + ids.size());
    auto select = [&](const Eigen::VectorXd& full) {
      Eigen::VectorXd v(m);
      v.head(R) = full.head(R);
      for (std::size_t i = 0; i < ids.size(); ++i) v(R + static_cast<Eigen::Index>(i)) = full(R + ids[i]);
      return v;
    };
    const BootstrapResult boot =
        bootstrap(*plan, model.num_groups(), select(model.stacked()),
                  [&](const std::vector<int>& draw) { return select(model.stacked(draw)); });
    out.gamma_se = boot.se.head(R);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out.coefficients[ids[i]].se = boot.se(R + static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

nlohmann::json to_json(const RCEstimate& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  nlohmann::json j;
  j["variant"] = r.variant.name();
  j["trim_C"] = r.trim_C ? nlohmann::json(*r.trim_C) : nlohmann::json();
  j["first_period"] = r.design.first_period;
  j["weighted"] = r.weighted;
  nlohmann::json gamma = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.gamma_hat.size(); ++i) {
    gamma.push_back({{"period", r.design.first_period + static_cast<int>(i)},
                     {"estimate", r.gamma_hat(i)},
                     {"se", r.gamma_se.size() ? num(r.gamma_se(i)) : nlohmann::json()}});
  }
  j["gamma"] = gamma;
  nlohmann::json coefs = nlohmann::json::array();
  for (const auto& c : r.coefficients) {
    coefs.push_back({{"name", c.name},
                     {"k", c.k},
                     {"identified", c.identified},
                     {"estimate", num(c.estimate)},
                     {"se", num(c.se)},
                     {"n_obs", c.n_obs()}});
  }
  j["coefficients"] = coefs;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace hetdid
