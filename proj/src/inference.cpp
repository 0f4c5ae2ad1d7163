#include "hetdid/inference.hpp"

#include "hetdid/errors.hpp"
#include "hetdid/linalg.hpp"
#include "hetdid/parallel.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace hetdid {

namespace {


std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Type-7 sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return kNaN;
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<int> bootstrap_draw(std::uint64_t seed, int replication, int num_groups) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(replication) + 1)));
  std::vector<int> draw(static_cast<std::size_t>(num_groups));
  const auto n = static_cast<unsigned __int128>(num_groups);
  for (int& g : draw) g = static_cast<int>((static_cast<unsigned __int128>(rng()) * n) >> 64);
  return draw;
}

BootstrapResult bootstrap(const BootstrapPlan& plan, int num_groups,
                          const Eigen::VectorXd& estimate, const IndexStatistic& statistic) {
  if (plan.replications < 2) throw ConfigError("bootstrap needs at least 2 replications");
  if (!(plan.level > 0.0 && plan.level < 1.0)) throw ConfigError("level must lie in (0,1)");
  const int B = plan.replications;
  const Eigen::Index m = estimate.size();

  BootstrapResult out;
  out.estimate = estimate;
  out.replications = B;
  out.draws = Eigen::MatrixXd::Constant(B, m, kNaN);
  std::vector<char> failed(static_cast<std::size_t>(B), 0);
  parallel_for(
      B,
      [&](int r) {
        const std::vector<int> draw = bootstrap_draw(plan.seed, r, num_groups);
        try {
          Eigen::VectorXd v = statistic(draw);
          if (v.size() != m) throw DimensionMismatch("statistic changed length");
          out.draws.row(r) = v.transpose();
        } catch (const DimensionMismatch&) {
          throw;
        } catch (const Error&) {
          failed[static_cast<std::size_t>(r)] = 1;
        }
      },
      plan.threads);
  out.failed_replications = static_cast<int>(std::count(failed.begin(), failed.end(), 1));

  out.se = Eigen::VectorXd::Constant(m, kNaN);
  out.ci_low = Eigen::VectorXd::Constant(m, kNaN);
  out.ci_high = Eigen::VectorXd::Constant(m, kNaN);
  out.valid.assign(static_cast<std::size_t>(m), 0);
  out.unstable.assign(static_cast<std::size_t>(m), 0);
  const double z = normal_quantile(0.5 + plan.level / 2.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    std::vector<double> vals;
    for (int r = 0; r < B; ++r) {
      if (std::isfinite(out.draws(r, j))) vals.push_back(out.draws(r, j));
    }
    out.valid[j] = static_cast<int>(vals.size());
    const double invalid_share = 1.0 - double(vals.size()) / B;
    if (invalid_share > plan.max_invalid_share || vals.size() < 2) {
      if (!plan.allow_partial) {
        throw UnstableStatistic("component " + std::to_string(j) + " undefined in " +
                                std::to_string(B - static_cast<int>(vals.size())) + " of " +
                                std::to_string(B) + " bootstrap replications");
      }
      out.unstable[j] = 1;
      continue;
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    out.se(j) = std::sqrt(ss / double(vals.size() - 1));
    if (plan.percentile) {
      std::sort(vals.begin(), vals.end());
      out.ci_low(j) = quantile_sorted(vals, 0.5 - plan.level / 2.0);
      out.ci_high(j) = quantile_sorted(vals, 0.5 + plan.level / 2.0);
    } else {
      out.ci_low(j) = estimate(j) - z * out.se(j);
      out.ci_high(j) = estimate(j) + z * out.se(j);
    }
  }

  std::vector<int> complete;
  for (int r = 0; r < B; ++r) {
    if (out.draws.row(r).allFinite()) complete.push_back(r);
  }
  out.complete_replications = static_cast<int>(complete.size());
  out.covariance = Eigen::MatrixXd::Constant(m, m, kNaN);
  if (complete.size() >= 2) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(complete.size()), m);
    for (std::size_t i = 0; i < complete.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = out.draws.row(complete[i]);
    }
    const Eigen::RowVectorXd mu = X.colwise().mean();
    X.rowwise() -= mu;
    out.covariance = X.transpose() * X / double(X.rows() - 1);
  }
  return out;
}

BootstrapResult bootstrap(const BootstrapPlan& plan, const Panel& panel,
                          const PanelStatistic& statistic) {
  const Eigen::VectorXd estimate = statistic(panel);
  return bootstrap(plan, panel.num_groups(), estimate,
                   [&](const std::vector<int>& draw) {
                     return statistic(panel.select_groups(draw));
                   });
}

namespace {

WaldResult wald_contrast(const Eigen::MatrixXd& C, const Eigen::VectorXd& estimates,
                         const Eigen::MatrixXd& covariance) {
  if (!covariance.allFinite()) throw DegenerateTest("covariance has undefined entries");
  const Eigen::VectorXd c = C * estimates;
  const Eigen::MatrixXd V = C * covariance * C.transpose();
  // Contrast directions with variance negligible next to the estimates'
  // own variances (round-off of exactly equal draws) are dropped.
  double scale = covariance.diagonal().cwiseAbs().maxCoeff();
  linalg::TruncatedSvd svd = linalg::truncated_svd(V);
  while (svd.rank > 0 && svd.sigma(svd.rank - 1) <= linalg::kRankTolerance * scale) {
    --svd.rank;
  }
  if (svd.rank == 0) throw DegenerateTest("contrast variance is zero");
  svd.U.conservativeResize(Eigen::NoChange, svd.rank);
  svd.sigma.conservativeResize(svd.rank);
  const Eigen::VectorXd u = svd.U.transpose() * c;
  WaldResult w;
  w.statistic = (u.array().square() / svd.sigma.array()).sum();
  w.df = svd.rank;
  boost::math::chi_squared chi(w.df);
  w.pvalue = w.statistic <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(chi, w.statistic));
  return w;
}

}  // namespace

WaldResult wald_equal(const Eigen::VectorXd& estimates, const Eigen::MatrixXd& covariance) {
  const Eigen::Index m = estimates.size();
  if (covariance.rows() != m || covariance.cols() != m) {
    throw DimensionMismatch("covariance must be square with one row per estimate");
  }
  if (m < 2) throw DegenerateTest("equality test needs at least two estimates");
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m - 1, m);
  for (Eigen::Index j = 1; j < m; ++j) {
    C(j - 1, 0) = -1.0;
    C(j - 1, j) = 1.0;
  }
  return wald_contrast(C, estimates, covariance);
}

WaldResult wald_zero(const Eigen::VectorXd& estimates, const Eigen::MatrixXd& covariance) {
  const Eigen::Index m = estimates.size();
  if (covariance.rows() != m || covariance.cols() != m) {
    throw DimensionMismatch("covariance must be square with one row per estimate");
  }
  if (m < 1) throw DegenerateTest("nothing to test");
  return wald_contrast(Eigen::MatrixXd::Identity(m, m), estimates, covariance);
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

double normal_pvalue(double estimate, double se) {
  if (!std::isfinite(estimate) || !std::isfinite(se) || se <= 0.0) return kNaN;
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(),
                                                         std::fabs(estimate / se)));
}

KsResult ks_uniform(std::vector<double> values) {
  KsResult out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, (double(i) + 1.0) / n - u, u - double(i) / n});
  }
  out.statistic = d;
  // Asymptotic Kolmogorov distribution with the Stephens small-sample factor.
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-12) break;
  }
  out.pvalue = std::clamp(2.0 * sum, 0.0, 1.0);
  if (lambda < 1e-3) out.pvalue = 1.0;
  return out;
}

nlohmann::json to_json(const WaldResult& w) {
  return {{"statistic", w.statistic}, {"df", w.df}, {"pvalue", w.pvalue}};
}

}  // namespace hetdid
