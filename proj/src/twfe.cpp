#include "hetdid/twfe.hpp"

#include "hetdid/errors.hpp"
#include "hetdid/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hetdid {

namespace {

// Alternating group / period demeaning of a G x R block under group weights w
// until the largest update falls below tol relative to the block's scale.
int demean_two_way(Eigen::MatrixXd& x, const Eigen::VectorXd& w, double tol, int max_sweeps) {
  const double wsum = w.sum();
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    const Eigen::VectorXd row_mean = x.rowwise().mean();
    x.colwise() -= row_mean;
    const Eigen::RowVectorXd col_mean = (w.transpose() * x) / wsum;
    x.rowwise() -= col_mean;
    const double change = std::max(row_mean.cwiseAbs().maxCoeff(), col_mean.cwiseAbs().maxCoeff());
    if (change <= tol * scale) return sweep;
  }
  throw Error(ErrorCode::ConfigError, "two-way demeaning did not converge");
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Fit {
  WeightDecomposition out;
  // n x J demeaned regressors, row g * R + r; sqrt-weighted copies not kept.
  Eigen::MatrixXd X;
  Eigen::MatrixXd A_inv;
  Eigen::VectorXd w;
};

Fit fit(const Panel& panel, const TwfeOptions& o) {
  if (!panel.balanced()) throw ConfigError("the TWFE regression requires a balanced panel");
  const int G = panel.num_groups();
  const int T = panel.num_periods();
  if (o.K < 0 || o.leads < 0) throw ConfigError("lag and lead counts must be nonnegative");
  if (o.K + o.leads >= T - 1) {
    throw ConfigError("K + leads must be below T - 1 (K=" + std::to_string(o.K) +
                      ", leads=" + std::to_string(o.leads) + ", T=" + std::to_string(T) + ")");
  }
  Fit f;
  WeightDecomposition& out = f.out;
  out.K = o.K;
  out.leads = o.leads;
  for (int k = 0; k <= o.K; ++k) out.offsets.push_back(k);
  for (int k = 1; k <= o.leads; ++k) out.offsets.push_back(-k);
  out.first_period = o.K + 1;
  out.last_period = T - o.leads;
  out.weighted = o.use_weights && panel.has_weights();
  const int R = out.last_period - out.first_period + 1;
  const int J = out.num_regressors();

  f.w = Eigen::VectorXd::Ones(G);
  if (out.weighted) f.w = *panel.weights();

  auto block = [&](int offset, bool outcome) {
    Eigen::MatrixXd x(G, R);
    for (int g = 0; g < G; ++g) {
      for (int r = 0; r < R; ++r) {
        const int t = out.first_period + r;
        x(g, r) = outcome ? panel.y(g, t) : panel.d(g, t - offset);
      }
    }
    return x;
  };
  const auto n = static_cast<Eigen::Index>(G) * R;
  f.X.resize(n, J);
  Eigen::VectorXd sw = f.w.cwiseSqrt();
  for (int j = 0; j < J; ++j) {
    Eigen::MatrixXd x = block(out.offsets[j], false);
    out.sweeps = std::max(out.sweeps, demean_two_way(x, f.w, o.demean_tol, o.max_sweeps));
    for (int g = 0; g < G; ++g) f.X.block(static_cast<Eigen::Index>(g) * R, j, R, 1) = x.row(g).transpose();
  }
  Eigen::MatrixXd y = block(0, true);
  out.sweeps = std::max(out.sweeps, demean_two_way(y, f.w, o.demean_tol, o.max_sweeps));

  Eigen::MatrixXd Xw(n, J);
  Eigen::VectorXd yw(n);
  for (int g = 0; g < G; ++g) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(g) * R;
    Xw.middleRows(r0, R) = sw(g) * f.X.middleRows(r0, R);
    yw.segment(r0, R) = sw(g) * y.row(g).transpose();
  }
  const linalg::TruncatedSvd svd = linalg::truncated_svd(Xw);
  if (svd.rank < J) {
    Eigen::VectorXd c = svd.null_space.col(0);
    const Eigen::Index lead = [&] {
      Eigen::Index i = 0;
      c.cwiseAbs().maxCoeff(&i);
      return i;
    }();
    if (c(lead) < 0) c = -c;
    std::string desc;
    for (int j = 0; j < J; ++j) {
      if (std::fabs(c(j)) < 1e-12) continue;
      if (!desc.empty()) desc += " + ";
      desc += std::to_string(c(j)) + "*D(t-" + std::to_string(out.offsets[j]) + ")";
    }
    throw RankDeficient("demeaned dose regressors are collinear: " + desc + " = 0",
                        std::vector<double>(c.data(), c.data() + c.size()));
  }
  f.A_inv = svd.V * svd.sigma.array().square().inverse().matrix().asDiagonal() * svd.V.transpose();
  out.beta_hat = f.A_inv * (Xw.transpose() * yw);
  return f;
}

}  // namespace

WeightDecomposition fit_distributed_lag(const Panel& panel, const TwfeOptions& options) {
  return fit(panel, options).out;
}

WeightDecomposition fit_distributed_lag(const Panel& panel, int K) {
  TwfeOptions o;
  o.K = K;
  return fit_distributed_lag(panel, o);
}

WeightDecomposition decompose_weights(const Panel& panel, const TwfeOptions& options) {
  Fit f = fit(panel, options);
  WeightDecomposition& out = f.out;
  const int G = panel.num_groups();
  const int R = out.last_period - out.first_period + 1;
  const int J = out.num_regressors();
  out.group_weight = f.w * (double(G) / f.w.sum());

  // eta^j is column j of X A^{-1}, rescaled so that its own-regressor
  // coefficient is one.
  const Eigen::MatrixXd H = f.X * f.A_inv;
  out.eta.assign(static_cast<std::size_t>(J), PathMatrix(G, R));
  for (int j = 0; j < J; ++j) {
    const double scale = 1.0 / f.A_inv(j, j);
    for (int g = 0; g < G; ++g) {
      for (int r = 0; r < R; ++r) {
        out.eta[j](g, r) = H(static_cast<Eigen::Index>(g) * R + r, j) * scale;
      }
    }
  }

  out.W.assign(static_cast<std::size_t>(J),
               std::vector<Eigen::VectorXd>(static_cast<std::size_t>(J), Eigen::VectorXd(G)));
  for (int j = 0; j < J; ++j) {
    for (int jp = 0; jp < J; ++jp) {
      for (int g = 0; g < G; ++g) {
        double s = 0.0;
        for (int r = 0; r < R; ++r) {
          s += out.eta[j](g, r) * panel.d(g, out.first_period + r - out.offsets[jp]);
        }
        out.W[j][jp](g) = s;
      }
    }
    const double den = out.group_weight.dot(out.W[j][j]) / G;
    for (int jp = 0; jp < J; ++jp) out.W[j][jp] /= den;
  }

  for (int j = 0; j < J; ++j) {
    for (int jp = 0; jp < J; ++jp) {
      const Eigen::VectorXd& v = out.W[j][jp];
      WeightSummary s;
      s.k = out.offsets[j];
      s.k_prime = out.offsets[jp];
      s.mean = out.group_weight.dot(v) / G;
      s.sd = G > 1 ? std::sqrt(out.group_weight.dot((v.array() - s.mean).square().matrix()) /
                               (G - 1))
                   : 0.0;
      std::vector<double> sorted(v.data(), v.data() + G);
      std::sort(sorted.begin(), sorted.end());
      s.min = sorted.front();
      s.max = sorted.back();
      s.q01 = quantile_sorted(sorted, 0.01);
      s.q25 = quantile_sorted(sorted, 0.25);
      s.q50 = quantile_sorted(sorted, 0.50);
      s.q75 = quantile_sorted(sorted, 0.75);
      s.q99 = quantile_sorted(sorted, 0.99);
      s.negative_share =
          double(std::count_if(sorted.begin(), sorted.end(), [](double x) { return x < 0.0; })) /
          G;
      out.diagnostics.push_back(s);
    }
  }
  return out;
}

WeightDecomposition decompose_weights(const Panel& panel, int K) {
  TwfeOptions o;
  o.K = K;
  return decompose_weights(panel, o);
}

Eigen::VectorXd reconstruct_beta_from_weights(const WeightDecomposition& decomp,
                                              const Eigen::MatrixXd& betas) {
  const int J = decomp.num_regressors();
  if (decomp.W.empty()) throw ConfigError("weights have not been computed");
  const Eigen::Index G = decomp.group_weight.size();
  if (betas.rows() != G || betas.cols() != J) {
    throw DimensionMismatch("betas must be " + std::to_string(G) + " x " + std::to_string(J));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(J);
  for (int j = 0; j < J; ++j) {
    for (int jp = 0; jp < J; ++jp) {
      out(j) += (decomp.group_weight.array() * decomp.W[j][jp].array() * betas.col(jp).array())
                    .sum();
    }
    out(j) /= static_cast<double>(G);
  }
  return out;
}

nlohmann::json to_json(const WeightDecomposition& d) {
  nlohmann::json j;
  j["K"] = d.K;
  j["leads"] = d.leads;
  j["offsets"] = d.offsets;
  j["first_period"] = d.first_period;
  j["last_period"] = d.last_period;
  j["weighted"] = d.weighted;
  j["beta_hat"] = std::vector<double>(d.beta_hat.data(), d.beta_hat.data() + d.beta_hat.size());
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& s : d.diagnostics) {
    diag.push_back({{"k", s.k},
                    {"k_prime", s.k_prime},
                    {"mean", s.mean},
                    {"sd", s.sd},
                    {"min", s.min},
                    {"max", s.max},
                    {"q01", s.q01},
                    {"q25", s.q25},
                    {"q50", s.q50},
                    {"q75", s.q75},
                    {"q99", s.q99},
                    {"negative_share", s.negative_share}});
  }
  j["diagnostics"] = diag;
  return j;
}

}  // namespace hetdid
