#include "hetdid/simlab.hpp"

#include "hetdid/avsq.hpp"
#include "hetdid/errors.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>

namespace hetdid {

namespace {

constexpr std::pair<DesignGen, const char*> kDesignNames[] = {
    {DesignGen::staggered, "staggered"},
    {DesignGen::one_exit, "one_exit"},
    {DesignGen::dose_staggered, "dose_staggered"},
    {DesignGen::baseline_varying, "baseline_varying"},
    {DesignGen::markov_binary, "markov_binary"},
    {DesignGen::no_stayers_continuous, "no_stayers_continuous"},
    {DesignGen::fixed_paths, "fixed_paths"},
};

constexpr std::pair<OutcomeModel, const char*> kModelNames[] = {
    {OutcomeModel::k_lag, "k_lag"},
    {OutcomeModel::full_lag, "full_lag"},
    {OutcomeModel::interaction, "interaction"},
};

int max_lag(const SimConfig& c) { return c.model == OutcomeModel::full_lag ? c.T - 2 : c.K; }

double broadcast(const std::vector<double>& v, int j) {
  return v.size() == 1 ? v[0] : v[static_cast<std::size_t>(j)];
}

void check_config(const SimConfig& c) {
  if (c.G < 2 || c.T < 2) throw ConfigError("simulation needs G >= 2 and T >= 2");
  if (c.model != OutcomeModel::full_lag && (c.K < 0 || c.K >= c.T - 1)) {
    throw ConfigError("lag count K must satisfy 0 <= K < T - 1");
  }
  const int P = num_coefficients(c);
  for (const auto* v : {&c.beta_mean, &c.beta_sd, &c.beta_corr_F, &c.beta_corr_dose}) {
    if (v->size() != 1 && static_cast<int>(v->size()) != P) {
      throw ConfigError("coefficient settings need 1 or " + std::to_string(P) + " values");
    }
  }
  if (!c.gamma.empty() && static_cast<int>(c.gamma.size()) != c.T) {
    throw ConfigError("gamma needs one value per period");
  }
  if (c.never_share < 0.0 || c.never_share > 1.0) throw ConfigError("never_share must lie in [0,1]");
  if (c.switch_prob < 0.0 || c.switch_prob > 1.0) throw ConfigError("switch_prob must lie in [0,1]");
  if (c.dose_levels < 1) throw ConfigError("dose_levels must be positive");
  if (c.design == DesignGen::baseline_varying && c.dose_levels < 2) {
    throw ConfigError("baseline_varying needs at least 2 dose levels");
  }
  if (c.design == DesignGen::fixed_paths) {
    if (c.support.empty()) throw ConfigError("fixed_paths needs a nonempty support");
    for (const auto& p : c.support) {
      if (static_cast<int>(p.size()) != c.T) throw ConfigError("support paths need T doses");
    }
  }
}

std::vector<double> draw_path(const SimConfig& c, std::mt19937_64& rng) {
  const int T = c.T;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto first_switch = [&] { return unif(rng) < c.never_share ? T + 1 : uniform_int(2, T); };
  std::vector<double> d(static_cast<std::size_t>(T), 0.0);
  switch (c.design) {
    case DesignGen::staggered: {
      const int F = first_switch();
      for (int t = F; t <= T; ++t) d[t - 1] = 1.0;
      break;
    }
    case DesignGen::one_exit: {
      const int F = first_switch();
      if (F <= T) {
        const int E = uniform_int(F, T);
        for (int t = F; t <= E; ++t) d[t - 1] = 1.0;
      }
      break;
    }
    case DesignGen::dose_staggered: {
      const int F = first_switch();
      const double I = uniform_int(1, c.dose_levels);
      for (int t = F; t <= T; ++t) d[t - 1] = I;
      break;
    }
    case DesignGen::baseline_varying: {
      const double d1 = uniform_int(0, c.dose_levels - 1);
      const int F = first_switch();
      double step = unif(rng) < 0.5 ? -1.0 : 1.0;
      if (d1 == 0.0) step = 1.0;
      if (d1 == c.dose_levels - 1) step = -1.0;
      for (int t = 1; t <= T; ++t) d[t - 1] = t >= F ? d1 + step : d1;
      break;
    }
    case DesignGen::markov_binary: {
      d[0] = unif(rng) < 0.5 ? 0.0 : 1.0;
      for (int t = 2; t <= T; ++t) {
        d[t - 1] = unif(rng) < c.switch_prob ? 1.0 - d[t - 2] : d[t - 2];
      }
      break;
    }
    case DesignGen::no_stayers_continuous: {
      d[0] = unif(rng);
      for (int t = 2; t <= T; ++t) d[t - 1] = d[0] + normal(rng);
      break;
    }
    case DesignGen::fixed_paths: {
      d = c.support[static_cast<std::size_t>(uniform_int(0, static_cast<int>(c.support.size()) - 1))];
      break;
    }
  }
  return d;
}

Eigen::VectorXd standardize(const Eigen::VectorXd& x) {
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / double(x.size()));
  if (!(sd > 0.0)) return Eigen::VectorXd::Zero(x.size());
  return (x.array() - mean) / sd;
}

}  // namespace

const char* to_string(DesignGen d) {
  for (const auto& [k, v] : kDesignNames) {
    if (k == d) return v;
  }
  return "";
}

const char* to_string(OutcomeModel m) {
  for (const auto& [k, v] : kModelNames) {
    if (k == m) return v;
  }
  return "";
}

DesignGen design_gen_from_string(const std::string& s) {
  for (const auto& [k, v] : kDesignNames) {
    if (s == v) return k;
  }
  throw ConfigError("unknown design generator '" + s + "'");
}

OutcomeModel outcome_model_from_string(const std::string& s) {
  for (const auto& [k, v] : kModelNames) {
    if (s == v) return k;
  }
  throw ConfigError("unknown outcome model '" + s + "'");
}

int num_coefficients(const SimConfig& c) {
  switch (c.model) {
    case OutcomeModel::k_lag: return c.K + 1;
    case OutcomeModel::full_lag: return c.T - 1;
    case OutcomeModel::interaction: return (c.K + 1) * (c.K + 2) / 2;
  }
  return 0;
}

double OraclePanel::potential_outcome(int g, int t, const std::vector<double>& path) const {
  if (t < 1 || t > config.T || static_cast<int>(path.size()) < t) {
    throw ConfigError("potential outcome needs a dose path through period t");
  }
  auto dose = [&](int s) { return path[static_cast<std::size_t>(s >= 1 ? s - 1 : 0)]; };
  double y = alpha(g) + gamma(t - 1) + noise(g, t - 1);
  const int L = max_lag(config);
  for (int k = 0; k <= L; ++k) y += beta(g, k) * dose(t - k);
  if (config.model == OutcomeModel::interaction) {
    int c = L + 1;
    for (int k = 0; k <= L; ++k) {
      for (int kp = k + 1; kp <= L; ++kp) y += beta(g, c++) * dose(t - k) * dose(t - kp);
    }
  }
  return y;
}

Eigen::MatrixXd OraclePanel::lag_betas() const { return beta.leftCols(max_lag(config) + 1); }

std::vector<double> OraclePanel::observed_path(int g) const {
  std::vector<double> p(static_cast<std::size_t>(config.T));
  for (int t = 1; t <= config.T; ++t) p[t - 1] = panel.d(g, t);
  return p;
}

OraclePanel generate(const SimConfig& config) {
  check_config(config);
  const int G = config.G;
  const int T = config.T;
  const int P = num_coefficients(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  PathMatrix D(G, T);
  Eigen::VectorXd F(G), mean_dose(G);
  for (int g = 0; g < G; ++g) {
    const std::vector<double> d = draw_path(config, rng);
    int f = T + 1;
    for (int t = 2; t <= T && f == T + 1; ++t) {
      if (d[t - 1] != d[0]) f = t;
    }
    F(g) = f;
    double s = 0.0;
    for (int t = 1; t <= T; ++t) {
      D(g, t - 1) = d[t - 1];
      s += d[t - 1];
    }
    mean_dose(g) = s / T;
  }
  const Eigen::VectorXd zF = standardize(F);
  const Eigen::VectorXd zD = standardize(mean_dose);

  OraclePanel o{config, Panel({"0", "1"}, {1, 2}, PathMatrix::Zero(2, 2), PathMatrix::Zero(2, 2)),
                Eigen::VectorXd(G), Eigen::VectorXd(T), Eigen::MatrixXd(G, P),
                Eigen::MatrixXd(G, T)};
  for (int g = 0; g < G; ++g) {
    for (int j = 0; j < P; ++j) {
      o.beta(g, j) = broadcast(config.beta_mean, j) + broadcast(config.beta_corr_F, j) * zF(g) +
                     broadcast(config.beta_corr_dose, j) * zD(g) +
                     broadcast(config.beta_sd, j) * normal(rng);
    }
  }
  if (config.gamma.empty()) {
    o.gamma(0) = 0.0;
    for (int t = 1; t < T; ++t) o.gamma(t) = o.gamma(t - 1) + normal(rng);
  } else {
    o.gamma = Eigen::Map<const Eigen::VectorXd>(config.gamma.data(), T);
  }
  for (int g = 0; g < G; ++g) o.alpha(g) = config.alpha_sd * normal(rng);
  for (int g = 0; g < G; ++g) {
    for (int t = 0; t < T; ++t) o.noise(g, t) = config.noise_sd * normal(rng);
  }
  std::optional<Eigen::VectorXd> w;
  if (config.weights) {
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    w = Eigen::VectorXd(G);
    for (int g = 0; g < G; ++g) (*w)(g) = unif(rng);
  }

  PathMatrix Y(G, T);
  std::vector<double> path(static_cast<std::size_t>(T));
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= T; ++t) path[t - 1] = D(g, t - 1);
    for (int t = 1; t <= T; ++t) Y(g, t - 1) = o.potential_outcome(g, t, path);
  }
  std::vector<std::string> ids;
  std::vector<long long> periods;
  for (int g = 0; g < G; ++g) ids.push_back(std::to_string(g + 1));
  for (int t = 1; t <= T; ++t) periods.push_back(t);
  o.panel = Panel(std::move(ids), std::move(periods), std::move(Y), std::move(D), std::move(w));
  return o;
}

double oracle_avsq(int ell, const OraclePanel& oracle, const DesignInfo& info) {
  const EventStudy es(oracle.panel, info);
  const std::vector<int> members = es.switchers(ell);
  if (members.empty()) throw Undefined("no switcher at horizon " + std::to_string(ell));
  double num = 0.0, den = 0.0;
  for (int g : members) {
    const int e = info.F[g] - 1 + ell;
    const std::vector<double> status_quo(static_cast<std::size_t>(e), info.d1[g]);
    const double w = oracle.panel.weight(g);
    num += w * info.S[g] * (oracle.panel.y(g, e) - oracle.potential_outcome(g, e, status_quo));
    den += w;
  }
  return num / den;
}

std::vector<SlopeOracle> oracle_slopes(int ell, const OraclePanel& oracle,
                                       const DesignInfo& info) {
  const EventStudy es(oracle.panel, info);
  const std::vector<int> members = es.switchers(ell);
  std::vector<SlopeOracle> out;
  if (members.empty()) return out;
  const double delta = es.dose_delta(ell, members);
  for (int g : members) {
    const int e = info.F[g] - 1 + ell;
    const double d1 = info.d1[g];
    const std::vector<double> actual = oracle.observed_path(g);
    SlopeOracle s;
    s.g = g;
    for (int k = 0; k < ell; ++k) {
      const int pos = e - k;
      std::vector<double> hi(static_cast<std::size_t>(e), d1);
      for (int t = 1; t <= pos; ++t) hi[t - 1] = actual[t - 1];
      std::vector<double> lo = hi;
      lo[pos - 1] = d1;
      const double change = actual[pos - 1] - d1;
      s.slope.push_back(change == 0.0 ? 0.0
                                      : (oracle.potential_outcome(g, e, hi) -
                                         oracle.potential_outcome(g, e, lo)) /
                                            change);
      s.omega.push_back(info.S[g] * change / delta);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double oracle_normalized(int ell, const OraclePanel& oracle, const DesignInfo& info) {
  const std::vector<SlopeOracle> slopes = oracle_slopes(ell, oracle, info);
  if (slopes.empty()) throw Undefined("no switcher at horizon " + std::to_string(ell));
  double num = 0.0, den = 0.0;
  for (const auto& s : slopes) {
    double v = 0.0;
    for (std::size_t k = 0; k < s.slope.size(); ++k) v += s.omega[k] * s.slope[k];
    const double w = oracle.panel.weight(s.g);
    num += w * v;
    den += w;
  }
  return num / den;
}

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json j;
  j["G"] = c.G;
  j["T"] = c.T;
  j["design"] = to_string(c.design);
  j["model"] = to_string(c.model);
  j["K"] = c.K;
  j["beta_mean"] = c.beta_mean;
  j["beta_sd"] = c.beta_sd;
  j["beta_corr_F"] = c.beta_corr_F;
  j["beta_corr_dose"] = c.beta_corr_dose;
  j["gamma"] = c.gamma;
  j["alpha_sd"] = c.alpha_sd;
  j["noise_sd"] = c.noise_sd;
  j["never_share"] = c.never_share;
  j["dose_levels"] = c.dose_levels;
  j["switch_prob"] = c.switch_prob;
  j["support"] = c.support;
  j["weights"] = c.weights;
  j["seed"] = c.seed;
  return j;
}

nlohmann::json oracle_sidecar(const OraclePanel& o) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) r[j] = m(i, j);
      a.push_back(r);
    }
    return a;
  };
  nlohmann::json j;
  j["config"] = to_json(o.config);
  j["groups"] = o.panel.groups();
  j["alpha"] = std::vector<double>(o.alpha.data(), o.alpha.data() + o.alpha.size());
  j["gamma"] = std::vector<double>(o.gamma.data(), o.gamma.data() + o.gamma.size());
  j["beta"] = rows(o.beta);
  j["noise"] = rows(o.noise);
  return j;
}

}  // namespace hetdid
