#include "hetdid/cli.hpp"

#include "hetdid/avsq.hpp"
#include "hetdid/design.hpp"
#include "hetdid/dyn_tests.hpp"
#include "hetdid/errors.hpp"
#include "hetdid/inference.hpp"
#include "hetdid/panel.hpp"
#include "hetdid/rc_model.hpp"
#include "hetdid/simlab.hpp"
#include "hetdid/twfe.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hetdid::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
  std::string input;
  ColumnMap columns;
  std::string delimiter = ",";
  std::string weight;
  std::string out_dir = ".";
  int replications = 100;
  std::uint64_t seed = 1;
  double level = 0.95;
  bool percentile = false;
  bool allow_partial = false;
  int threads = 0;
  int min_group_count = 2;
};

struct EstimateArgs {
  int effects = 1;
  int placebos = 0;
  bool normalized = false;
  bool ace = false;
  std::string cost_file;
  std::string side = "all";
  bool same_switchers = false;
  bool paths = false;
  int path_min_count = 1;
};

struct DynArgs {
  std::string variant = "balanced";
  int max_horizon = 2;
};

struct TwfeArgs {
  int lags = 0;
  int leads = 0;
  bool unweighted = false;
};

struct RcArgs {
  int lags = -1;
  bool full_lags = false;
  int interactions = -1;
  double trim = 0.0;
};

struct SimArgs {
  SimConfig config;
  std::string design = "staggered";
  std::string model = "k_lag";
};

json number(double v) { return std::isfinite(v) ? json(v) : json(); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void add_data_options(CLI::App* app, Common& c) {
  app->add_option("-i,--input", c.input, "Long-format panel (CSV with header)")->required();
  app->add_option("--group", c.columns.group, "Group identifier column")->capture_default_str();
  app->add_option("--period", c.columns.period, "Period column")->capture_default_str();
  app->add_option("--outcome", c.columns.outcome, "Outcome column")->capture_default_str();
  app->add_option("--treatment", c.columns.treatment, "Treatment dose column")
      ->capture_default_str();
  app->add_option("--weight", c.weight, "Optional per-group weight column");
  app->add_option("--delimiter", c.delimiter, "Field delimiter (one character or 'tab')")
      ->capture_default_str();
  app->add_flag("--drop-incomplete", c.columns.drop_incomplete,
                "Drop groups with missing periods instead of failing");
  app->add_option("--min-group-count", c.min_group_count,
                  "Groups needed at a period-one dose before it can supply controls")
      ->capture_default_str();
}

void add_output_option(CLI::App* app, Common& c) {
  app->add_option("-o,--out", c.out_dir, "Output directory")->capture_default_str();
}

void add_bootstrap_options(CLI::App* app, Common& c) {
  app->add_option("--bootstrap", c.replications, "Bootstrap replications (0 disables)")
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--level", c.level, "Confidence level")->capture_default_str();
  app->add_flag("--percentile", c.percentile, "Percentile instead of normal intervals");
  app->add_flag("--allow-partial", c.allow_partial,
                "Report unstable components with missing standard errors instead of failing");
  app->add_option("--threads", c.threads, "Worker threads (default: HETDID_THREADS or all cores)");
}

BootstrapPlan make_plan(const Common& c) {
  BootstrapPlan p;
  p.replications = c.replications;
  p.seed = c.seed;
  p.level = c.level;
  p.percentile = c.percentile;
  p.allow_partial = c.allow_partial;
  p.threads = c.threads;
  return p;
}

json bootstrap_config(const Common& c) {
  return {{"replications", c.replications},
          {"seed", c.seed},
          {"level", c.level},
          {"percentile", c.percentile},
          {"allow_partial", c.allow_partial}};
}

json data_config(const Common& c) {
  return {{"input", c.input},
          {"columns",
           {{"group", c.columns.group},
            {"period", c.columns.period},
            {"outcome", c.columns.outcome},
            {"treatment", c.columns.treatment},
            {"weight", c.weight.empty() ? json() : json(c.weight)},
            {"delimiter", c.delimiter}}},
          {"drop_incomplete", c.columns.drop_incomplete},
          {"min_group_count", c.min_group_count}};
}

struct Loaded {
  Panel panel;
  LoadReport report;
};

Loaded load(Common& c) {
  if (c.delimiter == "tab" || c.delimiter == "\\t") c.columns.delimiter = '\t';
  else if (c.delimiter.size() == 1) c.columns.delimiter = c.delimiter[0];
  else throw ConfigError("delimiter must be a single character or 'tab'");
  if (!c.weight.empty()) c.columns.weight = c.weight;
  LoadReport report;
  Panel p = load_panel_file(c.input, c.columns, &report);
  return {std::move(p), std::move(report)};
}

json data_block(const Loaded& l) {
  return {{"groups", l.panel.num_groups()},
          {"periods", l.panel.num_periods()},
          {"first_period", l.panel.period_labels().front()},
          {"last_period", l.panel.period_labels().back()},
          {"rows", l.report.rows},
          {"dropped_groups", l.report.dropped_groups},
          {"weighted", l.panel.has_weights()}};
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

void write_results(const fs::path& dir, const std::string& subcommand, json config, json data,
                   json results) {
  config["subcommand"] = subcommand;
  json doc;
  doc["config"] = std::move(config);
  doc["timestamp"] = timestamp();
  if (!data.is_null()) doc["data"] = std::move(data);
  doc["results"] = std::move(results);
  write_text(dir / "results.json", doc.dump(2) + "\n");
}

// Bootstraps the finite components of a point estimate; components that are
// undefined on the full sample get no standard error.
struct MaskedBootstrap {
  Eigen::VectorXd se, ci_low, ci_high;
  // NaN rows and columns for undefined components.
  Eigen::MatrixXd covariance;
  json summary;
};

MaskedBootstrap masked_bootstrap(const BootstrapPlan& plan, int G, const Eigen::VectorXd& point,
                                 const std::function<Eigen::VectorXd(const Panel&)>& stat,
                                 const Panel& panel) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    if (std::isfinite(point(i))) idx.push_back(i);
  }
  MaskedBootstrap out;
  out.se = out.ci_low = out.ci_high = Eigen::VectorXd::Constant(point.size(), kNaN);
  out.covariance = Eigen::MatrixXd::Constant(point.size(), point.size(), kNaN);
  if (idx.empty()) return out;
  const auto m = static_cast<Eigen::Index>(idx.size());
  auto pick = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) r(i) = v(idx[i]);
    return r;
  };
  const BootstrapResult b = bootstrap(plan, G, pick(point), [&](const std::vector<int>& draw) {
    return pick(stat(panel.select_groups(draw)));
  });
  for (Eigen::Index i = 0; i < m; ++i) {
    out.se(idx[i]) = b.se(i);
    out.ci_low(idx[i]) = b.ci_low(i);
    out.ci_high(idx[i]) = b.ci_high(i);
    for (Eigen::Index j = 0; j < m; ++j) out.covariance(idx[i], idx[j]) = b.covariance(i, j);
  }
  int unstable = 0;
  for (char u : b.unstable) unstable += u;
  out.summary = {{"replications", b.replications},
                 {"failed_replications", b.failed_replications},
                 {"complete_replications", b.complete_replications},
                 {"unstable_components", unstable},
                 {"valid_per_component", b.valid}};
  return out;
}

std::vector<double> read_costs(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open cost file " + path);
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const std::string cell = line.substr(b, line.find_first_of(",; \t\r", b) - b);
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      if (!first) throw ParseError("cost file " + path + ": '" + cell + "' is not a number");
    }
    first = false;
  }
  if (out.empty()) throw ParseError("cost file " + path + " holds no costs");
  return out;
}

// ---------------------------------------------------------------- design-summary

int cmd_design_summary(Common& c, std::ostream& out) {
  const Loaded l = load(c);
  DesignOptions o;
  o.min_group_count = c.min_group_count;
  const DesignInfo info = analyze_design(l.panel, o);
  const DesignSummary s = design_summary(info);
  const fs::path dir = prepare_out(c.out_dir);
  json config = data_config(c);
  config["output_dir"] = c.out_dir;
  write_results(dir, "design-summary", config, data_block(l), to_json(s));

  std::ostringstream csv;
  csv << "table,value,count\n";
  for (const auto& [d, n] : s.d1_histogram) csv << "d1," << csv_number(d) << "," << n << "\n";
  for (const auto& [k, n] : s.switches_histogram) csv << "n_switches," << k << "," << n << "\n";
  write_text(dir / "design_histogram.csv", csv.str());

  out << "groups " << s.num_groups << ", periods " << s.num_periods << "\n"
      << "never switchers " << s.never_switchers << " (" << 100.0 * s.share_never_switchers
      << "%)\n"
      << "switchers " << s.switchers << ": " << 100.0 * s.share_switch_in << "% in, "
      << 100.0 * s.share_switch_out << "% out\n";
  for (const auto& w : s.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateLayout {
  int L = 0, P = 0;
  bool normalized = false, ace = false;
  Eigen::Index size() const { return L + P + (normalized ? L + P : 0) + (ace ? 1 : 0); }
  Eigen::Index effect(int ell) const { return ell - 1; }
  Eigen::Index placebo(int ell) const { return L + ell - 1; }
  Eigen::Index norm_effect(int ell) const { return L + P + ell - 1; }
  Eigen::Index norm_placebo(int ell) const { return 2 * L + P + ell - 1; }
  Eigen::Index ace_index() const { return size() - 1; }
};

struct EstimateOutput {
  std::vector<EventStudyResult> effects;
  std::vector<std::optional<EventStudyResult>> placebos;
  std::vector<std::string> notes;
  std::optional<AceResult> ace;
};

Eigen::VectorXd estimate_all(const Panel& panel, const DesignOptions& dopts,
                             const EstimateLayout& lay, const EstimateArgs& a,
                             const AceOptions& ace_opts, EstimateOutput* rows) {
  const DesignInfo info = analyze_design(panel, dopts);
  const EventStudy es(panel, info);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(lay.size(), kNaN);
  std::vector<int> common;
  if (a.same_switchers) common = es.switchers(lay.L);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(std::max(lay.L, lay.P)) + 1);
  for (int ell = 1; ell <= std::max(lay.L, lay.P); ++ell) {
    members[ell] = a.same_switchers && ell <= lay.L ? common : es.switchers(ell);
  }
  for (int ell = 1; ell <= lay.L; ++ell) {
    EventStudyResult r = es.effect(ell, members[ell]);
    if (r.defined) {
      v(lay.effect(ell)) = r.estimate;
      if (lay.normalized) {
        try {
          es.normalize(r);
          v(lay.norm_effect(ell)) = r.normalized;
        } catch (const NormalizationDegenerate& e) {
          if (rows) rows->notes.push_back("horizon " + std::to_string(ell) + ": " + e.what());
        }
      }
    } else if (rows) {
      rows->notes.push_back("horizon " + std::to_string(ell) + ": no eligible switcher");
    }
    if (rows) rows->effects.push_back(std::move(r));
  }
  for (int ell = 1; ell <= lay.P; ++ell) {
    try {
      EventStudyResult r = es.placebo(ell, members[ell]);
      v(lay.placebo(ell)) = r.estimate;
      if (lay.normalized) v(lay.norm_placebo(ell)) = r.normalized;
      if (rows) rows->placebos.push_back(std::move(r));
    } catch (const PlaceboUndefined& e) {
      if (rows) {
        rows->placebos.push_back(std::nullopt);
        rows->notes.push_back("placebo " + std::to_string(ell) + ": " + e.what());
      }
    }
  }
  if (lay.ace) {
    try {
      const AceResult r = es.ace(ace_opts);
      v(lay.ace_index()) = r.ace;
      if (rows) rows->ace = r;
    } catch (const AceDegenerate& e) {
      if (rows) rows->notes.push_back(std::string("ace: ") + e.what());
    } catch (const MixedSignDesign&) {
      if (rows) throw;
    }
  }
  return v;
}

// Wald test over the components first..first+n-1 whose estimate and
// covariance are finite; null when fewer than two (one for zero) remain or the
// contrast is degenerate.
json joint_test(const Eigen::VectorXd& point, const Eigen::MatrixXd& cov, int n,
                Eigen::Index first, bool zero) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = first; i < first + n; ++i) {
    if (std::isfinite(point(i)) && std::isfinite(cov(i, i))) idx.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(idx.size());
  if (m < (zero ? 1 : 2)) return json();
  Eigen::VectorXd v(m);
  Eigen::MatrixXd V(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    v(i) = point(idx[i]);
    for (Eigen::Index j = 0; j < m; ++j) V(i, j) = cov(idx[i], idx[j]);
  }
  if (!V.allFinite()) return json();
  try {
    json j = to_json(zero ? wald_zero(v, V) : wald_equal(v, V));
    j["components"] = m;
    return j;
  } catch (const DegenerateTest&) {
    return json();
  }
}

int cmd_estimate(Common& c, const EstimateArgs& a, std::ostream& out) {
  const Loaded l = load(c);
  const Panel& panel = l.panel;
  const int T = panel.num_periods();
  if (a.effects < 1 || a.effects > T - 1) {
    throw ConfigError("--effects must lie in 1.." + std::to_string(T - 1));
  }
  if (a.placebos < 0 || a.placebos > T - 1) {
    throw ConfigError("--placebos must lie in 0.." + std::to_string(T - 1));
  }
  if (a.path_min_count < 1) throw ConfigError("--path-min-count must be positive");
  DesignOptions dopts;
  dopts.min_group_count = c.min_group_count;
  AceOptions ace_opts;
  if (a.side == "in") ace_opts.side = AceOptions::Side::switchers_in;
  else if (a.side == "out") ace_opts.side = AceOptions::Side::switchers_out;
  else if (a.side != "all") throw ConfigError("--side must be all, in or out");
  if (!a.cost_file.empty()) ace_opts.costs = read_costs(a.cost_file);

  EstimateLayout lay{a.effects, a.placebos, a.normalized, a.ace || !a.cost_file.empty()};
  EstimateOutput rows;
  const Eigen::VectorXd point = estimate_all(panel, dopts, lay, a, ace_opts, &rows);

  MaskedBootstrap boot;
  boot.se = boot.ci_low = boot.ci_high = Eigen::VectorXd::Constant(lay.size(), kNaN);
  boot.covariance = Eigen::MatrixXd::Constant(lay.size(), lay.size(), kNaN);
  if (c.replications > 0) {
    boot = masked_bootstrap(
        make_plan(c), panel.num_groups(), point,
        [&](const Panel& p) { return estimate_all(p, dopts, lay, a, ace_opts, nullptr); }, panel);
  }
  auto fill = [&](EventStudyResult& r, Eigen::Index i, std::optional<Eigen::Index> ni) {
    r.se = boot.se(i);
    r.ci_low = boot.ci_low(i);
    r.ci_high = boot.ci_high(i);
    r.pvalue = normal_pvalue(r.estimate, r.se);
    if (ni) {
      r.normalized_se = boot.se(*ni);
      r.normalized_ci_low = boot.ci_low(*ni);
      r.normalized_ci_high = boot.ci_high(*ni);
    }
  };
  for (int ell = 1; ell <= lay.L; ++ell) {
    fill(rows.effects[ell - 1], lay.effect(ell),
         lay.normalized ? std::optional<Eigen::Index>(lay.norm_effect(ell)) : std::nullopt);
  }
  for (int ell = 1; ell <= lay.P; ++ell) {
    if (rows.placebos[ell - 1]) {
      fill(*rows.placebos[ell - 1], lay.placebo(ell),
           lay.normalized ? std::optional<Eigen::Index>(lay.norm_placebo(ell)) : std::nullopt);
    }
  }

  json res;
  json effects = json::array(), placebos = json::array();
  for (const auto& r : rows.effects) effects.push_back(to_json(r));
  for (int ell = 1; ell <= lay.P; ++ell) {
    const auto& r = rows.placebos[ell - 1];
    placebos.push_back(r ? to_json(*r) : json{{"horizon", -ell}, {"defined", false}});
  }
  res["effects"] = effects;
  res["placebos"] = placebos;
  if (lay.ace) {
    if (rows.ace) {
      json aj = to_json(*rows.ace);
      aj["se"] = number(boot.se(lay.ace_index()));
      aj["ci_low"] = number(boot.ci_low(lay.ace_index()));
      aj["ci_high"] = number(boot.ci_high(lay.ace_index()));
      res["ace"] = aj;
    } else {
      res["ace"] = json();
    }
  }
  res["effects_equal_test"] = joint_test(point, boot.covariance, lay.L, lay.effect(1), false);
  res["placebos_zero_test"] =
      lay.P ? joint_test(point, boot.covariance, lay.P, lay.placebo(1), true) : json();
  res["notes"] = rows.notes;
  res["bootstrap"] = boot.summary;
  res["same_switchers"] = a.same_switchers;

  const fs::path dir = prepare_out(c.out_dir);
  std::ostringstream csv;
  csv << "horizon,estimate,se,ci_low,ci_high,pvalue,n_switchers,dose_delta,normalized,"
         "normalized_se,normalized_ci_low,normalized_ci_high\n";
  auto csv_row = [&](const EventStudyResult& r) {
    csv << r.horizon << "," << (r.defined ? csv_number(r.estimate) : "") << ","
        << csv_number(r.se) << "," << csv_number(r.ci_low) << "," << csv_number(r.ci_high) << ","
        << csv_number(r.pvalue) << "," << r.n_switchers << "," << csv_number(r.dose_delta) << ","
        << csv_number(r.normalized) << "," << csv_number(r.normalized_se) << ","
        << csv_number(r.normalized_ci_low) << "," << csv_number(r.normalized_ci_high) << "\n";
  };
  for (int ell = lay.P; ell >= 1; --ell) {
    if (rows.placebos[ell - 1]) csv_row(*rows.placebos[ell - 1]);
  }
  for (const auto& r : rows.effects) csv_row(r);
  write_text(dir / "eventstudy.csv", csv.str());

  if (a.paths) {
    const DesignInfo info = analyze_design(panel, dopts);
    const EventStudy es(panel, info);
    std::ostringstream pcsv;
    pcsv << "horizon,path,count,share,estimate\n";
    json pj = json::array();
    for (int ell = 1; ell <= lay.L; ++ell) {
      for (const PathEffect& pe : es.path_effects(ell, a.path_min_count)) {
        std::string sig;
        for (double d : pe.path.signature) sig += (sig.empty() ? "" : " ") + csv_number(d);
        const double est = pe.result && pe.result->defined ? pe.result->estimate : kNaN;
        pcsv << ell << "," << sig << "," << pe.path.count << "," << csv_number(pe.path.share)
             << "," << csv_number(est) << "\n";
        pj.push_back({{"horizon", ell},
                      {"path", pe.path.signature},
                      {"count", pe.path.count},
                      {"share", pe.path.share},
                      {"estimate", number(est)}});
      }
    }
    write_text(dir / "paths.csv", pcsv.str());
    res["path_effects"] = pj;
  }

  json config = data_config(c);
  config["params"] = {{"effects", a.effects},
                      {"placebos", a.placebos},
                      {"normalized", a.normalized},
                      {"ace", lay.ace},
                      {"cost_file", a.cost_file.empty() ? json() : json(a.cost_file)},
                      {"side", a.side},
                      {"same_switchers", a.same_switchers},
                      {"paths", a.paths},
                      {"path_min_count", a.path_min_count}};
  config["bootstrap"] = bootstrap_config(c);
  config["output_dir"] = c.out_dir;
  config["seed"] = c.seed;
  write_results(dir, "estimate", config, data_block(l), res);

  out << "horizon  estimate      se       n\n";
  for (int ell = lay.P; ell >= 1; --ell) {
    if (!rows.placebos[ell - 1]) continue;
    const auto& r = *rows.placebos[ell - 1];
    out << r.horizon << "  " << r.estimate << "  " << r.se << "  " << r.n_switchers << "\n";
  }
  for (const auto& r : rows.effects) {
    out << r.horizon << "  " << r.estimate << "  " << r.se << "  " << r.n_switchers << "\n";
  }
  if (rows.ace) out << "ace " << rows.ace->ace << "\n";
  for (const auto& n : rows.notes) out << "note: " << n << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- test-dynamics

int cmd_test_dynamics(Common& c, const DynArgs& a, std::ostream& out) {
  const Loaded l = load(c);
  DesignOptions dopts;
  dopts.min_group_count = c.min_group_count;
  const DesignInfo info = analyze_design(l.panel, dopts);
  if (c.replications < 2) throw ConfigError("the dynamics tests need --bootstrap >= 2");
  DynTestResult r;
  if (a.variant == "reversion") {
    r = test_reversion_grid(a.max_horizon, l.panel, info, make_plan(c), dopts);
  } else if (a.variant == "balanced") {
    r = test_balanced(a.max_horizon, l.panel, info, make_plan(c), dopts);
  } else {
    throw ConfigError("--variant must be reversion or balanced");
  }
  const fs::path dir = prepare_out(c.out_dir);
  json config = data_config(c);
  config["params"] = {{"variant", a.variant}, {"max_horizon", a.max_horizon}};
  config["bootstrap"] = bootstrap_config(c);
  config["output_dir"] = c.out_dir;
  config["seed"] = c.seed;
  write_results(dir, "test-dynamics", config, data_block(l), to_json(r));
  out << a.variant << " test\nhorizon  estimate      se      p      n\n";
  for (std::size_t j = 0; j < r.horizons.size(); ++j) {
    out << r.horizons[j] << "  " << r.estimates[j] << "  " << r.ses[j] << "  " << r.pvalues[j]
        << "  " << r.n_obs[j] << "\n";
  }
  if (r.joint_pvalue) out << "joint p-value " << *r.joint_pvalue << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- twfe

int cmd_twfe(Common& c, const TwfeArgs& a, std::ostream& out) {
  const Loaded l = load(c);
  TwfeOptions o;
  o.K = a.lags;
  o.leads = a.leads;
  o.use_weights = !a.unweighted;
  const WeightDecomposition d = decompose_weights(l.panel, o);
  json res = to_json(d);
  Eigen::VectorXd se = Eigen::VectorXd::Constant(d.num_regressors(), kNaN);
  if (c.replications > 0) {
    const BootstrapResult b = bootstrap(make_plan(c), l.panel, [&](const Panel& p) {
      return fit_distributed_lag(p, o).beta_hat;
    });
    se = b.se;
    res["bootstrap"] = {{"replications", b.replications},
                        {"failed_replications", b.failed_replications}};
  }
  json coefs = json::array();
  for (int j = 0; j < d.num_regressors(); ++j) {
    coefs.push_back({{"offset", d.offsets[j]}, {"estimate", d.beta_hat(j)}, {"se", number(se(j))}});
  }
  res["coefficients"] = coefs;

  const fs::path dir = prepare_out(c.out_dir);
  std::ostringstream csv;
  csv << "group,k,k_prime,weight\n";
  for (int g = 0; g < l.panel.num_groups(); ++g) {
    for (int j = 0; j < d.num_regressors(); ++j) {
      for (int jp = 0; jp < d.num_regressors(); ++jp) {
        csv << l.panel.groups()[g] << "," << d.offsets[j] << "," << d.offsets[jp] << ","
            << csv_number(d.W[j][jp](g)) << "\n";
      }
    }
  }
  write_text(dir / "weights.csv", csv.str());
  json config = data_config(c);
  config["params"] = {{"lags", a.lags}, {"leads", a.leads}, {"unweighted", a.unweighted}};
  config["bootstrap"] = bootstrap_config(c);
  config["output_dir"] = c.out_dir;
  config["seed"] = c.seed;
  write_results(dir, "twfe", config, data_block(l), res);

  out << "offset  beta_hat      se\n";
  for (int j = 0; j < d.num_regressors(); ++j) {
    out << d.offsets[j] << "  " << d.beta_hat(j) << "  " << se(j) << "\n";
  }
  for (const auto& s : d.diagnostics) {
    out << "W[" << s.k << "," << s.k_prime << "] mean " << s.mean << " sd " << s.sd
        << " negative " << 100.0 * s.negative_share << "%\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- rc

int cmd_rc(Common& c, const RcArgs& a, std::ostream& out, std::ostream& err) {
  const int chosen = (a.lags >= 0) + a.full_lags + (a.interactions >= 0);
  if (chosen > 1) throw ConfigError("choose one of --lags, --full-lags, --interactions");
  RcVariant v = RcVariant::k_lag(a.lags >= 0 ? a.lags : 0);
  if (a.full_lags) v = RcVariant::full_lag();
  if (a.interactions >= 0) v = RcVariant::interaction(a.interactions);
  RcOptions o;
  if (a.trim > 0.0) o.trim_C = a.trim;
  else if (a.trim < 0.0) throw ConfigError("--trim must be positive");
  const Loaded l = load(c);
  std::optional<BootstrapPlan> plan;
  if (c.replications > 0) plan = make_plan(c);
  const RCEstimate r = rc_full_report(l.panel, v, o, plan);
  const fs::path dir = prepare_out(c.out_dir);
  json config = data_config(c);
  config["params"] = {{"variant", v.name()}, {"trim", o.trim_C ? json(*o.trim_C) : json()}};
  config["bootstrap"] = bootstrap_config(c);
  config["output_dir"] = c.out_dir;
  config["seed"] = c.seed;
  write_results(dir, "rc", config, data_block(l), to_json(r));
  out << "coefficient  estimate      se   n_obs\n";
  for (const auto& b : r.coefficients) {
    out << b.name << "  " << (b.identified ? std::to_string(b.estimate) : "not identified")
        << "  " << b.se << "  " << b.n_obs() << "\n";
  }
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(Common& c, SimArgs& a, std::ostream& out) {
  a.config.design = design_gen_from_string(a.design);
  a.config.model = outcome_model_from_string(a.model);
  a.config.seed = c.seed;
  const OraclePanel o = generate(a.config);
  const fs::path dir = prepare_out(c.out_dir);
  std::ostringstream csv;
  write_panel_csv(o.panel, csv);
  write_text(dir / "panel.csv", csv.str());
  write_text(dir / "oracle.json", oracle_sidecar(o).dump(2) + "\n");
  json config;
  config["params"] = to_json(a.config);
  config["output_dir"] = c.out_dir;
  config["seed"] = c.seed;
  const DesignSummary s = design_summary(analyze_design(o.panel));
  write_results(dir, "simulate", config, json(),
                {{"panel", (dir / "panel.csv").string()},
                 {"oracle", (dir / "oracle.json").string()},
                 {"design", to_json(s)}});
  out << "wrote " << (dir / "panel.csv").string() << " (" << o.panel.num_groups() << " groups, "
      << o.panel.num_periods() << " periods)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heterogeneous-effects difference-in-differences toolkit", "hetdid"};
  app.require_subcommand(1);
  Common common;
  EstimateArgs est;
  DynArgs dyn;
  TwfeArgs tw;
  RcArgs rc;
  SimArgs sim;

  auto* ds = app.add_subcommand("design-summary", "Describe treatment paths and control availability");
  add_data_options(ds, common);
  add_output_option(ds, common);

  auto* es = app.add_subcommand("estimate", "Event-study effects, placebos and ACE");
  add_data_options(es, common);
  add_output_option(es, common);
  add_bootstrap_options(es, common);
  es->add_option("--effects", est.effects, "Number of post-switch horizons")->capture_default_str();
  es->add_option("--placebos", est.placebos, "Number of placebo horizons")->capture_default_str();
  es->add_flag("--normalized", est.normalized, "Also report per-dose normalized effects");
  es->add_flag("--ace", est.ace, "Average cumulative effect per unit of treatment");
  es->add_option("--cost-file", est.cost_file,
                 "Per-horizon unit costs, one per line (one value applies to all horizons)");
  es->add_option("--side", est.side, "ACE switcher side: all, in or out")->capture_default_str();
  es->add_flag("--same-switchers", est.same_switchers,
               "Use the switchers eligible at the largest horizon for every horizon");
  es->add_flag("--paths", est.paths, "Write per-path effects to paths.csv");
  es->add_option("--path-min-count", est.path_min_count,
                 "Switchers needed before a path gets its own estimate")
      ->capture_default_str();

  auto* td = app.add_subcommand("test-dynamics", "Tests of the no-dynamic-effects hypothesis");
  add_data_options(td, common);
  add_output_option(td, common);
  add_bootstrap_options(td, common);
  td->add_option("--variant", dyn.variant, "reversion or balanced")->capture_default_str();
  td->add_option("--max-horizon", dyn.max_horizon, "Largest horizon tested")->capture_default_str();

  auto* tf = app.add_subcommand("twfe", "Distributed-lag TWFE regression and weight decomposition");
  add_data_options(tf, common);
  add_output_option(tf, common);
  add_bootstrap_options(tf, common);
  tf->add_option("--lags", tw.lags, "Number of lags K")->capture_default_str();
  tf->add_option("--leads", tw.leads, "Number of leads")->capture_default_str();
  tf->add_flag("--unweighted", tw.unweighted, "Ignore group weights");

  auto* rcc = app.add_subcommand("rc", "Random-coefficients distributed-lag estimator");
  add_data_options(rcc, common);
  add_output_option(rcc, common);
  add_bootstrap_options(rcc, common);
  rcc->add_option("--lags", rc.lags, "K-lag model");
  rcc->add_flag("--full-lags", rc.full_lags, "Model with every lag");
  rcc->add_option("--interactions", rc.interactions, "K-lag model with pairwise lag interactions");
  rcc->add_option("--trim", rc.trim, "Trimming constant C");

  auto* sm = app.add_subcommand("simulate", "Simulate a panel with known potential outcomes");
  add_output_option(sm, common);
  sm->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  sm->add_option("--groups,-G", sim.config.G, "Number of groups")->capture_default_str();
  sm->add_option("--periods,-T", sim.config.T, "Number of periods")->capture_default_str();
  sm->add_option("--design", sim.design,
                 "staggered, one_exit, dose_staggered, baseline_varying, markov_binary, "
                 "no_stayers_continuous")
      ->capture_default_str();
  sm->add_option("--model", sim.model, "k_lag, full_lag or interaction")->capture_default_str();
  sm->add_option("--lags,-K", sim.config.K, "Lags in the outcome model")->capture_default_str();
  sm->add_option("--beta-mean", sim.config.beta_mean, "Mean coefficient(s)")->expected(1, -1);
  sm->add_option("--beta-sd", sim.config.beta_sd, "Coefficient sd(s)")->expected(1, -1);
  sm->add_option("--beta-corr-f", sim.config.beta_corr_F,
                 "Loading of coefficients on the standardized first-switch date")
      ->expected(1, -1);
  sm->add_option("--beta-corr-dose", sim.config.beta_corr_dose,
                 "Loading of coefficients on the standardized mean dose")
      ->expected(1, -1);
  sm->add_option("--noise-sd", sim.config.noise_sd, "Error sd")->capture_default_str();
  sm->add_option("--alpha-sd", sim.config.alpha_sd, "Group effect sd")->capture_default_str();
  sm->add_option("--never-share", sim.config.never_share, "Share of never switchers")
      ->capture_default_str();
  sm->add_option("--dose-levels", sim.config.dose_levels, "Dose levels")->capture_default_str();
  sm->add_option("--switch-prob", sim.config.switch_prob, "Per-period flip probability")
      ->capture_default_str();
  sm->add_flag("--weights", sim.config.weights, "Draw group weights");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*ds) return cmd_design_summary(common, out);
    if (*es) return cmd_estimate(common, est, out);
    if (*td) return cmd_test_dynamics(common, dyn, out);
    if (*tf) return cmd_twfe(common, tw, out);
    if (*rcc) return cmd_rc(common, rc, out, err);
    if (*sm) return cmd_simulate(common, sim, out);
  } catch (const UnbalancedPanel& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    std::size_t shown = 0;
    for (const auto& g : e.groups()) {
      if (shown++ == 20) {
        err << "  ... and " << e.groups().size() - 20 << " more\n";
        break;
      }
      err << "  incomplete group: " << g << "\n";
    }
    err << "rerun with --drop-incomplete to drop these groups\n";
    return kExitError;
  } catch (const DesignNotIdentified& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    for (const auto& d : e.directions()) {
      err << "  deficient direction:";
      for (double x : d) err << " " << x;
      err << "\n";
    }
    return kExitError;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::TestInfeasible ? kExitInfeasible : kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace hetdid::cli
