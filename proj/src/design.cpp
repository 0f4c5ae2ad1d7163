#include "hetdid/design.hpp"

#include "hetdid/errors.hpp"

#include <algorithm>

namespace hetdid {

DesignInfo analyze_design(const Panel& panel, const DesignOptions& options) {
  if (options.min_group_count < 2) {
    throw ConfigError("min_group_count must be at least 2");
  }
  const int G = panel.num_groups();
  const int T = panel.num_periods();
  DesignInfo info;
  info.T = T;
  info.min_group_count = options.min_group_count;
  info.F.resize(G);
  info.S.resize(G);
  info.d1.resize(G);
  info.nc_until.resize(G);
  info.n_switches.resize(G);
  info.any_decrease.resize(G);
  info.last.resize(G);
  info.status_quo_until.resize(G);

  for (int g = 0; g < G; ++g) {
    const int last = panel.last_observed(g);
    const double d1 = panel.d(g, 1);
    int F = T + 1;
    int switches = 0;
    bool decrease = false;
    bool above = false, below = false;
    int nc = last;
    for (int t = 2; t <= last; ++t) {
      const double dt = panel.d(g, t);
      if (dt != panel.d(g, t - 1)) ++switches;
      decrease = decrease || dt < panel.d(g, t - 1);
      if (dt != d1 && F == T + 1) F = t;
      above = above || dt > d1;
      below = below || dt < d1;
      if (above && below && nc == last) nc = t - 1;
    }
    info.d1[g] = d1;
    info.F[g] = F;
    info.S[g] = F <= T ? (panel.d(g, F) > d1 ? 1 : -1) : 0;
    info.nc_until[g] = nc;
    info.n_switches[g] = switches;
    info.any_decrease[g] = decrease;
    info.last[g] = last;
    info.status_quo_until[g] = std::min(F - 1, last);
  }

  std::map<double, std::pair<int, std::set<int>>> by_dose;
  for (int g = 0; g < G; ++g) {
    auto& entry = by_dose[info.d1[g]];
    ++entry.first;
    entry.second.insert(info.F[g]);
    auto [it, fresh] = info.Tbar.emplace(info.d1[g], info.status_quo_until[g]);
    if (!fresh) it->second = std::max(it->second, info.status_quo_until[g]);
  }
  for (const auto& [dose, entry] : by_dose) {
    if (entry.first >= options.min_group_count && entry.second.size() >= 2) {
      info.Dr1.insert(dose);
    }
  }
  return info;
}

bool in_D_ell(int g, int ell, const DesignInfo& info) {
  const auto i = static_cast<std::size_t>(g);
  if (!info.is_switcher(g)) return false;
  const double d1 = info.d1[i];
  if (!info.Dr1.count(d1)) return false;
  const int horizon_end = info.F[i] - 1 + ell;
  return horizon_end <= info.Tbar.at(d1) && info.nc_until[i] >= horizon_end;
}

DesignSummary design_summary(const DesignInfo& info) {
  DesignSummary s;
  const int G = info.num_groups();
  s.num_groups = G;
  s.num_periods = info.T;
  int in = 0, out = 0, no_cross = 0, decreasing = 0;
  bool all_switch_at_two = G > 0;
  for (int g = 0; g < G; ++g) {
    const auto i = static_cast<std::size_t>(g);
    if (info.S[i] == 0) ++s.never_switchers;
    if (info.S[i] > 0) ++in;
    if (info.S[i] < 0) ++out;
    if (info.nc_until[i] >= info.last[i]) ++no_cross;
    if (info.any_decrease[i]) ++decreasing;
    all_switch_at_two = all_switch_at_two && info.F[i] == 2;
    ++s.d1_histogram[info.d1[i]];
    ++s.switches_histogram[info.n_switches[i]];
  }
  s.switchers = G - s.never_switchers;
  s.share_never_switchers = G ? double(s.never_switchers) / G : 0.0;
  s.share_switch_in = s.switchers ? double(in) / s.switchers : 0.0;
  s.share_switch_out = s.switchers ? double(out) / s.switchers : 0.0;
  s.share_no_crossing = G ? double(no_cross) / G : 0.0;
  s.share_with_decrease = G ? double(decreasing) / G : 0.0;
  s.Dr1.assign(info.Dr1.begin(), info.Dr1.end());
  s.Tbar = info.Tbar;
  if (all_switch_at_two) {
    s.warnings.push_back(
        "every group changes treatment at period 2: there are no stayers to use as "
        "controls, event-study effects are not identified");
  }
  if (info.Dr1.empty()) {
    s.warnings.push_back(
        "no period-one dose is shared by groups with different first-switch dates");
  }
  return s;
}

nlohmann::json to_json(const DesignSummary& s) {
  nlohmann::json j;
  j["num_groups"] = s.num_groups;
  j["num_periods"] = s.num_periods;
  j["never_switchers"] = s.never_switchers;
  j["switchers"] = s.switchers;
  j["share_never_switchers"] = s.share_never_switchers;
  j["share_switch_in"] = s.share_switch_in;
  j["share_switch_out"] = s.share_switch_out;
  j["share_no_crossing"] = s.share_no_crossing;
  j["share_with_decrease"] = s.share_with_decrease;
  nlohmann::json d1 = nlohmann::json::array();
  for (const auto& [v, c] : s.d1_histogram) d1.push_back({{"d1", v}, {"count", c}});
  j["d1_histogram"] = d1;
  nlohmann::json sw = nlohmann::json::array();
  for (const auto& [v, c] : s.switches_histogram) {
    sw.push_back({{"switches", v}, {"count", c}});
  }
  j["switches_histogram"] = sw;
  j["Dr1"] = s.Dr1;
  nlohmann::json tb = nlohmann::json::array();
  for (const auto& [v, t] : s.Tbar) tb.push_back({{"d1", v}, {"Tbar", t}});
  j["Tbar"] = tb;
  j["warnings"] = s.warnings;
  return j;
}

}  // namespace hetdid
