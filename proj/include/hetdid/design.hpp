#pragma once

#include "hetdid/panel.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace hetdid {

struct DesignOptions {
  // Minimum number of groups sharing a period-one dose before that dose can
  // belong to the stayer-rich set Dr1.
  int min_group_count = 2;
};

// Per-group classification of treatment paths plus the population-level
// quantities that decide which switchers can be matched with controls.
struct DesignInfo {
  int T = 0;
  // First-switch date in 2..T+1; T+1 when the dose never leaves d1 within the
  // observed periods.
  std::vector<int> F;
  // Sign of the first change: +1, -1, or 0 for groups that never switch.
  std::vector<int> S;
  std::vector<double> d1;
  // Largest t such that the path has no crossing through t.
  std::vector<int> nc_until;
  std::vector<int> n_switches;
  // 1 when the dose decreases between two consecutive observed periods.
  std::vector<char> any_decrease;
  std::vector<int> last;
  // Last period at which the group is observed at its status-quo dose,
  // min(F-1, last observed period).
  std::vector<int> status_quo_until;
  std::set<double> Dr1;
  // Period-one dose -> largest status_quo_until among groups with that dose.
  std::map<double, int> Tbar;
  int min_group_count = 2;

  int num_groups() const noexcept { return static_cast<int>(F.size()); }
  bool is_switcher(int g) const { return S[static_cast<std::size_t>(g)] != 0; }
};

DesignInfo analyze_design(const Panel& panel, const DesignOptions& options = {});

// Population membership D in D^ell for group g at horizon ell (1 <= ell <= T-1).
bool in_D_ell(int g, int ell, const DesignInfo& info);

struct DesignSummary {
  int num_groups = 0;
  int num_periods = 0;
  int never_switchers = 0;
  int switchers = 0;
  double share_never_switchers = 0.0;
  // Shares among switchers.
  double share_switch_in = 0.0;
  double share_switch_out = 0.0;
  // Shares among all groups.
  double share_no_crossing = 0.0;
  double share_with_decrease = 0.0;
  std::map<double, int> d1_histogram;
  std::map<int, int> switches_histogram;
  std::vector<double> Dr1;
  std::map<double, int> Tbar;
  std::vector<std::string> warnings;
};

DesignSummary design_summary(const DesignInfo& info);
nlohmann::json to_json(const DesignSummary& summary);

}  // namespace hetdid
