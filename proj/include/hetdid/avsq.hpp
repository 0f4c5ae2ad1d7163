#pragma once

#include "hetdid/design.hpp"
#include "hetdid/panel.hpp"

#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

namespace hetdid {

// Treatment path (D_1, D_F, ..., D_{F-1+ell}) and how many switchers follow it.
struct PathFrequency {
  std::vector<double> signature;
  int count = 0;
  double share = 0.0;
};

// One row of an event-study table. Positive horizons are actual-versus-
// status-quo effects, negative horizons the matching placebos.
struct EventStudyResult {
  int horizon = 0;
  // False when no switcher qualifies; estimate is then 0.
  bool defined = false;
  double estimate = 0.0;
  double dose_delta = kNaN;
  double normalized = kNaN;
  int n_switchers = 0;
  // Omega shares for lags k = 0..ell-1.
  std::vector<double> omega_shares;
  // Filled by inference.
  double se = kNaN, ci_low = kNaN, ci_high = kNaN, pvalue = kNaN;
  double normalized_se = kNaN, normalized_ci_low = kNaN, normalized_ci_high = kNaN;
  std::vector<PathFrequency> paths;
  // Indices of the contributing groups, increasing.
  std::vector<int> switchers;
  // Group weights were applied to switcher and control averages.
  bool weighted = false;
};

struct PathEffect {
  PathFrequency path;
  // Present when the path has at least min_count switchers.
  std::optional<EventStudyResult> result;
};

struct AceOptions {
  enum class Side { all, switchers_in, switchers_out };
  Side side = Side::all;
  // Cost of one dose unit ell-1 periods after the first switch, ell = 1, 2, ...
  // A single value applies to every horizon.
  std::optional<std::vector<double>> costs;
};

struct AceResult {
  double ace = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  int max_horizon = 0;
  std::optional<double> threshold_c;
  std::optional<bool> beneficial;
};

// Event-study estimators over one (panel, design) pair. Construction builds,
// for every period-one dose, cumulative outcome sums over the groups still at
// their status-quo dose, so each control-group mean costs O(1).
class EventStudy {
 public:
  EventStudy(const Panel& panel, const DesignInfo& info);

  const Panel& panel() const noexcept { return *panel_; }
  const DesignInfo& info() const noexcept { return *info_; }

  // Groups with the same period-one dose as g still at that dose at F_g-1+ell.
  std::vector<int> control_set(int g, int ell) const;
  int control_count(int g, int ell) const;

  // Switchers eligible at horizon ell: window observed, no crossing through
  // F-1+ell, baseline dose in Dr1 and at least one control.
  std::vector<int> switchers(int ell) const;

  // Average of S_g (Y_{F-1+ell} - Y_{F-1} - control trend) over members,
  // which must be a subset of switchers(ell).
  EventStudyResult effect(int ell) const;
  EventStudyResult effect(int ell, const std::vector<int>& members) const;

  // Placebo at horizon -ell over base_members (default switchers(ell))
  // restricted to F-1-ell >= 1. dose_delta and the normalized value use the
  // horizon-ell dose change of base_members. Throws PlaceboUndefined.
  EventStudyResult placebo(int ell) const;
  EventStudyResult placebo(int ell, const std::vector<int>& base_members) const;

  // Fills dose_delta, omega_shares and normalized for a positive-horizon row.
  void normalize(EventStudyResult& row) const;
  double dose_delta(int ell, const std::vector<int>& members) const;

  std::vector<PathFrequency> path_frequencies(int ell, const std::vector<int>& members) const;
  std::vector<PathEffect> path_effects(int ell, int min_count) const;

  AceResult ace(const AceOptions& options = {}) const;

 private:
  struct DoseBucket {
    // For horizon end e (1..T): number and total weight of groups whose
    // status_quo_until >= e, and their weighted outcome sums by period t <= e.
    std::vector<int> count;
    std::vector<double> weight;
    // sums[e * (T + 1) + t]
    std::vector<double> sums;
  };

  const DoseBucket& bucket_of(int g) const;
  double control_trend(int g, int horizon_end, int from, int to) const;
  void check_horizon(int ell) const;

  const Panel* panel_;
  const DesignInfo* info_;
  std::vector<DoseBucket> buckets_;
  std::vector<int> bucket_index_;
};

// Free-function forms, each building its own EventStudy.
std::vector<int> control_set(int g, int ell, const Panel& panel, const DesignInfo& info);
EventStudyResult avsq_hat(int ell, const Panel& panel, const DesignInfo& info);
EventStudyResult avsq_placebo(int ell, const Panel& panel, const DesignInfo& info);
EventStudyResult normalize(int ell, const Panel& panel, const DesignInfo& info);
std::vector<PathEffect> path_effects(int ell, const Panel& panel, const DesignInfo& info,
                                     int min_count);
AceResult ace(const Panel& panel, const DesignInfo& info, const AceOptions& options = {});

nlohmann::json to_json(const EventStudyResult& row);
nlohmann::json to_json(const AceResult& ace);

}  // namespace hetdid
