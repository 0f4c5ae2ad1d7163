#include "hetdid/avsq.hpp"

#include "hetdid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace hetdid {

EventStudy::EventStudy(const Panel& panel, const DesignInfo& info)
    : panel_(&panel), info_(&info) {
  const int G = panel.num_groups();
  const int T = panel.num_periods();
  if (info.num_groups() != G || info.T != T) {
    throw DimensionMismatch("design info does not describe this panel");
  }
  std::map<double, int> ids;
  bucket_index_.resize(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) {
    auto [it, fresh] = ids.emplace(info.d1[g], static_cast<int>(ids.size()));
    bucket_index_[g] = it->second;
  }
  std::vector<std::vector<std::vector<int>>> by_until(ids.size(),
                                                      std::vector<std::vector<int>>(T + 1));
  for (int g = 0; g < G; ++g) {
    by_until[bucket_index_[g]][info.status_quo_until[g]].push_back(g);
  }
  const auto stride = static_cast<std::size_t>(T + 1);
  buckets_.resize(ids.size());
  for (std::size_t b = 0; b < ids.size(); ++b) {
    DoseBucket& bucket = buckets_[b];
    bucket.count.assign(stride, 0);
    bucket.weight.assign(stride, 0.0);
    bucket.sums.assign(stride * stride, 0.0);
    std::vector<double> acc(stride, 0.0);
    int n = 0;
    double w = 0.0;
    for (int e = T; e >= 1; --e) {
      for (int g : by_until[b][e]) {
        const double wg = panel.weight(g);
        for (int t = 1; t <= e; ++t) acc[t] += wg * panel.y(g, t);
        ++n;
        w += wg;
      }
      bucket.count[e] = n;
      bucket.weight[e] = w;
      std::copy(acc.begin() + 1, acc.begin() + e + 1,
                bucket.sums.begin() + static_cast<std::ptrdiff_t>(e * stride + 1));
    }
  }
}

const EventStudy::DoseBucket& EventStudy::bucket_of(int g) const {
  return buckets_[static_cast<std::size_t>(bucket_index_[static_cast<std::size_t>(g)])];
}

void EventStudy::check_horizon(int ell) const {
  if (ell < 1 || ell > info_->T - 1) {
    throw ConfigError("horizon " + std::to_string(ell) + " outside 1.." +
                      std::to_string(info_->T - 1));
  }
}

int EventStudy::control_count(int g, int ell) const {
  const int e = info_->F[g] - 1 + ell;
  if (e > info_->T) return 0;
  return bucket_of(g).count[e];
}

std::vector<int> EventStudy::control_set(int g, int ell) const {
  check_horizon(ell);
  std::vector<int> out;
  if (!info_->is_switcher(g)) return out;
  const int e = info_->F[g] - 1 + ell;
  for (int h = 0; h < info_->num_groups(); ++h) {
    if (info_->d1[h] == info_->d1[g] && info_->status_quo_until[h] >= e) out.push_back(h);
  }
  return out;
}

std::vector<int> EventStudy::switchers(int ell) const {
  check_horizon(ell);
  std::vector<int> out;
  for (int g = 0; g < info_->num_groups(); ++g) {
    if (!info_->is_switcher(g)) continue;
    const int e = info_->F[g] - 1 + ell;
    if (e > info_->last[g] || info_->nc_until[g] < e) continue;
    if (!info_->Dr1.count(info_->d1[g])) continue;
    if (bucket_of(g).count[e] == 0) continue;
    out.push_back(g);
  }
  return out;
}

double EventStudy::control_trend(int g, int horizon_end, int from, int to) const {
  const DoseBucket& b = bucket_of(g);
  const auto stride = static_cast<std::size_t>(info_->T + 1);
  const std::size_t row = static_cast<std::size_t>(horizon_end) * stride;
  return (b.sums[row + to] - b.sums[row + from]) / b.weight[horizon_end];
}

EventStudyResult EventStudy::effect(int ell) const { return effect(ell, switchers(ell)); }

EventStudyResult EventStudy::effect(int ell, const std::vector<int>& members) const {
  check_horizon(ell);
  EventStudyResult r;
  r.horizon = ell;
  r.weighted = panel_->has_weights();
  r.switchers = members;
  std::sort(r.switchers.begin(), r.switchers.end());
  r.n_switchers = static_cast<int>(members.size());
  if (members.empty()) return r;
  double num = 0.0, den = 0.0;
  for (int g : r.switchers) {
    const int F = info_->F[g];
    const int e = F - 1 + ell;
    if (!info_->is_switcher(g) || e > info_->last[g] || bucket_of(g).count[e] == 0) {
      throw ConfigError("group " + panel_->groups()[g] + " is not eligible at horizon " +
                        std::to_string(ell));
    }
    const double contrast =
        panel_->y(g, e) - panel_->y(g, F - 1) - control_trend(g, e, F - 1, e);
    const double w = panel_->weight(g);
    num += w * info_->S[g] * contrast;
    den += w;
  }
  r.defined = true;
  r.estimate = num / den;
  r.paths = path_frequencies(ell, r.switchers);
  return r;
}

EventStudyResult EventStudy::placebo(int ell) const { return placebo(ell, switchers(ell)); }

EventStudyResult EventStudy::placebo(int ell, const std::vector<int>& base_members) const {
  check_horizon(ell);
  std::vector<int> members;
  for (int g : base_members) {
    if (info_->F[g] - 1 - ell >= 1) members.push_back(g);
  }
  if (members.empty()) {
    throw PlaceboUndefined("no switcher at horizon " + std::to_string(ell) +
                           " is observed " + std::to_string(ell) +
                           " period(s) before its last status-quo period");
  }
  std::sort(members.begin(), members.end());
  EventStudyResult r;
  r.horizon = -ell;
  r.weighted = panel_->has_weights();
  r.switchers = members;
  r.n_switchers = static_cast<int>(members.size());
  double num = 0.0, den = 0.0;
  for (int g : members) {
    const int F = info_->F[g];
    const int e = F - 1 + ell;
    const int pre = F - 1 - ell;
    const double contrast =
        panel_->y(g, pre) - panel_->y(g, F - 1) - control_trend(g, e, F - 1, pre);
    const double w = panel_->weight(g);
    num += w * info_->S[g] * contrast;
    den += w;
  }
  r.defined = true;
  r.estimate = num / den;
  r.paths = path_frequencies(ell, members);
  try {
    r.dose_delta = dose_delta(ell, base_members);
    r.normalized = r.estimate / r.dose_delta;
  } catch (const NormalizationDegenerate&) {
  }
  return r;
}

double EventStudy::dose_delta(int ell, const std::vector<int>& members) const {
  if (members.empty()) throw Undefined("no switcher at horizon " + std::to_string(ell));
  double num = 0.0, den = 0.0;
  for (int g : members) {
    const int F = info_->F[g];
    const double d1 = info_->d1[g];
    double cum = 0.0;
    for (int k = 0; k < ell; ++k) cum += panel_->d(g, F + k) - d1;
    const double w = panel_->weight(g);
    num += w * info_->S[g] * cum;
    den += w;
  }
  const double delta = num / den;
  if (delta == 0.0) {
    throw NormalizationDegenerate("cumulative dose change is zero at horizon " +
                                  std::to_string(ell));
  }
  return delta;
}

void EventStudy::normalize(EventStudyResult& row) const {
  const int ell = row.horizon;
  if (ell < 1) throw ConfigError("normalize expects a positive horizon");
  row.dose_delta = dose_delta(ell, row.switchers);
  row.normalized = row.estimate / row.dose_delta;
  row.omega_shares.assign(static_cast<std::size_t>(ell), 0.0);
  double den = 0.0;
  for (int g : row.switchers) {
    const int F = info_->F[g];
    const double w = panel_->weight(g);
    for (int k = 0; k < ell; ++k) {
      row.omega_shares[k] += w * info_->S[g] * (panel_->d(g, F - 1 + ell - k) - info_->d1[g]);
    }
    den += w;
  }
  for (double& s : row.omega_shares) s /= den * row.dose_delta;
}

std::vector<PathFrequency> EventStudy::path_frequencies(int ell,
                                                        const std::vector<int>& members) const {
  std::map<std::vector<double>, int> counts;
  for (int g : members) {
    const int F = info_->F[g];
    std::vector<double> sig;
    sig.reserve(static_cast<std::size_t>(ell) + 1);
    sig.push_back(info_->d1[g]);
    for (int t = F; t <= F - 1 + ell; ++t) sig.push_back(panel_->d(g, t));
    ++counts[sig];
  }
  std::vector<PathFrequency> out;
  out.reserve(counts.size());
  for (auto& [sig, n] : counts) {
    out.push_back({sig, n, members.empty() ? 0.0 : double(n) / double(members.size())});
  }
  std::stable_sort(out.begin(), out.end(), [](const PathFrequency& a, const PathFrequency& b) {
    return a.count > b.count;
  });
  return out;
}

std::vector<PathEffect> EventStudy::path_effects(int ell, int min_count) const {
  const std::vector<int> members = switchers(ell);
  std::map<std::vector<double>, std::vector<int>> by_path;
  for (int g : members) {
    const int F = info_->F[g];
    std::vector<double> sig{info_->d1[g]};
    for (int t = F; t <= F - 1 + ell; ++t) sig.push_back(panel_->d(g, t));
    by_path[sig].push_back(g);
  }
  std::vector<PathEffect> out;
  for (const PathFrequency& freq : path_frequencies(ell, members)) {
    PathEffect pe{freq, std::nullopt};
    if (freq.count >= min_count) pe.result = effect(ell, by_path.at(freq.signature));
    out.push_back(std::move(pe));
  }
  return out;
}

AceResult EventStudy::ace(const AceOptions& options) const {
  const int T = info_->T;
  double total_w = 0.0;
  for (int g = 0; g < info_->num_groups(); ++g) total_w += panel_->weight(g);

  AceResult r;
  double cost_num = 0.0;
  int sign_seen = 0;
  for (int ell = 1; ell <= T - 1; ++ell) {
    std::vector<int> members;
    for (int g : switchers(ell)) {
      const int s = info_->S[g];
      if (options.side == AceOptions::Side::switchers_in && s < 0) continue;
      if (options.side == AceOptions::Side::switchers_out && s > 0) continue;
      if (options.side == AceOptions::Side::all) {
        if (sign_seen == 0) sign_seen = s;
        if (s != sign_seen) {
          throw MixedSignDesign(
              "switchers move in both directions; run the switchers-in and switchers-out "
              "analyses separately");
        }
      }
      members.push_back(g);
    }
    if (members.empty()) continue;
    r.max_horizon = ell;
    const EventStudyResult row = effect(ell, members);
    double member_w = 0.0, dose = 0.0;
    for (int g : members) {
      const double w = panel_->weight(g);
      member_w += w;
      dose += w * info_->S[g] * (panel_->d(g, info_->F[g] - 1 + ell) - info_->d1[g]);
    }
    // P(in S_ell) * AVSQ_ell and P(in S_ell) * E[dose change | S_ell].
    r.numerator += member_w / total_w * row.estimate;
    const double dose_term = dose / total_w;
    r.denominator += dose_term;
    if (options.costs) {
      const auto& c = *options.costs;
      double unit = 0.0;
      if (c.size() == 1) {
        unit = c[0];
      } else if (static_cast<std::size_t>(ell) <= c.size()) {
        unit = c[static_cast<std::size_t>(ell - 1)];
      } else {
        throw ConfigError("cost sequence has " + std::to_string(c.size()) +
                          " entries but horizon " + std::to_string(ell) + " is used");
      }
      cost_num += unit * dose_term;
    }
  }
  if (r.denominator == 0.0) {
    throw AceDegenerate("no incremental dose among eligible switchers");
  }
  r.ace = r.numerator / r.denominator;
  if (options.costs) {
    r.threshold_c = cost_num / r.denominator;
    r.beneficial = r.ace >= *r.threshold_c;
  }
  return r;
}

std::vector<int> control_set(int g, int ell, const Panel& panel, const DesignInfo& info) {
  return EventStudy(panel, info).control_set(g, ell);
}

EventStudyResult avsq_hat(int ell, const Panel& panel, const DesignInfo& info) {
  return EventStudy(panel, info).effect(ell);
}

EventStudyResult avsq_placebo(int ell, const Panel& panel, const DesignInfo& info) {
  return EventStudy(panel, info).placebo(ell);
}

EventStudyResult normalize(int ell, const Panel& panel, const DesignInfo& info) {
  EventStudy es(panel, info);
  EventStudyResult row = es.effect(ell);
  if (!row.defined) {
    throw Undefined("no switcher at horizon " + std::to_string(ell) + " to normalize");
  }
  es.normalize(row);
  return row;
}

std::vector<PathEffect> path_effects(int ell, const Panel& panel, const DesignInfo& info,
                                     int min_count) {
  return EventStudy(panel, info).path_effects(ell, min_count);
}

AceResult ace(const Panel& panel, const DesignInfo& info, const AceOptions& options) {
  return EventStudy(panel, info).ace(options);
}

namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const EventStudyResult& row) {
  nlohmann::json j;
  j["horizon"] = row.horizon;
  j["defined"] = row.defined;
  j["estimate"] = row.estimate;
  j["dose_delta"] = number_or_null(row.dose_delta);
  j["normalized"] = number_or_null(row.normalized);
  j["n_switchers"] = row.n_switchers;
  j["omega_shares"] = row.omega_shares;
  j["se"] = number_or_null(row.se);
  j["ci_low"] = number_or_null(row.ci_low);
  j["ci_high"] = number_or_null(row.ci_high);
  j["pvalue"] = number_or_null(row.pvalue);
  j["normalized_se"] = number_or_null(row.normalized_se);
  j["normalized_ci_low"] = number_or_null(row.normalized_ci_low);
  j["normalized_ci_high"] = number_or_null(row.normalized_ci_high);
  j["weighted"] = row.weighted;
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : row.paths) {
    paths.push_back({{"path", p.signature}, {"count", p.count}, {"share", p.share}});
  }
  j["paths"] = paths;
  return j;
}

nlohmann::json to_json(const AceResult& a) {
  nlohmann::json j;
  j["ace"] = a.ace;
  j["numerator"] = a.numerator;
  j["denominator"] = a.denominator;
  j["max_horizon"] = a.max_horizon;
  j["threshold_c"] = a.threshold_c ? nlohmann::json(*a.threshold_c) : nlohmann::json(nullptr);
  j["beneficial"] = a.beneficial ? nlohmann::json(*a.beneficial) : nlohmann::json(nullptr);
  return j;
}

}  // namespace hetdid
