#include "hetdid/panel.hpp"

#include "hetdid/design.hpp"
#include "hetdid/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace hetdid {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::EmptySubsample: return "EmptySubsample";
    case ErrorCode::InvalidSubsample: return "InvalidSubsample";
    case ErrorCode::PlaceboUndefined: return "PlaceboUndefined";
    case ErrorCode::NormalizationDegenerate: return "NormalizationDegenerate";
    case ErrorCode::MixedSignDesign: return "MixedSignDesign";
    case ErrorCode::AceDegenerate: return "AceDegenerate";
    case ErrorCode::TestInfeasible: return "TestInfeasible";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DesignNotIdentified: return "DesignNotIdentified";
    case ErrorCode::CoefficientNotIdentified: return "CoefficientNotIdentified";
    case ErrorCode::UnstableStatistic: return "UnstableStatistic";
    case ErrorCode::DegenerateTest: return "DegenerateTest";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Undefined: return "Undefined";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Panel::Panel(std::vector<std::string> groups, std::vector<long long> period_labels,
             PathMatrix outcome, PathMatrix treatment,
             std::optional<Eigen::VectorXd> weights, std::vector<int> last_observed)
    : groups_(std::move(groups)),
      periods_(std::move(period_labels)),
      outcome_(std::move(outcome)),
      treatment_(std::move(treatment)),
      weights_(std::move(weights)),
      last_(std::move(last_observed)) {
  const auto G = static_cast<Eigen::Index>(groups_.size());
  const auto T = static_cast<Eigen::Index>(periods_.size());
  if (G < 2 || T < 2) {
    throw ConfigError("a panel needs at least 2 groups and 2 periods (got G=" +
                      std::to_string(G) + ", T=" + std::to_string(T) + ")");
  }
  if (outcome_.rows() != G || outcome_.cols() != T || treatment_.rows() != G ||
      treatment_.cols() != T) {
    throw DimensionMismatch("outcome/treatment matrices must be G x T");
  }
  if (weights_) {
    if (weights_->size() != G) throw DimensionMismatch("one weight per group expected");
    for (Eigen::Index g = 0; g < G; ++g) {
      if (!((*weights_)(g) > 0.0) || !std::isfinite((*weights_)(g))) {
        throw ParseError("group weights must be positive and finite");
      }
    }
  }
  if (last_.empty()) last_.assign(static_cast<std::size_t>(G), static_cast<int>(T));
  if (static_cast<Eigen::Index>(last_.size()) != G) {
    throw DimensionMismatch("one observation window per group expected");
  }
  for (int m : last_) {
    if (m < 1 || m > T) throw InvalidSubsample("observation window out of range");
    if (m != T) balanced_ = false;
  }
  if (!std::is_sorted(periods_.begin(), periods_.end()) ||
      std::adjacent_find(periods_.begin(), periods_.end()) != periods_.end()) {
    throw ParseError("period labels must be strictly increasing");
  }
}

Panel Panel::select_groups(const std::vector<int>& indices) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  const auto T = static_cast<Eigen::Index>(periods_.size());
  PathMatrix y(n, T), d(n, T);
  std::vector<std::string> ids;
  ids.reserve(indices.size());
  std::vector<int> last;
  last.reserve(indices.size());
  std::optional<Eigen::VectorXd> w;
  if (weights_) w = Eigen::VectorXd(n);
  std::vector<int> copies(groups_.size(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = indices[static_cast<std::size_t>(i)];
    y.row(i) = outcome_.row(g);
    d.row(i) = treatment_.row(g);
    const int c = copies[static_cast<std::size_t>(g)]++;
    ids.push_back(c == 0 ? groups_[static_cast<std::size_t>(g)]
                         : groups_[static_cast<std::size_t>(g)] + "#" + std::to_string(c));
    last.push_back(last_[static_cast<std::size_t>(g)]);
    if (w) (*w)(i) = (*weights_)(g);
  }
  return Panel(std::move(ids), periods_, std::move(y), std::move(d), std::move(w),
               std::move(last));
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one delimited line; double quotes protect delimiters and "" escapes
// a quote.
std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

bool parse_integer(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

struct CellValue {
  double y;
  double d;
};

}  // namespace

Panel load_panel(std::istream& in, const ColumnMap& columns, LoadReport* report) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (!trim(line).empty()) {
      header = split_line(line, columns.delimiter);
      break;
    }
  }
  if (header.empty()) throw ParseError("input has no header row");

  const std::size_t ig = column_index(header, columns.group);
  const std::size_t ip = column_index(header, columns.period);
  const std::size_t iy = column_index(header, columns.outcome);
  const std::size_t id = column_index(header, columns.treatment);
  std::optional<std::size_t> iw;
  if (columns.weight) iw = column_index(header, *columns.weight);
  const std::size_t need =
      std::max({ig, ip, iy, id, iw.value_or(0)}) + 1;

  std::map<std::string, std::map<long long, CellValue>> cells;
  std::map<std::string, double> group_weight;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_line(line, columns.delimiter);
    const std::string where = "line " + std::to_string(lineno);
    if (f.size() < need) throw ParseError(where + ": expected at least " +
                                          std::to_string(need) + " fields");
    const std::string& gid = f[ig];
    if (gid.empty()) throw ParseError(where + ": empty group identifier");
    long long period = 0;
    if (!parse_integer(f[ip], period)) {
      throw ParseError(where + ": period '" + f[ip] + "' is not an integer");
    }
    CellValue v{};
    if (!parse_double(f[iy], v.y)) {
      throw ParseError(where + ": outcome '" + f[iy] + "' is not a finite number");
    }
    if (!parse_double(f[id], v.d)) {
      throw ParseError(where + ": treatment '" + f[id] + "' is not a finite number");
    }
    if (iw) {
      double w = 0.0;
      if (!parse_double(f[*iw], w) || !(w > 0.0)) {
        throw ParseError(where + ": weight '" + f[*iw] + "' is not a positive number");
      }
      auto [it, fresh] = group_weight.emplace(gid, w);
      if (!fresh && it->second != w) {
        throw ParseError(where + ": weight of group '" + gid + "' varies across periods");
      }
    }
    auto& row = cells[gid];
    if (!row.emplace(period, v).second) {
      throw DuplicateCell(where + ": duplicate cell (group '" + gid + "', period " +
                          std::to_string(period) + ")");
    }
    ++rows;
  }
  if (report) report->rows = rows;

  std::vector<long long> periods;
  for (const auto& [gid, row] : cells) {
    for (const auto& [p, v] : row) periods.push_back(p);
  }
  std::sort(periods.begin(), periods.end());
  periods.erase(std::unique(periods.begin(), periods.end()), periods.end());

  std::vector<std::string> incomplete;
  for (const auto& [gid, row] : cells) {
    if (row.size() != periods.size()) incomplete.push_back(gid);
  }
  if (!incomplete.empty()) {
    if (!columns.drop_incomplete) {
      std::string msg = "unbalanced panel: " + std::to_string(incomplete.size()) +
                        " group(s) miss at least one period (";
      for (std::size_t i = 0; i < incomplete.size() && i < 5; ++i) {
        msg += (i ? ", " : "") + incomplete[i];
      }
      msg += incomplete.size() > 5 ? ", ...)" : ")";
      throw UnbalancedPanel(msg, incomplete);
    }
    for (const auto& gid : incomplete) cells.erase(gid);
    if (report) report->dropped_groups = incomplete;
  }

  // Numeric identifiers sort numerically; anything else lexicographically.
  std::vector<std::string> ids;
  ids.reserve(cells.size());
  bool numeric = true;
  for (const auto& [gid, row] : cells) {
    ids.push_back(gid);
    long long tmp = 0;
    numeric = numeric && parse_integer(gid, tmp);
  }
  if (numeric) {
    std::stable_sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
      long long x = 0, y = 0;
      parse_integer(a, x);
      parse_integer(b, y);
      return x < y;
    });
  }

  const auto G = static_cast<Eigen::Index>(ids.size());
  const auto T = static_cast<Eigen::Index>(periods.size());
  if (G < 2 || T < 2) {
    throw ParseError("need at least 2 complete groups and 2 periods (got G=" +
                     std::to_string(G) + ", T=" + std::to_string(T) + ")");
  }
  PathMatrix y(G, T), d(G, T);
  std::optional<Eigen::VectorXd> w;
  if (iw) w = Eigen::VectorXd(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& row = cells.at(ids[static_cast<std::size_t>(g)]);
    Eigen::Index t = 0;
    for (const auto& [p, v] : row) {
      y(g, t) = v.y;
      d(g, t) = v.d;
      ++t;
    }
    if (w) (*w)(g) = group_weight.at(ids[static_cast<std::size_t>(g)]);
  }
  return Panel(std::move(ids), std::move(periods), std::move(y), std::move(d), std::move(w));
}

Panel load_panel_file(const std::string& path, const ColumnMap& columns, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return load_panel(in, columns, report);
}

void write_panel_csv(const Panel& panel, std::ostream& out) {
  out << "group,period,outcome,treatment";
  if (panel.has_weights()) out << ",weight";
  out << '\n';
  std::ostringstream cell;
  cell << std::setprecision(17);
  for (int g = 0; g < panel.num_groups(); ++g) {
    const std::string& id = panel.groups()[static_cast<std::size_t>(g)];
    const bool quote = id.find_first_of(",\"") != std::string::npos;
    std::string shown = id;
    if (quote) {
      shown.clear();
      for (char c : id) shown += (c == '"') ? std::string("\"\"") : std::string(1, c);
      shown = "\"" + shown + "\"";
    }
    for (int t = 1; t <= panel.last_observed(g); ++t) {
      cell.str("");
      cell << shown << ',' << panel.period_labels()[static_cast<std::size_t>(t - 1)] << ','
           << panel.y(g, t) << ',' << panel.d(g, t);
      if (panel.has_weights()) cell << ',' << panel.weight(g);
      out << cell.str() << '\n';
    }
  }
}

nlohmann::json panel_to_json(const Panel& panel) {
  nlohmann::json j;
  j["groups"] = panel.groups();
  j["periods"] = panel.period_labels();
  nlohmann::json ys = nlohmann::json::array(), ds = nlohmann::json::array();
  std::vector<int> last;
  for (int g = 0; g < panel.num_groups(); ++g) {
    std::vector<double> yr, dr;
    for (int t = 1; t <= panel.last_observed(g); ++t) {
      yr.push_back(panel.y(g, t));
      dr.push_back(panel.d(g, t));
    }
    ys.push_back(yr);
    ds.push_back(dr);
    last.push_back(panel.last_observed(g));
  }
  j["outcome"] = ys;
  j["treatment"] = ds;
  j["last_observed"] = last;
  j["balanced"] = panel.balanced();
  if (panel.has_weights()) {
    std::vector<double> w(panel.weights()->data(),
                          panel.weights()->data() + panel.weights()->size());
    j["weights"] = w;
  }
  return j;
}

Panel restrict(const Panel& panel, const DesignInfo& info, const CellPredicate& keep) {
  const int T = panel.num_periods();
  std::vector<int> kept_groups;
  std::vector<int> kept_last;
  for (int g = 0; g < panel.num_groups(); ++g) {
    int prefix = 0;
    bool gap = false;
    for (int t = 1; t <= panel.last_observed(g); ++t) {
      if (keep(g, t, info)) {
        if (gap) {
          throw InvalidSubsample("kept periods of group '" +
                                 panel.groups()[static_cast<std::size_t>(g)] +
                                 "' are not a prefix of its observed periods");
        }
        prefix = t;
      } else {
        gap = true;
      }
    }
    if (prefix > 0) {
      kept_groups.push_back(g);
      kept_last.push_back(prefix);
    }
  }
  if (kept_groups.size() < 2) {
    throw EmptySubsample("subsample keeps " + std::to_string(kept_groups.size()) +
                         " group(s); at least 2 are required");
  }
  const auto n = static_cast<Eigen::Index>(kept_groups.size());
  PathMatrix y(n, T), d(n, T);
  std::vector<std::string> ids;
  std::optional<Eigen::VectorXd> w;
  if (panel.has_weights()) w = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = kept_groups[static_cast<std::size_t>(i)];
    y.row(i) = panel.outcome().row(g);
    d.row(i) = panel.treatment().row(g);
    ids.push_back(panel.groups()[static_cast<std::size_t>(g)]);
    if (w) (*w)(i) = panel.weight(g);
  }
  return Panel(std::move(ids), panel.period_labels(), std::move(y), std::move(d),
               std::move(w), std::move(kept_last));
}

}  // namespace hetdid
