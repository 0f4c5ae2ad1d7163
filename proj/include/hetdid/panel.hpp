#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hetdid {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Row g holds the path of group g; column t-1 holds period t.
using PathMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DesignInfo;

// Dense group x period panel. Groups are indexed 0..G-1; periods are
// 1-based (1..T) in every public accessor, matching the usual notation
// D_{g,1}, ..., D_{g,T}.
//
// A panel produced by load_panel() is balanced. Subsamples built by
// restrict() keep, for every group, a prefix 1..last_observed(g) of the
// periods; cells after that prefix are unobserved and must not be read.
class Panel {
 public:
  Panel(std::vector<std::string> groups, std::vector<long long> period_labels,
        PathMatrix outcome, PathMatrix treatment,
        std::optional<Eigen::VectorXd> weights = std::nullopt,
        std::vector<int> last_observed = {});

  int num_groups() const noexcept { return static_cast<int>(groups_.size()); }
  int num_periods() const noexcept { return static_cast<int>(periods_.size()); }

  const std::vector<std::string>& groups() const noexcept { return groups_; }
  // Original period values, in increasing order; label of period t is
  // period_labels()[t-1].
  const std::vector<long long>& period_labels() const noexcept { return periods_; }

  double y(int g, int t) const { return outcome_(g, t - 1); }
  double d(int g, int t) const { return treatment_(g, t - 1); }
  double weight(int g) const { return weights_ ? (*weights_)(g) : 1.0; }
  bool has_weights() const noexcept { return weights_.has_value(); }

  int last_observed(int g) const { return last_[static_cast<std::size_t>(g)]; }
  bool balanced() const noexcept { return balanced_; }

  const PathMatrix& outcome() const noexcept { return outcome_; }
  const PathMatrix& treatment() const noexcept { return treatment_; }
  const std::optional<Eigen::VectorXd>& weights() const noexcept { return weights_; }

  // Panel made of the listed groups, in that order; a group may repeat
  // (bootstrap draws). Repeated groups get "#k" suffixes on their ids.
  Panel select_groups(const std::vector<int>& indices) const;

 private:
  std::vector<std::string> groups_;
  std::vector<long long> periods_;
  PathMatrix outcome_;
  PathMatrix treatment_;
  std::optional<Eigen::VectorXd> weights_;
  std::vector<int> last_;
  bool balanced_ = true;
};

struct ColumnMap {
  std::string group = "group";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string treatment = "treatment";
  std::optional<std::string> weight;
  char delimiter = ',';
  // Drop groups with missing periods instead of failing.
  bool drop_incomplete = false;
};

struct LoadReport {
  std::size_t rows = 0;
  std::vector<std::string> dropped_groups;
};

Panel load_panel(std::istream& in, const ColumnMap& columns = {},
                 LoadReport* report = nullptr);
Panel load_panel_file(const std::string& path, const ColumnMap& columns = {},
                      LoadReport* report = nullptr);

// Long-format CSV with the default column names; observed cells only.
void write_panel_csv(const Panel& panel, std::ostream& out);

// Canonical JSON dump (debugging aid).
nlohmann::json panel_to_json(const Panel& panel);

using CellPredicate = std::function<bool(int g, int t, const DesignInfo& info)>;

// Keeps the cells for which `keep` holds. Each group must retain a prefix of
// its observed periods (InvalidSubsample otherwise); groups left with no cell
// are dropped. Throws EmptySubsample when fewer than two groups survive.
Panel restrict(const Panel& panel, const DesignInfo& info, const CellPredicate& keep);

}  // namespace hetdid
