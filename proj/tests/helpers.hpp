#pragma once

#include "hetdid/panel.hpp"

#include <string>
#include <vector>

namespace testing {

using Rows = std::vector<std::vector<double>>;

inline hetdid::PathMatrix to_matrix(const Rows& rows) {
  hetdid::PathMatrix m(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t g = 0; g < rows.size(); ++g) {
    for (std::size_t t = 0; t < rows[g].size(); ++t) m(g, t) = rows[g][t];
  }
  return m;
}

// Panel with groups "1".."G" and periods 1..T.
inline hetdid::Panel make_panel(const Rows& y, const Rows& d) {
  std::vector<std::string> ids;
  for (std::size_t g = 0; g < y.size(); ++g) ids.push_back(std::to_string(g + 1));
  std::vector<long long> periods;
  for (std::size_t t = 0; t < y.front().size(); ++t) periods.push_back(static_cast<long long>(t + 1));
  return hetdid::Panel(ids, periods, to_matrix(y), to_matrix(d));
}

// Outcome matrix of zeros shaped like d.
inline Rows zeros_like(const Rows& d) {
  Rows y = d;
  for (auto& r : y) std::fill(r.begin(), r.end(), 0.0);
  return y;
}

}  // namespace testing
