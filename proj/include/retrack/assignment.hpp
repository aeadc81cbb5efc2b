#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace retrack {

// Marks a pair that must not be matched.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

struct AssignmentResult {
  std::vector<int> row_to_col;  // -1 when the row stays unmatched
  std::vector<int> col_to_row;  // -1 when the column stays unmatched
  double total_cost = 0.0;      // sum over matched pairs only
  std::size_t matched = 0;
};

namespace assign_detail {

// Jonker-Volgenant style shortest augmenting paths with potentials on a
// square matrix; O(n^3). Returns the cost-minimal row -> col permutation.
inline std::vector<int> solve_square(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1, 0.0);
  std::vector<char> used(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace assign_detail

// Minimum-cost matching on a rectangular matrix where kForbidden entries can
// never match. Cardinality is maximized first, cost minimized second: the
// matrix is padded to a square with a penalty constant so large (2^40) that
// leaving any matchable pair unmatched always costs more than any finite
// assignment. Finite entries must satisfy |c| < 2^20 so penalty and real
// costs can never trade off; the power-of-two penalty also keeps the solver's
// arithmetic exact for dyadic inputs.
inline AssignmentResult solve_assignment(const std::vector<std::vector<double>>& cost) {
  constexpr double kBig = 1099511627776.0;  // 2^40
  constexpr double kMaxFinite = 1048576.0;  // 2^20

  const std::size_t rows = cost.size();
  const std::size_t cols = rows == 0 ? 0 : cost[0].size();
  for (const auto& row : cost) {
    if (row.size() != cols)
      throw std::invalid_argument("solve_assignment: ragged cost matrix");
    for (const double c : row) {
      if (std::isnan(c) || c == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("solve_assignment: cost must be finite or kForbidden");
      if (c != kForbidden && std::abs(c) >= kMaxFinite)
        throw std::invalid_argument("solve_assignment: |cost| must be < 2^20");
    }
  }

  AssignmentResult result;
  result.row_to_col.assign(rows, -1);
  result.col_to_row.assign(cols, -1);
  if (rows == 0 || cols == 0) return result;

  const std::size_t n = std::max(rows, cols);
  std::vector<std::vector<double>> padded(n, std::vector<double>(n, kBig));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (cost[r][c] != kForbidden) padded[r][c] = cost[r][c];

  const std::vector<int> perm = assign_detail::solve_square(padded);
  for (std::size_t r = 0; r < rows; ++r) {
    const int c = perm[r];
    if (c < 0 || static_cast<std::size_t>(c) >= cols) continue;
    if (cost[r][c] == kForbidden) continue;
    result.row_to_col[r] = c;
    result.col_to_row[c] = static_cast<int>(r);
    result.total_cost += cost[r][c];
    ++result.matched;
  }
  return result;
}

}  // namespace retrack
