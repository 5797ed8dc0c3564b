#include "metacog/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace metacog {

namespace {

// Potentials-based assignment for n <= m; cost(i,j) = a[i*m + j].
// Returns per-row assigned column (all rows assigned).
std::vector<int> solve_rows_le_cols(const std::vector<double>& a, std::size_t n, std::size_t m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace

std::vector<int> min_cost_assignment(const std::vector<double>& cost, std::size_t num_rows,
                                     std::size_t num_cols) {
  if (cost.size() != num_rows * num_cols) {
    throw std::invalid_argument("assignment: cost matrix size mismatch");
  }
  for (double c : cost) {
    if (!std::isfinite(c)) throw std::invalid_argument("assignment: costs must be finite");
  }
  if (num_rows == 0 || num_cols == 0) return std::vector<int>(num_rows, -1);
  if (num_rows <= num_cols) return solve_rows_le_cols(cost, num_rows, num_cols);
  // Transpose so rows <= cols, then invert the mapping.
  std::vector<double> t(cost.size());
  for (std::size_t i = 0; i < num_rows; ++i) {
    for (std::size_t j = 0; j < num_cols; ++j) t[j * num_rows + i] = cost[i * num_cols + j];
  }
  const std::vector<int> col_to_row = solve_rows_le_cols(t, num_cols, num_rows);
  std::vector<int> row_to_col(num_rows, -1);
  for (std::size_t j = 0; j < num_cols; ++j) {
    if (col_to_row[j] >= 0) row_to_col[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
  }
  return row_to_col;
}

}  // namespace metacog
