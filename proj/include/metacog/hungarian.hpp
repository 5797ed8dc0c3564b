#pragma once

#include <cstddef>
#include <vector>

namespace metacog {

// Exact minimum-cost assignment (Kuhn-Munkres with potentials, O(n^3)).
// cost is row-major with num_rows * num_cols entries. Returns, per row, the
// assigned column or -1. When num_rows <= num_cols every row is assigned;
// otherwise exactly num_cols rows are.
std::vector<int> min_cost_assignment(const std::vector<double>& cost, std::size_t num_rows,
                                     std::size_t num_cols);

}  // namespace metacog
