/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "panoslot/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "panoslot/errors.hpp"

namespace panoslot {
namespace {

// Optimal value and row->column map for rows <= cols.
double solve_rows_le_cols(const Eigen::MatrixXd& a,
                          std::vector<std::size_t>* row_to_col) {
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const std::size_t m = static_cast<std::size_t>(a.cols());
  if (n == 0) {
    if (row_to_col) row_to_col->clear();
    return 0.0;
  }
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
        const double cur = a(static_cast<Eigen::Index>(i0 - 1),
                             static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
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
  std::vector<std::size_t> r2c(n, 0);
  double total = 0.0;
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    r2c[p[j] - 1] = j - 1;
    total += a(static_cast<Eigen::Index>(p[j] - 1), static_cast<Eigen::Index>(j - 1));
  }
  if (row_to_col) *row_to_col = std::move(r2c);
  return total;
}

Eigen::MatrixXd drop(const Eigen::MatrixXd& a, const std::vector<char>& row_gone,
                     const std::vector<char>& col_gone) {
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (!row_gone[static_cast<std::size_t>(r)]) rows.push_back(r);
  }
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    if (!col_gone[static_cast<std::size_t>(c)]) cols.push_back(c);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          a(rows[i], cols[j]);
    }
  }
  return out;
}

// Lexicographically smallest optimal row->column map, rows <= cols.
std::vector<std::size_t> lexicographic_optimum(const Eigen::MatrixXd& a) {
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const std::size_t m = static_cast<std::size_t>(a.cols());
  const double best = solve_rows_le_cols(a, nullptr);
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  std::vector<char> row_gone(n, 0), col_gone(m, 0);
  std::vector<std::size_t> result(n, 0);
  double fixed = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    row_gone[i] = 1;
    bool placed = false;
    for (std::size_t j = 0; j < m && !placed; ++j) {
      if (col_gone[j]) continue;
      col_gone[j] = 1;
      const double c = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double rest = solve_rows_le_cols(drop(a, row_gone, col_gone), nullptr);
      if (fixed + c + rest <= best + tol) {
        result[i] = j;
        fixed += c;
        placed = true;
      } else {
        col_gone[j] = 0;
      }
    }
    if (!placed) {
      // Only reachable through accumulated rounding; fall back to the plain
      // solver's answer.
      std::vector<std::size_t> plain;
      solve_rows_le_cols(a, &plain);
      return plain;
    }
  }
  return result;
}

}  // namespace

Assignment hungarian(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) {
    throw NumericError("hungarian: cost matrix contains NaN or Inf");
  }
  Assignment out;
  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const std::vector<std::size_t> r2c = lexicographic_optimum(a);
  for (std::size_t i = 0; i < r2c.size(); ++i) {
    if (transposed) {
      out.pairs.emplace_back(r2c[i], i);
    } else {
      out.pairs.emplace_back(i, r2c[i]);
    }
    out.total_cost += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r2c[i]));
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

}  // namespace panoslot
