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

#ifndef PANOSLOT_HUNGARIAN_HPP_
#define PANOSLOT_HUNGARIAN_HPP_

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace panoslot {

struct Assignment {
  // (row, column) pairs sorted by row.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

// Minimum-cost one-to-one assignment of min(N, M) pairs for an N x M cost
// matrix (Kuhn-Munkres with potentials, O(n^2 m)). Among optimal assignments
// the result is the lexicographically smallest: walking the smaller side in
// index order, each index takes the lowest-index partner that still admits
// an optimal completion. Throws NumericError on non-finite costs.
Assignment hungarian(const Eigen::MatrixXd& cost);

}  // namespace panoslot

#endif  // PANOSLOT_HUNGARIAN_HPP_
