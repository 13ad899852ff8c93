//
// Copyright 2026 The ON-OFF Privacy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef ONOFF_TESTS_TEST_UTIL_H_
#define ONOFF_TESTS_TEST_UTIL_H_

#include <random>
#include <vector>

#include "absl/status/statusor.h"
#include "gtest/gtest.h"
#include "onoff/markov.h"

#define ONOFF_TEST_CONCAT_INNER_(a, b) a##b
#define ONOFF_TEST_CONCAT_(a, b) ONOFF_TEST_CONCAT_INNER_(a, b)

#define ONOFF_ASSERT_OK_AND_ASSIGN_IMPL_(so, lhs, rexpr) \
  auto so = (rexpr);                                     \
  ASSERT_TRUE(so.ok()) << so.status();                   \
  lhs = std::move(so).value()

#define ASSERT_OK_AND_ASSIGN(lhs, rexpr)                                 \
  ONOFF_ASSERT_OK_AND_ASSIGN_IMPL_(                                      \
      ONOFF_TEST_CONCAT_(_onoff_test_so_, __LINE__), lhs, rexpr)

namespace onoff::testing {

// Rows drawn uniformly from [lo, 1] and normalized; strictly positive.
inline TransitionMatrix RandomPositiveChain(int n, std::mt19937_64& rng,
                                            double lo = 0.05) {
  std::uniform_real_distribution<double> dist(lo, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  for (auto& row : rows) {
    double total = 0.0;
    for (double& v : row) {
      v = dist(rng);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return TransitionMatrix::Create(rows).value();
}

inline TransitionMatrix Symmetric(int n, double alpha) {
  return SymmetricChain(n, alpha).value();
}

}  // namespace onoff::testing

#endif  // ONOFF_TESTS_TEST_UTIL_H_
