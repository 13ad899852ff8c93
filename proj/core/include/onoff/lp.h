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

// Exact optimal download cost over all uncoded (subset) query schemes.
//
// Variables are the joint masses a(q, x, u) = p(x, q | u) for x in q (pairs
// with x outside q are structural zeros and never instantiated) and the
// shared query masses s(q). The program is
//
//   minimize    sum_q |q| s(q)
//   subject to  sum_{q : x in q} a(q, x, u) = p(x | u)     for all x, u
//               sum_{x in q} a(q, x, u) - s(q) = 0         for all q, u
//               a, s >= 0
//
// and is solved with a dense two-phase simplex using Bland's rule. Only small
// n is practical: the variable count grows like n^3 2^n.

#ifndef ONOFF_LP_H_
#define ONOFF_LP_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"
#include "onoff/markov.h"
#include "onoff/scheme.h"

namespace onoff {

inline constexpr int kMaxLpStates = 5;

struct LpVariable {
  enum class Kind { kJoint, kQuery };
  Kind kind = Kind::kJoint;
  uint32_t query_mask = 0;
  // Unused (-1) for kQuery.
  int x = -1;
  int u = -1;

  bool operator==(const LpVariable&) const = default;
};

struct LpRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;

  bool operator==(const LpRow&) const = default;
};

// min c^T v subject to rows (equalities) and v >= 0.
struct LpProblem {
  int n = 0;
  std::vector<double> objective;
  std::vector<LpRow> rows;
  std::vector<LpVariable> variables;
  int num_joint_vars = 0;
  int num_query_vars = 0;

  int num_vars() const { return static_cast<int>(variables.size()); }
  bool operator==(const LpProblem&) const = default;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* LpStatusName(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  double optimal_value = 0.0;
  std::vector<double> primal;
  int iterations = 0;
  // max_i |A_i v - b_i| at the returned point.
  double max_residual = 0.0;
  double min_primal = 0.0;

  bool operator==(const LpSolution&) const = default;
};

// ResourceExhausted (TooLarge) if n > kMaxLpStates.
absl::StatusOr<LpProblem> FormulateLp(const ConditionalTable& cond);

inline constexpr int kDefaultMaxSimplexIterations = 200000;
inline constexpr double kDefaultSimplexTolerance = 1e-9;

// Never fails; the status field reports infeasible/unbounded/limit outcomes.
LpSolution SolveSimplex(const LpProblem& problem,
                        int max_iters = kDefaultMaxSimplexIterations,
                        double tol = kDefaultSimplexTolerance);

// Optimal E|Q| (= 1/C_t). A non-optimal solver outcome is an error:
// DeadlineExceeded (IterationLimit) or Internal.
absl::StatusOr<double> OptimalCost(const ConditionalTable& cond);
// C_t = 1 / OptimalCost.
absl::StatusOr<double> OptimalRate(const ConditionalTable& cond);

double MaxResidual(const LpProblem& problem, std::span<const double> point);
double ObjectiveValue(const LpProblem& problem, std::span<const double> point);

// Maps a set-form scheme onto LP variables: a = g, s(q) = mean_u p(q|u).
absl::StatusOr<std::vector<double>> LpPointFromScheme(
    const LpProblem& problem, const SchemeDistribution& set_scheme);

nlohmann::json LpProblemToJson(const LpProblem& problem);
absl::StatusOr<LpProblem> LpProblemFromJson(const nlohmann::json& j);
nlohmann::json LpSolutionToJson(const LpProblem& problem,
                                const LpSolution& solution);
absl::StatusOr<LpSolution> LpSolutionFromJson(const nlohmann::json& j);

}  // namespace onoff

#endif  // ONOFF_LP_H_
