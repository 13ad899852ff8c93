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

// Independent checker for query distributions. Everything is recomputed from
// the sparse entries alone; nothing is shared with the construction code.

#ifndef ONOFF_VERIFY_H_
#define ONOFF_VERIFY_H_

#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"
#include "onoff/bounds.h"
#include "onoff/markov.h"
#include "onoff/scheme.h"

namespace onoff {

inline constexpr double kDefaultVerifyTolerance = 1e-9;

struct DecodabilityViolation {
  MultisetQuery query;
  int x = 0;
  int u = 0;

  bool operator==(const DecodabilityViolation&) const = default;
};

struct VerificationReport {
  double tol = kDefaultVerifyTolerance;
  std::vector<DecodabilityViolation> decodability_violations;
  // max over q and contexts u, u' of |p(q|u) - p(q|u')|.
  double max_privacy_gap = 0.0;
  // marginal_errors[u * n + x] = |sum_q g(q,x,u) - p(x|u)|.
  std::vector<double> marginal_errors;
  double max_marginal_error = 0.0;
  // size_law_errors[l-1] = |P(|Z| = l) - theta_l|, with P(|Z| = l) averaged
  // over contexts. Empty for set-form schemes.
  std::vector<double> size_law_errors;
  double max_size_law_error = 0.0;
  // Negative masses are reported here rather than silently accepted.
  double min_mass = 0.0;
  // E|Q| (or E|Z|) under a uniform context prior.
  double expected_cost = 0.0;
  // inner cost - expected_cost
  double cost_slack = 0.0;
  size_t entry_count = 0;
  // m * n^4
  size_t entry_bound = 0;

  bool decodable() const { return decodability_violations.empty(); }
  bool private_() const { return max_privacy_gap < tol; }
  bool Passes() const;
};

// InvalidArgument (DimensionMismatch) if scheme, table and profile disagree
// on n, or an entry lies outside the alphabet.
absl::StatusOr<VerificationReport> CheckScheme(
    const SchemeDistribution& scheme, const ConditionalTable& cond,
    const ThetaProfile& profile, double tol = kDefaultVerifyTolerance);

// sum_q p(q) |q| with p(q) = sum_u prior(u) sum_x g(q, x, u). Units are
// messages; multiply by L for bytes.
absl::StatusOr<double> ExpectedCost(const SchemeDistribution& scheme,
                                    const ConditionalTable& cond,
                                    std::span<const double> u_prior);

// Downloads every message regardless of request: w(N | x, u) = 1.
SchemeDistribution DownloadAllScheme(const ConditionalTable& cond);

nlohmann::json ReportToJson(const VerificationReport& report);

}  // namespace onoff

#endif  // ONOFF_VERIFY_H_
