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

#include "onoff/verify.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace onoff {
namespace {

absl::Status CheckEntryRanges(const SchemeDistribution& scheme) {
  const int n = scheme.n();
  for (const SchemeEntry& e : scheme.entries()) {
    if (e.query.n() != n || e.x < 0 || e.x >= n || e.u < 0 ||
        e.u >= n * n) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "DimensionMismatch: entry (x=%d, u=%d) does not fit n = %d", e.x,
          e.u, n));
    }
  }
  return absl::OkStatus();
}

}  // namespace

bool VerificationReport::Passes() const {
  return decodable() && max_privacy_gap < tol && max_marginal_error < tol &&
         max_size_law_error < tol && cost_slack >= -tol && min_mass >= -tol;
}

absl::StatusOr<VerificationReport> CheckScheme(
    const SchemeDistribution& scheme, const ConditionalTable& cond,
    const ThetaProfile& profile, double tol) {
  const int n = scheme.n();
  const int m = n * n;
  if (cond.n() != n || profile.n != n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "DimensionMismatch: scheme n = %d, table n = %d, profile n = %d", n,
        cond.n(), profile.n));
  }
  if (absl::Status s = CheckEntryRanges(scheme); !s.ok()) return s;

  VerificationReport report;
  report.tol = tol;
  report.entry_count = scheme.size();
  report.entry_bound = static_cast<size_t>(m) * n * n * n * n;

  std::vector<double> marginal(static_cast<size_t>(m) * n, 0.0);
  std::map<MultisetQuery, std::vector<double>> query_given_context;
  for (const SchemeEntry& e : scheme.entries()) {
    if (!e.query.Contains(e.x)) {
      report.decodability_violations.push_back({e.query, e.x, e.u});
    }
    report.min_mass = std::min(report.min_mass, e.mass);
    marginal[static_cast<size_t>(e.u) * n + e.x] += e.mass;
    auto& row = query_given_context[e.query];
    if (row.empty()) row.assign(m, 0.0);
    row[e.u] += e.mass;
  }

  report.marginal_errors.assign(static_cast<size_t>(m) * n, 0.0);
  for (int u = 0; u < m; ++u) {
    for (int x = 0; x < n; ++x) {
      const size_t k = static_cast<size_t>(u) * n + x;
      report.marginal_errors[k] = std::abs(marginal[k] - cond(u, x));
      report.max_marginal_error =
          std::max(report.max_marginal_error, report.marginal_errors[k]);
    }
  }

  std::vector<double> size_mass(static_cast<size_t>(n) + 1, 0.0);
  double cost = 0.0;
  for (const auto& [query, row] : query_given_context) {
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    report.max_privacy_gap = std::max(report.max_privacy_gap, *hi - *lo);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= m;
    const int size = query.Cardinality();
    cost += mean * size;
    if (size >= 1 && size <= n) size_mass[size] += mean;
  }
  report.expected_cost = cost;
  report.cost_slack = InverseRateInner(profile) - cost;

  if (scheme.form() == SchemeForm::kMultiset) {
    report.size_law_errors.assign(n, 0.0);
    for (int l = 1; l <= n; ++l) {
      report.size_law_errors[l - 1] =
          std::abs(size_mass[l] - profile.theta[l - 1]);
      report.max_size_law_error =
          std::max(report.max_size_law_error, report.size_law_errors[l - 1]);
    }
  }
  return report;
}

absl::StatusOr<double> ExpectedCost(const SchemeDistribution& scheme,
                                    const ConditionalTable& cond,
                                    std::span<const double> u_prior) {
  const int n = scheme.n();
  const int m = n * n;
  if (cond.n() != n || static_cast<int>(u_prior.size()) != m) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "DimensionMismatch: scheme n = %d, table n = %d, prior length %d", n,
        cond.n(), u_prior.size()));
  }
  double total = 0.0;
  for (double w : u_prior) total += w;
  if (std::abs(total - 1.0) > kStochasticTolerance) {
    return absl::InvalidArgumentError(
        absl::StrFormat("context prior sums to %.17g", total));
  }
  if (absl::Status s = CheckEntryRanges(scheme); !s.ok()) return s;
  double cost = 0.0;
  for (const SchemeEntry& e : scheme.entries()) {
    cost += u_prior[e.u] * e.mass * e.query.Cardinality();
  }
  return cost;
}

SchemeDistribution DownloadAllScheme(const ConditionalTable& cond) {
  const int n = cond.n();
  const MultisetQuery full = MultisetQuery::Full(n);
  std::vector<SchemeEntry> entries;
  for (int u = 0; u < cond.m(); ++u) {
    for (int x = 0; x < n; ++x) {
      if (cond(u, x) > 0.0) entries.push_back({full, x, u, cond(u, x)});
    }
  }
  return SchemeDistribution(n, cond.delta(), SchemeForm::kSet,
                            std::move(entries));
}

nlohmann::json ReportToJson(const VerificationReport& report) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.decodability_violations) {
    violations.push_back({{"q", v.query.Elements()}, {"x", v.x}, {"u", v.u}});
  }
  return {
      {"passes", report.Passes()},
      {"tol", report.tol},
      {"decodability_violations", violations},
      {"max_privacy_gap", report.max_privacy_gap},
      {"max_marginal_error", report.max_marginal_error},
      {"marginal_errors", report.marginal_errors},
      {"size_law_errors", report.size_law_errors},
      {"max_size_law_error", report.max_size_law_error},
      {"min_mass", report.min_mass},
      {"expected_cost", report.expected_cost},
      {"cost_slack", report.cost_slack},
      {"entry_count", report.entry_count},
      {"entry_bound", report.entry_bound},
  };
}

}  // namespace onoff
