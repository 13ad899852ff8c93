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

#include "onoff/bounds.h"

#include <algorithm>
#include <numeric>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "onoff/status_macros.h"

namespace onoff {
namespace {

// alpha within this of 1/n counts as the large-alpha regime.
constexpr double kRegimeTolerance = 1e-12;

}  // namespace

absl::StatusOr<ThetaProfile> ComputeThetaProfile(const ConditionalTable& cond,
                                                 TieBreak tie_break) {
  const int n = cond.n();
  const int m = cond.m();
  ThetaProfile profile;
  profile.n = n;
  profile.m = m;
  profile.order.assign(n, std::vector<int>(m));
  profile.lambda_xi.assign(n, std::vector<double>(m));
  for (int x = 0; x < n; ++x) {
    std::vector<int>& order = profile.order[x];
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double va = cond(a, x);
      const double vb = cond(b, x);
      if (va != vb) return va < vb;
      return tie_break == TieBreak::kAscendingContext ? a < b : a > b;
    });
    for (int i = 0; i < m; ++i) profile.lambda_xi[x][i] = cond(order[i], x);
  }
  profile.lambda_rows.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int x = 0; x < n; ++x) profile.lambda_rows[i] += profile.lambda_xi[x][i];
  }
  profile.theta.assign(n, 0.0);
  double previous = 0.0;
  for (int l = 1; l <= n; ++l) {
    const double current = l < n ? profile.lambda_rows[l - 1] : 1.0;
    double theta = current - previous;
    if (theta < 0.0) {
      if (theta < -kThetaClipTolerance) {
        return absl::InternalError(absl::StrFormat(
            "theta_%d = %.17g is negative beyond tolerance", l, theta));
      }
      theta = 0.0;
    }
    profile.theta[l - 1] = theta;
    previous = current;
  }
  return profile;
}

double InverseRateInner(const ThetaProfile& profile) {
  double cost = 0.0;
  for (int l = 1; l <= profile.n; ++l) cost += l * profile.theta[l - 1];
  return cost;
}

double InverseRateOuter(const ThetaProfile& profile) {
  return profile.lambda_rows.back();
}

RateBounds ComputeRateBounds(const ThetaProfile& profile) {
  return {InverseRateInner(profile), InverseRateOuter(profile)};
}

absl::StatusOr<RateBounds> RateBoundsForChain(const TransitionMatrix& p,
                                              int delta) {
  ASSIGN_OR_RETURN(const ConditionalTable cond, BuildConditionalTable(p, delta));
  ASSIGN_OR_RETURN(const ThetaProfile profile, ComputeThetaProfile(cond));
  return ComputeRateBounds(profile);
}

absl::StatusOr<double> ClosedFormTwoStates(const ConditionalTable& cond) {
  if (cond.n() != 2) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "WrongArity: the two-state closed form needs n = 2, got %d", cond.n()));
  }
  double cost = 0.0;
  for (int x = 0; x < 2; ++x) {
    double best = 0.0;
    for (int u = 0; u < cond.m(); ++u) best = std::max(best, cond(u, x));
    cost += best;
  }
  return cost;
}

absl::StatusOr<double> ClosedFormSymmetric(int n, double alpha, int delta) {
  if (n * alpha < 1.0 - kRegimeTolerance) {
    return absl::OutOfRangeError(absl::StrFormat(
        "OutOfRegime: alpha = %g is below 1/n = %g", alpha, 1.0 / n));
  }
  ASSIGN_OR_RETURN(const SymmetricSigmas s,
                   ComputeSymmetricSigmas(n, alpha, delta));
  return n * s.sigma1;
}

absl::StatusOr<SmallAlphaCosts> ClosedFormSmallAlpha(int n, double alpha,
                                                     int delta) {
  if (!(n * alpha < 1.0)) {
    return absl::OutOfRangeError(absl::StrFormat(
        "OutOfRegime: alpha = %g is not below 1/n = %g", alpha, 1.0 / n));
  }
  ASSIGN_OR_RETURN(const SymmetricSigmas s,
                   ComputeSymmetricSigmas(n, alpha, delta));
  const double nn = n;
  SmallAlphaCosts costs;
  if (delta % 2 == 0) {
    costs.inv_r_outer = nn * s.sigma2;
    costs.inv_r_inner = nn * s.sigma3 + nn - nn * nn * s.sigma3;
  } else {
    costs.inv_r_outer = nn * s.sigma5;
    costs.inv_r_inner = s.sigma3 * (2 * nn - nn * nn) - nn * s.sigma1 + nn;
  }
  return costs;
}

}  // namespace onoff
