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

// Download-rate bounds for ON-OFF private retrieval.
//
// For each request x, the m likelihoods p(x|u) are sorted ascending; the i-th
// smallest is lambda_{x,i}, attained at context u_{x,i}. Row sums
// lambda_i = sum_x lambda_{x,i} are nondecreasing in i, and the increments
// theta_i = lambda_i - lambda_{i-1} (i < n), theta_n = 1 - lambda_{n-1} form a
// probability vector. All costs below are 1/R in units of messages per step:
//
//   inner (achievable) cost  sum_i i * theta_i
//   outer (converse)  cost   lambda_m = sum_x max_u p(x|u)

#ifndef ONOFF_BOUNDS_H_
#define ONOFF_BOUNDS_H_

#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "onoff/markov.h"

namespace onoff {

enum class TieBreak {
  kAscendingContext,
  kDescendingContext,
};

struct ThetaProfile {
  int n = 0;
  int m = 0;
  // order[x][i]: context attaining the (i+1)-th smallest p(x|u).
  std::vector<std::vector<int>> order;
  // lambda_xi[x][i] = p(x | order[x][i]).
  std::vector<std::vector<double>> lambda_xi;
  // lambda_rows[i] = sum_x lambda_xi[x][i], length m.
  std::vector<double> lambda_rows;
  // theta[l-1] = theta_l for l = 1..n.
  std::vector<double> theta;

  // lambda_{x,i} with the 1-based convention lambda_{x,0} = 0.
  double Lambda(int x, int i) const {
    return i == 0 ? 0.0 : lambda_xi[x][i - 1];
  }
};

// Floating noise below this is clipped to zero when computing theta.
inline constexpr double kThetaClipTolerance = 1e-12;

// Fails with Internal if some theta_i < -kThetaClipTolerance, which would
// contradict the nonnegativity guaranteed for every chain.
absl::StatusOr<ThetaProfile> ComputeThetaProfile(
    const ConditionalTable& cond,
    TieBreak tie_break = TieBreak::kAscendingContext);

struct RateBounds {
  double inv_r_inner = 0.0;
  double inv_r_outer = 0.0;

  double r_inner() const { return 1.0 / inv_r_inner; }
  double r_outer() const { return 1.0 / inv_r_outer; }
};

double InverseRateInner(const ThetaProfile& profile);
double InverseRateOuter(const ThetaProfile& profile);
RateBounds ComputeRateBounds(const ThetaProfile& profile);

// Chain -> conditional table -> profile -> bounds.
absl::StatusOr<RateBounds> RateBoundsForChain(const TransitionMatrix& p,
                                              int delta);

// Two-state chains: inner and outer bounds coincide at lambda_m.
// InvalidArgument (WrongArity) unless n == 2.
absl::StatusOr<double> ClosedFormTwoStates(const ConditionalTable& cond);

// Symmetric chain with 1/n <= alpha <= 1: the common cost n * sigma1.
// OutOfRange (OutOfRegime) for alpha < 1/n.
absl::StatusOr<double> ClosedFormSymmetric(int n, double alpha, int delta);

struct SmallAlphaCosts {
  double inv_r_outer = 0.0;
  double inv_r_inner = 0.0;
};

// Symmetric chain with alpha < 1/n, where the likelihood order depends on the
// parity of delta:
//   even: outer n*s2, inner n*s3 + n - n^2*s3
//   odd:  outer n*s5, inner s3*(2n - n^2) - n*s1 + n
// OutOfRange (OutOfRegime) for alpha >= 1/n.
absl::StatusOr<SmallAlphaCosts> ClosedFormSmallAlpha(int n, double alpha,
                                                     int delta);

}  // namespace onoff

#endif  // ONOFF_BOUNDS_H_
