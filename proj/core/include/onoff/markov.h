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

// Markov request model: transition matrices, their powers, and the
// conditional likelihood tables p(X_t = x | X_tau = i, X_{t+1} = k) that the
// rate bounds and the query scheme are computed from.
//
// States are labelled 0..n-1. A context u is the pair (x_tau, x_next) encoded
// as u = x_tau * n + x_next, so there are m = n * n contexts.

#ifndef ONOFF_MARKOV_H_
#define ONOFF_MARKOV_H_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"

namespace onoff {

// Tolerance on row sums of stochastic matrices and tables.
inline constexpr double kStochasticTolerance = 1e-9;

// Dense row-major square matrix of doubles.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(int n, double fill = 0.0)
      : n_(n), data_(static_cast<size_t>(n) * n, fill) {}

  static SquareMatrix Identity(int n);

  int n() const { return n_; }
  double operator()(int i, int j) const { return data_[Index(i, j)]; }
  double& operator()(int i, int j) { return data_[Index(i, j)]; }
  std::span<const double> row(int i) const {
    return {data_.data() + static_cast<size_t>(i) * n_,
            static_cast<size_t>(n_)};
  }

  SquareMatrix operator*(const SquareMatrix& rhs) const;
  bool operator==(const SquareMatrix&) const = default;

 private:
  size_t Index(int i, int j) const { return static_cast<size_t>(i) * n_ + j; }

  int n_ = 0;
  std::vector<double> data_;
};

// Row-stochastic transition matrix of an n-state chain, n >= 2.
class TransitionMatrix {
 public:
  // Validates nonnegativity and unit row sums (within kStochasticTolerance).
  static absl::StatusOr<TransitionMatrix> Create(
      std::vector<std::vector<double>> rows);
  static absl::StatusOr<TransitionMatrix> FromMatrix(SquareMatrix p);

  int n() const { return p_.n(); }
  double operator()(int i, int j) const { return p_(i, j); }
  const SquareMatrix& matrix() const { return p_; }

  // True iff every entry is > 0. Scheme construction requires this.
  bool IsStrictlyPositive() const;

  bool operator==(const TransitionMatrix&) const = default;

 private:
  explicit TransitionMatrix(SquareMatrix p) : p_(std::move(p)) {}

  SquareMatrix p_;
};

// P^delta by binary exponentiation; P^0 is the identity.
SquareMatrix MatrixPower(const TransitionMatrix& p, int delta);

// Diagonal alpha, off-diagonal (1 - alpha) / (n - 1).
absl::StatusOr<TransitionMatrix> SymmetricChain(int n, double alpha);

// Number of contexts for an n-state chain.
inline int NumContexts(int n) { return n * n; }
inline int ContextIndex(int n, int x_tau, int x_next) {
  return x_tau * n + x_next;
}
inline std::pair<int, int> ContextPair(int n, int u) {
  return {u / n, u % n};
}

// p(X_t = x | U_t = u) for a fixed gap delta = t - tau.
class ConditionalTable {
 public:
  ConditionalTable(int n, int delta, std::vector<double> values);

  int n() const { return n_; }
  int m() const { return n_ * n_; }
  int delta() const { return delta_; }

  double operator()(int u, int x) const {
    return values_[static_cast<size_t>(u) * n_ + x];
  }
  std::span<const double> row(int u) const {
    return {values_.data() + static_cast<size_t>(u) * n_,
            static_cast<size_t>(n_)};
  }
  // Row-major by context.
  const std::vector<double>& values() const { return values_; }

  bool operator==(const ConditionalTable&) const = default;

 private:
  int n_;
  int delta_;
  std::vector<double> values_;
};

// p(X_t=j | X_tau=i, X_{t+1}=k) = P_{j,k} (P^delta)_{i,j} / (P^{delta+1})_{i,k}.
// Fails with FailedPrecondition (ZeroContextProbability) if some context has
// zero probability.
absl::StatusOr<ConditionalTable> BuildConditionalTable(
    const TransitionMatrix& p, int delta);

// The five distinct values of the conditional table of a symmetric chain.
//   sigma1: i = j = k      sigma2: i = j != k     sigma3: i != j = k
//   sigma4: i = k != j     sigma5: i, j, k pairwise distinct
struct SymmetricSigmas {
  int n = 0;
  double alpha = 0.0;
  int delta = 0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  double sigma4 = 0.0;
  double sigma5 = 0.0;

  // Value of the five-case table at (x_tau=i, x=j, x_next=k).
  double At(int i, int j, int k) const;
};

absl::StatusOr<SymmetricSigmas> ComputeSymmetricSigmas(int n, double alpha,
                                                       int delta);

// x^k for integer k >= 0, exact in sign for negative bases.
double IntPow(double x, int k);

// Reads {"n":..,"rows":[[..]]} or {"symmetric":{"n":..,"alpha":..}}.
absl::StatusOr<TransitionMatrix> ChainFromJson(const nlohmann::json& j);
nlohmann::json ChainToJson(const TransitionMatrix& p);

}  // namespace onoff

#endif  // ONOFF_MARKOV_H_
