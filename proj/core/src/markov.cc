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

#include "onoff/markov.h"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "onoff/status_macros.h"

namespace onoff {

SquareMatrix SquareMatrix::Identity(int n) {
  SquareMatrix id(n);
  for (int i = 0; i < n; ++i) id(i, i) = 1.0;
  return id;
}

SquareMatrix SquareMatrix::operator*(const SquareMatrix& rhs) const {
  SquareMatrix out(n_);
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < n_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (int j = 0; j < n_; ++j) out(i, j) += a * rhs(k, j);
    }
  }
  return out;
}

absl::StatusOr<TransitionMatrix> TransitionMatrix::Create(
    std::vector<std::vector<double>> rows) {
  const int n = static_cast<int>(rows.size());
  SquareMatrix p(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "transition matrix row %d has %d entries, expected %d", i,
          rows[i].size(), n));
    }
    for (int j = 0; j < n; ++j) p(i, j) = rows[i][j];
  }
  return FromMatrix(std::move(p));
}

absl::StatusOr<TransitionMatrix> TransitionMatrix::FromMatrix(SquareMatrix p) {
  const int n = p.n();
  if (n < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("a chain needs at least 2 states, got %d", n));
  }
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double v = p(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "transition probability P[%d][%d] = %g is not a probability", i, j,
            v));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "row %d of the transition matrix sums to %.17g", i, sum));
    }
  }
  return TransitionMatrix(std::move(p));
}

bool TransitionMatrix::IsStrictlyPositive() const {
  for (int i = 0; i < n(); ++i) {
    for (int j = 0; j < n(); ++j) {
      if (!(p_(i, j) > 0.0)) return false;
    }
  }
  return true;
}

SquareMatrix MatrixPower(const TransitionMatrix& p, int delta) {
  SquareMatrix out = SquareMatrix::Identity(p.n());
  SquareMatrix base = p.matrix();
  for (int e = delta; e > 0; e >>= 1) {
    if (e & 1) out = out * base;
    if (e > 1) base = base * base;
  }
  return out;
}

absl::StatusOr<TransitionMatrix> SymmetricChain(int n, double alpha) {
  if (n < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("symmetric chain needs n >= 2, got %d", n));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("alpha = %g is outside [0, 1]", alpha));
  }
  const double off = (1.0 - alpha) / (n - 1);
  SquareMatrix p(n, off);
  for (int i = 0; i < n; ++i) p(i, i) = alpha;
  return TransitionMatrix::FromMatrix(std::move(p));
}

ConditionalTable::ConditionalTable(int n, int delta, std::vector<double> values)
    : n_(n), delta_(delta), values_(std::move(values)) {}

absl::StatusOr<ConditionalTable> BuildConditionalTable(
    const TransitionMatrix& p, int delta) {
  if (delta < 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("gap delta = %d must be nonnegative", delta));
  }
  const int n = p.n();
  const SquareMatrix pd = MatrixPower(p, delta);
  const SquareMatrix pd1 = pd * p.matrix();
  std::vector<double> values(static_cast<size_t>(n) * n * n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double context = pd1(i, k);
      if (!(context > 0.0)) {
        return absl::FailedPreconditionError(absl::StrFormat(
            "ZeroContextProbability: (P^%d)[%d][%d] = 0; the chain must be "
            "strictly positive",
            delta + 1, i, k));
      }
      const int u = ContextIndex(n, i, k);
      // Normalize by the realized numerator sum so rows are stochastic to
      // rounding; the sum equals context analytically.
      double sum = 0.0;
      for (int j = 0; j < n; ++j) sum += p(j, k) * pd(i, j);
      for (int j = 0; j < n; ++j) {
        values[static_cast<size_t>(u) * n + j] = p(j, k) * pd(i, j) / sum;
      }
    }
  }
  return ConditionalTable(n, delta, std::move(values));
}

double IntPow(double x, int k) {
  double result = 1.0;
  for (int s = 0; s < k; ++s) result *= x;
  return result;
}

double SymmetricSigmas::At(int i, int j, int k) const {
  if (i == j && j == k) return sigma1;
  if (i == j) return sigma2;
  if (j == k) return sigma3;
  if (i == k) return sigma4;
  return sigma5;
}

absl::StatusOr<SymmetricSigmas> ComputeSymmetricSigmas(int n, double alpha,
                                                       int delta) {
  if (n < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("symmetric sigmas need n >= 2, got %d", n));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("alpha = %g is outside [0, 1]", alpha));
  }
  if (delta < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("symmetric sigmas need delta >= 1, got %d", delta));
  }
  const double a = n - 1.0;
  const double b = n * alpha - 1.0;
  const double a_d = IntPow(a, delta);
  const double a_d1 = a_d * a;
  const double b_d = IntPow(b, delta);
  const double b_d1 = b_d * b;
  // (P^{delta+1})_{ii} and (P^{delta+1})_{ik} denominators, up to a common
  // factor.
  const double same = a_d + b_d1;
  const double diff = a_d1 - b_d1;
  if (!(same > 0.0) || !(diff > 0.0)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "ZeroContextProbability: symmetric chain n=%d alpha=%g delta=%d has a "
        "zero-probability context",
        n, alpha, delta));
  }
  SymmetricSigmas s;
  s.n = n;
  s.alpha = alpha;
  s.delta = delta;
  s.sigma1 = alpha * (a_d + b_d * a) / same;
  s.sigma2 = (1.0 - alpha) * (a_d + b_d * a) / diff;
  s.sigma3 = alpha * (a_d1 - b_d * a) / diff;
  s.sigma4 = (1.0 - alpha) * (a_d - b_d) / (same * a);
  s.sigma5 = (1.0 - alpha) * (a_d - b_d) / diff;
  return s;
}

absl::StatusOr<TransitionMatrix> ChainFromJson(const nlohmann::json& j) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError("chain JSON must be an object");
  }
  try {
    if (j.contains("symmetric")) {
      const auto& sym = j.at("symmetric");
      return SymmetricChain(sym.at("n").get<int>(),
                            sym.at("alpha").get<double>());
    }
    if (j.contains("rows")) {
      auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
      if (j.contains("n") && j.at("n").get<int>() != static_cast<int>(rows.size())) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "chain declares n = %d but has %d rows", j.at("n").get<int>(),
            rows.size()));
      }
      return TransitionMatrix::Create(std::move(rows));
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrFormat("malformed chain JSON: %s", e.what()));
  }
  return absl::InvalidArgumentError(
      "chain JSON needs either \"rows\" or \"symmetric\"");
}

nlohmann::json ChainToJson(const TransitionMatrix& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < p.n(); ++i) {
    const auto r = p.matrix().row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"n", p.n()}, {"rows", rows}};
}

}  // namespace onoff
