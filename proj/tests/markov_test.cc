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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace onoff {
namespace {

using ::onoff::testing::RandomPositiveChain;
using ::onoff::testing::Symmetric;
using ::testing::HasSubstr;

// Sum over all delta-step paths i -> j, times P_{j,k}.
double PathWeight(const TransitionMatrix& p, int i, int j, int k, int delta) {
  const int n = p.n();
  if (delta == 0) return i == j ? p(j, k) : 0.0;
  const int inner = delta - 1;
  int combos = 1;
  for (int s = 0; s < inner; ++s) combos *= n;
  double total = 0.0;
  for (int c = 0; c < combos; ++c) {
    double w = 1.0;
    int prev = i;
    int code = c;
    for (int s = 0; s < inner; ++s) {
      const int next = code % n;
      code /= n;
      w *= p(prev, next);
      prev = next;
    }
    w *= p(prev, j);
    total += w;
  }
  return total * p(j, k);
}

TEST(TransitionMatrixTest, RejectsBadRows) {
  EXPECT_FALSE(TransitionMatrix::Create({{0.5, 0.6}, {0.5, 0.5}}).ok());
  EXPECT_FALSE(TransitionMatrix::Create({{1.2, -0.2}, {0.5, 0.5}}).ok());
  EXPECT_FALSE(TransitionMatrix::Create({{1.0}}).ok());
  EXPECT_FALSE(TransitionMatrix::Create({{0.5, 0.5}, {1.0}}).ok());
  EXPECT_TRUE(
      TransitionMatrix::Create({{0.5, 0.5}, {0.5, 0.5 + 1e-10}}).ok());
}

TEST(TransitionMatrixTest, StrictPositivity) {
  EXPECT_TRUE(Symmetric(3, 0.5).IsStrictlyPositive());
  EXPECT_FALSE(Symmetric(3, 1.0).IsStrictlyPositive());
  EXPECT_FALSE(Symmetric(3, 0.0).IsStrictlyPositive());
}

TEST(SymmetricChainTest, Entries) {
  const TransitionMatrix uniform = Symmetric(3, 1.0 / 3.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(uniform(i, j), 1.0 / 3.0, 1e-15);
  }
  const TransitionMatrix p = Symmetric(3, 0.25);
  EXPECT_DOUBLE_EQ(p(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(p(1, 2), 0.375);
  const TransitionMatrix id = Symmetric(2, 1.0);
  EXPECT_EQ(id(0, 0), 1.0);
  EXPECT_EQ(id(0, 1), 0.0);
  EXPECT_FALSE(SymmetricChain(3, 1.5).ok());
  EXPECT_FALSE(SymmetricChain(1, 0.5).ok());
}

TEST(MatrixPowerTest, IdentityAtZero) {
  std::mt19937_64 rng(1);
  const TransitionMatrix p = RandomPositiveChain(4, rng);
  const SquareMatrix p0 = MatrixPower(p, 0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(p0(i, j), i == j ? 1.0 : 0.0);
  }
}

TEST(MatrixPowerTest, UniformIsIdempotent) {
  const SquareMatrix p5 = MatrixPower(Symmetric(3, 1.0 / 3.0), 5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(p5(i, j), 1.0 / 3.0, 1e-15);
  }
}

// Spectral form of P^t for a symmetric chain:
//   diagonal 1/n + (n-1)/n b^t, off-diagonal 1/n - b^t / n,
//   with b = (n alpha - 1)/(n - 1).
TEST(MatrixPowerTest, SymmetricClosedForm) {
  for (int n : {2, 3, 5}) {
    for (double alpha : {0.0, 0.1, 0.6, 0.95}) {
      const double b = (n * alpha - 1.0) / (n - 1);
      for (int t = 0; t <= 8; ++t) {
        const SquareMatrix pt = MatrixPower(Symmetric(n, alpha), t);
        const double bt = std::pow(b, t);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double want =
                i == j ? 1.0 / n + (n - 1.0) / n * bt : 1.0 / n - bt / n;
            EXPECT_NEAR(pt(i, j), want, 1e-13)
                << "n=" << n << " alpha=" << alpha << " t=" << t;
          }
        }
      }
    }
  }
  const SquareMatrix p2 = MatrixPower(Symmetric(3, 0.6), 2);
  EXPECT_NEAR(p2(0, 0), 0.44, 1e-15);
  EXPECT_NEAR(p2(0, 1), 0.28, 1e-15);
}

TEST(MatrixPowerTest, RowsStayStochastic) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const TransitionMatrix p = RandomPositiveChain(n, rng);
    for (int t : {1, 7, 25, 50}) {
      const SquareMatrix pt = MatrixPower(p, t);
      for (int i = 0; i < n; ++i) {
        const auto row = pt.row(i);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-8);
      }
    }
  }
}

TEST(MatrixPowerTest, MatchesRepeatedMultiplication) {
  std::mt19937_64 rng(3);
  for (int n : {2, 4, 6}) {
    const TransitionMatrix p = RandomPositiveChain(n, rng);
    SquareMatrix naive = SquareMatrix::Identity(n);
    for (int t = 1; t <= 40; ++t) {
      naive = naive * p.matrix();
      const SquareMatrix fast = MatrixPower(p, t);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) EXPECT_NEAR(fast(i, j), naive(i, j), 1e-14);
      }
    }
  }
}

TEST(ContextIndexTest, RoundTrip) {
  for (int n : {2, 3, 6}) {
    for (int u = 0; u < NumContexts(n); ++u) {
      const auto [a, b] = ContextPair(n, u);
      EXPECT_EQ(ContextIndex(n, a, b), u);
    }
  }
  EXPECT_EQ(ContextIndex(3, 1, 2), 5);
}

TEST(ConditionalTableTest, MatchesPathEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + trial % 3;
    const TransitionMatrix p = RandomPositiveChain(n, rng);
    for (int delta = 0; delta <= 4; ++delta) {
      ASSERT_OK_AND_ASSIGN(ConditionalTable cond,
                           BuildConditionalTable(p, delta));
      EXPECT_EQ(cond.delta(), delta);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          double norm = 0.0;
          for (int j = 0; j < n; ++j) norm += PathWeight(p, i, j, k, delta);
          for (int j = 0; j < n; ++j) {
            EXPECT_NEAR(cond(ContextIndex(n, i, k), j),
                        PathWeight(p, i, j, k, delta) / norm, 1e-13);
          }
        }
      }
    }
  }
}

TEST(ConditionalTableTest, RowsSumToOne) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 5;
    const TransitionMatrix p = RandomPositiveChain(n, rng);
    for (int delta = 0; delta <= 10; ++delta) {
      ASSERT_OK_AND_ASSIGN(ConditionalTable cond,
                           BuildConditionalTable(p, delta));
      for (int u = 0; u < cond.m(); ++u) {
        double total = 0.0;
        for (int x = 0; x < n; ++x) {
          EXPECT_GE(cond(u, x), 0.0);
          EXPECT_LE(cond(u, x), 1.0);
          total += cond(u, x);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
    }
  }
}

TEST(ConditionalTableTest, DeltaZeroIsIndicator) {
  std::mt19937_64 rng(5);
  const TransitionMatrix p = RandomPositiveChain(4, rng);
  ASSERT_OK_AND_ASSIGN(ConditionalTable cond, BuildConditionalTable(p, 0));
  for (int u = 0; u < cond.m(); ++u) {
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(cond(u, x), ContextPair(4, u).first == x ? 1.0 : 0.0);
    }
  }
}

TEST(ConditionalTableTest, UniformChain) {
  ASSERT_OK_AND_ASSIGN(ConditionalTable cond,
                       BuildConditionalTable(Symmetric(4, 0.25), 3));
  for (int u = 0; u < cond.m(); ++u) {
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(cond(u, x), 0.25, 1e-15);
  }
}

TEST(ConditionalTableTest, SymmetricExampleValues) {
  ASSERT_OK_AND_ASSIGN(ConditionalTable cond,
                       BuildConditionalTable(Symmetric(3, 0.6), 1));
  EXPECT_NEAR(cond(ContextIndex(3, 0, 0), 0), 9.0 / 11.0, 1e-12);
  EXPECT_NEAR(cond(ContextIndex(3, 0, 0), 1), 1.0 / 11.0, 1e-12);
  EXPECT_NEAR(cond(ContextIndex(3, 0, 0), 0), 0.818182, 1e-6);
  EXPECT_NEAR(cond(ContextIndex(3, 0, 0), 1), 0.0909091, 1e-7);
}

TEST(ConditionalTableTest, ZeroContextProbability) {
  absl::StatusOr<ConditionalTable> cond =
      BuildConditionalTable(Symmetric(3, 1.0), 2);
  ASSERT_FALSE(cond.ok());
  EXPECT_EQ(cond.status().code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_THAT(cond.status().message(), HasSubstr("ZeroContextProbability"));
  EXPECT_FALSE(BuildConditionalTable(Symmetric(3, 0.5), -1).ok());
}

TEST(ConditionalTableTest, PermutationEquivariance) {
  std::mt19937_64 rng(6);
  const int n = 4;
  const TransitionMatrix p = RandomPositiveChain(n, rng);
  std::vector<int> pi = {2, 0, 3, 1};
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) rows[pi[i]][pi[j]] = p(i, j);
  }
  ASSERT_OK_AND_ASSIGN(TransitionMatrix q, TransitionMatrix::Create(rows));
  for (int delta = 0; delta <= 4; ++delta) {
    ASSERT_OK_AND_ASSIGN(ConditionalTable a, BuildConditionalTable(p, delta));
    ASSERT_OK_AND_ASSIGN(ConditionalTable b, BuildConditionalTable(q, delta));
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        for (int x = 0; x < n; ++x) {
          EXPECT_NEAR(b(ContextIndex(n, pi[i], pi[k]), pi[x]),
                      a(ContextIndex(n, i, k), x), 1e-14);
        }
      }
    }
  }
}

// P_{j,k} (P^d)_{i,j} / (P^{d+1})_{i,k} with each power taken from the
// spectral form above.
double HandSigma(int n, double alpha, int delta, bool same_ij, bool same_jk,
                 bool same_ik) {
  const double b = (n * alpha - 1.0) / (n - 1);
  auto pt = [&](int t, bool same) {
    const double bt = std::pow(b, t);
    return same ? 1.0 / n + (n - 1.0) / n * bt : 1.0 / n - bt / n;
  };
  const double step = same_jk ? alpha : (1.0 - alpha) / (n - 1);
  return step * pt(delta, same_ij) / pt(delta + 1, same_ik);
}

TEST(SymmetricSigmasTest, MatchesHandFormulaAndTable) {
  for (int n : {2, 3, 4, 5}) {
    for (double alpha : {0.05, 0.25, 1.0 / n, 0.6, 0.9}) {
      for (int delta = 1; delta <= 5; ++delta) {
        ASSERT_OK_AND_ASSIGN(SymmetricSigmas s,
                             ComputeSymmetricSigmas(n, alpha, delta));
        EXPECT_NEAR(s.sigma1, HandSigma(n, alpha, delta, true, true, true),
                    1e-12);
        EXPECT_NEAR(s.sigma2, HandSigma(n, alpha, delta, true, false, false),
                    1e-12);
        EXPECT_NEAR(s.sigma3, HandSigma(n, alpha, delta, false, true, false),
                    1e-12);
        EXPECT_NEAR(s.sigma4, HandSigma(n, alpha, delta, false, false, true),
                    1e-12);
        if (n >= 3) {
          EXPECT_NEAR(s.sigma5,
                      HandSigma(n, alpha, delta, false, false, false), 1e-12);
        }
        ASSERT_OK_AND_ASSIGN(
            ConditionalTable cond,
            BuildConditionalTable(Symmetric(n, alpha), delta));
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
              EXPECT_NEAR(s.At(i, j, k), cond(ContextIndex(n, i, k), j),
                          1e-12);
            }
          }
        }
      }
    }
  }
}

TEST(SymmetricSigmasTest, ExampleValues) {
  ASSERT_OK_AND_ASSIGN(SymmetricSigmas uniform,
                       ComputeSymmetricSigmas(3, 1.0 / 3.0, 1));
  for (double s : {uniform.sigma1, uniform.sigma2, uniform.sigma3,
                   uniform.sigma4, uniform.sigma5}) {
    EXPECT_NEAR(s, 1.0 / 3.0, 1e-15);
  }
  ASSERT_OK_AND_ASSIGN(SymmetricSigmas s06, ComputeSymmetricSigmas(3, 0.6, 1));
  EXPECT_NEAR(s06.sigma1, 0.818182, 1e-6);
  EXPECT_NEAR(s06.sigma4, 0.0909091, 1e-7);
  ASSERT_OK_AND_ASSIGN(SymmetricSigmas s025,
                       ComputeSymmetricSigmas(3, 0.25, 1));
  EXPECT_NEAR(s025.sigma2, 0.285714, 1e-6);
  EXPECT_NEAR(3 * s025.sigma5, 1.285714, 1e-6);
  EXPECT_FALSE(ComputeSymmetricSigmas(3, 0.5, 0).ok());
}

TEST(SymmetricSigmasTest, OrderingAboveUniform) {
  for (int n : {3, 4, 5}) {
    for (double alpha : {1.0 / n, 0.5, 0.8, 0.999}) {
      for (int delta = 1; delta <= 6; ++delta) {
        ASSERT_OK_AND_ASSIGN(SymmetricSigmas s,
                             ComputeSymmetricSigmas(n, alpha, delta));
        EXPECT_GE(s.sigma1 + 1e-12, s.sigma3);
        EXPECT_GE(s.sigma3 + 1e-12, s.sigma2);
        EXPECT_GE(s.sigma2 + 1e-12, s.sigma5);
        EXPECT_GE(s.sigma5 + 1e-12, s.sigma4);
      }
    }
  }
}

TEST(IntPowTest, Signs) {
  EXPECT_EQ(IntPow(-0.5, 3), -0.125);
  EXPECT_EQ(IntPow(-0.5, 0), 1.0);
  EXPECT_EQ(IntPow(2.0, 10), 1024.0);
}

TEST(ChainJsonTest, RoundTripAndSymmetric) {
  std::mt19937_64 rng(7);
  const TransitionMatrix p = RandomPositiveChain(3, rng);
  ASSERT_OK_AND_ASSIGN(TransitionMatrix back, ChainFromJson(ChainToJson(p)));
  EXPECT_EQ(back, p);
  ASSERT_OK_AND_ASSIGN(
      TransitionMatrix sym,
      ChainFromJson(nlohmann::json::parse(
          R"({"symmetric":{"n":3,"alpha":0.25}})")));
  EXPECT_EQ(sym, Symmetric(3, 0.25));
  EXPECT_FALSE(ChainFromJson(nlohmann::json::parse(R"({"rows":"x"})")).ok());
  EXPECT_FALSE(ChainFromJson(nlohmann::json::parse("[1,2]")).ok());
}

}  // namespace
}  // namespace onoff
