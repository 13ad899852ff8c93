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

#include "onoff/scheme.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "onoff/bounds.h"
#include "onoff/markov.h"
#include "test_util.h"

namespace onoff {
namespace {

using ::onoff::testing::RandomPositiveChain;
using ::onoff::testing::Symmetric;
using ::testing::ElementsAre;
using ::testing::HasSubstr;

struct Built {
  ConditionalTable cond;
  ThetaProfile profile;
  SchemeBuild build;
};

Built BuildFor(const TransitionMatrix& p, int delta) {
  ConditionalTable cond = BuildConditionalTable(p, delta).value();
  ThetaProfile profile = ComputeThetaProfile(cond).value();
  absl::StatusOr<SchemeBuild> build = BuildSchemeWithLedger(profile, cond);
  EXPECT_TRUE(build.ok()) << build.status();
  return {std::move(cond), std::move(profile), std::move(build).value()};
}

// P(|Z| = l) averaged over contexts, indexed by l.
std::vector<double> SizeLaw(const SchemeDistribution& s) {
  std::vector<double> law(s.n() + 1, 0.0);
  for (const SchemeEntry& e : s.entries()) {
    law[e.query.Cardinality()] += e.mass / s.m();
  }
  return law;
}

TEST(MultisetQueryTest, Basics) {
  const std::vector<int> elems = {2, 0, 2};
  ASSERT_OK_AND_ASSIGN(MultisetQuery z, MultisetQuery::FromElements(4, elems));
  EXPECT_EQ(z.Cardinality(), 3);
  EXPECT_EQ(z.SupportSize(), 2);
  EXPECT_FALSE(z.IsSet());
  EXPECT_THAT(z.Elements(), ElementsAre(0, 2, 2));
  EXPECT_EQ(z.SupportMask(), 0b101u);
  EXPECT_EQ(z.Support(), MultisetQuery::FromMask(4, 0b101));
  EXPECT_TRUE(z.Support().IsSet());
  EXPECT_TRUE(z.Contains(2));
  EXPECT_FALSE(z.Contains(1));
  EXPECT_EQ(MultisetQuery::Full(3).Cardinality(), 3);
  EXPECT_EQ(MultisetQuery::Singleton(3, 1).SupportMask(), 0b010u);
  const std::vector<int> bad = {4};
  EXPECT_FALSE(MultisetQuery::FromElements(4, bad).ok());
}

TEST(RefineSegmentsTest, SingleRow) {
  const std::vector<std::vector<ExtractionPiece>> rows = {{{3, 0.4}}};
  ASSERT_OK_AND_ASSIGN(auto segs, RefineSegments(rows));
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_THAT(segs[0].columns, ElementsAre(3));
  EXPECT_DOUBLE_EQ(segs[0].width, 0.4);
}

TEST(RefineSegmentsTest, TwoRows) {
  const std::vector<std::vector<ExtractionPiece>> rows = {
      {{0, 0.2}, {1, 0.3}}, {{2, 0.5}}};
  ASSERT_OK_AND_ASSIGN(auto segs, RefineSegments(rows));
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_THAT(segs[0].columns, ElementsAre(0, 2));
  EXPECT_NEAR(segs[0].width, 0.2, 1e-15);
  EXPECT_THAT(segs[1].columns, ElementsAre(1, 2));
  EXPECT_NEAR(segs[1].width, 0.3, 1e-15);
}

TEST(RefineSegmentsTest, MismatchedTotals) {
  const std::vector<std::vector<ExtractionPiece>> rows = {{{0, 0.2}},
                                                          {{1, 0.3}}};
  absl::StatusOr<std::vector<RefinedSegment>> segs = RefineSegments(rows);
  ASSERT_FALSE(segs.ok());
  EXPECT_THAT(segs.status().message(), HasSubstr("MismatchedTotals"));
}

TEST(RefineSegmentsTest, RandomRowsReconstructMarginals) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double total = 0.1 + unit(rng);
    std::vector<std::vector<ExtractionPiece>> rows(4);
    for (int i = 0; i < 4; ++i) {
      const int pieces = 1 + trial % 5 + i;
      std::vector<double> cuts;
      for (int c = 0; c + 1 < pieces; ++c) cuts.push_back(unit(rng) * total);
      cuts.push_back(0.0);
      cuts.push_back(total);
      std::sort(cuts.begin(), cuts.end());
      for (size_t c = 0; c + 1 < cuts.size(); ++c) {
        rows[i].push_back({static_cast<int>(c), cuts[c + 1] - cuts[c]});
      }
    }
    ASSERT_OK_AND_ASSIGN(auto segs, RefineSegments(rows));
    double width = 0.0;
    for (const auto& s : segs) {
      EXPECT_GT(s.width, 0.0);
      width += s.width;
    }
    EXPECT_NEAR(width, total, 1e-12);
    for (int i = 0; i < 4; ++i) {
      std::map<int, double> got;
      for (const auto& s : segs) got[s.columns[i]] += s.width;
      for (const ExtractionPiece& piece : rows[i]) {
        EXPECT_NEAR(got[piece.column], piece.value, 1e-12);
      }
    }
  }
}

TEST(BuildSchemeTest, UniformChainIsSingletons) {
  const int n = 3;
  Built b = BuildFor(Symmetric(n, 1.0 / n), 2);
  const SchemeDistribution& s = b.build.scheme;
  ASSERT_EQ(s.size(), static_cast<size_t>(n * n * n));
  for (const SchemeEntry& e : s.entries()) {
    EXPECT_EQ(e.query, MultisetQuery::Singleton(n, e.x));
    EXPECT_NEAR(e.mass, 1.0 / n, 1e-12);
  }
  EXPECT_NEAR(SizeLaw(s)[1], 1.0, 1e-12);
}

TEST(BuildSchemeTest, DeltaZeroDownloadsEverything) {
  std::mt19937_64 rng(22);
  const Built b = BuildFor(RandomPositiveChain(4, rng), 0);
  for (const SchemeEntry& e : b.build.scheme.entries()) {
    EXPECT_EQ(e.query, MultisetQuery::Full(4));
  }
  EXPECT_NEAR(SizeLaw(b.build.scheme)[4], 1.0, 1e-12);
}

TEST(BuildSchemeTest, SymmetricExample) {
  const Built b = BuildFor(Symmetric(3, 0.6), 1);
  const std::vector<double> law = SizeLaw(b.build.scheme);
  EXPECT_NEAR(law[1], 0.272727, 1e-6);
  EXPECT_NEAR(law[2], 0.0, 1e-12);
  EXPECT_NEAR(law[3], 0.727273, 1e-6);
  EXPECT_NEAR(law[1] + 2 * law[2] + 3 * law[3], 2.454545, 1e-6);

  const SchemeDistribution sets = CollapseToSets(b.build.scheme);
  const std::vector<double> set_law = SizeLaw(sets);
  EXPECT_LE(set_law[1] + 2 * set_law[2] + 3 * set_law[3], 2.454545 + 1e-6);
}

TEST(BuildSchemeTest, RejectsNonPositiveChain) {
  absl::StatusOr<SchemeDistribution> s =
      BuildSchemeForChain(Symmetric(3, 0.0), 1);
  ASSERT_FALSE(s.ok());
  EXPECT_EQ(s.status().code(), absl::StatusCode::kFailedPrecondition);
}

// Every scheme property recomputed from scratch on random chains.
TEST(BuildSchemeTest, PropertiesOnRandomChains) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + trial % 5;
    const int m = n * n;
    const int delta = trial % 7;
    const Built b = BuildFor(RandomPositiveChain(n, rng), delta);
    const SchemeDistribution& s = b.build.scheme;
    const ExtractionLedger& ledger = b.build.ledger;

    std::vector<double> marginal(m * n, 0.0);
    std::map<MultisetQuery, std::vector<double>> by_query;
    for (const SchemeEntry& e : s.entries()) {
      ASSERT_TRUE(e.query.Contains(e.x));
      ASSERT_GT(e.mass, 0.0);
      ASSERT_GE(e.query.Cardinality(), 1);
      ASSERT_LE(e.query.Cardinality(), n);
      marginal[e.u * n + e.x] += e.mass;
      auto& row = by_query[e.query];
      row.resize(m, 0.0);
      row[e.u] += e.mass;
    }
    for (int u = 0; u < m; ++u) {
      for (int x = 0; x < n; ++x) {
        ASSERT_NEAR(marginal[u * n + x], b.cond(u, x), 1e-9);
      }
    }
    for (const auto& [q, row] : by_query) {
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      ASSERT_LT(*hi - *lo, 1e-9);
    }
    const std::vector<double> law = SizeLaw(s);
    double cost = 0.0;
    for (int l = 1; l <= n; ++l) {
      ASSERT_NEAR(law[l], b.profile.theta[l - 1], 1e-9);
      cost += l * law[l];
    }
    ASSERT_LE(cost, InverseRateInner(b.profile) + 1e-9);
    ASSERT_LE(s.size(), static_cast<size_t>(m) * n * n * n * n);

    ASSERT_GE(ledger.min_residual, -1e-12);
    ASSERT_LT(ledger.dropped_mass, 1e-10);
    for (const Extraction& ex : ledger.extractions) {
      double total = 0.0;
      for (const ExtractionPiece& piece : ex.pieces) total += piece.value;
      ASSERT_NEAR(total,
                  b.profile.Lambda(ex.x, ex.level) -
                      b.profile.Lambda(ex.x, ex.level - 1),
                  1e-12);
    }
    for (const SegmentGroup& g : ledger.groups) {
      double width = 0.0;
      for (const RefinedSegment& seg : g.segments) width += seg.width;
      ASSERT_NEAR(width,
                  b.profile.Lambda(g.x, g.level) -
                      b.profile.Lambda(g.x, g.level - 1),
                  1e-12);
      if (g.level > 1) {
        ASSERT_LE(g.segments.size(), static_cast<size_t>(n * (g.level - 1)));
      }
    }
    for (int u = 0; u < m; ++u) {
      double rest = 0.0;
      for (int x = 0; x < n; ++x) rest += ledger.final_residual[u][x];
      ASSERT_NEAR(rest, b.profile.theta[n - 1], 1e-9);
    }
  }
}

TEST(CollapseToSetsTest, MergesRepeats) {
  const std::vector<int> xx = {1, 1};
  const MultisetQuery z = MultisetQuery::FromElements(3, xx).value();
  const SchemeDistribution s(3, 1, SchemeForm::kMultiset,
                             {{z, 1, 0, 0.25},
                              {MultisetQuery::Singleton(3, 1), 1, 0, 0.5}});
  const SchemeDistribution sets = CollapseToSets(s);
  EXPECT_EQ(sets.form(), SchemeForm::kSet);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets.entries()[0].query, MultisetQuery::Singleton(3, 1));
  EXPECT_DOUBLE_EQ(sets.entries()[0].mass, 0.75);
}

TEST(CollapseToSetsTest, ConservesMarginals) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + trial % 3;
    const Built b = BuildFor(RandomPositiveChain(n, rng), 1 + trial % 3);
    const SchemeDistribution sets = CollapseToSets(b.build.scheme);
    std::map<std::pair<int, int>, double> before;
    std::map<std::pair<int, int>, double> after;
    double cost_z = 0.0;
    double cost_q = 0.0;
    for (const SchemeEntry& e : b.build.scheme.entries()) {
      before[{e.x, e.u}] += e.mass;
      cost_z += e.mass * e.query.Cardinality();
    }
    for (const SchemeEntry& e : sets.entries()) {
      EXPECT_TRUE(e.query.IsSet());
      after[{e.x, e.u}] += e.mass;
      cost_q += e.mass * e.query.Cardinality();
    }
    for (const auto& [key, v] : before) EXPECT_NEAR(after[key], v, 1e-15);
    EXPECT_LE(cost_q, cost_z + 1e-12);
  }
}

TEST(SamplerTest, TrivialCases) {
  std::mt19937_64 rng(25);
  const Built uniform = BuildFor(Symmetric(3, 1.0 / 3.0), 1);
  ASSERT_OK_AND_ASSIGN(
      ConditionalQuerySampler s1,
      ConditionalQuerySampler::Create(CollapseToSets(uniform.build.scheme),
                                      uniform.cond));
  const Built zero = BuildFor(Symmetric(3, 0.7), 0);
  ASSERT_OK_AND_ASSIGN(
      ConditionalQuerySampler s0,
      ConditionalQuerySampler::Create(CollapseToSets(zero.build.scheme),
                                      zero.cond));
  for (int draw = 0; draw < 200; ++draw) {
    const int x = draw % 3;
    const int u = draw % 9;
    EXPECT_EQ(s1.Sample(x, u, rng).value(), MultisetQuery::Singleton(3, x));
    const int u0 = ContextIndex(3, x, draw % 3);
    EXPECT_EQ(s0.Sample(x, u0, rng).value(), MultisetQuery::Full(3));
  }
  absl::StatusOr<MultisetQuery> bad = s0.Sample(1, ContextIndex(3, 0, 0), rng);
  ASSERT_FALSE(bad.ok());
  EXPECT_EQ(bad.status().code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_THAT(bad.status().message(), HasSubstr("ZeroLikelihoodContext"));
}

TEST(SamplerTest, MonteCarloMatchesMasses) {
  const Built b = BuildFor(Symmetric(3, 0.6), 1);
  const SchemeDistribution sets = CollapseToSets(b.build.scheme);
  ASSERT_OK_AND_ASSIGN(ConditionalQuerySampler sampler,
                       ConditionalQuerySampler::Create(sets, b.cond));
  std::mt19937_64 rng(26);
  constexpr int kDraws = 1000000;
  for (int u : {0, 1, 5}) {
    for (int x = 0; x < 3; ++x) {
      std::map<MultisetQuery, int> counts;
      for (int d = 0; d < kDraws; ++d) {
        const MultisetQuery q = sampler.Sample(x, u, rng).value();
        ASSERT_TRUE(q.Contains(x));
        ++counts[q];
      }
      for (const SchemeEntry& e : sets.entries()) {
        if (e.x != x || e.u != u) continue;
        const double w = e.mass / b.cond(u, x);
        const double se = std::sqrt(w * (1 - w) / kDraws);
        EXPECT_NEAR(static_cast<double>(counts[e.query]) / kDraws, w,
                    3 * se + 1e-12);
      }
    }
  }
}

TEST(SamplerTest, DeterministicGivenSeed) {
  const Built b = BuildFor(Symmetric(4, 0.4), 2);
  ASSERT_OK_AND_ASSIGN(
      ConditionalQuerySampler sampler,
      ConditionalQuerySampler::Create(CollapseToSets(b.build.scheme), b.cond));
  std::mt19937_64 r1(99);
  std::mt19937_64 r2(99);
  for (int d = 0; d < 1000; ++d) {
    EXPECT_EQ(sampler.Sample(d % 4, d % 16, r1).value(),
              sampler.Sample(d % 4, d % 16, r2).value());
  }
}

TEST(SchemeJsonTest, RoundTrip) {
  std::mt19937_64 rng(27);
  const Built b = BuildFor(RandomPositiveChain(4, rng), 2);
  const nlohmann::json j = SchemeToJson(b.build.scheme);
  ASSERT_OK_AND_ASSIGN(SchemeDistribution back,
                       SchemeFromJson(j, 4, 2, SchemeForm::kMultiset));
  EXPECT_EQ(back, b.build.scheme);
  ASSERT_OK_AND_ASSIGN(
      SchemeDistribution reparsed,
      SchemeFromJson(nlohmann::json::parse(j.dump()), 4, 2,
                     SchemeForm::kMultiset));
  EXPECT_EQ(reparsed, b.build.scheme);
  EXPECT_FALSE(
      SchemeFromJson(nlohmann::json::parse(R"([{"q":[9],"x":0,"u":[0,0],"p":1}])"),
                     4, 2, SchemeForm::kMultiset)
          .ok());
}

}  // namespace
}  // namespace onoff
