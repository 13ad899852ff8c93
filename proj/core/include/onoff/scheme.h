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

// Polynomial-time construction of a private query distribution.
//
// The output is a sparse joint mass g(z, x, u) = p(z, x | u) over multiset
// queries z with |z| <= n. It is decodable (x in z whenever g > 0), private
// (sum_x g(z, x, u) does not depend on u), has marginals sum_z g = p(x|u), and
// downloads exactly l messages with probability theta_l. Collapsing each
// multiset to its support gives an ordinary subset query that is no more
// expensive.
//
// Construction outline, for levels l = 1..n-1 and requests x:
//   * the increment lambda_{x,l} - lambda_{x,l-1} is assigned to x itself in
//     every context ranked >= l for x;
//   * in each of the l-1 lower-ranked contexts the same mass is drawn from a
//     residual matrix M (initialized to the likelihood excess over
//     lambda_{x,n-1}) and assigned to other requests;
//   * the l-1 draws are aligned on a common refinement of [0, increment], so
//     each refined piece names one query multiset of size l.
// Whatever is left in M at the end is downloaded with the full set.

#ifndef ONOFF_SCHEME_H_
#define ONOFF_SCHEME_H_

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"
#include "onoff/bounds.h"
#include "onoff/markov.h"

namespace onoff {

inline constexpr int kMaxSchemeStates = 16;

// Multiset over {0..n-1}; multiplicities are stored per element.
class MultisetQuery {
 public:
  MultisetQuery() = default;
  explicit MultisetQuery(int n) : n_(n) {}

  static MultisetQuery Singleton(int n, int x);
  static MultisetQuery Full(int n);
  static MultisetQuery FromMask(int n, uint32_t mask);
  // Elements may repeat; all must lie in [0, n).
  static absl::StatusOr<MultisetQuery> FromElements(int n,
                                                    std::span<const int> elems);

  int n() const { return n_; }
  int count(int x) const { return counts_[x]; }
  bool Contains(int x) const { return counts_[x] > 0; }
  void Add(int x) { ++counts_[x]; }

  // Sum of multiplicities.
  int Cardinality() const;
  int SupportSize() const;
  bool IsSet() const;
  MultisetQuery Support() const;
  uint32_t SupportMask() const;
  // Sorted, with repeats.
  std::vector<int> Elements() const;

  auto operator<=>(const MultisetQuery&) const = default;

  template <typename H>
  friend H AbslHashValue(H h, const MultisetQuery& q) {
    return H::combine(std::move(h), q.n_, q.counts_);
  }

 private:
  int n_ = 0;
  std::array<uint8_t, kMaxSchemeStates> counts_{};
};

enum class SchemeForm { kMultiset, kSet };

struct SchemeEntry {
  MultisetQuery query;
  int x = 0;
  int u = 0;
  double mass = 0.0;

  bool operator==(const SchemeEntry&) const = default;
};

// Immutable sparse distribution g(q, x, u), entries sorted by (q, x, u).
class SchemeDistribution {
 public:
  SchemeDistribution() = default;
  // Duplicate (q, x, u) keys are summed.
  SchemeDistribution(int n, int delta, SchemeForm form,
                     std::vector<SchemeEntry> entries);

  int n() const { return n_; }
  int m() const { return n_ * n_; }
  int delta() const { return delta_; }
  SchemeForm form() const { return form_; }
  const std::vector<SchemeEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  bool operator==(const SchemeDistribution&) const = default;

 private:
  int n_ = 0;
  int delta_ = 0;
  SchemeForm form_ = SchemeForm::kMultiset;
  std::vector<SchemeEntry> entries_;
};

struct ExtractionPiece {
  int column = 0;
  double value = 0.0;
};

// Mass drawn from residual row `context` (the rank-th smallest context of x)
// while building level `level`.
struct Extraction {
  int level = 0;
  int x = 0;
  int rank = 0;
  int context = 0;
  std::vector<ExtractionPiece> pieces;
};

struct RefinedSegment {
  // columns[i] is the column active in row i over this segment.
  std::vector<int> columns;
  double width = 0.0;
};

struct SegmentGroup {
  int level = 0;
  int x = 0;
  std::vector<RefinedSegment> segments;
};

struct ExtractionLedger {
  // residual[u][j], m x n.
  std::vector<std::vector<double>> initial_residual;
  std::vector<std::vector<double>> final_residual;
  // Smallest residual entry observed during construction.
  double min_residual = 0.0;
  std::vector<Extraction> extractions;
  std::vector<SegmentGroup> groups;
  // Mass of entries below kDropThreshold removed from the output.
  double dropped_mass = 0.0;
};

inline constexpr double kSegmentTolerance = 1e-12;
inline constexpr double kDropThreshold = 1e-15;

struct SchemeBuild {
  SchemeDistribution scheme;
  ExtractionLedger ledger;
};

// Multiset-form construction. Internal (ExtractionInfeasible) if a residual
// row cannot cover a draw; this indicates a bug, not bad input.
absl::StatusOr<SchemeBuild> BuildSchemeWithLedger(const ThetaProfile& profile,
                                                  const ConditionalTable& cond);
absl::StatusOr<SchemeDistribution> BuildScheme(const ThetaProfile& profile,
                                               const ConditionalTable& cond);
// Rejects chains with a zero transition probability (FailedPrecondition).
absl::StatusOr<SchemeDistribution> BuildSchemeForChain(
    const TransitionMatrix& p, int delta);

// Q = Set(Z); masses of multisets sharing a support are merged.
SchemeDistribution CollapseToSets(const SchemeDistribution& multiset);

// Common refinement of several segmentations of [0, total]. Each input row is
// a sequence of (column, width) pieces with the same total. InvalidArgument
// (MismatchedTotals) if totals differ by more than 1e-9.
absl::StatusOr<std::vector<RefinedSegment>> RefineSegments(
    std::span<const std::vector<ExtractionPiece>> rows);

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double UniformUnit(std::mt19937_64& rng);

// Draws q from w(q | x, u) = g(q, x, u) / p(x | u).
class ConditionalQuerySampler {
 public:
  static absl::StatusOr<ConditionalQuerySampler> Create(
      const SchemeDistribution& scheme, const ConditionalTable& cond);

  // FailedPrecondition (ZeroLikelihoodContext) if p(x|u) = 0.
  absl::StatusOr<MultisetQuery> Sample(int x, int u,
                                       std::mt19937_64& rng) const;

  // (query, w(q|x,u)) pairs for one (x, u).
  std::vector<std::pair<MultisetQuery, double>> Conditional(int x,
                                                            int u) const;

 private:
  struct Choice {
    MultisetQuery query;
    double cumulative = 0.0;
  };

  ConditionalQuerySampler(int n, std::vector<std::vector<Choice>> table)
      : n_(n), table_(std::move(table)) {}

  int n_ = 0;
  // Indexed by u * n + x.
  std::vector<std::vector<Choice>> table_;
};

// [{"q":[sorted elements with repeats],"x":..,"u":[x_tau,x_next],"p":..}, ...]
nlohmann::json SchemeToJson(const SchemeDistribution& scheme);
absl::StatusOr<SchemeDistribution> SchemeFromJson(const nlohmann::json& j,
                                                  int n, int delta,
                                                  SchemeForm form);

}  // namespace onoff

#endif  // ONOFF_SCHEME_H_
