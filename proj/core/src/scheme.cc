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
#include <limits>
#include <tuple>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "onoff/status_macros.h"

namespace onoff {
namespace {

constexpr double kTotalsTolerance = 1e-9;
constexpr double kMaxDroppedMass = 1e-10;

using EntryKey = std::tuple<MultisetQuery, int, int>;
using EntryAccumulator = absl::flat_hash_map<EntryKey, double>;

std::vector<SchemeEntry> SortedEntries(const EntryAccumulator& acc) {
  std::vector<SchemeEntry> entries;
  entries.reserve(acc.size());
  for (const auto& [key, mass] : acc) {
    entries.push_back(
        {std::get<0>(key), std::get<1>(key), std::get<2>(key), mass});
  }
  return entries;
}

// Draws `amount` from one residual row, lowest column first.
absl::StatusOr<std::vector<ExtractionPiece>> DrawFromRow(
    std::vector<double>& row, double amount, double& min_residual) {
  std::vector<ExtractionPiece> pieces;
  double remaining = amount;
  for (int e = 0; e < static_cast<int>(row.size()) && remaining > 0.0; ++e) {
    if (!(row[e] > 0.0)) continue;
    const double v = std::min(row[e], remaining);
    row[e] -= v;
    remaining -= v;
    pieces.push_back({e, v});
  }
  if (remaining > 0.0) {
    if (remaining > kSegmentTolerance) {
      return absl::InternalError(absl::StrFormat(
          "ExtractionInfeasible: residual row is short by %.3g", remaining));
    }
    // Rounding shortfall: charge it to the largest residual.
    const int e = static_cast<int>(
        std::max_element(row.begin(), row.end()) - row.begin());
    row[e] -= remaining;
    auto it = std::find_if(pieces.begin(), pieces.end(),
                           [e](const ExtractionPiece& p) { return p.column == e; });
    if (it == pieces.end()) {
      pieces.push_back({e, remaining});
    } else {
      it->value += remaining;
    }
  }
  for (double v : row) min_residual = std::min(min_residual, v);
  return pieces;
}

}  // namespace

MultisetQuery MultisetQuery::Singleton(int n, int x) {
  MultisetQuery q(n);
  q.Add(x);
  return q;
}

MultisetQuery MultisetQuery::Full(int n) {
  return FromMask(n, n >= 32 ? ~0u : (1u << n) - 1);
}

MultisetQuery MultisetQuery::FromMask(int n, uint32_t mask) {
  MultisetQuery q(n);
  for (int x = 0; x < n; ++x) {
    if (mask & (1u << x)) q.Add(x);
  }
  return q;
}

absl::StatusOr<MultisetQuery> MultisetQuery::FromElements(
    int n, std::span<const int> elems) {
  if (n < 1 || n > kMaxSchemeStates) {
    return absl::InvalidArgumentError(
        absl::StrFormat("query ground set size %d is unsupported", n));
  }
  MultisetQuery q(n);
  for (int x : elems) {
    if (x < 0 || x >= n) {
      return absl::InvalidArgumentError(
          absl::StrFormat("query element %d is outside [0, %d)", x, n));
    }
    q.Add(x);
  }
  return q;
}

int MultisetQuery::Cardinality() const {
  int total = 0;
  for (int x = 0; x < n_; ++x) total += counts_[x];
  return total;
}

int MultisetQuery::SupportSize() const {
  int total = 0;
  for (int x = 0; x < n_; ++x) total += counts_[x] > 0;
  return total;
}

bool MultisetQuery::IsSet() const {
  for (int x = 0; x < n_; ++x) {
    if (counts_[x] > 1) return false;
  }
  return true;
}

MultisetQuery MultisetQuery::Support() const { return FromMask(n_, SupportMask()); }

uint32_t MultisetQuery::SupportMask() const {
  uint32_t mask = 0;
  for (int x = 0; x < n_; ++x) {
    if (counts_[x] > 0) mask |= 1u << x;
  }
  return mask;
}

std::vector<int> MultisetQuery::Elements() const {
  std::vector<int> out;
  for (int x = 0; x < n_; ++x) out.insert(out.end(), counts_[x], x);
  return out;
}

SchemeDistribution::SchemeDistribution(int n, int delta, SchemeForm form,
                                       std::vector<SchemeEntry> entries)
    : n_(n), delta_(delta), form_(form) {
  auto key = [](const SchemeEntry& e) {
    return std::tie(e.query, e.x, e.u);
  };
  std::sort(entries.begin(), entries.end(),
            [&](const SchemeEntry& a, const SchemeEntry& b) {
              return key(a) < key(b);
            });
  for (SchemeEntry& e : entries) {
    if (!entries_.empty() && key(entries_.back()) == key(e)) {
      entries_.back().mass += e.mass;
    } else {
      entries_.push_back(std::move(e));
    }
  }
}

absl::StatusOr<std::vector<RefinedSegment>> RefineSegments(
    std::span<const std::vector<ExtractionPiece>> rows) {
  if (rows.empty()) {
    return absl::InvalidArgumentError("RefineSegments needs at least one row");
  }
  const size_t k = rows.size();
  std::vector<std::vector<double>> bounds(k);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (size_t i = 0; i < k; ++i) {
    if (rows[i].empty()) {
      return absl::InvalidArgumentError(
          absl::StrFormat("MismatchedTotals: row %d is empty", i));
    }
    double prefix = 0.0;
    for (const ExtractionPiece& p : rows[i]) {
      prefix += p.value;
      bounds[i].push_back(prefix);
    }
    lo = std::min(lo, prefix);
    hi = std::max(hi, prefix);
  }
  if (hi - lo > kTotalsTolerance) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "MismatchedTotals: row totals span [%.17g, %.17g]", lo, hi));
  }
  const double total = bounds[0].back();
  for (auto& b : bounds) b.back() = total;

  std::vector<RefinedSegment> segments;
  std::vector<size_t> front(k, 0);
  double cursor = 0.0;
  while (true) {
    bool exhausted = false;
    for (size_t i = 0; i < k; ++i) {
      while (front[i] < bounds[i].size() &&
             bounds[i][front[i]] <= cursor + kSegmentTolerance) {
        ++front[i];
      }
      exhausted |= front[i] == bounds[i].size();
    }
    if (exhausted) break;
    double next = std::numeric_limits<double>::infinity();
    RefinedSegment seg;
    seg.columns.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      next = std::min(next, bounds[i][front[i]]);
      seg.columns.push_back(rows[i][front[i]].column);
    }
    seg.width = next - cursor;
    segments.push_back(std::move(seg));
    cursor = next;
  }
  return segments;
}

absl::StatusOr<SchemeBuild> BuildSchemeWithLedger(const ThetaProfile& profile,
                                                  const ConditionalTable& cond) {
  const int n = cond.n();
  const int m = cond.m();
  if (profile.n != n || profile.m != m) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "profile is for n = %d but the table has n = %d", profile.n, n));
  }
  if (n > kMaxSchemeStates) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "scheme construction supports at most %d states", kMaxSchemeStates));
  }

  ExtractionLedger ledger;
  std::vector<std::vector<double>> residual(m, std::vector<double>(n));
  for (int u = 0; u < m; ++u) {
    for (int j = 0; j < n; ++j) {
      residual[u][j] = std::max(cond(u, j) - profile.Lambda(j, n - 1), 0.0);
    }
  }
  ledger.initial_residual = residual;

  EntryAccumulator acc;
  for (int level = 1; level < n; ++level) {
    for (int x = 0; x < n; ++x) {
      const double increment =
          profile.Lambda(x, level) - profile.Lambda(x, level - 1);
      if (!(increment > 0.0)) continue;

      SegmentGroup group{level, x, {}};
      const std::vector<int>& order = profile.order[x];
      if (level == 1) {
        group.segments.push_back({{}, increment});
      } else {
        std::vector<std::vector<ExtractionPiece>> rows;
        rows.reserve(level - 1);
        for (int rank = 1; rank < level; ++rank) {
          const int context = order[rank - 1];
          ASSIGN_OR_RETURN(auto pieces,
                           DrawFromRow(residual[context], increment,
                                       ledger.min_residual));
          ledger.extractions.push_back({level, x, rank, context, pieces});
          rows.push_back(std::move(pieces));
        }
        ASSIGN_OR_RETURN(group.segments, RefineSegments(rows));
      }

      for (const RefinedSegment& seg : group.segments) {
        MultisetQuery z(n);
        for (int c : seg.columns) z.Add(c);
        z.Add(x);
        for (int rank = level; rank <= m; ++rank) {
          acc[{z, x, order[rank - 1]}] += seg.width;
        }
        for (int rank = 1; rank < level; ++rank) {
          acc[{z, seg.columns[rank - 1], order[rank - 1]}] += seg.width;
        }
      }
      ledger.groups.push_back(std::move(group));
    }
  }

  const MultisetQuery full = MultisetQuery::Full(n);
  for (int u = 0; u < m; ++u) {
    for (int x = 0; x < n; ++x) {
      if (residual[u][x] > 0.0) acc[{full, x, u}] += residual[u][x];
    }
  }
  ledger.final_residual = residual;

  for (auto it = acc.begin(); it != acc.end();) {
    if (it->second < kDropThreshold) {
      ledger.dropped_mass += std::abs(it->second);
      acc.erase(it++);
    } else {
      ++it;
    }
  }
  if (ledger.dropped_mass >= kMaxDroppedMass) {
    return absl::InternalError(absl::StrFormat(
        "dropped %.3g of mass as numerical dust", ledger.dropped_mass));
  }

  SchemeDistribution scheme(n, cond.delta(), SchemeForm::kMultiset,
                            SortedEntries(acc));
  return SchemeBuild{std::move(scheme), std::move(ledger)};
}

absl::StatusOr<SchemeDistribution> BuildScheme(const ThetaProfile& profile,
                                               const ConditionalTable& cond) {
  ASSIGN_OR_RETURN(SchemeBuild build, BuildSchemeWithLedger(profile, cond));
  return std::move(build.scheme);
}

absl::StatusOr<SchemeDistribution> BuildSchemeForChain(
    const TransitionMatrix& p, int delta) {
  if (!p.IsStrictlyPositive()) {
    return absl::FailedPreconditionError(
        "scheme construction needs a strictly positive transition matrix");
  }
  ASSIGN_OR_RETURN(const ConditionalTable cond, BuildConditionalTable(p, delta));
  ASSIGN_OR_RETURN(const ThetaProfile profile, ComputeThetaProfile(cond));
  return BuildScheme(profile, cond);
}

SchemeDistribution CollapseToSets(const SchemeDistribution& multiset) {
  std::vector<SchemeEntry> entries;
  entries.reserve(multiset.size());
  for (const SchemeEntry& e : multiset.entries()) {
    entries.push_back({e.query.Support(), e.x, e.u, e.mass});
  }
  return SchemeDistribution(multiset.n(), multiset.delta(), SchemeForm::kSet,
                            std::move(entries));
}

double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

absl::StatusOr<ConditionalQuerySampler> ConditionalQuerySampler::Create(
    const SchemeDistribution& scheme, const ConditionalTable& cond) {
  const int n = scheme.n();
  if (cond.n() != n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "DimensionMismatch: scheme n = %d, table n = %d", n, cond.n()));
  }
  std::vector<std::vector<Choice>> table(static_cast<size_t>(n) * n * n);
  for (const SchemeEntry& e : scheme.entries()) {
    if (e.x < 0 || e.x >= n || e.u < 0 || e.u >= n * n) {
      return absl::InvalidArgumentError("scheme entry out of range");
    }
    auto& choices = table[static_cast<size_t>(e.u) * n + e.x];
    const double base = choices.empty() ? 0.0 : choices.back().cumulative;
    choices.push_back({e.query, base + e.mass});
  }
  for (int u = 0; u < n * n; ++u) {
    for (int x = 0; x < n; ++x) {
      if (cond(u, x) == 0.0) table[static_cast<size_t>(u) * n + x].clear();
    }
  }
  return ConditionalQuerySampler(n, std::move(table));
}

absl::StatusOr<MultisetQuery> ConditionalQuerySampler::Sample(
    int x, int u, std::mt19937_64& rng) const {
  if (x < 0 || x >= n_ || u < 0 || u >= n_ * n_) {
    return absl::InvalidArgumentError(
        absl::StrFormat("request %d / context %d out of range", x, u));
  }
  const auto& choices = table_[static_cast<size_t>(u) * n_ + x];
  if (choices.empty()) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "ZeroLikelihoodContext: p(x=%d | u=%d) = 0", x, u));
  }
  const double r = UniformUnit(rng) * choices.back().cumulative;
  auto it = std::upper_bound(
      choices.begin(), choices.end(), r,
      [](double value, const Choice& c) { return value < c.cumulative; });
  if (it == choices.end()) --it;
  return it->query;
}

std::vector<std::pair<MultisetQuery, double>>
ConditionalQuerySampler::Conditional(int x, int u) const {
  std::vector<std::pair<MultisetQuery, double>> out;
  const auto& choices = table_[static_cast<size_t>(u) * n_ + x];
  if (choices.empty()) return out;
  const double total = choices.back().cumulative;
  double previous = 0.0;
  for (const Choice& c : choices) {
    out.emplace_back(c.query, (c.cumulative - previous) / total);
    previous = c.cumulative;
  }
  return out;
}

nlohmann::json SchemeToJson(const SchemeDistribution& scheme) {
  nlohmann::json out = nlohmann::json::array();
  for (const SchemeEntry& e : scheme.entries()) {
    const auto [x_tau, x_next] = ContextPair(scheme.n(), e.u);
    out.push_back({{"q", e.query.Elements()},
                   {"x", e.x},
                   {"u", {x_tau, x_next}},
                   {"p", e.mass}});
  }
  return out;
}

absl::StatusOr<SchemeDistribution> SchemeFromJson(const nlohmann::json& j,
                                                  int n, int delta,
                                                  SchemeForm form) {
  if (!j.is_array()) {
    return absl::InvalidArgumentError("scheme JSON must be an array");
  }
  std::vector<SchemeEntry> entries;
  try {
    for (const auto& item : j) {
      const auto elems = item.at("q").get<std::vector<int>>();
      ASSIGN_OR_RETURN(MultisetQuery q, MultisetQuery::FromElements(n, elems));
      if (form == SchemeForm::kSet && !q.IsSet()) {
        return absl::InvalidArgumentError(
            "set-form scheme contains a repeated element");
      }
      const auto u = item.at("u").get<std::vector<int>>();
      if (u.size() != 2 || u[0] < 0 || u[0] >= n || u[1] < 0 || u[1] >= n) {
        return absl::InvalidArgumentError("scheme entry has a malformed \"u\"");
      }
      const int x = item.at("x").get<int>();
      if (x < 0 || x >= n) {
        return absl::InvalidArgumentError("scheme entry has a malformed \"x\"");
      }
      entries.push_back({q, x, ContextIndex(n, u[0], u[1]),
                         item.at("p").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrFormat("malformed scheme JSON: %s", e.what()));
  }
  return SchemeDistribution(n, delta, form, std::move(entries));
}

}  // namespace onoff
