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

#include "onoff/sim.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "boost/math/special_functions/gamma.hpp"
#include "onoff/status_macros.h"

namespace onoff {
namespace {

enum Stream : uint32_t {
  kPathStream = 0,
  kQueryStream = 1,
  kMessageStream = 2,
  kScheduleStream = 3,
};

std::mt19937_64 MakeStream(uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed),
                    static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(stream)};
  return std::mt19937_64(seq);
}

int SampleIndex(std::span<const double> weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double r = UniformUnit(rng) * total;
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (r < acc) return i;
  }
  return last_positive;
}

absl::Status ValidateConfig(const SimConfig& config) {
  const int n = config.chain.n();
  if (config.horizon < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("horizon must be >= 1, got %d", config.horizon));
  }
  if (config.sessions < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("sessions must be >= 1, got %d", config.sessions));
  }
  if (config.message_length < 1) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "message length must be >= 1, got %d", config.message_length));
  }
  if (n > 32) {
    return absl::InvalidArgumentError("simulation supports at most 32 states");
  }
  if (!config.chain.IsStrictlyPositive()) {
    return absl::FailedPreconditionError(
        "NotStrictlyPositive: simulation needs a strictly positive chain");
  }
  if (!config.initial_distribution.empty()) {
    if (static_cast<int>(config.initial_distribution.size()) != n) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "initial distribution has %d entries for n = %d",
          config.initial_distribution.size(), n));
    }
    double total = 0.0;
    for (double w : config.initial_distribution) {
      if (!(w >= 0.0)) {
        return absl::InvalidArgumentError("negative initial probability");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > kStochasticTolerance) {
      return absl::InvalidArgumentError(
          absl::StrFormat("initial distribution sums to %.17g", total));
    }
  }
  return absl::OkStatus();
}

struct CachedScheme {
  ConditionalQuerySampler sampler;
};

class SchemeCache {
 public:
  SchemeCache(const TransitionMatrix& chain, SchemeFactory factory)
      : chain_(chain), factory_(std::move(factory)) {}

  absl::StatusOr<const ConditionalQuerySampler*> Get(int delta) {
    auto it = by_delta_.find(delta);
    if (it != by_delta_.end()) return it->second;
    ASSIGN_OR_RETURN(ConditionalTable cond,
                     BuildConditionalTable(chain_, delta));
    // Large gaps converge to the same table; share one sampler per table.
    TableKey key{delta == 0, cond.values()};
    auto shared = by_table_.find(key);
    if (shared == by_table_.end()) {
      ASSIGN_OR_RETURN(SchemeDistribution scheme, factory_(cond));
      if (scheme.form() == SchemeForm::kMultiset) {
        scheme = CollapseToSets(scheme);
      }
      ASSIGN_OR_RETURN(ConditionalQuerySampler sampler,
                       ConditionalQuerySampler::Create(scheme, cond));
      shared = by_table_
                   .emplace(std::move(key), CachedScheme{std::move(sampler)})
                   .first;
    }
    by_delta_.emplace(delta, &shared->second.sampler);
    return &shared->second.sampler;
  }

 private:
  const TransitionMatrix& chain_;
  SchemeFactory factory_;
  using TableKey = std::pair<bool, std::vector<double>>;
  std::map<TableKey, CachedScheme> by_table_;
  std::map<int, const ConditionalQuerySampler*> by_delta_;
};

template <typename Outcome>
double TotalVariation(const std::map<Outcome, double>& a,
                      const std::map<Outcome, double>& b) {
  double l1 = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    l1 += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b) {
    if (!a.contains(k)) l1 += std::abs(v);
  }
  return 0.5 * l1;
}

template <typename Key, typename Outcome>
double MaxPairwiseTv(const std::map<Key, std::map<Outcome, int64_t>>& groups,
                     int64_t min_samples) {
  std::vector<std::map<Outcome, double>> laws;
  for (const auto& [key, counts] : groups) {
    int64_t total = 0;
    for (const auto& [q, c] : counts) total += c;
    if (total < min_samples) continue;
    std::map<Outcome, double> law;
    for (const auto& [q, c] : counts) {
      law[q] = static_cast<double>(c) / static_cast<double>(total);
    }
    laws.push_back(std::move(law));
  }
  double gap = 0.0;
  for (size_t i = 0; i < laws.size(); ++i) {
    for (size_t j = i + 1; j < laws.size(); ++j) {
      gap = std::max(gap, TotalVariation(laws[i], laws[j]));
    }
  }
  return gap;
}

}  // namespace

PrivacySchedule PrivacySchedule::AlwaysOn() {
  return PrivacySchedule(Kind::kAlwaysOn, 1.0, 1, {});
}

PrivacySchedule PrivacySchedule::OnAtZero() {
  return PrivacySchedule(Kind::kOnAtZero, 0.0, 1, {});
}

absl::StatusOr<PrivacySchedule> PrivacySchedule::Bernoulli(double p_on) {
  if (!(p_on >= 0.0 && p_on <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Bernoulli probability %g outside [0, 1]", p_on));
  }
  return PrivacySchedule(Kind::kBernoulli, p_on, 1, {});
}

absl::StatusOr<PrivacySchedule> PrivacySchedule::Periodic(int k) {
  if (k < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("period must be >= 1, got %d", k));
  }
  return PrivacySchedule(Kind::kPeriodic, 0.0, k, {});
}

PrivacySchedule PrivacySchedule::Explicit(std::vector<bool> flags) {
  return PrivacySchedule(Kind::kExplicit, 0.0, 1, std::move(flags));
}

absl::StatusOr<PrivacySchedule> PrivacySchedule::Parse(std::string_view text) {
  const absl::string_view s(text.data(), text.size());
  if (s == "always-on") return AlwaysOn();
  if (s == "on-at-0" || s == "always-off-after-0") return OnAtZero();
  const size_t colon = s.find(':');
  if (colon == absl::string_view::npos) {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown schedule '", s, "'"));
  }
  const absl::string_view kind = s.substr(0, colon);
  const absl::string_view arg = s.substr(colon + 1);
  if (kind == "bernoulli") {
    double p = 0.0;
    if (!absl::SimpleAtod(arg, &p)) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad Bernoulli probability '", arg, "'"));
    }
    return Bernoulli(p);
  }
  if (kind == "periodic") {
    int k = 0;
    if (!absl::SimpleAtoi(arg, &k)) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad period '", arg, "'"));
    }
    return Periodic(k);
  }
  if (kind == "explicit") {
    std::vector<bool> flags;
    for (absl::string_view f : absl::StrSplit(arg, ',')) {
      if (f == "1") {
        flags.push_back(true);
      } else if (f == "0") {
        flags.push_back(false);
      } else {
        return absl::InvalidArgumentError(
            absl::StrCat("bad schedule flag '", f, "'"));
      }
    }
    return Explicit(std::move(flags));
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown schedule '", s, "'"));
}

std::string PrivacySchedule::ToString() const {
  switch (kind_) {
    case Kind::kAlwaysOn:
      return "always-on";
    case Kind::kOnAtZero:
      return "on-at-0";
    case Kind::kBernoulli:
      return absl::StrCat("bernoulli:", p_on_);
    case Kind::kPeriodic:
      return absl::StrCat("periodic:", period_);
    case Kind::kExplicit: {
      std::vector<int> bits(flags_.begin(), flags_.end());
      return absl::StrCat("explicit:", absl::StrJoin(bits, ","));
    }
  }
  return "";
}

std::vector<bool> PrivacySchedule::Realize(int horizon,
                                           std::mt19937_64& rng) const {
  std::vector<bool> on(std::max(horizon, 0), false);
  for (int t = 0; t < horizon; ++t) {
    switch (kind_) {
      case Kind::kAlwaysOn:
        on[t] = true;
        break;
      case Kind::kOnAtZero:
        on[t] = false;
        break;
      case Kind::kBernoulli:
        on[t] = UniformUnit(rng) < p_on_;
        break;
      case Kind::kPeriodic:
        on[t] = t % period_ == 0;
        break;
      case Kind::kExplicit:
        on[t] = t < static_cast<int>(flags_.size()) && flags_[t];
        break;
    }
  }
  if (horizon > 0) on[0] = true;
  return on;
}

absl::StatusOr<SchemeDistribution> DefaultSchemeFactory(
    const ConditionalTable& cond) {
  ASSIGN_OR_RETURN(ThetaProfile profile, ComputeThetaProfile(cond));
  ASSIGN_OR_RETURN(SchemeDistribution scheme, BuildScheme(profile, cond));
  return CollapseToSets(scheme);
}

void MessageServer::Refresh(std::mt19937_64& rng) {
  size_t i = 0;
  while (i < messages_.size()) {
    const uint64_t word = rng();
    const size_t take = std::min<size_t>(8, messages_.size() - i);
    std::memcpy(messages_.data() + i, &word, take);
    i += take;
  }
}

std::vector<uint8_t> MessageServer::Respond(const MultisetQuery& query) const {
  std::vector<uint8_t> answer;
  answer.reserve(static_cast<size_t>(query.Cardinality()) * length_);
  for (int i : query.Elements()) {
    const auto w = message(i);
    answer.insert(answer.end(), w.begin(), w.end());
  }
  return answer;
}

absl::StatusOr<std::vector<uint8_t>> ExtractMessage(
    std::span<const uint8_t> answer, const MultisetQuery& query, int x,
    int message_length) {
  if (x < 0 || x >= query.n() || !query.Contains(x)) {
    return absl::NotFoundError(
        absl::StrFormat("request %d is not covered by the query", x));
  }
  const std::vector<int> elems = query.Elements();
  const size_t pos =
      std::lower_bound(elems.begin(), elems.end(), x) - elems.begin();
  const size_t begin = pos * message_length;
  if (answer.size() < begin + message_length) {
    return absl::NotFoundError("answer shorter than the query implies");
  }
  return std::vector<uint8_t>(answer.begin() + begin,
                              answer.begin() + begin + message_length);
}

absl::StatusOr<SimTrace> RunSimulation(const SimConfig& config) {
  RETURN_IF_ERROR(ValidateConfig(config));
  const int n = config.chain.n();
  const int horizon = config.horizon;
  const int length = config.message_length;

  std::vector<double> initial = config.initial_distribution;
  if (initial.empty()) initial.assign(n, 1.0 / n);

  std::mt19937_64 path_rng = MakeStream(config.seed, kPathStream);
  std::mt19937_64 query_rng = MakeStream(config.seed, kQueryStream);
  std::mt19937_64 message_rng = MakeStream(config.seed, kMessageStream);
  std::mt19937_64 schedule_rng = MakeStream(config.seed, kScheduleStream);

  SchemeCache cache(config.chain, config.scheme_factory
                                      ? config.scheme_factory
                                      : SchemeFactory(DefaultSchemeFactory));
  MessageServer server(n, length);

  SimTrace trace;
  trace.n = n;
  trace.message_length = length;
  trace.sessions = config.sessions;
  trace.steps.reserve(static_cast<size_t>(horizon) * config.sessions);

  std::vector<int> path(static_cast<size_t>(horizon) + 1);
  for (int session = 0; session < config.sessions; ++session) {
    path[0] = SampleIndex(initial, path_rng);
    for (int t = 1; t <= horizon; ++t) {
      path[t] = SampleIndex(config.chain.matrix().row(path[t - 1]), path_rng);
    }
    const std::vector<bool> on = config.schedule.Realize(horizon, schedule_rng);

    int tau = 0;
    for (int t = 0; t < horizon; ++t) {
      if (on[t]) tau = t;
      StepRecord rec;
      rec.session = session;
      rec.t = t;
      rec.x = path[t];
      rec.on = on[t];
      rec.tau = tau;
      rec.delta = t - tau;
      rec.u = ContextIndex(n, path[tau], path[t + 1]);

      ASSIGN_OR_RETURN(const ConditionalQuerySampler* sampler,
                       cache.Get(rec.delta));
      ASSIGN_OR_RETURN(MultisetQuery query,
                       sampler->Sample(rec.x, rec.u, query_rng));
      rec.query_mask = query.SupportMask();
      rec.query_size = query.Cardinality();

      server.Refresh(message_rng);
      const std::vector<uint8_t> answer = server.Respond(query);
      rec.bytes = static_cast<int64_t>(answer.size());
      absl::StatusOr<std::vector<uint8_t>> got =
          ExtractMessage(answer, query, rec.x, length);
      const auto want = server.message(rec.x);
      rec.decode_ok =
          got.ok() && std::equal(got->begin(), got->end(), want.begin(),
                                 want.end());
      if (!rec.decode_ok) ++trace.decode_failures;

      DeltaBucket& bucket = trace.buckets[rec.delta];
      ++bucket.count;
      bucket.total_query_size += rec.query_size;
      trace.steps.push_back(rec);
    }
  }
  return trace;
}

absl::StatusOr<EmpiricalStats> EmpiricalPrivacyTest(
    const SimTrace& trace, int delta, int64_t min_context_samples,
    double significance) {
  EmpiricalStats stats;
  stats.delta = delta;
  std::map<int, std::map<uint32_t, int64_t>> by_context;
  std::map<int, std::map<std::pair<uint32_t, uint32_t>, int64_t>> by_history;
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const StepRecord& s = trace.steps[i];
    if (s.delta != delta) continue;
    ++stats.samples;
    ++stats.joint_counts[{s.query_mask, s.u}];
    ++by_context[s.u][s.query_mask];
    if (i > 0 && s.delta >= 1) {
      const StepRecord& prev = trace.steps[i - 1];
      if (prev.session == s.session && prev.t == s.t - 1) {
        const int x_tau = ContextPair(trace.n, s.u).first;
        ++by_history[x_tau][{prev.query_mask, s.query_mask}];
      }
    }
  }
  if (stats.samples < kMinPrivacySamples) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "InsufficientSamples: delta = %d has %d samples, need %d", delta,
        stats.samples, kMinPrivacySamples));
  }

  std::map<int, int64_t> context_totals;
  std::map<uint32_t, int64_t> query_totals;
  for (const auto& [key, c] : stats.joint_counts) {
    query_totals[key.first] += c;
    context_totals[key.second] += c;
  }

  for (const auto& [q, unused] : query_totals) {
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& [u, total] : context_totals) {
      if (total < min_context_samples) continue;
      auto it = stats.joint_counts.find({q, u});
      const double p =
          it == stats.joint_counts.end()
              ? 0.0
              : static_cast<double>(it->second) / static_cast<double>(total);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    stats.query_gaps[q] = hi >= lo ? hi - lo : 0.0;
  }
  stats.max_tv_gap = MaxPairwiseTv(by_context, min_context_samples);

  const double total = static_cast<double>(stats.samples);
  for (const auto& [q, qc] : query_totals) {
    for (const auto& [u, uc] : context_totals) {
      const double expected =
          static_cast<double>(qc) * static_cast<double>(uc) / total;
      auto it = stats.joint_counts.find({q, u});
      const double observed =
          it == stats.joint_counts.end() ? 0.0 : static_cast<double>(it->second);
      stats.chi_square += (observed - expected) * (observed - expected) /
                          expected;
    }
  }
  stats.degrees_of_freedom = (static_cast<int>(query_totals.size()) - 1) *
                             (static_cast<int>(context_totals.size()) - 1);
  stats.p_value =
      stats.degrees_of_freedom > 0
          ? boost::math::gamma_q(0.5 * stats.degrees_of_freedom,
                                 0.5 * stats.chi_square)
          : 1.0;
  stats.dependent = stats.p_value < significance;

  if (!by_history.empty()) {
    stats.history_tv_gap = MaxPairwiseTv(by_history, min_context_samples);
  }
  return stats;
}

absl::StatusOr<DownloadRates> AverageDownloadRate(const SimTrace& trace) {
  if (trace.steps.empty()) {
    return absl::InvalidArgumentError("empty trace");
  }
  std::map<int, std::pair<int64_t, int64_t>> per_delta;
  int64_t bytes = 0;
  for (const StepRecord& s : trace.steps) {
    bytes += s.bytes;
    auto& [count, sum] = per_delta[s.delta];
    ++count;
    sum += s.bytes;
  }
  DownloadRates rates;
  const double steps = static_cast<double>(trace.steps.size());
  rates.overall = trace.message_length * steps / static_cast<double>(bytes);
  for (const auto& [delta, cs] : per_delta) {
    rates.per_delta[delta] = trace.message_length *
                             static_cast<double>(cs.first) /
                             static_cast<double>(cs.second);
  }
  return rates;
}

void WriteTraceCsv(const SimTrace& trace, std::ostream& out) {
  const bool with_session = trace.sessions > 1;
  if (with_session) out << "session,";
  out << "t,x,f,tau,delta,q_size,bytes,decode_ok\n";
  for (const StepRecord& s : trace.steps) {
    if (with_session) out << s.session << ',';
    out << s.t << ',' << s.x << ',' << (s.on ? 1 : 0) << ',' << s.tau << ','
        << s.delta << ',' << s.query_size << ',' << s.bytes << ','
        << (s.decode_ok ? 1 : 0) << '\n';
  }
}

nlohmann::json StatsToJson(const EmpiricalStats& stats) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [key, c] : stats.joint_counts) {
    counts.push_back({{"q", key.first}, {"u", key.second}, {"count", c}});
  }
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& [q, g] : stats.query_gaps) {
    gaps.push_back({{"q", q}, {"gap", g}});
  }
  nlohmann::json out = {
      {"delta", stats.delta},
      {"samples", stats.samples},
      {"joint_counts", counts},
      {"query_gaps", gaps},
      {"max_tv_gap", stats.max_tv_gap},
      {"chi_square", stats.chi_square},
      {"degrees_of_freedom", stats.degrees_of_freedom},
      {"p_value", stats.p_value},
      {"dependent", stats.dependent},
  };
  if (stats.history_tv_gap >= 0.0) {
    out["history_tv_gap"] = stats.history_tv_gap;
  }
  return out;
}

nlohmann::json TraceSummaryToJson(const SimTrace& trace) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& [delta, b] : trace.buckets) {
    buckets.push_back({{"delta", delta},
                       {"count", b.count},
                       {"mean_q_size", b.mean_query_size()}});
  }
  nlohmann::json out = {
      {"n", trace.n},
      {"message_length", trace.message_length},
      {"sessions", trace.sessions},
      {"steps", trace.steps.size()},
      {"decode_failures", trace.decode_failures},
      {"buckets", buckets},
  };
  if (absl::StatusOr<DownloadRates> rates = AverageDownloadRate(trace);
      rates.ok()) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& [delta, r] : rates->per_delta) {
      per.push_back({{"delta", delta}, {"rate", r}});
    }
    out["rate"] = rates->overall;
    out["rate_per_delta"] = per;
  }
  return out;
}

}  // namespace onoff
