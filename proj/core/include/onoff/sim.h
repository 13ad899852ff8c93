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

// Discrete-time simulation of a user retrieving the latest message of one of
// n sources while toggling privacy ON and OFF.
//
// Each session draws a request path X_0..X_T from the chain (one step of
// lookahead, so X_{t+1} is known at step t), realizes the privacy schedule
// with F_0 = ON, and at every step sends a query sampled from the scheme for
// the current gap delta = t - tau. The server answers with fresh messages for
// every source in the query; the client extracts W_{X_t} and the simulator
// checks it byte for byte against what the server generated.
//
// Randomness comes from independent streams derived from the seed, so the
// request path depends only on (chain, seed) and never on the schedule.

#ifndef ONOFF_SIM_H_
#define ONOFF_SIM_H_

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"
#include "onoff/markov.h"
#include "onoff/scheme.h"

namespace onoff {

class PrivacySchedule {
 public:
  enum class Kind { kExplicit, kAlwaysOn, kOnAtZero, kBernoulli, kPeriodic };

  static PrivacySchedule AlwaysOn();
  static PrivacySchedule OnAtZero();
  static absl::StatusOr<PrivacySchedule> Bernoulli(double p_on);
  // ON at t = 0, k, 2k, ...
  static absl::StatusOr<PrivacySchedule> Periodic(int k);
  // Steps past the end of `flags` are OFF.
  static PrivacySchedule Explicit(std::vector<bool> flags);

  // "always-on", "on-at-0", "bernoulli:<p>", "periodic:<k>",
  // "explicit:<f0>,<f1>,..." with flags 0/1.
  static absl::StatusOr<PrivacySchedule> Parse(std::string_view text);

  Kind kind() const { return kind_; }
  std::string ToString() const;

  // Flags for t = 0..horizon-1. F_0 is ON regardless of the schedule.
  std::vector<bool> Realize(int horizon, std::mt19937_64& rng) const;

 private:
  PrivacySchedule(Kind kind, double p, int period, std::vector<bool> flags)
      : kind_(kind), p_on_(p), period_(period), flags_(std::move(flags)) {}

  Kind kind_;
  double p_on_ = 0.0;
  int period_ = 1;
  std::vector<bool> flags_;
};

// Produces the query distribution for a conditional table. Multiset-form
// results are collapsed to sets before sampling. Gaps with bit-identical
// tables share one result, so a factory may depend on the table only through
// its values and whether delta is 0.
using SchemeFactory =
    std::function<absl::StatusOr<SchemeDistribution>(const ConditionalTable&)>;

// Default factory: the polynomial-time construction collapsed to sets.
absl::StatusOr<SchemeDistribution> DefaultSchemeFactory(
    const ConditionalTable& cond);

struct SimConfig {
  explicit SimConfig(TransitionMatrix p) : chain(std::move(p)) {}

  TransitionMatrix chain;
  PrivacySchedule schedule = PrivacySchedule::OnAtZero();
  // Steps per session, t = 0..horizon-1.
  int horizon = 1;
  // Independent sessions, each restarting with F_0 = ON.
  int sessions = 1;
  // Message length L in bytes.
  int message_length = 32;
  uint64_t seed = 0;
  // Law of X_0; empty means uniform.
  std::vector<double> initial_distribution;
  // Empty means DefaultSchemeFactory.
  SchemeFactory scheme_factory;
};

struct StepRecord {
  int session = 0;
  int t = 0;
  int x = 0;
  bool on = false;
  int tau = 0;
  int delta = 0;
  int u = 0;
  uint32_t query_mask = 0;
  int query_size = 0;
  int64_t bytes = 0;
  bool decode_ok = false;

  bool operator==(const StepRecord&) const = default;
};

struct DeltaBucket {
  int64_t count = 0;
  int64_t total_query_size = 0;

  double mean_query_size() const {
    return count == 0 ? 0.0 : static_cast<double>(total_query_size) / count;
  }
  bool operator==(const DeltaBucket&) const = default;
};

struct SimTrace {
  int n = 0;
  int message_length = 0;
  int sessions = 0;
  std::vector<StepRecord> steps;
  std::map<int, DeltaBucket> buckets;
  int64_t decode_failures = 0;

  bool operator==(const SimTrace&) const = default;
};

// Server side of one step: n fresh pseudorandom messages of L bytes.
class MessageServer {
 public:
  MessageServer(int n, int message_length)
      : n_(n), length_(message_length),
        messages_(static_cast<size_t>(n) * message_length) {}

  void Refresh(std::mt19937_64& rng);
  // W_q: the requested messages concatenated in ascending source order.
  std::vector<uint8_t> Respond(const MultisetQuery& query) const;
  std::span<const uint8_t> message(int i) const {
    return {messages_.data() + static_cast<size_t>(i) * length_,
            static_cast<size_t>(length_)};
  }

 private:
  int n_;
  int length_;
  std::vector<uint8_t> messages_;
};

// Client side: picks W_x out of an answer to `query`. NotFound if x is not
// in the query or the answer is too short.
absl::StatusOr<std::vector<uint8_t>> ExtractMessage(
    std::span<const uint8_t> answer, const MultisetQuery& query, int x,
    int message_length);

// Errors from scheme construction are propagated.
absl::StatusOr<SimTrace> RunSimulation(const SimConfig& config);

struct EmpiricalStats {
  int delta = 0;
  int64_t samples = 0;
  // counts[(query_mask, u)]
  std::map<std::pair<uint32_t, int>, int64_t> joint_counts;
  // Per query, max over context pairs of |p(q|u) - p(q|u')|.
  std::map<uint32_t, double> query_gaps;
  // Max over context pairs of the total-variation distance between p(.|u)
  // and p(.|u'), over contexts with at least min_context_samples draws.
  double max_tv_gap = 0.0;
  double chi_square = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  // p_value below the significance level.
  bool dependent = false;
  // Secondary, not gated: max TV gap across x_tau values of the law of
  // (q_{t-1}, q_t). Negative when no consecutive pairs exist.
  double history_tv_gap = -1.0;
};

inline constexpr int64_t kMinPrivacySamples = 1000;

// FailedPrecondition (InsufficientSamples) if the bucket has fewer than
// kMinPrivacySamples steps.
absl::StatusOr<EmpiricalStats> EmpiricalPrivacyTest(
    const SimTrace& trace, int delta, int64_t min_context_samples = 100,
    double significance = 1e-3);

struct DownloadRates {
  // L / mean bytes per step.
  double overall = 0.0;
  std::map<int, double> per_delta;
};

// InvalidArgument on an empty trace.
absl::StatusOr<DownloadRates> AverageDownloadRate(const SimTrace& trace);

// Columns t,x,f,tau,delta,q_size,bytes,decode_ok (prefixed by session when
// the trace has more than one session).
void WriteTraceCsv(const SimTrace& trace, std::ostream& out);

nlohmann::json StatsToJson(const EmpiricalStats& stats);
nlohmann::json TraceSummaryToJson(const SimTrace& trace);

}  // namespace onoff

#endif  // ONOFF_SIM_H_
