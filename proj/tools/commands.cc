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

#include "commands.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "onoff/bounds.h"
#include "onoff/lp.h"
#include "onoff/scheme.h"
#include "onoff/sim.h"
#include "onoff/status_macros.h"
#include "onoff/verify.h"

namespace onoff::cli {
namespace {

int Verbosity() {
  const char* v = std::getenv("ONOFF_VERBOSE");
  return v == nullptr ? 0 : std::atoi(v);
}

void Log(int level, const std::string& message) {
  if (Verbosity() >= level) std::cerr << "[onoff] " << message << '\n';
}

absl::StatusOr<nlohmann::json> ReadJsonArgument(const std::string& text,
                                                std::string_view what) {
  std::string body = text;
  const size_t first = text.find_first_not_of(" \t\n");
  if (first == std::string::npos || (text[first] != '{' && text[first] != '[')) {
    std::ifstream in(text);
    if (!in) {
      return absl::InvalidArgumentError(
          absl::StrCat("cannot open ", std::string(what), " file '", text,
                       "'"));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    body = buf.str();
  }
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed ", std::string(what), " JSON"));
  }
  return j;
}

struct SymmetricParams {
  int n = 0;
  double alpha = 0.0;
};

std::optional<SymmetricParams> DetectSymmetric(const TransitionMatrix& p) {
  const int n = p.n();
  const double alpha = p(0, 0);
  const double off = (1.0 - alpha) / (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double want = i == j ? alpha : off;
      if (std::abs(p(i, j) - want) > 1e-12) return std::nullopt;
    }
  }
  return SymmetricParams{n, alpha};
}

// (inner cost, outer cost) from the closed forms.
absl::StatusOr<std::pair<double, double>> ClosedFormCosts(
    const SymmetricParams& sym, const TransitionMatrix& p, int delta) {
  if (delta == 0) return std::make_pair(1.0 * sym.n, 1.0 * sym.n);
  if (sym.n == 2) {
    ASSIGN_OR_RETURN(ConditionalTable cond, BuildConditionalTable(p, delta));
    ASSIGN_OR_RETURN(double cost, ClosedFormTwoStates(cond));
    return std::make_pair(cost, cost);
  }
  if (sym.n * sym.alpha >= 1.0 - 1e-12) {
    ASSIGN_OR_RETURN(double cost,
                     ClosedFormSymmetric(sym.n, sym.alpha, delta));
    return std::make_pair(cost, cost);
  }
  ASSIGN_OR_RETURN(SmallAlphaCosts c,
                   ClosedFormSmallAlpha(sym.n, sym.alpha, delta));
  return std::make_pair(c.inv_r_inner, c.inv_r_outer);
}

absl::StatusOr<ConditionalTable> TableFor(const RunConfig& config,
                                          const TransitionMatrix& p) {
  if (config.delta < 0) {
    return absl::InvalidArgumentError("--delta must be >= 0");
  }
  return BuildConditionalTable(p, config.delta);
}

std::string Csv(const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::string out = absl::StrJoin(header, ",") + "\n";
  for (const auto& row : rows) absl::StrAppend(&out, absl::StrJoin(row, ","), "\n");
  return out;
}

bool EndsWith(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string Display(double v) { return absl::StrFormat("%#.6g", v); }
std::string Raw(double v) { return absl::StrFormat("%.17g", v); }

std::vector<double> DefaultAlphaGrid() {
  std::vector<double> grid;
  for (int k = 0; k <= 33; ++k) grid.push_back(k / 100.0);
  for (int k = 0; k <= 66; ++k) grid.push_back(1.0 / 3.0 + k / 100.0);
  return grid;
}

absl::StatusOr<TransitionMatrix> ResolveChain(const RunConfig& config) {
  const bool inline_chain = !config.chain.empty();
  const bool symmetric = config.n.has_value() || config.alpha.has_value();
  if (inline_chain == symmetric) {
    return absl::InvalidArgumentError(
        "give exactly one chain source: --chain, or --n with --alpha");
  }
  if (symmetric) {
    if (!config.n || !config.alpha) {
      return absl::InvalidArgumentError("--n and --alpha go together");
    }
    return SymmetricChain(*config.n, *config.alpha);
  }
  ASSIGN_OR_RETURN(nlohmann::json j, ReadJsonArgument(config.chain, "chain"));
  return ChainFromJson(j);
}

absl::StatusOr<CommandOutput> CmdBounds(const RunConfig& config) {
  ASSIGN_OR_RETURN(TransitionMatrix p, ResolveChain(config));
  const int first = config.delta;
  const int last = config.delta_max.value_or(first);
  if (first < 0 || last < first) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "bad delta range [%d, %d]", first, last));
  }
  const std::optional<SymmetricParams> sym = DetectSymmetric(p);

  std::vector<std::string> header = {"delta",   "inv_r_inner", "inv_r_outer",
                                     "r_inner", "r_outer"};
  if (sym) {
    header.push_back("cf_r_inner");
    header.push_back("cf_r_outer");
  }
  const size_t display_cols = header.size();
  for (size_t c = 1; c < display_cols; ++c) {
    header.push_back(header[c] + "_raw");
  }

  std::vector<std::vector<std::string>> rows;
  nlohmann::json records = nlohmann::json::array();
  for (int delta = first; delta <= last; ++delta) {
    ASSIGN_OR_RETURN(RateBounds b, RateBoundsForChain(p, delta));
    std::vector<double> values = {b.inv_r_inner, b.inv_r_outer, b.r_inner(),
                                  b.r_outer()};
    nlohmann::json rec = {{"delta", delta},
                          {"inv_r_inner", b.inv_r_inner},
                          {"inv_r_outer", b.inv_r_outer},
                          {"r_inner", b.r_inner()},
                          {"r_outer", b.r_outer()}};
    if (sym) {
      ASSIGN_OR_RETURN(auto costs, ClosedFormCosts(*sym, p, delta));
      values.push_back(1.0 / costs.first);
      values.push_back(1.0 / costs.second);
      rec["cf_r_inner"] = 1.0 / costs.first;
      rec["cf_r_outer"] = 1.0 / costs.second;
    }
    std::vector<std::string> row = {absl::StrCat(delta)};
    for (double v : values) row.push_back(Display(v));
    for (double v : values) row.push_back(Raw(v));
    rows.push_back(std::move(row));
    records.push_back(std::move(rec));
    Log(2, absl::StrFormat("bounds delta=%d r_inner=%.17g r_outer=%.17g",
                           delta, b.r_inner(), b.r_outer()));
  }
  CommandOutput out;
  out.csv = Csv(header, rows);
  out.json = nlohmann::json{{"chain", ChainToJson(p)}, {"bounds", records}};
  return out;
}

absl::StatusOr<CommandOutput> CmdSweepAlpha(const RunConfig& config) {
  if (!config.chain.empty()) {
    return absl::InvalidArgumentError("sweep-alpha takes --n, not --chain");
  }
  const int n = config.n.value_or(3);
  if (config.delta < 0) {
    return absl::InvalidArgumentError("--delta must be >= 0");
  }
  const std::vector<double> grid =
      config.alphas.empty() ? DefaultAlphaGrid() : config.alphas;

  const std::vector<std::string> header = {
      "alpha",          "r_inner",          "r_outer",
      "cf_r_inner",     "cf_r_outer",       "alpha_raw",
      "r_inner_raw",    "r_outer_raw",      "cf_r_inner_raw",
      "cf_r_outer_raw"};
  std::vector<std::vector<std::string>> rows;
  nlohmann::json records = nlohmann::json::array();
  for (double alpha : grid) {
    ASSIGN_OR_RETURN(TransitionMatrix p, SymmetricChain(n, alpha));
    ASSIGN_OR_RETURN(RateBounds b, RateBoundsForChain(p, config.delta));
    ASSIGN_OR_RETURN(auto costs, ClosedFormCosts(SymmetricParams{n, alpha}, p,
                                                 config.delta));
    const std::vector<double> values = {alpha, b.r_inner(), b.r_outer(),
                                        1.0 / costs.first, 1.0 / costs.second};
    std::vector<std::string> row;
    for (double v : values) row.push_back(Display(v));
    for (double v : values) row.push_back(Raw(v));
    rows.push_back(std::move(row));
    records.push_back({{"alpha", alpha},
                       {"r_inner", values[1]},
                       {"r_outer", values[2]},
                       {"cf_r_inner", values[3]},
                       {"cf_r_outer", values[4]}});
  }
  CommandOutput out;
  out.csv = Csv(header, rows);
  out.json = nlohmann::json{{"n", n}, {"delta", config.delta},
                            {"sweep", records}};
  return out;
}

absl::StatusOr<CommandOutput> CmdScheme(const RunConfig& config) {
  ASSIGN_OR_RETURN(TransitionMatrix p, ResolveChain(config));
  ASSIGN_OR_RETURN(ConditionalTable cond, TableFor(config, p));
  ASSIGN_OR_RETURN(ThetaProfile profile, ComputeThetaProfile(cond));
  ASSIGN_OR_RETURN(SchemeDistribution scheme, BuildScheme(profile, cond));
  if (config.form == "set") {
    scheme = CollapseToSets(scheme);
  } else if (config.form != "multiset") {
    return absl::InvalidArgumentError(
        absl::StrCat("--form must be multiset or set, got ", config.form));
  }
  ASSIGN_OR_RETURN(VerificationReport report,
                   CheckScheme(scheme, cond, profile, config.tol));
  CommandOutput out;
  out.json = nlohmann::json{
      {"chain", ChainToJson(p)},
      {"delta", config.delta},
      {"form", config.form},
      {"expected_cost", report.expected_cost},
      {"inv_r_inner", InverseRateInner(profile)},
      {"entries", SchemeToJson(scheme)},
  };
  out.exit_code = report.Passes() ? kExitOk : kExitGateFailure;
  return out;
}

absl::StatusOr<CommandOutput> CmdVerify(const RunConfig& config) {
  ASSIGN_OR_RETURN(TransitionMatrix p, ResolveChain(config));
  ASSIGN_OR_RETURN(ConditionalTable cond, TableFor(config, p));
  ASSIGN_OR_RETURN(ThetaProfile profile, ComputeThetaProfile(cond));
  SchemeDistribution scheme;
  if (config.scheme.empty()) {
    ASSIGN_OR_RETURN(scheme, BuildScheme(profile, cond));
  } else {
    ASSIGN_OR_RETURN(nlohmann::json j,
                     ReadJsonArgument(config.scheme, "scheme"));
    SchemeForm form = SchemeForm::kMultiset;
    const nlohmann::json* entries = &j;
    if (j.is_object()) {
      if (j.value("form", "multiset") == "set") form = SchemeForm::kSet;
      if (!j.contains("entries")) {
        return absl::InvalidArgumentError("scheme JSON lacks 'entries'");
      }
      entries = &j["entries"];
    } else if (config.form == "set") {
      form = SchemeForm::kSet;
    }
    ASSIGN_OR_RETURN(scheme,
                     SchemeFromJson(*entries, p.n(), config.delta, form));
  }
  ASSIGN_OR_RETURN(VerificationReport report,
                   CheckScheme(scheme, cond, profile, config.tol));
  Log(1, absl::StrFormat("verify: gap=%.3g marginal=%.3g cost=%.17g",
                         report.max_privacy_gap, report.max_marginal_error,
                         report.expected_cost));
  CommandOutput out;
  out.json = ReportToJson(report);
  out.exit_code = report.Passes() ? kExitOk : kExitGateFailure;
  return out;
}

absl::StatusOr<CommandOutput> CmdLp(const RunConfig& config) {
  ASSIGN_OR_RETURN(TransitionMatrix p, ResolveChain(config));
  ASSIGN_OR_RETURN(ConditionalTable cond, TableFor(config, p));
  ASSIGN_OR_RETURN(ThetaProfile profile, ComputeThetaProfile(cond));
  ASSIGN_OR_RETURN(LpProblem problem, FormulateLp(cond));
  const LpSolution solution = SolveSimplex(problem);
  Log(1, absl::StrFormat("lp: %d variables, %d rows, %d iterations",
                         problem.num_vars(), problem.rows.size(),
                         solution.iterations));
  const RateBounds b = ComputeRateBounds(profile);
  CommandOutput out;
  nlohmann::json j = {
      {"chain", ChainToJson(p)},
      {"delta", config.delta},
      {"status", LpStatusName(solution.status)},
      {"iterations", solution.iterations},
      {"inv_r_inner", b.inv_r_inner},
      {"inv_r_outer", b.inv_r_outer},
      {"r_inner", b.r_inner()},
      {"r_outer", b.r_outer()},
      {"solution", LpSolutionToJson(problem, solution)},
  };
  bool sandwiched = false;
  if (solution.status == LpStatus::kOptimal) {
    const double cost = solution.optimal_value;
    j["optimal_cost"] = cost;
    j["optimal_rate"] = 1.0 / cost;
    // Gap between the achievable scheme and the optimum; zero whenever the
    // inner bound is tight.
    j["inner_gap"] = b.inv_r_inner - cost;
    sandwiched = b.inv_r_outer - 1e-8 <= cost && cost <= b.inv_r_inner + 1e-8;
  }
  out.json = std::move(j);
  out.exit_code = sandwiched ? kExitOk : kExitGateFailure;
  return out;
}

absl::StatusOr<CommandOutput> CmdSimulate(const RunConfig& config) {
  ASSIGN_OR_RETURN(TransitionMatrix p, ResolveChain(config));
  ASSIGN_OR_RETURN(PrivacySchedule schedule,
                   PrivacySchedule::Parse(config.schedule));
  SimConfig sim(p);
  sim.schedule = schedule;
  sim.horizon = config.horizon;
  sim.sessions = config.sessions;
  sim.message_length = config.message_length;
  sim.seed = config.seed;
  ASSIGN_OR_RETURN(SimTrace trace, RunSimulation(sim));

  bool on_steps_full = true;
  const uint32_t full = MultisetQuery::Full(p.n()).SupportMask();
  for (const StepRecord& s : trace.steps) {
    if (s.on && s.query_mask != full) on_steps_full = false;
  }

  CommandOutput out;
  nlohmann::json summary = TraceSummaryToJson(trace);
  summary["schedule"] = schedule.ToString();
  summary["seed"] = config.seed;
  nlohmann::json privacy = nlohmann::json::array();
  for (const auto& [delta, bucket] : trace.buckets) {
    if (bucket.count < kMinPrivacySamples) continue;
    ASSIGN_OR_RETURN(EmpiricalStats stats, EmpiricalPrivacyTest(trace, delta));
    nlohmann::json s = StatsToJson(stats);
    s.erase("joint_counts");
    privacy.push_back(std::move(s));
  }
  summary["privacy"] = privacy;
  summary["on_steps_full"] = on_steps_full;
  out.json = std::move(summary);
  if (EndsWith(config.out, ".csv")) {
    std::ostringstream csv;
    WriteTraceCsv(trace, csv);
    out.csv = csv.str();
  }
  out.exit_code = trace.decode_failures == 0 && on_steps_full
                      ? kExitOk
                      : kExitGateFailure;
  return out;
}

absl::StatusOr<CommandOutput> Dispatch(const RunConfig& config) {
  if (config.command == "bounds") return CmdBounds(config);
  if (config.command == "sweep-alpha") return CmdSweepAlpha(config);
  if (config.command == "scheme") return CmdScheme(config);
  if (config.command == "verify") return CmdVerify(config);
  if (config.command == "lp") return CmdLp(config);
  if (config.command == "simulate") return CmdSimulate(config);
  return absl::InvalidArgumentError(
      absl::StrCat("unknown command '", config.command, "'"));
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  RunConfig config;
  CLI::App app{"ON-OFF privacy bounds, schemes, LP and simulation"};
  app.require_subcommand(1);

  auto add_chain = [&](CLI::App* sub) {
    sub->add_option("--chain", config.chain,
                    "chain JSON, inline or a file path");
    sub->add_option("--n", config.n, "states of a symmetric chain");
    sub->add_option("--alpha", config.alpha, "self-transition probability");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--delta", config.delta, "gap t - tau");
    sub->add_option("--tol", config.tol, "verification tolerance");
    sub->add_option("--out", config.out, "output path (.csv or .json)");
  };

  CLI::App* bounds = app.add_subcommand("bounds", "rate bounds per delta");
  add_chain(bounds);
  add_common(bounds);
  bounds->add_option("--delta-max", config.delta_max, "last delta");

  CLI::App* sweep = app.add_subcommand("sweep-alpha",
                                       "symmetric-chain rates over alpha");
  sweep->add_option("--n", config.n, "states (default 3)");
  sweep->add_option("--alphas", config.alphas, "comma-separated grid")
      ->delimiter(',');
  add_common(sweep);

  CLI::App* scheme = app.add_subcommand("scheme", "build a query scheme");
  add_chain(scheme);
  add_common(scheme);
  scheme->add_option("--form", config.form, "multiset or set");

  CLI::App* verify = app.add_subcommand("verify", "check a query scheme");
  add_chain(verify);
  add_common(verify);
  verify->add_option("--scheme", config.scheme,
                     "scheme JSON (default: build one)");
  verify->add_option("--form", config.form,
                     "form of a bare entry array: multiset or set");

  CLI::App* lp = app.add_subcommand("lp", "solve the exact LP");
  add_chain(lp);
  add_common(lp);

  CLI::App* simulate = app.add_subcommand("simulate", "run the protocol");
  add_chain(simulate);
  add_common(simulate);
  simulate->add_option("--horizon", config.horizon, "steps per session");
  simulate->add_option("--sessions", config.sessions, "independent sessions");
  simulate->add_option("--seed", config.seed, "RNG seed");
  simulate->add_option("--schedule", config.schedule,
                       "always-on | on-at-0 | bernoulli:p | periodic:k | "
                       "explicit:1,0,...");
  simulate->add_option("--length", config.message_length,
                       "message length in bytes");

  std::vector<std::string> argv_storage = {"onoff"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  for (CLI::App* sub : app.get_subcommands()) config.command = sub->get_name();

  absl::StatusOr<CommandOutput> result = Dispatch(config);
  if (!result.ok()) {
    err << "error: " << result.status().message() << '\n';
    return kExitConfigError;
  }

  std::string body;
  if (config.out.empty()) {
    // Tables print as CSV on stdout; documents as JSON.
    const bool table =
        config.command == "bounds" || config.command == "sweep-alpha";
    body = table ? *result->csv : result->json->dump(2) + "\n";
  } else if (EndsWith(config.out, ".csv") && result->csv) {
    body = *result->csv;
  } else if (EndsWith(config.out, ".json") && result->json) {
    body = result->json->dump(2) + "\n";
  } else {
    err << "error: " << config.command << " cannot write " << config.out
        << "; use .csv or .json\n";
    return kExitConfigError;
  }
  if (config.out.empty()) {
    out << body;
  } else {
    std::ofstream file(config.out);
    file << body;
    if (!file) {
      err << "error: cannot write " << config.out << '\n';
      return kExitConfigError;
    }
  }
  return result->exit_code;
}

}  // namespace onoff::cli
