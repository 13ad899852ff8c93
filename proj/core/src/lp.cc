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

#include "onoff/lp.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "onoff/status_macros.h"

namespace onoff {
namespace {

// Dense simplex tableau for min c^T v, A v = b, v >= 0 with b >= 0.
// Columns [0, num_vars) are structural, [num_vars, num_vars + rows) are
// artificials, the last column is the right-hand side.
class Tableau {
 public:
  Tableau(const LpProblem& problem, double tol)
      : rows_(static_cast<int>(problem.rows.size())),
        vars_(problem.num_vars()),
        cols_(vars_ + rows_ + 1),
        tol_(tol),
        cells_(static_cast<size_t>(rows_ + 1) * cols_, 0.0),
        basis_(rows_) {
    for (int i = 0; i < rows_; ++i) {
      const LpRow& row = problem.rows[i];
      const double sign = row.rhs < 0.0 ? -1.0 : 1.0;
      for (const auto& [j, a] : row.coeffs) at(i, j) += sign * a;
      at(i, vars_ + i) = 1.0;
      at(i, rhs()) = sign * row.rhs;
      basis_[i] = vars_ + i;
    }
  }

  // Phase 1 objective: sum of artificials, priced out against the basis.
  void LoadPhaseOneObjective() {
    for (int j = 0; j < cols_; ++j) obj(j) = 0.0;
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < vars_; ++j) obj(j) -= at(i, j);
      obj(rhs()) -= at(i, rhs());
    }
  }

  void LoadObjective(const std::vector<double>& c) {
    for (int j = 0; j < cols_; ++j) obj(j) = 0.0;
    for (int j = 0; j < vars_; ++j) obj(j) = c[j];
    for (int i = 0; i < rows_; ++i) {
      const int b = basis_[i];
      const double cb = b < vars_ ? c[b] : 0.0;
      if (cb == 0.0) continue;
      for (int j = 0; j < cols_; ++j) obj(j) -= cb * at(i, j);
    }
  }

  // Runs Bland's rule over columns [0, allowed_cols). Returns the final
  // status; iterations are accumulated into *iterations.
  LpStatus Optimize(int allowed_cols, int max_iters, int* iterations) {
    while (true) {
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        if (obj(j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return LpStatus::kOptimal;
      if (*iterations >= max_iters) return LpStatus::kIterationLimit;

      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows_; ++i) {
        const double a = at(i, enter);
        if (a <= tol_) continue;
        const double ratio = at(i, rhs()) / a;
        const bool tie = leave >= 0 && ratio <= best + 1e-12 &&
                         basis_[i] < basis_[leave];
        if (leave < 0 || ratio < best - 1e-12 || tie) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return LpStatus::kUnbounded;
      Pivot(leave, enter);
      ++*iterations;
    }
  }

  // Moves zero-level artificials out of the basis where a structural column
  // can replace them. Rows where none can are linearly dependent and keep
  // their artificial at zero.
  void DriveOutArtificials() {
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < vars_) continue;
      int best = -1;
      double best_abs = tol_;
      for (int j = 0; j < vars_; ++j) {
        if (std::abs(at(i, j)) > best_abs) {
          best_abs = std::abs(at(i, j));
          best = j;
        }
      }
      if (best >= 0) Pivot(i, best);
    }
  }

  double objective_value() const { return -obj(rhs()); }

  std::vector<double> Primal() const {
    std::vector<double> v(vars_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < vars_) v[basis_[i]] = at(i, rhs());
    }
    return v;
  }

  int vars() const { return vars_; }

 private:
  int rhs() const { return cols_ - 1; }
  double& at(int i, int j) { return cells_[static_cast<size_t>(i) * cols_ + j]; }
  double at(int i, int j) const {
    return cells_[static_cast<size_t>(i) * cols_ + j];
  }
  double& obj(int j) { return at(rows_, j); }
  double obj(int j) const { return at(rows_, j); }

  void Pivot(int p, int q) {
    double* prow = &cells_[static_cast<size_t>(p) * cols_];
    const double inv = 1.0 / prow[q];
    for (int j = 0; j < cols_; ++j) prow[j] *= inv;
    prow[q] = 1.0;
    for (int i = 0; i <= rows_; ++i) {
      if (i == p) continue;
      double* row = &cells_[static_cast<size_t>(i) * cols_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (int j = 0; j < cols_; ++j) {
        if (prow[j] != 0.0) row[j] -= f * prow[j];
      }
      row[q] = 0.0;
    }
    basis_[p] = q;
  }

  int rows_;
  int vars_;
  int cols_;
  double tol_;
  std::vector<double> cells_;
  std::vector<int> basis_;
};

std::string KindName(LpVariable::Kind kind) {
  return kind == LpVariable::Kind::kJoint ? "a" : "s";
}

std::vector<int> MaskElements(uint32_t mask) {
  std::vector<int> out;
  for (int x = 0; mask >> x; ++x) {
    if (mask & (1u << x)) out.push_back(x);
  }
  return out;
}

}  // namespace

const char* LpStatusName(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal:
      return "optimal";
    case LpStatus::kInfeasible:
      return "infeasible";
    case LpStatus::kUnbounded:
      return "unbounded";
    case LpStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "unknown";
}

absl::StatusOr<LpProblem> FormulateLp(const ConditionalTable& cond) {
  const int n = cond.n();
  if (n > kMaxLpStates) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "TooLarge: the exact LP is limited to n <= %d, got %d", kMaxLpStates,
        n));
  }
  const int m = cond.m();
  const uint32_t num_queries = (1u << n) - 1;
  LpProblem problem;
  problem.n = n;

  // joint_index[q][x][u], -1 where x is not in q.
  std::vector<std::vector<std::vector<int>>> joint_index(
      num_queries + 1, std::vector<std::vector<int>>(n, std::vector<int>(m, -1)));
  for (uint32_t q = 1; q <= num_queries; ++q) {
    for (int x = 0; x < n; ++x) {
      if (!(q & (1u << x))) continue;
      for (int u = 0; u < m; ++u) {
        joint_index[q][x][u] = problem.num_vars();
        problem.variables.push_back({LpVariable::Kind::kJoint, q, x, u});
        problem.objective.push_back(0.0);
      }
    }
  }
  problem.num_joint_vars = problem.num_vars();
  std::vector<int> query_index(num_queries + 1, -1);
  for (uint32_t q = 1; q <= num_queries; ++q) {
    query_index[q] = problem.num_vars();
    problem.variables.push_back({LpVariable::Kind::kQuery, q, -1, -1});
    problem.objective.push_back(std::popcount(q));
  }
  problem.num_query_vars = problem.num_vars() - problem.num_joint_vars;

  for (int u = 0; u < m; ++u) {
    for (int x = 0; x < n; ++x) {
      LpRow row;
      for (uint32_t q = 1; q <= num_queries; ++q) {
        if (joint_index[q][x][u] >= 0) row.coeffs.push_back({joint_index[q][x][u], 1.0});
      }
      row.rhs = cond(u, x);
      problem.rows.push_back(std::move(row));
    }
  }
  for (uint32_t q = 1; q <= num_queries; ++q) {
    for (int u = 0; u < m; ++u) {
      LpRow row;
      for (int x = 0; x < n; ++x) {
        if (joint_index[q][x][u] >= 0) row.coeffs.push_back({joint_index[q][x][u], 1.0});
      }
      row.coeffs.push_back({query_index[q], -1.0});
      problem.rows.push_back(std::move(row));
    }
  }
  return problem;
}

double MaxResidual(const LpProblem& problem, std::span<const double> point) {
  double worst = 0.0;
  for (const LpRow& row : problem.rows) {
    double lhs = 0.0;
    for (const auto& [j, a] : row.coeffs) lhs += a * point[j];
    worst = std::max(worst, std::abs(lhs - row.rhs));
  }
  return worst;
}

double ObjectiveValue(const LpProblem& problem, std::span<const double> point) {
  double value = 0.0;
  for (int j = 0; j < problem.num_vars(); ++j) {
    value += problem.objective[j] * point[j];
  }
  return value;
}

LpSolution SolveSimplex(const LpProblem& problem, int max_iters, double tol) {
  LpSolution solution;
  Tableau tableau(problem, tol);
  const int vars = problem.num_vars();

  tableau.LoadPhaseOneObjective();
  LpStatus status =
      tableau.Optimize(vars + static_cast<int>(problem.rows.size()), max_iters,
                       &solution.iterations);
  if (status == LpStatus::kIterationLimit) {
    solution.status = status;
    return solution;
  }
  // Phase 1 is bounded below by zero, so it always terminates optimal here.
  double scale = 1.0;
  for (const LpRow& row : problem.rows) scale = std::max(scale, std::abs(row.rhs));
  if (tableau.objective_value() > 1e-7 * scale) {
    solution.status = LpStatus::kInfeasible;
    return solution;
  }
  tableau.DriveOutArtificials();

  tableau.LoadObjective(problem.objective);
  status = tableau.Optimize(vars, max_iters, &solution.iterations);
  solution.status = status;
  solution.primal = tableau.Primal();
  solution.optimal_value = ObjectiveValue(problem, solution.primal);
  solution.max_residual = MaxResidual(problem, solution.primal);
  solution.min_primal = solution.primal.empty()
                            ? 0.0
                            : *std::min_element(solution.primal.begin(),
                                                solution.primal.end());
  return solution;
}

absl::StatusOr<double> OptimalCost(const ConditionalTable& cond) {
  ASSIGN_OR_RETURN(const LpProblem problem, FormulateLp(cond));
  const LpSolution solution = SolveSimplex(problem);
  switch (solution.status) {
    case LpStatus::kOptimal:
      return solution.optimal_value;
    case LpStatus::kIterationLimit:
      return absl::DeadlineExceededError(absl::StrFormat(
          "IterationLimit: simplex stopped after %d pivots",
          solution.iterations));
    default:
      // Downloading everything is always feasible, and the objective is
      // bounded below by 1.
      return absl::InternalError(absl::StrFormat(
          "Infeasible: simplex reported %s", LpStatusName(solution.status)));
  }
}

absl::StatusOr<double> OptimalRate(const ConditionalTable& cond) {
  ASSIGN_OR_RETURN(const double cost, OptimalCost(cond));
  return 1.0 / cost;
}

absl::StatusOr<std::vector<double>> LpPointFromScheme(
    const LpProblem& problem, const SchemeDistribution& set_scheme) {
  if (set_scheme.form() != SchemeForm::kSet || set_scheme.n() != problem.n) {
    return absl::InvalidArgumentError(
        "LP point needs a set-form scheme of matching size");
  }
  std::map<std::tuple<uint32_t, int, int>, int> joint;
  std::map<uint32_t, int> query;
  for (int j = 0; j < problem.num_vars(); ++j) {
    const LpVariable& v = problem.variables[j];
    if (v.kind == LpVariable::Kind::kJoint) {
      joint[{v.query_mask, v.x, v.u}] = j;
    } else {
      query[v.query_mask] = j;
    }
  }
  const int m = problem.n * problem.n;
  std::vector<double> point(problem.num_vars(), 0.0);
  for (const SchemeEntry& e : set_scheme.entries()) {
    auto it = joint.find({e.query.SupportMask(), e.x, e.u});
    if (it == joint.end()) {
      return absl::InvalidArgumentError("scheme entry is not decodable");
    }
    point[it->second] += e.mass;
    point[query.at(e.query.SupportMask())] += e.mass / m;
  }
  return point;
}

nlohmann::json LpProblemToJson(const LpProblem& problem) {
  nlohmann::json rows = nlohmann::json::array();
  for (const LpRow& row : problem.rows) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& [j, a] : row.coeffs) coeffs.push_back({j, a});
    rows.push_back({{"coeffs", coeffs}, {"rhs", row.rhs}});
  }
  nlohmann::json vars = nlohmann::json::array();
  for (const LpVariable& v : problem.variables) {
    vars.push_back({{"kind", KindName(v.kind)},
                    {"q", MaskElements(v.query_mask)},
                    {"x", v.x},
                    {"u", v.u}});
  }
  return {{"n", problem.n},
          {"num_joint_vars", problem.num_joint_vars},
          {"num_query_vars", problem.num_query_vars},
          {"objective", problem.objective},
          {"rows", rows},
          {"variables", vars}};
}

absl::StatusOr<LpProblem> LpProblemFromJson(const nlohmann::json& j) {
  LpProblem problem;
  try {
    problem.n = j.at("n").get<int>();
    problem.num_joint_vars = j.at("num_joint_vars").get<int>();
    problem.num_query_vars = j.at("num_query_vars").get<int>();
    problem.objective = j.at("objective").get<std::vector<double>>();
    for (const auto& r : j.at("rows")) {
      LpRow row;
      for (const auto& c : r.at("coeffs")) {
        row.coeffs.push_back({c.at(0).get<int>(), c.at(1).get<double>()});
      }
      row.rhs = r.at("rhs").get<double>();
      problem.rows.push_back(std::move(row));
    }
    for (const auto& v : j.at("variables")) {
      LpVariable var;
      var.kind = v.at("kind").get<std::string>() == "a"
                     ? LpVariable::Kind::kJoint
                     : LpVariable::Kind::kQuery;
      for (int x : v.at("q").get<std::vector<int>>()) var.query_mask |= 1u << x;
      var.x = v.at("x").get<int>();
      var.u = v.at("u").get<int>();
      problem.variables.push_back(var);
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrFormat("malformed LP problem JSON: %s", e.what()));
  }
  if (problem.objective.size() != problem.variables.size()) {
    return absl::InvalidArgumentError("LP objective and variables disagree");
  }
  return problem;
}

nlohmann::json LpSolutionToJson(const LpProblem& problem,
                                const LpSolution& solution) {
  nlohmann::json support = nlohmann::json::array();
  for (size_t j = 0; j < solution.primal.size(); ++j) {
    if (solution.primal[j] == 0.0) continue;
    const LpVariable& v = problem.variables[j];
    nlohmann::json item = {{"var", j},
                           {"kind", KindName(v.kind)},
                           {"q", MaskElements(v.query_mask)},
                           {"value", solution.primal[j]}};
    if (v.kind == LpVariable::Kind::kJoint) {
      const auto [x_tau, x_next] = ContextPair(problem.n, v.u);
      item["x"] = v.x;
      item["u"] = {x_tau, x_next};
    }
    support.push_back(std::move(item));
  }
  return {{"status", LpStatusName(solution.status)},
          {"optimal_value", solution.optimal_value},
          {"iterations", solution.iterations},
          {"max_residual", solution.max_residual},
          {"min_primal", solution.min_primal},
          {"primal", solution.primal},
          {"support", support}};
}

absl::StatusOr<LpSolution> LpSolutionFromJson(const nlohmann::json& j) {
  LpSolution solution;
  try {
    const std::string status = j.at("status").get<std::string>();
    bool known = false;
    for (LpStatus s : {LpStatus::kOptimal, LpStatus::kInfeasible,
                       LpStatus::kUnbounded, LpStatus::kIterationLimit}) {
      if (status == LpStatusName(s)) {
        solution.status = s;
        known = true;
      }
    }
    if (!known) {
      return absl::InvalidArgumentError(
          absl::StrFormat("unknown LP status \"%s\"", status));
    }
    solution.optimal_value = j.at("optimal_value").get<double>();
    solution.iterations = j.at("iterations").get<int>();
    solution.max_residual = j.at("max_residual").get<double>();
    solution.min_primal = j.at("min_primal").get<double>();
    solution.primal = j.at("primal").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrFormat("malformed LP solution JSON: %s", e.what()));
  }
  return solution;
}

}  // namespace onoff
