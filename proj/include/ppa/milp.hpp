#pragma once

#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppa/core.hpp"
#include "ppa/generator.hpp"

namespace ppa {

inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kPivotTol = 1e-9;
inline constexpr double kGapClosedTol = 1e-6;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class VarKind { Binary, Continuous };
enum class Relation { LessEqual, Equal, GreaterEqual };

struct LinTerm {
  int var = 0;
  double coef = 0.0;
};

struct Constraint {
  std::string name;
  std::vector<LinTerm> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

/// Linear model, minimization sense. Binary variables carry bounds [0,1];
/// variable names double as the semantic map back to assignment decisions.
struct MilpModel {
  struct Variable {
    std::string name;
    VarKind kind = VarKind::Continuous;
    double lo = 0.0;
    double hi = kInfinity;
    double obj = 0.0;
  };

  std::vector<Variable> vars;
  std::vector<Constraint> cons;
  double obj_constant = 0.0;
  /// Known feasible point, if the builder has one (the all-reject
  /// assignment for the PPA family); seeds the incumbent.
  std::optional<std::vector<double>> initial_feasible;

  int add_var(std::string name, VarKind kind, double lo, double hi, double obj);
  void add_constraint(std::string name, std::vector<LinTerm> terms,
                      Relation relation, double rhs);
  int var_index(const std::string& name) const;

  int num_vars() const { return static_cast<int>(vars.size()); }
  int num_cons() const { return static_cast<int>(cons.size()); }
  double eval_objective(const std::vector<double>& values) const;

 private:
  std::unordered_map<std::string, int> name_to_index_;
};

struct SolveLimits {
  std::optional<double> time_limit;      // seconds of wall time
  std::optional<double> gap_limit;       // relative gap target
  std::optional<long long> node_limit;   // processed branch-and-bound nodes
};

struct SolveStats {
  double wall_time = 0.0;
  long long nodes = 0;
  long long simplex_iterations = 0;
  std::vector<double> gap_history;  // after every incumbent or bound move
};

enum class SolveStatus { Optimal, FeasibleWithinLimits, Infeasible };

struct MipSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = kInfinity;
  std::vector<double> values;
  double best_bound = -kInfinity;
  double gap = kInfinity;
  SolveStats stats;
};

struct LpSolution {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> values;
  long long iterations = 0;
  double infeasibility = 0.0;  // phase-1 optimum when infeasible
};

/// Optimal basic solution of the LP relaxation (integrality dropped,
/// bounds kept) via a bounded-variable primal simplex with Bland's rule.
LpSolution solve_lp(const MilpModel& model);

/// solve_lp with per-variable bound overrides (branching fixes); adds the
/// simplex iteration count to *iteration_sink when given.
LpSolution solve_lp_bounded(const MilpModel& model,
                            const std::vector<double>& lo,
                            const std::vector<double>& hi,
                            long long* iteration_sink);

/// Exact best-bound-first branch and bound. Branches on the binary with
/// fractional part closest to 0.5 (ties to the lowest index), explores the
/// child that rounds toward the incumbent first, and reports the
/// (objective - bound) / max(|objective|, eps) gap.
MipSolution solve_mip(const MilpModel& model, const SolveLimits& limits = {});

/// Remaining capacity the optimization models run against.
struct ResidualCapacity {
  std::vector<int> slots_left;
  std::vector<double> workload_left;

  static ResidualCapacity full(const CostParams& params);
  bool allows(const Patient& patient, int physician) const;
  void apply(const Patient& patient, Action action);
};

ResidualCapacity residual_of(const SystemState& state, const CostParams& params);

/// Immediate cost of deciding `action` for `patient` (no state needed).
double immediate_cost(const Patient& patient, Action action,
                      const CostParams& params);

/// Static assignment model over `patients` under residual capacity:
/// per-patient choice rows, slot rows, workload rows. Preferred
/// assignments carry zero objective weight.
MilpModel build_ppa_model(const std::vector<Patient>& patients,
                          const ResidualCapacity& residual,
                          const CostParams& params);

/// Extensive form of the two-stage model: one shared copy of the
/// first-stage variables (non-anticipativity by identification) plus
/// per-scenario recourse copies, objective averaged over scenarios.
MilpModel build_sppa_model(const Patient& first, const ScenarioSet& scenarios,
                           const ResidualCapacity& residual,
                           const CostParams& params);

struct SppaEnumerationResult {
  Action first_action;
  double value = kInfinity;
  bool exact = false;        // every scenario subproblem closed optimally
  double max_gap = 0.0;
  bool reached_limit = false;
  SolveStats stats;
};

/// Exact reformulation of the two-stage model: scenarios couple only
/// through the first-stage choice, so enumerate the (at most P+1) choices
/// and solve the scenario subproblems independently. Ties go to the lower
/// physician index, rejection last.
SppaEnumerationResult solve_sppa_by_enumeration(const Patient& first,
                                                const ScenarioSet& scenarios,
                                                const ResidualCapacity& residual,
                                                const CostParams& params,
                                                const SolveLimits& limits = {});

struct BruteForceResult {
  double objective = 0.0;
  std::vector<Action> actions;
  long long enumerated = 0;
};

/// Exhaustive enumeration oracle; deterministic lexicographic tie-break.
/// Throws when the action space exceeds size_cap.
BruteForceResult brute_force_solve(const std::vector<Patient>& patients,
                                   const ResidualCapacity& residual,
                                   const CostParams& params,
                                   long long size_cap = 1000000);

/// Reads patient `patient_index`'s decision out of a solved assignment
/// model via the variable name map.
Action extract_action(const MilpModel& model, const std::vector<double>& values,
                      int patient_index, const Patient& patient);

}  // namespace ppa
