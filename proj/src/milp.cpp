#include "ppa/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <queue>

#include "ppa/parallel.hpp"

namespace ppa {

namespace {
constexpr double kPruneTol = 1e-9;
constexpr double kGapEps = 1e-9;

double relative_gap(double objective, double bound) {
  if (objective == kInfinity || bound == -kInfinity) return kInfinity;
  return (objective - bound) / std::max(std::abs(objective), kGapEps);
}

// When every objective coefficient is an integer multiple of g and all
// variables are binary, feasible objectives live on the grid
// obj_constant + g*Z, so LP bounds can be lifted to the next grid point.
double objective_granularity(const MilpModel& model) {
  long long g = 0;
  for (const MilpModel::Variable& v : model.vars) {
    if (v.kind != VarKind::Binary) return 0.0;
    const double c = std::abs(v.obj);
    if (c == 0.0) continue;
    const double r = std::round(c);
    if (r < 1.0 || std::abs(c - r) > 1e-9) return 0.0;
    g = g == 0 ? static_cast<long long>(r)
               : std::gcd(g, static_cast<long long>(r));
  }
  return static_cast<double>(g);
}

double lift_bound(double bound, double granularity, double constant) {
  if (granularity <= 0.0 || bound == -kInfinity) return bound;
  const double steps = std::ceil((bound - constant) / granularity - 1e-9);
  return constant + steps * granularity;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}
}  // namespace

int MilpModel::add_var(std::string name, VarKind kind, double lo, double hi,
                       double obj) {
  if (kind == VarKind::Binary && (lo != 0.0 || hi != 1.0))
    throw Error("invalid_model", "binary variables must have bounds [0,1]");
  const int index = num_vars();
  if (!name_to_index_.emplace(name, index).second)
    throw Error("invalid_model", "duplicate variable name " + name);
  vars.push_back(Variable{std::move(name), kind, lo, hi, obj});
  return index;
}

void MilpModel::add_constraint(std::string name, std::vector<LinTerm> terms,
                               Relation relation, double rhs) {
  for (const LinTerm& t : terms)
    if (t.var < 0 || t.var >= num_vars())
      throw Error("invalid_model",
                  "constraint " + name + " references an undeclared variable");
  cons.push_back(Constraint{std::move(name), std::move(terms), relation, rhs});
}

int MilpModel::var_index(const std::string& name) const {
  auto it = name_to_index_.find(name);
  if (it == name_to_index_.end())
    throw Error("invalid_model", "unknown variable " + name);
  return it->second;
}

double MilpModel::eval_objective(const std::vector<double>& values) const {
  double obj = obj_constant;
  for (int j = 0; j < num_vars(); ++j) obj += vars[j].obj * values[j];
  return obj;
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

struct BnbNode {
  double bound = -kInfinity;
  int parent = -1;
  int var = -1;
  unsigned char value = 0;
};

struct QueueEntry {
  double bound;
  int id;
  bool operator>(const QueueEntry& other) const {
    if (bound != other.bound) return bound > other.bound;
    return id > other.id;
  }
};

bool constraint_holds(const Constraint& c, const std::vector<double>& x) {
  double activity = 0.0;
  for (const LinTerm& t : c.terms) activity += t.coef * x[t.var];
  switch (c.relation) {
    case Relation::LessEqual:
      return activity <= c.rhs + 1e-7;
    case Relation::Equal:
      return std::abs(activity - c.rhs) <= 1e-7;
    case Relation::GreaterEqual:
      return activity >= c.rhs - 1e-7;
  }
  return false;
}

bool is_feasible_point(const MilpModel& model, const std::vector<double>& x) {
  for (int j = 0; j < model.num_vars(); ++j)
    if (x[j] < model.vars[j].lo - 1e-7 || x[j] > model.vars[j].hi + 1e-7)
      return false;
  for (const Constraint& c : model.cons)
    if (!constraint_holds(c, x)) return false;
  return true;
}

// Rounding support for models made of all-ones choice rows over binaries
// plus <= side rows, which covers the whole assignment family here.
struct RoundingPlan {
  bool usable = false;
  std::vector<int> choice_rows;
  std::vector<int> side_rows;
};

RoundingPlan build_rounding_plan(const MilpModel& model) {
  RoundingPlan plan;
  for (const MilpModel::Variable& v : model.vars)
    if (v.kind != VarKind::Binary) return plan;

  std::vector<char> covered(model.num_vars(), 0);
  for (int r = 0; r < model.num_cons(); ++r) {
    const Constraint& c = model.cons[r];
    bool choice = c.relation == Relation::Equal && c.rhs == 1.0;
    if (choice)
      for (const LinTerm& t : c.terms)
        if (t.coef != 1.0) {
          choice = false;
          break;
        }
    if (choice) {
      for (const LinTerm& t : c.terms) {
        if (covered[t.var]) return plan;  // overlapping choice rows
        covered[t.var] = 1;
      }
      plan.choice_rows.push_back(r);
    } else if (c.relation == Relation::LessEqual) {
      plan.side_rows.push_back(r);
    } else {
      return plan;
    }
  }
  for (char flag : covered)
    if (!flag) return plan;
  plan.usable = true;
  return plan;
}

// Greedy completion of a fractional LP point: per choice row take the
// highest-valued option that still fits every side row. Deterministic, so
// node counts stay reproducible.
bool round_to_feasible(const MilpModel& model, const RoundingPlan& plan,
                       const std::vector<double>& lp_values,
                       const std::vector<double>& lo,
                       const std::vector<double>& hi,
                       std::vector<double>& out) {
  if (!plan.usable) return false;
  out.assign(model.num_vars(), 0.0);
  std::vector<double> slack(model.num_cons(), 0.0);
  for (int r : plan.side_rows) slack[r] = model.cons[r].rhs;

  // Column -> side-row usage, built once per call (models are small).
  for (int r : plan.choice_rows) {
    const Constraint& row = model.cons[r];
    std::vector<int> order(row.terms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return lp_values[row.terms[a].var] > lp_values[row.terms[b].var];
    });
    int chosen = -1;
    for (int idx : order) {
      const int var = row.terms[idx].var;
      if (hi[var] < 0.5) continue;  // fixed to zero on this node
      bool fits = true;
      for (int s : plan.side_rows) {
        for (const LinTerm& t : model.cons[s].terms)
          if (t.var == var && t.coef > slack[s] + 1e-9) {
            fits = false;
            break;
          }
        if (!fits) break;
      }
      if (fits) {
        chosen = var;
        break;
      }
    }
    if (chosen < 0) return false;
    out[chosen] = 1.0;
    for (int s : plan.side_rows)
      for (const LinTerm& t : model.cons[s].terms)
        if (t.var == chosen) slack[s] -= t.coef;
  }
  // Branching may have fixed variables to one; honor those fixings.
  for (int j = 0; j < model.num_vars(); ++j)
    if (lo[j] > 0.5 && out[j] < 0.5) return false;
  return is_feasible_point(model, out);
}

}  // namespace

MipSolution solve_mip(const MilpModel& model, const SolveLimits& limits) {
  const auto start = std::chrono::steady_clock::now();
  MipSolution result;

  if (model.initial_feasible) {
    result.values = *model.initial_feasible;
    result.objective = model.eval_objective(result.values);
    result.status = SolveStatus::FeasibleWithinLimits;
  }

  const RoundingPlan rounding = build_rounding_plan(model);
  const double granularity = objective_granularity(model);

  std::vector<BnbNode> arena;
  arena.push_back(BnbNode{});
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
  open.push(QueueEntry{-kInfinity, 0});

  std::vector<double> lo(model.num_vars()), hi(model.num_vars());
  std::vector<double> rounded;
  double best_bound = -kInfinity;
  const long long node_cap =
      limits.node_limit ? *limits.node_limit : 100000000LL;
  bool hit_limit = false;
  bool gap_target_met = false;

  auto record_gap = [&] {
    result.stats.gap_history.push_back(relative_gap(result.objective, best_bound));
  };

  while (!open.empty()) {
    if (result.stats.nodes >= node_cap) {
      hit_limit = true;
      break;
    }
    if (limits.time_limit && seconds_since(start) > *limits.time_limit) {
      hit_limit = true;
      break;
    }

    const QueueEntry entry = open.top();
    open.pop();
    if (entry.bound > best_bound) {
      best_bound = entry.bound;
      record_gap();
    }
    // Best-first: once the tightest open bound cannot beat the incumbent,
    // nothing left can.
    if (result.objective < kInfinity &&
        entry.bound >= result.objective - kPruneTol) {
      best_bound = result.objective;
      record_gap();
      while (!open.empty()) open.pop();
      break;
    }

    for (int j = 0; j < model.num_vars(); ++j) {
      lo[j] = model.vars[j].lo;
      hi[j] = model.vars[j].hi;
    }
    for (int at = entry.id; at > 0; at = arena[at].parent) {
      lo[arena[at].var] = arena[at].value;
      hi[arena[at].var] = arena[at].value;
    }

    const LpSolution lp =
        solve_lp_bounded(model, lo, hi, &result.stats.simplex_iterations);
    result.stats.nodes += 1;
    if (!lp.feasible) continue;
    const double node_bound =
        lift_bound(lp.objective, granularity, model.obj_constant);
    if (result.objective < kInfinity &&
        node_bound >= result.objective - kPruneTol)
      continue;

    int branch_var = -1;
    double branch_score = 1.0;
    for (int j = 0; j < model.num_vars(); ++j) {
      if (model.vars[j].kind != VarKind::Binary) continue;
      const double frac = lp.values[j] - std::floor(lp.values[j]);
      if (frac <= kIntegralityTol || frac >= 1.0 - kIntegralityTol) continue;
      const double score = std::abs(frac - 0.5);
      if (score < branch_score - 1e-12) {
        branch_score = score;
        branch_var = j;
      }
    }

    if (branch_var < 0) {
      // Integral relaxation: evaluate the rounded point exactly.
      std::vector<double> candidate(lp.values);
      for (int j = 0; j < model.num_vars(); ++j)
        if (model.vars[j].kind == VarKind::Binary)
          candidate[j] = std::round(candidate[j]);
      const double obj = model.eval_objective(candidate);
      if (obj < result.objective - 1e-12) {
        result.objective = obj;
        result.values = std::move(candidate);
        record_gap();
      }
      continue;
    }

    if (round_to_feasible(model, rounding, lp.values, lo, hi, rounded)) {
      const double obj = model.eval_objective(rounded);
      if (obj < result.objective - 1e-12) {
        result.objective = obj;
        result.values = rounded;
        record_gap();
      }
    }

    const int prefer =
        result.values.empty()
            ? (lp.values[branch_var] >= 0.5 ? 1 : 0)
            : (result.values[branch_var] >= 0.5 ? 1 : 0);
    for (int child = 0; child < 2; ++child) {
      const unsigned char value =
          static_cast<unsigned char>(child == 0 ? prefer : 1 - prefer);
      arena.push_back(BnbNode{node_bound, entry.id, branch_var, value});
      open.push(QueueEntry{node_bound, static_cast<int>(arena.size()) - 1});
    }

    if (result.objective < kInfinity) {
      const double open_bound = open.empty() ? result.objective : open.top().bound;
      const double gap = relative_gap(result.objective,
                                      std::max(best_bound, open_bound));
      if (gap <= kGapClosedTol) {
        best_bound = std::max(best_bound, open_bound);
        record_gap();
        break;
      }
      if (limits.gap_limit && gap <= *limits.gap_limit) {
        best_bound = std::max(best_bound, open_bound);
        gap_target_met = true;
        record_gap();
        break;
      }
    }
  }

  result.stats.wall_time = seconds_since(start);
  if (result.objective == kInfinity) {
    // No feasible point anywhere in the tree.
    result.status = hit_limit ? SolveStatus::FeasibleWithinLimits
                              : SolveStatus::Infeasible;
    result.best_bound = best_bound;
    result.gap = kInfinity;
    return result;
  }

  if (!hit_limit && !gap_target_met) best_bound = result.objective;
  result.best_bound = best_bound;
  result.gap = relative_gap(result.objective, best_bound);
  result.status = (!hit_limit && !gap_target_met) || result.gap <= kGapClosedTol
                      ? SolveStatus::Optimal
                      : SolveStatus::FeasibleWithinLimits;
  return result;
}

// ---------------------------------------------------------------------------
// PPA model builders

ResidualCapacity ResidualCapacity::full(const CostParams& params) {
  ResidualCapacity residual;
  residual.slots_left = params.appointment_caps;
  residual.workload_left.assign(params.physicians, params.session_minutes);
  return residual;
}

bool ResidualCapacity::allows(const Patient& patient, int physician) const {
  return slots_left[physician - 1] >= 1 &&
         patient.duration <= workload_left[physician - 1];
}

void ResidualCapacity::apply(const Patient& patient, Action action) {
  if (action.value == 0) return;
  slots_left[action.value - 1] -= 1;
  workload_left[action.value - 1] -= patient.duration;
}

ResidualCapacity residual_of(const SystemState& state, const CostParams& params) {
  ResidualCapacity residual;
  residual.slots_left.resize(params.physicians);
  residual.workload_left.resize(params.physicians);
  for (int p = 1; p <= params.physicians; ++p) {
    residual.slots_left[p - 1] = state.physician(p).slots_left;
    residual.workload_left[p - 1] =
        params.session_minutes - state.physician(p).workload;
  }
  return residual;
}

double immediate_cost(const Patient& patient, Action action,
                      const CostParams& params) {
  if (action.value == 0) return params.reject_cost_for(patient.priority);
  if (action.value == patient.preferred) return 0.0;
  return params.prefer_cost_for(patient.priority);
}

namespace {

std::string assign_name(int k, int p) {
  return "a_" + std::to_string(k) + "_" + std::to_string(p);
}
std::string reject_name(int k) { return "u_" + std::to_string(k); }

void add_patient_block(MilpModel& model, const Patient& patient, int k,
                       const CostParams& params, double weight,
                       const std::string& suffix) {
  std::vector<LinTerm> choice;
  for (int p : patient.eligible) {
    const double cost =
        p == patient.preferred ? 0.0
                               : weight * params.prefer_cost_for(patient.priority);
    const int var =
        model.add_var(assign_name(k, p) + suffix, VarKind::Binary, 0.0, 1.0, cost);
    choice.push_back(LinTerm{var, 1.0});
  }
  const int reject =
      model.add_var(reject_name(k) + suffix, VarKind::Binary, 0.0, 1.0,
                    weight * params.reject_cost_for(patient.priority));
  choice.push_back(LinTerm{reject, 1.0});
  model.add_constraint("asg_" + std::to_string(k) + suffix, std::move(choice),
                       Relation::Equal, 1.0);
}

void add_capacity_rows(MilpModel& model, const std::vector<Patient>& patients,
                       const ResidualCapacity& residual,
                       const CostParams& params, int first_k,
                       const std::string& suffix,
                       const std::vector<LinTerm>* shared_slots,
                       const std::vector<LinTerm>* shared_work,
                       double shared_duration) {
  for (int p = 1; p <= params.physicians; ++p) {
    std::vector<LinTerm> slots;
    std::vector<LinTerm> work;
    if (shared_slots) {
      for (const LinTerm& t : shared_slots[p - 1]) slots.push_back(t);
      for (const LinTerm& t : shared_work[p - 1])
        work.push_back(LinTerm{t.var, shared_duration});
    }
    for (std::size_t i = 0; i < patients.size(); ++i) {
      if (!patients[i].is_eligible(p)) continue;
      const int var =
          model.var_index(assign_name(first_k + static_cast<int>(i), p) + suffix);
      slots.push_back(LinTerm{var, 1.0});
      work.push_back(LinTerm{var, patients[i].duration});
    }
    if (!slots.empty())
      model.add_constraint("cap_" + std::to_string(p) + suffix, std::move(slots),
                           Relation::LessEqual,
                           static_cast<double>(residual.slots_left[p - 1]));
    if (!work.empty())
      model.add_constraint("wrk_" + std::to_string(p) + suffix, std::move(work),
                           Relation::LessEqual, residual.workload_left[p - 1]);
  }
}

std::vector<double> all_reject_point(const MilpModel& model) {
  std::vector<double> point(model.num_vars(), 0.0);
  for (int j = 0; j < model.num_vars(); ++j)
    if (model.vars[j].name[0] == 'u') point[j] = 1.0;
  return point;
}

}  // namespace

MilpModel build_ppa_model(const std::vector<Patient>& patients,
                          const ResidualCapacity& residual,
                          const CostParams& params) {
  if (patients.empty())
    throw Error("invalid_model", "assignment model needs at least one patient");
  for (const Patient& patient : patients) patient.validate(params.physicians);

  MilpModel model;
  for (std::size_t k = 0; k < patients.size(); ++k)
    add_patient_block(model, patients[k], static_cast<int>(k), params, 1.0, "");
  add_capacity_rows(model, patients, residual, params, 0, "", nullptr, nullptr,
                    0.0);
  model.initial_feasible = all_reject_point(model);
  return model;
}

MilpModel build_sppa_model(const Patient& first, const ScenarioSet& scenarios,
                           const ResidualCapacity& residual,
                           const CostParams& params) {
  if (scenarios.size() < 1)
    throw Error("invalid_model", "two-stage model needs at least one scenario");
  first.validate(params.physicians);
  for (const EpisodeRealization& scenario : scenarios.scenarios)
    for (const Patient& patient : scenario.patients)
      patient.validate(params.physicians);

  MilpModel model;
  const double weight = 1.0 / static_cast<double>(scenarios.size());

  // Shared first-stage block: the per-scenario copies of the first
  // decision are identified into a single set of variables.
  add_patient_block(model, first, 0, params, 1.0, "");
  std::vector<std::vector<LinTerm>> shared_slots(params.physicians);
  std::vector<std::vector<LinTerm>> shared_work(params.physicians);
  for (int p : first.eligible) {
    const int var = model.var_index(assign_name(0, p));
    shared_slots[p - 1].push_back(LinTerm{var, 1.0});
    shared_work[p - 1].push_back(LinTerm{var, 1.0});
  }

  for (int w = 0; w < scenarios.size(); ++w) {
    const std::string suffix = "_w" + std::to_string(w);
    const std::vector<Patient>& future = scenarios.scenarios[w].patients;
    for (std::size_t k = 0; k < future.size(); ++k)
      add_patient_block(model, future[k], static_cast<int>(k) + 1, params,
                        weight, suffix);
    add_capacity_rows(model, future, residual, params, 1, suffix,
                      shared_slots.data(), shared_work.data(), first.duration);
  }
  model.initial_feasible = all_reject_point(model);
  return model;
}

SppaEnumerationResult solve_sppa_by_enumeration(const Patient& first,
                                                const ScenarioSet& scenarios,
                                                const ResidualCapacity& residual,
                                                const CostParams& params,
                                                const SolveLimits& limits) {
  if (scenarios.size() < 1)
    throw Error("invalid_model", "two-stage enumeration needs at least one scenario");
  const auto start = std::chrono::steady_clock::now();

  // Candidate first-stage actions: eligible physicians in index order,
  // rejection last (ties therefore resolve toward assignment).
  std::vector<Action> candidates;
  for (int p : first.eligible)
    if (residual.allows(first, p)) candidates.push_back(Action{p});
  candidates.push_back(Action{0});

  const int n_candidates = static_cast<int>(candidates.size());
  const int n_scenarios = scenarios.size();
  const int n_solves = n_candidates * n_scenarios;

  SolveLimits per_solve;
  per_solve.gap_limit = limits.gap_limit;
  if (limits.time_limit) per_solve.time_limit = *limits.time_limit / n_solves;
  if (limits.node_limit)
    per_solve.node_limit = std::max(1LL, *limits.node_limit / n_solves);

  std::vector<MipSolution> solutions(n_solves);
  std::vector<char> empty_future(n_solves, 0);
  parallel_for(n_solves, [&](int i) {
    const int c = i / n_scenarios;
    const int w = i % n_scenarios;
    const std::vector<Patient>& future = scenarios.scenarios[w].patients;
    if (future.empty()) {
      empty_future[i] = 1;
      return;
    }
    ResidualCapacity after = residual;
    after.apply(first, candidates[c]);
    solutions[i] = solve_mip(build_ppa_model(future, after, params), per_solve);
  });

  SppaEnumerationResult result;
  result.exact = true;
  for (int c = 0; c < n_candidates; ++c) {
    double value = immediate_cost(first, candidates[c], params);
    double recourse = 0.0;
    for (int w = 0; w < n_scenarios; ++w) {
      const int i = c * n_scenarios + w;
      if (empty_future[i]) continue;
      const MipSolution& sub = solutions[i];
      result.stats.nodes += sub.stats.nodes;
      result.stats.simplex_iterations += sub.stats.simplex_iterations;
      if (sub.status != SolveStatus::Optimal) {
        result.exact = false;
        result.reached_limit = true;
      }
      result.max_gap = std::max(result.max_gap, sub.gap);
      recourse += sub.objective;
    }
    value += recourse / n_scenarios;
    if (value < result.value - 1e-9) {
      result.value = value;
      result.first_action = candidates[c];
    }
  }
  result.stats.wall_time = seconds_since(start);
  return result;
}

BruteForceResult brute_force_solve(const std::vector<Patient>& patients,
                                   const ResidualCapacity& residual,
                                   const CostParams& params,
                                   long long size_cap) {
  double space = 1.0;
  for (const Patient& p : patients) space *= 1.0 + p.eligible.size();
  if (space > static_cast<double>(size_cap))
    throw Error("size_cap",
                "enumeration space exceeds the cap of " + std::to_string(size_cap));

  BruteForceResult best;
  best.objective = kInfinity;
  const int n = static_cast<int>(patients.size());
  if (n == 0) {
    best.objective = 0.0;
    return best;
  }

  std::vector<Action> current(n, Action{0});
  ResidualCapacity caps = residual;

  // Depth-first over per-patient options in action order (0, then the
  // eligible physicians ascending), so the first strict improvement is
  // the lexicographically smallest optimal vector.
  auto recurse = [&](auto&& self, int k, double cost) -> void {
    if (k == n) {
      best.enumerated += 1;
      if (cost < best.objective) {
        best.objective = cost;
        best.actions = current;
      }
      return;
    }
    const Patient& patient = patients[k];
    current[k] = Action{0};
    self(self, k + 1, cost + params.reject_cost_for(patient.priority));
    for (int p : patient.eligible) {
      if (!caps.allows(patient, p)) continue;
      current[k] = Action{p};
      caps.slots_left[p - 1] -= 1;
      caps.workload_left[p - 1] -= patient.duration;
      self(self, k + 1, cost + (p == patient.preferred
                                    ? 0.0
                                    : params.prefer_cost_for(patient.priority)));
      caps.slots_left[p - 1] += 1;
      caps.workload_left[p - 1] += patient.duration;
    }
    current[k] = Action{0};
  };
  recurse(recurse, 0, 0.0);
  return best;
}

Action extract_action(const MilpModel& model, const std::vector<double>& values,
                      int patient_index, const Patient& patient) {
  for (int p : patient.eligible) {
    const int var = model.var_index(assign_name(patient_index, p));
    if (values[var] > 0.5) return Action{p};
  }
  return Action{0};
}

}  // namespace ppa
