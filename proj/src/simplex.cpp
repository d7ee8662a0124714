#include <algorithm>
#include <cmath>
#include <vector>

#include "ppa/milp.hpp"

// Bounded-variable primal simplex on a dense tableau. Phase 1 minimizes
// artificial infeasibility from an all-at-lower-bound start; phase 2 pins
// the artificials to zero and optimizes the true objective. Bland's rule
// (lowest eligible index) is used for both the entering and the leaving
// choice, which rules out cycling.

namespace ppa {

namespace {

constexpr double kReducedCostTol = 1e-9;

enum class VarStatus : unsigned char { AtLower, AtUpper, Basic };

struct Tableau {
  int rows = 0;
  int cols = 0;                  // structural + slack + artificial
  std::vector<double> mat;       // rows x cols, row-major (B^-1 A)
  std::vector<double> basic_value;
  std::vector<int> basis;        // column basic in each row
  std::vector<VarStatus> status;
  std::vector<double> lo, hi, cost;
  std::vector<double> reduced;   // reduced costs
  int active = 0;                // columns the hot loops touch
  long long iterations = 0;

  double& at(int r, int c) { return mat[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return mat[static_cast<std::size_t>(r) * cols + c]; }

  double value_of(int col) const {
    if (status[col] == VarStatus::AtLower) return lo[col];
    if (status[col] == VarStatus::AtUpper) return hi[col];
    for (int r = 0; r < rows; ++r)
      if (basis[r] == col) return basic_value[r];
    return lo[col];
  }
};

void compute_reduced_costs(Tableau& t) {
  // d = c - c_B * (B^-1 A); the tableau already stores B^-1 A.
  t.reduced = t.cost;
  for (int r = 0; r < t.rows; ++r) {
    const double cb = t.cost[t.basis[r]];
    if (cb == 0.0) continue;
    const double* row = &t.mat[static_cast<std::size_t>(r) * t.cols];
    for (int c = 0; c < t.active; ++c) t.reduced[c] -= cb * row[c];
  }
}

// One phase of the primal simplex; returns false only on an iteration
// blow-up, which would indicate a bug given the Bland fallback. Pricing is
// Dantzig (largest reduced-cost violation) until a degenerate streak
// triggers Bland's anti-cycling rule, which provably terminates.
bool optimize(Tableau& t, long long iteration_cap) {
  int degenerate_streak = 0;
  const int bland_trigger = 2 * (t.rows + 16);
  while (true) {
    if (++t.iterations > iteration_cap) return false;
    const bool bland = degenerate_streak > bland_trigger;

    int enter = -1;
    int dir = 0;
    double best_violation = kReducedCostTol;
    for (int c = 0; c < t.active; ++c) {
      if (t.status[c] == VarStatus::Basic) continue;
      if (t.hi[c] - t.lo[c] <= kPivotTol) continue;  // fixed, cannot move
      double violation = 0.0;
      int candidate_dir = 0;
      if (t.status[c] == VarStatus::AtLower && t.reduced[c] < -kReducedCostTol) {
        violation = -t.reduced[c];
        candidate_dir = +1;
      } else if (t.status[c] == VarStatus::AtUpper &&
                 t.reduced[c] > kReducedCostTol) {
        violation = t.reduced[c];
        candidate_dir = -1;
      } else {
        continue;
      }
      if (bland) {  // lowest eligible index
        enter = c;
        dir = candidate_dir;
        break;
      }
      if (violation > best_violation) {
        best_violation = violation;
        enter = c;
        dir = candidate_dir;
      }
    }
    if (enter < 0) return true;  // optimal

    // Ratio test: the entering variable moves by dir * step >= 0, each
    // basic value changes by -column * (dir * step).
    double step = t.hi[enter] - t.lo[enter];  // bound-flip distance
    int leave_row = -1;
    for (int r = 0; r < t.rows; ++r) {
      const double y = t.at(r, enter);
      if (std::abs(y) <= kPivotTol) continue;
      const int b = t.basis[r];
      const double signed_y = dir > 0 ? y : -y;
      double limit;
      if (signed_y > 0.0) {  // basic value decreases toward its lower bound
        limit = (t.basic_value[r] - t.lo[b]) / signed_y;
      } else {               // basic value increases toward its upper bound
        if (t.hi[b] == kInfinity) continue;
        limit = (t.hi[b] - t.basic_value[r]) / (-signed_y);
      }
      if (limit < 0.0) limit = 0.0;
      if (limit < step - kPivotTol ||
          (limit < step + kPivotTol &&
           (leave_row < 0 || t.basis[r] < t.basis[leave_row]))) {
        step = limit;
        leave_row = r;
      }
    }

    if (step > kPivotTol) degenerate_streak = 0;
    else ++degenerate_streak;

    if (leave_row < 0) {
      if (t.hi[enter] == kInfinity) return false;  // unbounded: not possible here
      // Bound flip: walk the entering variable to its other bound.
      const double delta = dir * step;
      for (int r = 0; r < t.rows; ++r)
        t.basic_value[r] -= t.at(r, enter) * delta;
      t.status[enter] =
          dir > 0 ? VarStatus::AtUpper : VarStatus::AtLower;
      continue;
    }

    // Pivot: entering becomes basic in leave_row.
    const double delta = dir * step;
    const double entering_value =
        (dir > 0 ? t.lo[enter] : t.hi[enter]) + delta;
    for (int r = 0; r < t.rows; ++r)
      if (r != leave_row) t.basic_value[r] -= t.at(r, enter) * delta;

    const int leaving = t.basis[leave_row];
    const double pivot = t.at(leave_row, enter);
    // Leaving variable lands on whichever bound the ratio test hit.
    const double leave_val = t.basic_value[leave_row] - pivot * delta;
    t.status[leaving] =
        (t.hi[leaving] != kInfinity &&
         std::abs(leave_val - t.hi[leaving]) < std::abs(leave_val - t.lo[leaving]))
            ? VarStatus::AtUpper
            : VarStatus::AtLower;

    double* prow = &t.mat[static_cast<std::size_t>(leave_row) * t.cols];
    const double inv = 1.0 / pivot;
    for (int c = 0; c < t.active; ++c) prow[c] *= inv;
    for (int r = 0; r < t.rows; ++r) {
      if (r == leave_row) continue;
      const double factor = t.at(r, enter);
      if (std::abs(factor) <= 1e-14) continue;
      double* row = &t.mat[static_cast<std::size_t>(r) * t.cols];
      for (int c = 0; c < t.active; ++c) row[c] -= factor * prow[c];
    }
    const double dfactor = t.reduced[enter];
    if (std::abs(dfactor) > 1e-14)
      for (int c = 0; c < t.active; ++c) t.reduced[c] -= dfactor * prow[c];

    t.basic_value[leave_row] = entering_value;
    t.basis[leave_row] = enter;
    t.status[enter] = VarStatus::Basic;
  }
}

}  // namespace

LpSolution solve_lp_bounded(const MilpModel& model,
                            const std::vector<double>& lo,
                            const std::vector<double>& hi,
                            long long* iteration_sink) {
  const int n = model.num_vars();
  const int m = model.num_cons();

  // Column layout: structural | one slack per inequality | one artificial
  // per row.
  int slack_count = 0;
  for (const Constraint& c : model.cons)
    if (c.relation != Relation::Equal) ++slack_count;

  Tableau t;
  t.rows = m;
  t.cols = n + slack_count + m;
  t.mat.assign(static_cast<std::size_t>(t.rows) * t.cols, 0.0);
  t.lo.assign(t.cols, 0.0);
  t.hi.assign(t.cols, kInfinity);
  t.cost.assign(t.cols, 0.0);
  t.status.assign(t.cols, VarStatus::AtLower);
  t.basis.assign(t.rows, -1);
  t.basic_value.assign(t.rows, 0.0);

  for (int j = 0; j < n; ++j) {
    t.lo[j] = lo[j];
    t.hi[j] = hi[j];
  }

  const int art_base = n + slack_count;
  int slack = n;
  std::vector<int> slack_of_row(m, -1);
  std::vector<int> column_rows(t.cols, 0);  // nonzero count per column
  std::vector<double> rhs(m, 0.0);
  for (int r = 0; r < m; ++r) {
    const Constraint& c = model.cons[r];
    for (const LinTerm& term : c.terms) {
      if (t.at(r, term.var) == 0.0 && term.coef != 0.0) ++column_rows[term.var];
      t.at(r, term.var) += term.coef;
    }
    if (c.relation != Relation::Equal) {
      slack_of_row[r] = slack;
      column_rows[slack] = 1;
      t.at(r, slack) = c.relation == Relation::LessEqual ? 1.0 : -1.0;
      ++slack;
    }
    rhs[r] = c.rhs;
  }

  // Crash basis: every variable starts at its lower bound, and each row
  // tries to absorb its residual with a singleton +-1 column (its slack,
  // or a variable unique to the row, like the rejection indicators).
  // Rows where no singleton fits its bounds fall back to an artificial;
  // those rows are negated as needed so the starting basis is an identity.
  bool need_phase1 = false;
  for (int r = 0; r < m; ++r) {
    double residual = rhs[r];
    for (int c = 0; c < art_base; ++c)
      if (t.lo[c] != 0.0 && t.at(r, c) != 0.0) residual -= t.at(r, c) * t.lo[c];

    auto fits = [&](int col) {
      const double delta = residual / t.at(r, col);
      return delta >= -kPivotTol && delta <= t.hi[col] - t.lo[col] + kPivotTol;
    };
    int chosen = -1;
    if (slack_of_row[r] >= 0 && fits(slack_of_row[r])) {
      chosen = slack_of_row[r];
    } else {
      for (const LinTerm& term : model.cons[r].terms) {
        if (column_rows[term.var] != 1 || std::abs(t.at(r, term.var)) != 1.0)
          continue;
        if (t.status[term.var] == VarStatus::Basic) continue;
        if (fits(term.var)) {
          chosen = term.var;
          break;
        }
      }
    }

    if (chosen >= 0) {
      const double delta =
          std::clamp(residual / t.at(r, chosen), 0.0, t.hi[chosen] - t.lo[chosen]);
      if (t.at(r, chosen) < 0.0)
        for (int c = 0; c < art_base; ++c) t.at(r, c) = -t.at(r, c);
      t.basis[r] = chosen;
      t.status[chosen] = VarStatus::Basic;
      t.basic_value[r] = t.lo[chosen] + delta;
      continue;
    }

    if (residual < 0.0) {
      for (int c = 0; c < art_base; ++c) t.at(r, c) = -t.at(r, c);
      residual = -residual;
    }
    const int art = art_base + r;
    t.at(r, art) = 1.0;
    t.basis[r] = art;
    t.status[art] = VarStatus::Basic;
    t.basic_value[r] = residual;
    t.cost[art] = 1.0;
    need_phase1 = true;
  }

  const long long cap = 2000LL * (t.rows + t.cols) + 20000;

  LpSolution out;
  t.active = t.cols;
  if (need_phase1) {
    compute_reduced_costs(t);
    if (!optimize(t, cap))
      throw Error("lp_internal", "phase-1 simplex did not terminate");

    double phase1 = 0.0;
    for (int r = 0; r < m; ++r)
      if (t.basis[r] >= art_base) phase1 += t.basic_value[r];
    if (phase1 > 1e-7) {
      out.feasible = false;
      out.infeasibility = phase1;
      out.iterations = t.iterations;
      if (iteration_sink) *iteration_sink += t.iterations;
      return out;
    }
  }

  // Phase 2: real costs, artificials pinned to zero. When none of them
  // is basic the hot loops can ignore their columns entirely.
  for (int c = 0; c < art_base; ++c)
    t.cost[c] = c < n ? model.vars[c].obj : 0.0;
  for (int c = art_base; c < t.cols; ++c) {
    t.cost[c] = 0.0;
    t.lo[c] = 0.0;
    t.hi[c] = 0.0;
  }
  bool artificial_basic = false;
  for (int r = 0; r < m; ++r)
    if (t.basis[r] >= art_base) artificial_basic = true;
  t.active = artificial_basic ? t.cols : art_base;
  compute_reduced_costs(t);
  if (!optimize(t, cap))
    throw Error("lp_internal", "phase-2 simplex did not terminate");

  out.feasible = true;
  out.iterations = t.iterations;
  if (iteration_sink) *iteration_sink += t.iterations;
  out.values.assign(n, 0.0);
  for (int j = 0; j < n; ++j) out.values[j] = t.value_of(j);
  for (int r = 0; r < m; ++r)
    if (t.basis[r] < n) out.values[t.basis[r]] = t.basic_value[r];
  out.objective = model.obj_constant;
  for (int j = 0; j < n; ++j) out.objective += model.vars[j].obj * out.values[j];
  return out;
}

LpSolution solve_lp(const MilpModel& model) {
  std::vector<double> lo(model.num_vars()), hi(model.num_vars());
  for (int j = 0; j < model.num_vars(); ++j) {
    lo[j] = model.vars[j].lo;
    hi[j] = model.vars[j].hi;
  }
  return solve_lp_bounded(model, lo, hi, nullptr);
}

}  // namespace ppa
