#include "ppa/mps.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ppa {

namespace {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool names_fit_fixed(const MilpModel& model) {
  std::set<std::string> seen;
  auto check = [&seen](const std::string& name) {
    if (name.size() > 8) return false;
    return seen.insert(name).second;  // collision after truncation
  };
  for (const MilpModel::Variable& v : model.vars)
    if (!check(v.name)) return false;
  for (const Constraint& c : model.cons)
    if (!check(c.name)) return false;
  return true;
}

char row_type(Relation r) {
  switch (r) {
    case Relation::LessEqual: return 'L';
    case Relation::Equal: return 'E';
    case Relation::GreaterEqual: return 'G';
  }
  return 'L';
}

// Field layout of classic fixed MPS: indicators in columns 2-3, names in
// 5-12 and 15-22, values in 25-36 and 40-47/50-61. Free format just
// space-separates the same records.
void append_entry(std::string& line, std::size_t column, const std::string& text,
                  bool fixed) {
  if (fixed) {
    if (line.size() < column) line.resize(column, ' ');
    line += text;
  } else {
    if (!line.empty()) line += ' ';
    line += text;
  }
}

}  // namespace

std::string export_mps(const MilpModel& model) {
  const bool fixed = names_fit_fixed(model);
  std::ostringstream out;
  out << "NAME          PPA\n";

  out << "ROWS\n";
  {
    std::string line;
    append_entry(line, 1, "N", fixed);
    append_entry(line, 4, "COST", fixed);
    out << line << '\n';
  }
  for (const Constraint& c : model.cons) {
    std::string line;
    append_entry(line, 1, std::string(1, row_type(c.relation)), fixed);
    append_entry(line, 4, c.name, fixed);
    out << line << '\n';
  }

  // Per-column entries in declaration order; objective first, then the
  // constraint coefficients in row order.
  out << "COLUMNS\n";
  std::vector<std::vector<std::pair<int, double>>> column_rows(model.num_vars());
  for (int r = 0; r < model.num_cons(); ++r)
    for (const LinTerm& t : model.cons[r].terms)
      column_rows[t.var].push_back({r, t.coef});
  for (int j = 0; j < model.num_vars(); ++j) {
    const MilpModel::Variable& v = model.vars[j];
    std::vector<std::pair<std::string, double>> entries;
    if (v.obj != 0.0) entries.push_back({"COST", v.obj});
    for (const auto& [row, coef] : column_rows[j])
      entries.push_back({model.cons[row].name, coef});
    if (entries.empty()) entries.push_back({"COST", 0.0});
    for (std::size_t i = 0; i < entries.size(); i += 2) {
      std::string line;
      append_entry(line, 4, v.name, fixed);
      append_entry(line, 14, entries[i].first, fixed);
      append_entry(line, 24, format_number(entries[i].second), fixed);
      if (i + 1 < entries.size()) {
        append_entry(line, 39, entries[i + 1].first, fixed);
        append_entry(line, 49, format_number(entries[i + 1].second), fixed);
      }
      out << line << '\n';
    }
  }

  out << "RHS\n";
  for (const Constraint& c : model.cons) {
    if (c.rhs == 0.0) continue;
    std::string line;
    append_entry(line, 4, "RHS", fixed);
    append_entry(line, 14, c.name, fixed);
    append_entry(line, 24, format_number(c.rhs), fixed);
    out << line << '\n';
  }
  if (model.obj_constant != 0.0) {
    // Convention: objective constants ride on the cost row negated.
    std::string line;
    append_entry(line, 4, "RHS", fixed);
    append_entry(line, 14, "COST", fixed);
    append_entry(line, 24, format_number(-model.obj_constant), fixed);
    out << line << '\n';
  }

  out << "BOUNDS\n";
  for (const MilpModel::Variable& v : model.vars) {
    if (v.kind == VarKind::Binary) {
      std::string line;
      append_entry(line, 1, "BV", fixed);
      append_entry(line, 4, "BND", fixed);
      append_entry(line, 14, v.name, fixed);
      out << line << '\n';
      continue;
    }
    if (v.lo != 0.0) {
      std::string line;
      append_entry(line, 1, "LO", fixed);
      append_entry(line, 4, "BND", fixed);
      append_entry(line, 14, v.name, fixed);
      append_entry(line, 24, format_number(v.lo), fixed);
      out << line << '\n';
    }
    if (v.hi != kInfinity) {
      std::string line;
      append_entry(line, 1, "UP", fixed);
      append_entry(line, 4, "BND", fixed);
      append_entry(line, 14, v.name, fixed);
      append_entry(line, 24, format_number(v.hi), fixed);
      out << line << '\n';
    }
  }

  out << "ENDATA\n";
  return out.str();
}

void write_mps_file(const std::string& path, const MilpModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot open " + path + " for writing");
  out << export_mps(model);
}

}  // namespace ppa
