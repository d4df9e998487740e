#pragma once

// LinearModel: the mixed-integer linear container every reformulated stage
// problem is compiled into.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ddro/errors.hpp"

namespace ddro {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Integer, Binary };
enum class Relation { LessEq, Equal, GreaterEq };

struct Term {
  int col;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  Relation rel = Relation::LessEq;
  double rhs = 0.0;
  std::string name;
};

// Minimize obj^T x + obj_offset subject to rows and bounds.
struct LinearModel {
  std::vector<double> obj;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<VarKind> kind;
  std::vector<std::string> names;
  std::vector<Row> rows;
  double obj_offset = 0.0;

  int num_vars() const { return static_cast<int>(obj.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int add_var(std::string name, double lb, double ub, VarKind k = VarKind::Continuous,
              double cost = 0.0) {
    if (k == VarKind::Binary) {
      lb = std::max(lb, 0.0);
      ub = std::min(ub, 1.0);
    }
    obj.push_back(cost);
    lower.push_back(lb);
    upper.push_back(ub);
    kind.push_back(k);
    names.push_back(std::move(name));
    return num_vars() - 1;
  }

  int add_row(std::vector<Term> terms, Relation rel, double rhs, std::string name = {}) {
    rows.push_back(Row{std::move(terms), rel, rhs, std::move(name)});
    return num_rows() - 1;
  }

  bool is_integer(int j) const { return kind[j] != VarKind::Continuous; }

  // Checks the invariants: binary bounds inside [0,1], finite data, valid columns.
  void validate() const {
    const int n = num_vars();
    if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n ||
        static_cast<int>(kind.size()) != n || static_cast<int>(names.size()) != n)
      throw ValidationError("LinearModel: inconsistent column arrays");
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(obj[j])) throw ValidationError("LinearModel: non-finite objective");
      if (std::isnan(lower[j]) || std::isnan(upper[j]))
        throw ValidationError("LinearModel: NaN bound");
      if (kind[j] == VarKind::Binary && (lower[j] < 0.0 || upper[j] > 1.0))
        throw ValidationError("LinearModel: binary bounds outside [0,1]");
    }
    for (const Row& r : rows) {
      if (!std::isfinite(r.rhs)) throw ValidationError("LinearModel: non-finite rhs");
      for (const Term& t : r.terms) {
        if (t.col < 0 || t.col >= n) throw ValidationError("LinearModel: bad column index");
        if (!std::isfinite(t.coef)) throw ValidationError("LinearModel: non-finite coefficient");
      }
    }
  }

  double row_activity(const Row& r, const std::vector<double>& x) const {
    double s = 0.0;
    for (const Term& t : r.terms) s += t.coef * x[t.col];
    return s;
  }

  double objective_value(const std::vector<double>& x) const {
    double s = obj_offset;
    for (int j = 0; j < num_vars(); ++j) s += obj[j] * x[j];
    return s;
  }

  // Largest bound or row violation of x.
  double max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (int j = 0; j < num_vars(); ++j) {
      worst = std::max(worst, lower[j] - x[j]);
      worst = std::max(worst, x[j] - upper[j]);
    }
    for (const Row& r : rows) {
      const double a = row_activity(r, x);
      switch (r.rel) {
        case Relation::LessEq: worst = std::max(worst, a - r.rhs); break;
        case Relation::GreaterEq: worst = std::max(worst, r.rhs - a); break;
        case Relation::Equal: worst = std::max(worst, std::abs(a - r.rhs)); break;
      }
    }
    return worst;
  }
};

}  // namespace ddro
