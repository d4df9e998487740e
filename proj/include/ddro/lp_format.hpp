#pragma once

// CPLEX LP-format dump of a LinearModel, for inspecting stage models in an
// external solver. Names are sanitized and prefixed with their index so they
// stay unique and never start with a digit or 'e'.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "ddro/model.hpp"

namespace ddro {

namespace detail {

inline std::string lp_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string lp_name(char prefix, int idx, const std::string& raw) {
  std::string s(1, prefix);
  s += std::to_string(idx);
  if (!raw.empty()) s += '_';
  for (char ch : raw) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
    s += ok ? ch : '_';
  }
  return s;
}

// Writes " + 3 x - 2 y" with at most a few terms per line.
inline void lp_terms(std::ostream& os, const std::vector<Term>& terms, const std::vector<std::string>& names) {
  int on_line = 0;
  for (const Term& t : terms) {
    if (t.coef == 0.0) continue;
    os << (t.coef < 0 ? " - " : " + ") << lp_num(std::abs(t.coef)) << ' ' << names[t.col];
    if (++on_line == 6) {
      os << "\n  ";
      on_line = 0;
    }
  }
}

}  // namespace detail

inline void write_lp(std::ostream& os, const LinearModel& m, const std::string& title = {}) {
  m.validate();
  std::vector<std::string> names(m.num_vars());
  for (int j = 0; j < m.num_vars(); ++j) names[j] = detail::lp_name('v', j, m.names[j]);

  if (!title.empty()) os << "\\ " << title << "\n";
  os << "Minimize\n obj:";
  std::vector<Term> obj;
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.obj[j] != 0.0) obj.push_back({j, m.obj[j]});
  detail::lp_terms(os, obj, names);
  // LP readers accept a bare constant in the objective.
  if (m.obj_offset != 0.0 || obj.empty())
    os << (m.obj_offset < 0 ? " - " : " + ") << detail::lp_num(std::abs(m.obj_offset));
  os << "\nSubject To\n";
  for (int i = 0; i < m.num_rows(); ++i) {
    const Row& r = m.rows[i];
    os << ' ' << detail::lp_name('c', i, r.name) << ':';
    bool any = false;
    for (const Term& t : r.terms) any = any || t.coef != 0.0;
    if (any) detail::lp_terms(os, r.terms, names);
    else os << " 0 " << (names.empty() ? std::string("v0") : names[0]);
    const char* rel = r.rel == Relation::LessEq ? "<=" : r.rel == Relation::GreaterEq ? ">=" : "=";
    os << ' ' << rel << ' ' << detail::lp_num(r.rhs) << "\n";
  }
  os << "Bounds\n";
  for (int j = 0; j < m.num_vars(); ++j) {
    const double lo = m.lower[j], hi = m.upper[j];
    if (m.kind[j] == VarKind::Binary && lo == 0.0 && hi == 1.0) continue;
    if (lo == -kInf && hi == kInf) os << ' ' << names[j] << " free\n";
    else if (lo == hi) os << ' ' << names[j] << " = " << detail::lp_num(lo) << "\n";
    else os << ' ' << detail::lp_num(lo) << " <= " << names[j] << " <= " << detail::lp_num(hi) << "\n";
  }
  // Binaries with tightened bounds go under General so their bounds survive.
  std::ostringstream gen, bin;
  for (int j = 0; j < m.num_vars(); ++j) {
    if (m.kind[j] == VarKind::Continuous) continue;
    const bool plain_bin = m.kind[j] == VarKind::Binary && m.lower[j] == 0.0 && m.upper[j] == 1.0;
    (plain_bin ? bin : gen) << ' ' << names[j] << "\n";
  }
  if (!gen.str().empty()) os << "General\n" << gen.str();
  if (!bin.str().empty()) os << "Binary\n" << bin.str();
  os << "End\n";
}

inline std::string to_lp_string(const LinearModel& m, const std::string& title = {}) {
  std::ostringstream os;
  write_lp(os, m, title);
  return os.str();
}

}  // namespace ddro
