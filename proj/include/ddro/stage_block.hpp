#pragma once

// Facility-location stage rows: demand, capacity, budget, monotone state.
// Stages are 0-based here; stage 0 is the deterministic first stage.

#include <string>
#include <vector>

#include "ddro/instance.hpp"
#include "ddro/model.hpp"

namespace ddro {

struct StageBlockOptions {
  // Replace the previous state by free binary copies (used by Lagrangian duals).
  bool copy_state = false;
  // Capacity as h * (x_t + history) instead of h * x_t. history[i] is the sum of
  // x_{tau,i} over earlier stages.
  bool literal_capacity = false;
  Vec history;
};

struct StageBlockLayout {
  int x = 0;     // I state columns x_t
  int y = 0;     // I*J flow columns, y(i,j) = y + i*J + j
  int prev = 0;  // I copies of x_{t-1}, fixed unless copy_state
  int I = 0, J = 0;
  int x_col(int i) const { return x + i; }
  int y_col(int i, int j) const { return y + i * J + j; }
  int prev_col(int i) const { return prev + i; }
};

// Appends the stage variables and rows to m and puts g_t on the objective.
inline StageBlockLayout add_stage_block(LinearModel& m, const Instance& in, int t, const Vec& x_prev,
                                        const Vec& xi, const StageBlockOptions& opt = {}) {
  const int I = in.I, J = in.J;
  if (static_cast<int>(x_prev.size()) != I || static_cast<int>(xi.size()) != J)
    throw ValidationError("stage block: dimension mismatch");
  StageBlockLayout L;
  L.I = I;
  L.J = J;
  L.x = m.num_vars();
  for (int i = 0; i < I; ++i) m.add_var("x_" + std::to_string(i), 0, 1, VarKind::Binary);
  L.y = m.num_vars();
  const VarKind yk = in.y_integer ? VarKind::Integer : VarKind::Continuous;
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      m.add_var("y_" + std::to_string(i) + "_" + std::to_string(j), 0.0, in.h[t][i], yk,
                in.c[i][j] - in.R[j]);
  L.prev = m.num_vars();
  for (int i = 0; i < I; ++i) {
    if (opt.copy_state)
      m.add_var("zc_" + std::to_string(i), 0, 1, VarKind::Binary);
    else
      m.add_var("zc_" + std::to_string(i), x_prev[i], x_prev[i], VarKind::Continuous);
  }

  for (int j = 0; j < J; ++j) {
    std::vector<Term> r;
    for (int i = 0; i < I; ++i) r.push_back({L.y_col(i, j), 1.0});
    m.add_row(std::move(r), Relation::LessEq, xi[j], "demand_" + std::to_string(j));
  }
  for (int i = 0; i < I; ++i) {
    std::vector<Term> r;
    for (int j = 0; j < J; ++j) r.push_back({L.y_col(i, j), 1.0});
    r.push_back({L.x_col(i), -in.h[t][i]});
    const double extra = opt.literal_capacity && !opt.history.empty() ? in.h[t][i] * opt.history[i] : 0.0;
    m.add_row(std::move(r), Relation::LessEq, extra, "capacity_" + std::to_string(i));
  }
  {
    std::vector<Term> r;
    for (int i = 0; i < I; ++i) {
      r.push_back({L.x_col(i), in.f[t][i]});
      r.push_back({L.prev_col(i), -in.f[t][i]});
    }
    m.add_row(std::move(r), Relation::LessEq, in.N, "budget");
  }
  for (int i = 0; i < I; ++i)
    m.add_row({{L.x_col(i), 1.0}, {L.prev_col(i), -1.0}}, Relation::GreaterEq, 0.0,
              "monotone_" + std::to_string(i));
  return L;
}

struct StageBlock {
  LinearModel model;
  StageBlockLayout layout;
};

inline StageBlock build_stage_block(const Instance& in, int t, const Vec& x_prev, const Vec& xi,
                                    const StageBlockOptions& opt = {}) {
  StageBlock b;
  b.layout = add_stage_block(b.model, in, t, x_prev, xi, opt);
  return b;
}

}  // namespace ddro
