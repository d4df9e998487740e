#include <gtest/gtest.h>

#include <random>

#include "ddro/milp.hpp"

using namespace ddro;

TEST(Lp, UpperBoundRowDual) {
  LinearModel m;
  int x = m.add_var("x", 0.0, kInf, VarKind::Continuous, -1.0);
  m.add_row({{x, 1.0}}, Relation::LessEq, 3.0, "cap");
  LpSolution s = solve_lp(m);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 3.0, 1e-12);
  EXPECT_NEAR(s.objective, -3.0, 1e-12);
  EXPECT_NEAR(s.row_duals[0], -1.0, 1e-12);
}

TEST(Lp, Infeasible) {
  LinearModel m;
  int x = m.add_var("x", -kInf, kInf);
  m.add_row({{x, 1.0}}, Relation::GreaterEq, 1.0);
  m.add_row({{x, 1.0}}, Relation::LessEq, 0.0);
  EXPECT_EQ(solve_lp(m).status, LpStatus::Infeasible);
}

TEST(Lp, Unbounded) {
  LinearModel m;
  int x = m.add_var("x", 0.0, kInf, VarKind::Continuous, -1.0);
  int y = m.add_var("y", 0.0, kInf);
  m.add_row({{x, 1.0}, {y, -1.0}}, Relation::LessEq, 1.0);
  EXPECT_EQ(solve_lp(m).status, LpStatus::Unbounded);
}

// A row listing the same column twice means the summed coefficient.
TEST(Lp, RepeatedTermsAreSummed) {
  LinearModel a, b;
  for (LinearModel* m : {&a, &b}) {
    m->add_var("x", 0.0, 10.0, VarKind::Continuous, -1.0);
    m->add_var("y", 0.0, 10.0, VarKind::Continuous, -1.0);
  }
  a.add_row({{0, 1.0}, {1, 1.0}, {0, 1.0}}, Relation::LessEq, 4.0);
  a.add_row({{0, 0.5}, {1, -1.0}, {0, 0.5}}, Relation::GreaterEq, 1.0);
  b.add_row({{0, 2.0}, {1, 1.0}}, Relation::LessEq, 4.0);
  b.add_row({{0, 1.0}, {1, -1.0}}, Relation::GreaterEq, 1.0);
  const LpSolution sa = solve_lp(a), sb = solve_lp(b);
  ASSERT_EQ(sa.status, LpStatus::Optimal);
  EXPECT_NEAR(sa.objective, sb.objective, 1e-9);
  EXPECT_NEAR(sa.objective, -7.0 / 3.0, 1e-9);  // vertex (5/3, 2/3)
}

// Duality-gap oracle: the dual objective b^T y + bound terms from reduced costs
// must match the primal objective.
double dual_objective(const LinearModel& m, const LpSolution& s) {
  double d = m.obj_offset;
  for (int i = 0; i < m.num_rows(); ++i) d += s.row_duals[i] * m.rows[i].rhs;
  for (int j = 0; j < m.num_vars(); ++j) {
    const double r = s.reduced_costs[j];
    if (r > 0) d += r * m.lower[j];
    else if (r < 0) d += r * m.upper[j];
  }
  return d;
}

TEST(Lp, RandomDualityGap) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 19);
    const int rows = 1 + static_cast<int>(rng() % 15);
    LinearModel m;
    std::vector<double> x0(n);
    for (int j = 0; j < n; ++j) {
      const double lb = (rng() % 3 == 0) ? -kInf : -5.0 * std::abs(u(rng));
      const double ub = (rng() % 3 == 0) ? kInf : 5.0 * std::abs(u(rng));
      m.add_var("x" + std::to_string(j), lb, ub, VarKind::Continuous, u(rng));
      x0[j] = 0.0;
    }
    for (int i = 0; i < rows; ++i) {
      std::vector<Term> t;
      for (int j = 0; j < n; ++j)
        if (rng() % 2) t.push_back({j, u(rng)});
      const int rel = static_cast<int>(rng() % 3);
      const double slack = std::abs(u(rng));
      if (rel == 0) m.add_row(t, Relation::LessEq, slack);
      else if (rel == 1) m.add_row(t, Relation::GreaterEq, -slack);
      else m.add_row(t, Relation::Equal, 0.0);
    }
    // Keep it bounded: box every free direction far out.
    for (int j = 0; j < n; ++j) {
      if (m.lower[j] == -kInf) m.lower[j] = -100.0;
      if (m.upper[j] == kInf) m.upper[j] = 100.0;
    }
    LpSolution s = solve_lp(m);
    ASSERT_EQ(s.status, LpStatus::Optimal) << trial;
    EXPECT_LE(m.max_violation(s.x), 1e-7);
    EXPECT_NEAR(s.objective, dual_objective(m, s), 1e-6 * std::max(1.0, std::abs(s.objective)));
    ++checked;
  }
  EXPECT_EQ(checked, 300);
}

TEST(Milp, RoundUp) {
  LinearModel m;
  int x = m.add_var("x", 0.0, 10.0, VarKind::Integer, 1.0);
  m.add_row({{x, 1.0}}, Relation::GreaterEq, 0.5);
  MipSolution s = solve_milp(m);
  ASSERT_EQ(s.status, MipStatus::Optimal);
  EXPECT_DOUBLE_EQ(s.values[0], 1.0);
  EXPECT_NEAR(s.objective, 1.0, 1e-12);
}

TEST(Milp, TwoBinaries) {
  LinearModel m;
  int x = m.add_var("x", 0, 1, VarKind::Binary, -1.0);
  int y = m.add_var("y", 0, 1, VarKind::Binary, -1.0);
  m.add_row({{x, 1.0}, {y, 1.0}}, Relation::LessEq, 1.5);
  MipSolution s = solve_milp(m);
  ASSERT_EQ(s.status, MipStatus::Optimal);
  EXPECT_NEAR(s.objective, -1.0, 1e-12);
}

TEST(Milp, KnapsackMatchesEnumeration) {
  for (int seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> wd(1, 30), vd(1, 40);
    const int n = 12;
    std::vector<int> w(n), v(n);
    int total = 0;
    for (int i = 0; i < n; ++i) {
      w[i] = wd(rng);
      v[i] = vd(rng);
      total += w[i];
    }
    const int cap = total / 2;
    LinearModel m;
    std::vector<Term> row;
    for (int i = 0; i < n; ++i) {
      m.add_var("b" + std::to_string(i), 0, 1, VarKind::Binary, -v[i]);
      row.push_back({i, static_cast<double>(w[i])});
    }
    m.add_row(row, Relation::LessEq, cap);
    int best = 0;
    for (int mask = 0; mask < (1 << n); ++mask) {
      int ww = 0, vv = 0;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1) {
          ww += w[i];
          vv += v[i];
        }
      if (ww <= cap) best = std::max(best, vv);
    }
    MipSolution s = solve_milp(m);
    ASSERT_EQ(s.status, MipStatus::Optimal);
    EXPECT_NEAR(s.objective, -best, 1e-6) << seed;
    EXPECT_LE(s.best_bound, s.objective + 1e-6);
  }
}

TEST(Milp, Deterministic) {
  std::mt19937_64 rng(3);
  LinearModel m;
  std::vector<Term> row;
  for (int i = 0; i < 14; ++i) {
    m.add_var("b", 0, 1, VarKind::Binary, -static_cast<double>(rng() % 50 + 1));
    row.push_back({i, static_cast<double>(rng() % 30 + 1)});
  }
  m.add_row(row, Relation::LessEq, 90);
  MipSolution a = solve_milp(m), b = solve_milp(m);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.nodes, b.nodes);
}

TEST(Milp, SeparatorAddsGlobalRows) {
  // min x s.t. x >= 0.3 with a separator that enforces x >= 2.5 lazily.
  LinearModel m;
  int x = m.add_var("x", 0, 10, VarKind::Integer, 1.0);
  m.add_row({{x, 1.0}}, Relation::GreaterEq, 0.3);
  Separator sep = [](const std::vector<double>& v) {
    std::vector<Row> out;
    if (v[0] < 2.5 - 1e-9) out.push_back(Row{{{0, 1.0}}, Relation::GreaterEq, 2.5, "lazy"});
    return out;
  };
  MipSolution s = solve_milp(m, {}, sep);
  ASSERT_EQ(s.status, MipStatus::Optimal);
  EXPECT_NEAR(s.objective, 3.0, 1e-9);
  EXPECT_EQ(s.cuts.size(), 1u);
}
