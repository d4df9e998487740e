#pragma once

// Independent oracles shared by the unit tests and the acceptance runner.
// No test framework dependency.

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "ddro/ambiguity.hpp"
#include "ddro/milp.hpp"
#include "ddro/reformulate.hpp"
#include "test_util.hpp"

namespace ddro::testing {

// Feasibility oracle for Types 1-2 written as an independent phase-1 LP:
// minimize total slack on every moment row; feasible iff the optimum is 0.
inline bool phase1_feasible(const Instance& in, AmbiguityType type, const Mat& pts, const Vec& x) {
  const int K = static_cast<int>(pts.size());
  LinearModel m;
  for (int k = 0; k < K; ++k) m.add_var("p", 0.0, kInf);
  auto slack_row = [&](std::vector<Term> t, double lo, double hi) {
    const int a = m.add_var("a", 0.0, kInf, VarKind::Continuous, 1.0);
    const int b = m.add_var("b", 0.0, kInf, VarKind::Continuous, 1.0);
    t.push_back({a, 1.0});
    t.push_back({b, -1.0});
    if (lo == hi) {
      m.add_row(t, Relation::Equal, lo);
    } else {
      m.add_row(t, Relation::GreaterEq, lo);
      auto t2 = t;
      t2.back().coef = -1.0;
      t2[t2.size() - 2].coef = 0.0;
      m.add_row(t2, Relation::LessEq, hi);
    }
  };
  std::vector<Term> ones;
  for (int k = 0; k < K; ++k) ones.push_back({k, 1.0});
  slack_row(ones, 1.0, 1.0);
  for (int j = 0; j < in.J; ++j) {
    double mu = in.mu_bar[j], S = in.mu_bar[j] * in.mu_bar[j] + in.sigma_bar[j] * in.sigma_bar[j];
    double am = 0, aS = 0;
    for (int i = 0; i < in.I; ++i) am += in.lambda_mu[j][i] * x[i], aS += in.lambda_S[j][i] * x[i];
    mu *= 1 + am;
    S *= 1 + aS;
    std::vector<Term> r1, r2;
    for (int k = 0; k < K; ++k) {
      r1.push_back({k, pts[k][j]});
      r2.push_back({k, pts[k][j] * pts[k][j]});
    }
    if (type == AmbiguityType::Type1) {
      slack_row(r1, mu - in.eps_mu[j], mu + in.eps_mu[j]);
      slack_row(r2, S * in.eps_S_lo[j], S * in.eps_S_hi[j]);
    } else {
      slack_row(r1, mu, mu);
    }
  }
  // Type 2 matches the whole covariance, off-diagonal entries included.
  if (type == AmbiguityType::Type2) {
    Vec mu(in.J);
    double sc = 1.0;
    for (int i = 0; i < in.I; ++i) sc += in.lambda_cov[i] * x[i];
    for (int j = 0; j < in.J; ++j) {
      double am = 0;
      for (int i = 0; i < in.I; ++i) am += in.lambda_mu[j][i] * x[i];
      mu[j] = in.mu_bar[j] * (1 + am);
    }
    for (int a = 0; a < in.J; ++a)
      for (int b = a; b < in.J; ++b) {
        std::vector<Term> rc;
        for (int k = 0; k < K; ++k) rc.push_back({k, (pts[k][a] - mu[a]) * (pts[k][b] - mu[b])});
        slack_row(rc, in.Sigma_bar(a, b) * sc, in.Sigma_bar(a, b) * sc);
      }
  }
  const LpSolution s = solve_lp(m);
  return s.status == LpStatus::Optimal && s.objective <= 1e-9;
}


// Interval of z admitted by the rows at fixed (b, y).
inline std::pair<double, double> z_interval(const std::vector<Row>& rows, int bcol, double b, int ycol,
                                     double y, int zcol) {
  double lo = -1e300, hi = 1e300;
  for (const Row& r : rows) {
    double a = 0.0, rest = 0.0;
    for (const Term& t : r.terms) {
      if (t.col == zcol) a += t.coef;
      else if (t.col == bcol) rest += t.coef * b;
      else if (t.col == ycol) rest += t.coef * y;
    }
    const double bound = (r.rhs - rest) / a;
    const bool upper = (r.rel == Relation::LessEq) == (a > 0);
    if (upper) hi = std::min(hi, bound);
    else lo = std::max(lo, bound);
  }
  return {lo, hi};
}

inline Instance random_instance(std::mt19937_64& g, int I, int J, int K) {
  std::uniform_real_distribution<double> U(0, 1);
  Instance in = tiny_instance(2, I, J, K);
  in.N = 1000.0;
  for (int j = 0; j < J; ++j) {
    in.mu_bar[j] = 10 + 5 * U(g);
    in.sigma_bar[j] = 2 + 3 * U(g);
    in.eps_mu[j] = 2 + 6 * U(g);
    in.eps_S_lo[j] = 0.3 * U(g);
    in.eps_S_hi[j] = 1.5 + 2 * U(g);
    for (int i = 0; i < I; ++i) {
      in.lambda_mu[j][i] = U(g) / I;
      in.lambda_S[j][i] = U(g) / I;
    }
  }
  for (auto& pt : in.support[1])
    for (auto& v : pt) v = 25 * U(g);
  for (auto& v : in.lambda_cov) v = U(g) / I;
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j) in.c[i][j] = 1 + 20 * U(g);
  return in;
}

// Optimum of a stage build with x and theta frozen, minus the stage block part.
inline double dual_side_value(const Instance& in, AmbiguityType type, const Vec& x, const Vec& q,
                              const Risk* risk = nullptr, StageBuildOptions opt = {}) {
  CutPool pool(in);
  StageBuild b = build_stage(in, type, 0, Vec(in.I, 0.0), in.support[0][0], pool, risk, opt);
  for (int i = 0; i < in.I; ++i) b.model.lower[b.block.x_col(i)] = b.model.upper[b.block.x_col(i)] = x[i];
  const Range th = b.layout.at("theta");
  for (int k = 0; k < th.size; ++k) b.model.lower[th.begin + k] = b.model.upper[th.begin + k] = q[k];
  const MipSolution s = solve_milp(b.model);
  if (s.status != MipStatus::Optimal) return std::nan("");
  StageBlock sb = build_stage_block(in, 0, Vec(in.I, 0.0), in.support[0][0]);
  for (int i = 0; i < in.I; ++i) sb.model.lower[sb.layout.x_col(i)] = sb.model.upper[sb.layout.x_col(i)] = x[i];
  return s.objective - solve_milp(sb.model).objective;
}

}  // namespace ddro::testing
