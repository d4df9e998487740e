#pragma once

// Decision-dependent moments and the inner worst-case programs over the three
// ambiguity sets. Types 1-2 are plain LPs in p; Type 3 is convex and solved by
// cutting planes (ellipsoid tangents plus eigenvector cuts).

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ddro/errors.hpp"
#include "ddro/instance.hpp"
#include "ddro/linalg.hpp"
#include "ddro/lp.hpp"

namespace ddro {

enum class AmbiguityType { Type1 = 1, Type2 = 2, Type3 = 3 };

inline AmbiguityType ambiguity_from_int(int v) {
  if (v < 1 || v > 3) throw ValidationError("ambiguity type must be 1, 2 or 3");
  return static_cast<AmbiguityType>(v);
}

// CVaR blend weight and level of the next stage.
struct Risk {
  double lambda = 0.0;
  double alpha = 0.95;
};

struct WorstCase {
  double value = 0.0;
  Vec p;
  Vec w;  // CVaR weights, empty when risk-neutral
  int rounds = 0;
};

inline constexpr double kType3Tol = 1e-7;
inline constexpr int kType3MaxRounds = 500;
inline constexpr double kSlaterSlack = 1e-9;

inline Vec mean_of(const Instance& in, const Vec& x) {
  Vec mu(in.J);
  for (int j = 0; j < in.J; ++j) {
    double s = 1.0;
    for (int i = 0; i < in.I; ++i) s += in.lambda_mu[j][i] * x[i];
    mu[j] = in.mu_bar[j] * s;
  }
  return mu;
}

inline Vec second_moment_of(const Instance& in, const Vec& x) {
  Vec S(in.J);
  for (int j = 0; j < in.J; ++j) {
    double s = 1.0;
    for (int i = 0; i < in.I; ++i) s += in.lambda_S[j][i] * x[i];
    S[j] = (in.mu_bar[j] * in.mu_bar[j] + in.sigma_bar[j] * in.sigma_bar[j]) * s;
  }
  return S;
}

// Bounds on (1, E[xi_j], E[xi_j^2]) of length 2J+1.
inline std::pair<Vec, Vec> type1_bounds(const Instance& in, const Vec& x) {
  const int J = in.J;
  Vec l(2 * J + 1), u(2 * J + 1);
  l[0] = u[0] = 1.0;
  const Vec mu = mean_of(in, x), S = second_moment_of(in, x);
  for (int j = 0; j < J; ++j) {
    l[1 + j] = mu[j] - in.eps_mu[j];
    u[1 + j] = mu[j] + in.eps_mu[j];
    l[1 + J + j] = S[j] * in.eps_S_lo[j];
    u[1 + J + j] = S[j] * in.eps_S_hi[j];
  }
  return {l, u};
}

struct Moments {
  Vec mu;
  SymMatrix Sigma;
};

inline Moments decision_moments_type23(const Instance& in, const Vec& x) {
  double scale = 1.0;
  for (int i = 0; i < in.I; ++i) scale += in.lambda_cov[i] * x[i];
  return Moments{mean_of(in, x), in.Sigma_bar.scaled(scale)};
}

namespace detail {

// Rows of the Type 1/2 sets on p columns [0, K).
inline void add_moment_rows(LinearModel& m, const Instance& in, AmbiguityType type, const Mat& pts,
                            const Vec& x) {
  const int K = static_cast<int>(pts.size());
  const int J = in.J;
  std::vector<Term> ones;
  for (int k = 0; k < K; ++k) ones.push_back({k, 1.0});
  m.add_row(ones, Relation::Equal, 1.0, "normalize");
  if (type == AmbiguityType::Type1) {
    auto [l, u] = type1_bounds(in, x);
    for (int j = 0; j < J; ++j) {
      std::vector<Term> r1, r2;
      for (int k = 0; k < K; ++k) {
        r1.push_back({k, pts[k][j]});
        r2.push_back({k, pts[k][j] * pts[k][j]});
      }
      m.add_row(r1, Relation::GreaterEq, l[1 + j]);
      m.add_row(r1, Relation::LessEq, u[1 + j]);
      m.add_row(r2, Relation::GreaterEq, l[1 + J + j]);
      m.add_row(r2, Relation::LessEq, u[1 + J + j]);
    }
  } else {
    const Moments mo = decision_moments_type23(in, x);
    for (int j = 0; j < J; ++j) {
      std::vector<Term> r;
      for (int k = 0; k < K; ++k) r.push_back({k, pts[k][j]});
      m.add_row(r, Relation::Equal, mo.mu[j]);
    }
    for (int a = 0; a < J; ++a)
      for (int b = a; b < J; ++b) {
        std::vector<Term> r;
        for (int k = 0; k < K; ++k)
          r.push_back({k, (pts[k][a] - mo.mu[a]) * (pts[k][b] - mo.mu[b])});
        m.add_row(r, Relation::Equal, mo.Sigma(a, b));
      }
  }
}

// max (1-lambda) p^T q + w^T q, w <= p lambda/(1-alpha), sum w = lambda.
inline void add_objective(LinearModel& m, int K, const Vec& q, const Risk* risk) {
  const double lam = risk ? risk->lambda : 0.0;
  for (int k = 0; k < K; ++k) m.obj[k] = -(1.0 - lam) * q[k];
  if (!risk) return;
  std::vector<Term> sum;
  for (int k = 0; k < K; ++k) {
    const int w = m.add_var("w_" + std::to_string(k), 0.0, kInf, VarKind::Continuous, -q[k]);
    m.add_row({{w, 1.0}, {k, -risk->lambda / (1.0 - risk->alpha)}}, Relation::LessEq, 0.0);
    sum.push_back({w, 1.0});
  }
  m.add_row(sum, Relation::Equal, risk->lambda, "cvar_mass");
}

inline LinearModel p_simplex_model(int K) {
  LinearModel m;
  for (int k = 0; k < K; ++k) m.add_var("p_" + std::to_string(k), 0.0, kInf);
  return m;
}

// Type 3 geometry at x: mean offsets, inverse covariance, second-moment pieces.
struct Type3Geometry {
  Vec mu;
  SymMatrix Sigma;
  SymMatrix Sigma_inv;
  std::vector<SymMatrix> M;  // (xi_k - mu)(xi_k - mu)^T
  SymMatrix etaSigma;
};

inline Type3Geometry type3_geometry(const Instance& in, const Mat& pts, const Vec& x) {
  const int J = in.J;
  Moments mo = decision_moments_type23(in, x);
  Type3Geometry g{mo.mu, mo.Sigma, SymMatrix(J), {}, mo.Sigma.scaled(in.eta_cov)};
  for (int b = 0; b < J; ++b) {
    Vec e(J, 0.0);
    e[b] = 1.0;
    Vec col;
    try {
      col = spd_solve(mo.Sigma, e);
    } catch (const NotPsd&) {
      throw ValidationError("Type 3 requires a positive definite covariance");
    }
    for (int a = 0; a <= b; ++a) g.Sigma_inv.set(a, b, col[a]);
  }
  for (const auto& pt : pts) {
    SymMatrix Mk(J);
    for (int a = 0; a < J; ++a)
      for (int b = a; b < J; ++b) Mk.set(a, b, (pt[a] - mo.mu[a]) * (pt[b] - mo.mu[b]));
    g.M.push_back(std::move(Mk));
  }
  return g;
}

inline Vec mean_offset(const Type3Geometry& g, const Mat& pts, const Vec& p) {
  const int J = static_cast<int>(g.mu.size());
  Vec d(J);
  for (int j = 0; j < J; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) s += p[k] * pts[k][j];
    d[j] = s - g.mu[j];
  }
  return d;
}

inline SymMatrix moment_gap(const Type3Geometry& g, const Vec& p) {
  SymMatrix s = g.etaSigma;
  const std::size_t J = s.n();
  for (std::size_t k = 0; k < g.M.size(); ++k) {
    if (p[k] == 0.0) continue;
    for (std::size_t a = 0; a < J; ++a)
      for (std::size_t b = a; b < J; ++b) s.set(a, b, s(a, b) - p[k] * g.M[k](a, b));
  }
  return s;
}

// Row: sum_k p_k v^T M_k v + slack_coef * tau <= v^T (eta Sigma) v
inline Row eigen_row(const Type3Geometry& g, const Vec& v, int tau_col) {
  Row r;
  for (std::size_t k = 0; k < g.M.size(); ++k) {
    const double c = g.M[k].quad_form(v);
    if (c != 0.0) r.terms.push_back({static_cast<int>(k), c});
  }
  if (tau_col >= 0) r.terms.push_back({tau_col, 1.0});
  r.rel = Relation::LessEq;
  r.rhs = g.etaSigma.quad_form(v);
  r.name = "eig";
  return r;
}

}  // namespace detail

// Worst-case expectation max_{p in P(x)} of q (blended with CVaR when risk is
// given). `pts` is the support of the stage the distribution lives on.
inline WorstCase worst_case(const Instance& in, AmbiguityType type, const Mat& pts, const Vec& x,
                            const Vec& q, const Risk* risk = nullptr, int stage = 0) {
  const int K = static_cast<int>(pts.size());
  if (static_cast<int>(q.size()) != K) throw ValidationError("worst_case: q size must equal K");
  LinearModel m = detail::p_simplex_model(K);
  WorstCase out;
  auto empty = [&]() {
    return EmptyAmbiguity("ambiguity set is empty at stage " + std::to_string(stage + 1), stage);
  };

  if (type != AmbiguityType::Type3) {
    detail::add_moment_rows(m, in, type, pts, x);
    detail::add_objective(m, K, q, risk);
    LpSolution s = solve_lp(m);
    if (s.status == LpStatus::Infeasible) throw empty();
    if (s.status != LpStatus::Optimal) throw SolverFailure("worst_case LP not optimal");
    out.value = -s.objective;
    out.p.assign(s.x.begin(), s.x.begin() + K);
    if (risk) out.w.assign(s.x.begin() + K, s.x.begin() + 2 * K);
    return out;
  }

  const detail::Type3Geometry g = detail::type3_geometry(in, pts, x);
  {
    std::vector<Term> ones;
    for (int k = 0; k < K; ++k) ones.push_back({k, 1.0});
    m.add_row(ones, Relation::Equal, 1.0, "normalize");
  }
  detail::add_objective(m, K, q, risk);
  const double eig_scale = std::max(1.0, g.etaSigma.norm_inf());
  Basis warm;
  for (int round = 0; round < kType3MaxRounds; ++round) {
    LpSolution s = solve_lp(m, {}, {}, {}, round ? &warm : nullptr);
    if (s.status == LpStatus::Infeasible) throw empty();
    if (s.status != LpStatus::Optimal) throw SolverFailure("Type 3 worst-case LP not optimal");
    warm = s.basis;
    Vec p(s.x.begin(), s.x.begin() + K);
    bool clean = true;
    const Vec d = detail::mean_offset(g, pts, p);
    const double ell = g.Sigma_inv.quad_form(d);
    if (ell > in.gamma + kType3Tol * std::max(1.0, in.gamma)) {
      clean = false;
      // Tangent of the ellipsoid at the radial boundary point.
      const double sc = std::sqrt(in.gamma / ell);
      Vec a(in.J, 0.0);
      for (int r = 0; r < in.J; ++r)
        for (int c2 = 0; c2 < in.J; ++c2) a[r] += g.Sigma_inv(r, c2) * d[c2] * sc;
      Row r;
      double rhs = in.gamma;
      for (int j = 0; j < in.J; ++j) rhs += a[j] * g.mu[j];
      for (int k = 0; k < K; ++k) {
        double c = 0.0;
        for (int j = 0; j < in.J; ++j) c += a[j] * pts[k][j];
        if (c != 0.0) r.terms.push_back({k, c});
      }
      r.rel = Relation::LessEq;
      r.rhs = rhs;
      r.name = "ell";
      m.rows.push_back(std::move(r));
    }
    const auto eig = sym_eig(detail::moment_gap(g, p));
    for (const auto& e : eig) {
      if (e.value >= -kType3Tol * eig_scale) break;
      clean = false;
      m.rows.push_back(detail::eigen_row(g, e.vector, -1));
    }
    if (clean) {
      out.value = -s.objective;
      out.p = std::move(p);
      if (risk) out.w.assign(s.x.begin() + K, s.x.begin() + 2 * K);
      out.rounds = round + 1;
      return out;
    }
  }
  throw NonConvergence("Type 3 worst-case cutting planes did not converge");
}

// Type 3 Slater check: maximize a common slack tau on the ellipsoid and the
// minimum eigenvalue, with tau capped at 1.
inline double type3_max_slack(const Instance& in, const Mat& pts, const Vec& x) {
  const int K = static_cast<int>(pts.size());
  const detail::Type3Geometry g = detail::type3_geometry(in, pts, x);
  LinearModel m = detail::p_simplex_model(K);
  const int tau = m.add_var("tau", -kInf, 1.0, VarKind::Continuous, -1.0);
  std::vector<Term> ones;
  for (int k = 0; k < K; ++k) ones.push_back({k, 1.0});
  m.add_row(ones, Relation::Equal, 1.0);
  // Seed eigen rows along coordinate axes so the first LP is bounded.
  for (int j = 0; j < in.J; ++j) {
    Vec e(in.J, 0.0);
    e[j] = 1.0;
    m.rows.push_back(detail::eigen_row(g, e, tau));
  }
  double best_true = -kInf;
  Basis warm;
  for (int round = 0; round < kType3MaxRounds; ++round) {
    LpSolution s = solve_lp(m, {}, {}, {}, round ? &warm : nullptr);
    if (s.status != LpStatus::Optimal) throw SolverFailure("Type 3 slack LP not optimal");
    warm = s.basis;
    const double tau_lp = s.x[tau];
    Vec p(s.x.begin(), s.x.begin() + K);
    const Vec d = detail::mean_offset(g, pts, p);
    const double ell = g.Sigma_inv.quad_form(d);
    const auto eig = sym_eig(detail::moment_gap(g, p));
    const double tau_true = std::min({in.gamma - ell, eig.front().value, 1.0});
    best_true = std::max(best_true, tau_true);
    if (best_true >= kSlaterSlack) return best_true;
    if (tau_lp < kSlaterSlack) return tau_lp;
    if (tau_lp - best_true <= 1e-12) return best_true;
    // Gradient cut of the ellipsoid: ell(p0) + grad^T (p - p0) + tau <= gamma.
    if (in.gamma - ell < tau_lp) {
      Vec a(in.J, 0.0);
      for (int r = 0; r < in.J; ++r)
        for (int c2 = 0; c2 < in.J; ++c2) a[r] += 2.0 * g.Sigma_inv(r, c2) * d[c2];
      Row r;
      double rhs = in.gamma - ell;
      for (int k = 0; k < K; ++k) {
        double c = 0.0;
        for (int j = 0; j < in.J; ++j) c += a[j] * pts[k][j];
        rhs += c * p[k];
        if (c != 0.0) r.terms.push_back({k, c});
      }
      r.terms.push_back({tau, 1.0});
      r.rel = Relation::LessEq;
      r.rhs = rhs;
      m.rows.push_back(std::move(r));
    }
    for (const auto& e : eig) {
      if (e.value >= tau_lp) break;
      m.rows.push_back(detail::eigen_row(g, e.vector, tau));
    }
  }
  throw NonConvergence("Type 3 slack program did not converge");
}

inline bool is_nonempty(const Instance& in, AmbiguityType type, const Mat& pts, const Vec& x) {
  if (type == AmbiguityType::Type3) return type3_max_slack(in, pts, x) >= kSlaterSlack;
  const int K = static_cast<int>(pts.size());
  LinearModel m = detail::p_simplex_model(K);
  detail::add_moment_rows(m, in, type, pts, x);
  return solve_lp(m).status == LpStatus::Optimal;
}

}  // namespace ddro
