#pragma once

// Type 3 PSD handling. The outer path appends eigen-cuts v^T B v >= 0 inside
// branch-and-bound until every block is PSD within tolerance (a relaxation, so
// a lower bound). The inner path restricts blocks to DD(U): B = U^T Q U with Q
// diagonally dominant, which is PSD and therefore gives an upper bound.

#include <cmath>
#include <string>
#include <vector>

#include "ddro/errors.hpp"
#include "ddro/linalg.hpp"
#include "ddro/milp.hpp"
#include "ddro/reformulate.hpp"

namespace ddro {

inline constexpr double kEigenCutTol = 1e-6;
inline constexpr double kMaxBasisCondition = 1e12;

inline SymMatrix block_value(const PsdBlockRef& b, const Vec& values) {
  SymMatrix s(b.dim);
  for (int a = 0; a < b.dim; ++a)
    for (int c = a; c < b.dim; ++c) s.set(a, c, 0.5 * (values[b.cols[a][c]] + values[b.cols[c][a]]));
  return s;
}

// Row sum_ab v_a v_b B_ab >= 0.
inline Row eigen_cut(const PsdBlockRef& b, const Vec& v) {
  Row r;
  for (int a = 0; a < b.dim; ++a)
    for (int c = 0; c < b.dim; ++c) {
      const double coef = v[a] * v[c];
      if (coef != 0.0) r.terms.push_back({b.cols[a][c], coef});
    }
  r.rel = Relation::GreaterEq;
  r.rhs = 0.0;
  r.name = "eig_" + b.name;
  return r;
}

// Rows v^T B v >= 0 for v = e_a + t e_c with t = +-4^k, |k| <= 4: valid for any
// PSD block. The spread of ratios spares Kelley the far-off exploration rounds.
inline std::vector<Row> seed_cuts(const std::vector<PsdBlockRef>& blocks) {
  std::vector<Row> out;
  for (const auto& b : blocks)
    for (int a = 0; a < b.dim; ++a)
      for (int c = a + 1; c < b.dim; ++c)
        for (int k = -4; k <= 4; ++k)
          for (double sign : {1.0, -1.0}) {
            const double t = std::ldexp(sign, 2 * k);
            const double nrm = std::sqrt(1.0 + t * t);
            Vec v(b.dim, 0.0);
            v[a] = 1.0 / nrm;
            v[c] = t / nrm;
            out.push_back(eigen_cut(b, v));
          }
  return out;
}

// Eigen-cuts for every block whose minimum eigenvalue is below -tol.
inline std::vector<Row> psd_separate(const std::vector<PsdBlockRef>& blocks, const Vec& values,
                                     double tol = kEigenCutTol) {
  std::vector<Row> cuts;
  for (const auto& b : blocks) {
    const auto eig = sym_eig(block_value(b, values));
    for (const auto& e : eig) {
      if (e.value >= -tol) break;
      cuts.push_back(eigen_cut(b, e.vector));
    }
  }
  return cuts;
}

inline double min_block_eigenvalue(const std::vector<PsdBlockRef>& blocks, const Vec& values) {
  double m = kInf;
  for (const auto& b : blocks) m = std::min(m, min_eigenvalue(block_value(b, values)));
  return m;
}

struct OuterResult {
  MipSolution mip;
  long eigen_cuts = 0;
};

// Lower bound on the MISDP. `extra` rows (cached eigen-cuts, seeds) are added first.
inline OuterResult solve_misdp_outer(const LinearModel& model, const std::vector<PsdBlockRef>& blocks,
                                     double tol = kEigenCutTol, const MipOptions& opt = {},
                                     const std::vector<Row>& extra = {}) {
  LinearModel m = model;
  for (const Row& r : extra) m.rows.push_back(r);
  OuterResult out;
  out.mip = solve_milp(m, opt, [&](const Vec& x) { return psd_separate(blocks, x, tol); });
  out.eigen_cuts = static_cast<long>(out.mip.cuts.size());
  return out;
}

namespace detail {

inline void add_dd_block(LinearModel& m, const PsdBlockRef& b, const DenseMatrix& U) {
  const int n = b.dim;
  if (static_cast<int>(U.rows()) != n || static_cast<int>(U.cols()) != n)
    throw ValidationError("dd basis dimension mismatch for block " + b.name);
  if (!(condition_estimate(U) <= kMaxBasisCondition))
    throw SingularBasis("dd basis for block " + b.name + " is numerically singular");
  // Q symmetric, stored by its upper triangle.
  std::vector<std::vector<int>> q(n, std::vector<int>(n, -1));
  for (int a = 0; a < n; ++a)
    for (int c = a; c < n; ++c) {
      const std::string nm = "Q" + b.name + "_" + std::to_string(a) + "_" + std::to_string(c);
      q[a][c] = q[c][a] = m.add_var(nm, a == c ? 0.0 : -kInf, kInf);
    }
  // B_cd = sum_ab U_ac Q_ab U_bd
  for (int c = 0; c < n; ++c)
    for (int d = 0; d < n; ++d) {
      std::vector<Term> r{{b.cols[c][d], 1.0}};
      std::vector<double> acc(m.num_vars(), 0.0);
      std::vector<int> touched;
      for (int a = 0; a < n; ++a)
        for (int e = 0; e < n; ++e) {
          const double coef = U(a, c) * U(e, d);
          if (coef == 0.0) continue;
          const int col = q[a][e];
          if (acc[col] == 0.0) touched.push_back(col);
          acc[col] -= coef;
        }
      for (int col : touched)
        if (acc[col] != 0.0) r.push_back({col, acc[col]});
      m.add_row(std::move(r), Relation::Equal, 0.0, "dd_" + b.name + "_" + std::to_string(c) + "_" + std::to_string(d));
    }
  // Q_aa >= sum_{c != a} |Q_ac| through Q_ac = q+ - q-.
  std::vector<std::vector<int>> ab(n, std::vector<int>(n, -1));
  for (int a = 0; a < n; ++a)
    for (int c = a + 1; c < n; ++c) {
      const std::string tag = b.name + "_" + std::to_string(a) + "_" + std::to_string(c);
      const int p = m.add_var("qp" + tag, 0.0, kInf);
      const int mn = m.add_var("qm" + tag, 0.0, kInf);
      m.add_row({{q[a][c], 1.0}, {p, -1.0}, {mn, 1.0}}, Relation::Equal, 0.0, "split" + tag);
      ab[a][c] = ab[c][a] = p;
      (void)mn;
    }
  for (int a = 0; a < n; ++a) {
    std::vector<Term> r{{q[a][a], 1.0}};
    for (int c = 0; c < n; ++c)
      if (c != a) {
        r.push_back({ab[a][c], -1.0});
        r.push_back({ab[a][c] + 1, -1.0});
      }
    m.add_row(std::move(r), Relation::GreaterEq, 0.0, "ddrow_" + b.name + "_" + std::to_string(a));
  }
}

}  // namespace detail

// Restricts the Z block to DD(U) and the Y block to DD(V).
inline LinearModel add_dd_inner(const LinearModel& model, const std::vector<PsdBlockRef>& blocks,
                                const DenseMatrix& U, const DenseMatrix& V) {
  LinearModel m = model;
  for (const auto& b : blocks) detail::add_dd_block(m, b, b.name == "Z" ? U : V);
  return m;
}

inline LinearModel add_dd_inner(const LinearModel& model, const std::vector<PsdBlockRef>& blocks) {
  int nz = 0, ny = 0;
  for (const auto& b : blocks) (b.name == "Z" ? nz : ny) = b.dim;
  return add_dd_inner(model, blocks, DenseMatrix::identity(nz), DenseMatrix::identity(ny));
}

// Cholesky-based basis update: factor the current block plus a small ridge so
// the next DD(U) set contains it.
inline DenseMatrix dd_basis_from(const SymMatrix& block) {
  SymMatrix s = block;
  const double ridge = 1e-6 * std::max(1.0, s.norm_inf());
  for (std::size_t i = 0; i < s.n(); ++i) s.set(i, i, s(i, i) + ridge);
  return cholesky(s).transpose();
}

}  // namespace ddro
