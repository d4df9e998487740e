#pragma once

// Compiles one stage Bellman subproblem into a LinearModel: stage rows, the
// dualized inner worst-case over the next stage's ambiguity set, McCormick
// linearizations of the x-dual products, and multi-cut value approximations.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ddro/ambiguity.hpp"
#include "ddro/errors.hpp"
#include "ddro/instance.hpp"
#include "ddro/model.hpp"
#include "ddro/stage_block.hpp"

namespace ddro {

enum class CutOrigin { Lagrangian, RelaxedLagrangian, Benders };

inline const char* to_string(CutOrigin o) {
  switch (o) {
    case CutOrigin::Lagrangian: return "Lagrangian";
    case CutOrigin::RelaxedLagrangian: return "RelaxedLagrangian";
    case CutOrigin::Benders: return "Benders";
  }
  return "?";
}

// theta >= v + pi^T x
struct Cut {
  double v = 0.0;
  Vec pi;
  CutOrigin origin = CutOrigin::Lagrangian;
};

// cuts[t][k] under-approximates Q_t(., xi_t^k); index 0 is unused.
struct CutPool {
  std::vector<std::vector<std::vector<Cut>>> cuts;

  explicit CutPool(const Instance& in) : cuts(in.T) {
    for (int t = 1; t < in.T; ++t) cuts[t].resize(in.stage_K(t));
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& st : cuts)
      for (const auto& ks : st) n += ks.size();
    return n;
  }
};

struct Range {
  int begin = 0;
  int size = 0;
  int end() const { return begin + size; }
};

// Named column ranges of a compiled stage model.
struct VarLayout {
  std::vector<std::pair<std::string, Range>> ranges;

  void add(const std::string& name, Range r) { ranges.emplace_back(name, r); }
  bool has(const std::string& name) const {
    for (const auto& [n, r] : ranges)
      if (n == name) return true;
    return false;
  }
  Range at(const std::string& name) const {
    for (const auto& [n, r] : ranges)
      if (n == name) return r;
    throw ValidationError("layout has no family " + name);
  }
};

// Columns of a PSD block in the model: cols[a][b] for the dim x dim matrix.
struct PsdBlockRef {
  std::string name;
  int dim = 0;
  std::vector<std::vector<int>> cols;
};

struct StageBuildOptions {
  double dual_bound = 0.0;  // 0 selects default_dual_bound()
  bool copy_state = false;
  bool prob_bound_duals = false;
  bool symmetry_rows = true;
  bool literal_capacity = false;
  Vec history;
};

struct StageBuild {
  LinearModel model;
  VarLayout layout;
  StageBlockLayout block;
  std::vector<PsdBlockRef> psd;
  AmbiguityType type = AmbiguityType::Type1;
  int stage = 0;
  double dual_bound = 0.0;
  bool has_future = false;
  // Dual columns bounded by +-dual_bound, audited after solves.
  std::vector<int> bounded_duals;
};

inline double default_dual_bound(const Instance& in) {
  double rmax = 0.0, cmax = 0.0;
  for (double r : in.R) rmax = std::max(rmax, std::abs(r));
  for (const auto& row : in.c)
    for (double v : row) cmax = std::max(cmax, std::abs(v));
  return 1e4 * (1.0 + rmax + cmax);
}

// Lower bound on Q_t: minus the largest attainable revenue over stages t..T-1.
inline double value_lower_bound(const Instance& in, int t) {
  double lb = 0.0;
  for (int tau = t; tau < in.T; ++tau) {
    double best = 0.0;
    for (const auto& pt : in.support[tau]) {
      double s = 0.0;
      for (int j = 0; j < in.J; ++j) s += in.R[j] * pt[j];
      best = std::max(best, s);
    }
    lb -= best;
  }
  return lb;
}

// Rows forcing z = b*y for binary b and y in [L, U].
inline std::vector<Row> mccormick_binary_product(int b, int y, double L, double U, int z) {
  if (!std::isfinite(L) || !std::isfinite(U))
    throw UnboundedFactor("McCormick factor needs finite bounds");
  return {
      Row{{{z, 1.0}, {b, -U}}, Relation::LessEq, 0.0, "mc_ub"},
      Row{{{z, 1.0}, {b, -L}}, Relation::GreaterEq, 0.0, "mc_lb"},
      Row{{{z, 1.0}, {y, -1.0}, {b, -L}}, Relation::LessEq, -L, "mc_y_ub"},
      Row{{{z, 1.0}, {y, -1.0}, {b, -U}}, Relation::GreaterEq, -U, "mc_y_lb"},
  };
}

namespace detail {

// Helper owning the model while the dual part is assembled.
class DualAssembler {
 public:
  DualAssembler(StageBuild& b, const Instance& in) : b_(b), in_(in), m_(b.model) {}

  int family(const std::string& name, int count, double lo, double hi,
             const std::function<std::string(int)>& label, bool audited) {
    const int begin = m_.num_vars();
    for (int k = 0; k < count; ++k) {
      const int c = m_.add_var(name + "_" + label(k), lo, hi);
      if (audited) b_.bounded_duals.push_back(c);
    }
    b_.layout.add(name, Range{begin, count});
    return begin;
  }

  // z = x_i * y with McCormick rows; bounds of z follow from y's.
  int product(int i, int y, const std::string& name) {
    const double L = std::min(0.0, m_.lower[y]);
    const double U = std::max(0.0, m_.upper[y]);
    const int z = m_.add_var(name, L, U);
    for (Row& r : mccormick_binary_product(b_.block.x_col(i), y, m_.lower[y], m_.upper[y], z)) {
      r.name = name + "_" + r.name;
      m_.rows.push_back(std::move(r));
    }
    return z;
  }

  LinearModel& model() { return m_; }

 private:
  StageBuild& b_;
  const Instance& in_;
  LinearModel& m_;
};

inline std::string idx(int a) { return std::to_string(a); }
inline std::string idx(int a, int b) { return std::to_string(a) + "_" + std::to_string(b); }
inline std::string idx(int a, int b, int c) { return idx(a, b) + "_" + std::to_string(c); }
inline std::string idx(int a, int b, int c, int d) { return idx(a, b, c) + "_" + std::to_string(d); }

// Columns of a full J x J symmetric dual block with its x-products.
struct QuadBlock {
  int Y = 0;   // Y(j,j') = Y + j*J + j'
  int P = 0;   // P(i,j,j') = x_i * Y(j,j')
  int V = 0;   // V(i,i',j,j') = x_i' * P(i,j,j')
};

// Adds the (xi - mu(x))(xi - mu(x))^T . Y terms to each dual row lhs.
inline void add_quadratic_rows(const Instance& in, const QuadBlock& q, const Mat& pts,
                               std::vector<std::vector<Term>>& lhs) {
  const int I = in.I, J = in.J;
  auto a = [&](int j, int i) { return in.mu_bar[j] * in.lambda_mu[j][i]; };
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (int j = 0; j < J; ++j)
      for (int jp = 0; jp < J; ++jp) {
        const double dj = pts[k][j] - in.mu_bar[j];
        const double djp = pts[k][jp] - in.mu_bar[jp];
        lhs[k].push_back({q.Y + j * J + jp, dj * djp});
        for (int i = 0; i < I; ++i) {
          const double c = -(dj * a(jp, i) + djp * a(j, i));
          if (c != 0.0) lhs[k].push_back({q.P + (i * J + j) * J + jp, c});
          for (int ip = 0; ip < I; ++ip) {
            const double c2 = a(j, i) * a(jp, ip);
            if (c2 != 0.0) lhs[k].push_back({q.V + ((i * I + ip) * J + j) * J + jp, c2});
          }
        }
      }
  }
}

// Full J x J block with symmetric rows, products with x, and second products.
inline QuadBlock add_quad_block(DualAssembler& d, StageBuild& b, const Instance& in,
                                const std::string& yname, const std::string& pname,
                                const std::string& vname, double M, bool psd_diag,
                                bool symmetry_rows) {
  const int I = in.I, J = in.J;
  LinearModel& m = d.model();
  QuadBlock q;
  q.Y = d.family(yname, J * J, -M, M, [&](int k) { return idx(k / J, k % J); }, true);
  if (psd_diag)
    for (int j = 0; j < J; ++j) m.lower[q.Y + j * J + j] = 0.0;
  if (symmetry_rows)
    for (int j = 0; j < J; ++j)
      for (int jp = j + 1; jp < J; ++jp)
        m.add_row({{q.Y + j * J + jp, 1.0}, {q.Y + jp * J + j, -1.0}}, Relation::Equal, 0.0,
                  yname + "_sym_" + idx(j, jp));
  q.P = m.num_vars();
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      for (int jp = 0; jp < J; ++jp) d.product(i, q.Y + j * J + jp, pname + "_" + idx(i, j, jp));
  b.layout.add(pname, Range{q.P, I * J * J});
  q.V = m.num_vars();
  for (int i = 0; i < I; ++i)
    for (int ip = 0; ip < I; ++ip)
      for (int j = 0; j < J; ++j)
        for (int jp = 0; jp < J; ++jp)
          d.product(ip, q.P + (i * J + j) * J + jp, vname + "_" + idx(i, ip, j, jp));
  b.layout.add(vname, Range{q.V, I * I * J * J});
  return q;
}

}  // namespace detail

// Builds stage t (0-based) at state x_prev and realization xi. cuts[t+1][k]
// feed the theta rows. With risk, the CVaR blend of the next stage is used.
inline StageBuild build_stage(const Instance& in, AmbiguityType type, int t, const Vec& x_prev,
                              const Vec& xi, const CutPool& pool, const Risk* risk = nullptr,
                              const StageBuildOptions& opt = {}) {
  StageBuild b;
  b.type = type;
  b.stage = t;
  b.dual_bound = opt.dual_bound > 0.0 ? opt.dual_bound : default_dual_bound(in);
  const double M = b.dual_bound;
  StageBlockOptions sbo;
  sbo.copy_state = opt.copy_state;
  sbo.literal_capacity = opt.literal_capacity;
  sbo.history = opt.history;
  b.block = add_stage_block(b.model, in, t, x_prev, xi, sbo);
  LinearModel& m = b.model;
  const int I = in.I, J = in.J;
  b.layout.add("x", Range{b.block.x, I});
  b.layout.add("y", Range{b.block.y, I * J});
  b.layout.add("x_prev", Range{b.block.prev, I});
  if (t + 1 >= in.T) return b;
  b.has_future = true;

  const Mat& pts = in.support[t + 1];
  const int K = static_cast<int>(pts.size());
  const double qlb = value_lower_bound(in, t + 1);
  const int theta = m.num_vars();
  for (int k = 0; k < K; ++k) m.add_var("theta_" + std::to_string(k), qlb, kInf);
  b.layout.add("theta", Range{theta, K});
  for (int k = 0; k < K; ++k)
    for (const Cut& c : pool.cuts[t + 1][k]) {
      std::vector<Term> r{{theta + k, 1.0}};
      for (int i = 0; i < I; ++i)
        if (c.pi[i] != 0.0) r.push_back({b.block.x_col(i), -c.pi[i]});
      m.add_row(std::move(r), Relation::GreaterEq, c.v, "cut");
    }

  detail::DualAssembler d(b, in);
  using detail::idx;
  std::vector<std::vector<Term>> lhs(K);

  if (type == AmbiguityType::Type1) {
    const int nm = 2 * J + 1;
    const int alpha = d.family("alpha", nm, 0.0, M, [](int k) { return idx(k); }, true);
    const int beta = d.family("beta", nm, 0.0, M, [](int k) { return idx(k); }, true);
    auto S = [&](int j) { return in.mu_bar[j] * in.mu_bar[j] + in.sigma_bar[j] * in.sigma_bar[j]; };
    m.obj[alpha] -= 1.0;
    m.obj[beta] += 1.0;
    for (int j = 0; j < J; ++j) {
      m.obj[alpha + 1 + j] -= in.mu_bar[j] - in.eps_mu[j];
      m.obj[alpha + 1 + J + j] -= S(j) * in.eps_S_lo[j];
      m.obj[beta + 1 + j] += in.mu_bar[j] + in.eps_mu[j];
      m.obj[beta + 1 + J + j] += S(j) * in.eps_S_hi[j];
    }
    // Product families z^{a2}, z^{a3}, z^{b2}, z^{b3} indexed (j, i).
    struct Fam {
      const char* name;
      int base;
      int offset;
      double sign;
      bool second;
    };
    const Fam fams[] = {{"z_a2", alpha, 1, -1.0, false},
                        {"z_a3", alpha, 1 + J, -1.0, true},
                        {"z_b2", beta, 1, 1.0, false},
                        {"z_b3", beta, 1 + J, 1.0, true}};
    for (const Fam& f : fams) {
      const int begin = m.num_vars();
      for (int j = 0; j < J; ++j)
        for (int i = 0; i < I; ++i) {
          const int z = d.product(i, f.base + f.offset + j, std::string(f.name) + "_" + idx(j, i));
          const bool lower = f.sign < 0;
          const double coef = f.second ? in.lambda_S[j][i] * S(j) *
                                             (lower ? in.eps_S_lo[j] : in.eps_S_hi[j])
                                       : in.lambda_mu[j][i] * in.mu_bar[j];
          m.obj[z] += f.sign * coef;
        }
      b.layout.add(f.name, Range{begin, J * I});
    }
    for (int k = 0; k < K; ++k) {
      lhs[k].push_back({alpha, -1.0});
      lhs[k].push_back({beta, 1.0});
      for (int j = 0; j < J; ++j) {
        const double x1 = pts[k][j], x2 = x1 * x1;
        lhs[k].push_back({alpha + 1 + j, -x1});
        lhs[k].push_back({beta + 1 + j, x1});
        lhs[k].push_back({alpha + 1 + J + j, -x2});
        lhs[k].push_back({beta + 1 + J + j, x2});
      }
    }
    if (opt.prob_bound_duals) {
      // p in [0, 1]: gamma_lo multiplies 0, gamma_hi multiplies 1.
      const int glo = d.family("gamma_lo", K, 0.0, M, [](int k) { return idx(k); }, true);
      const int ghi = d.family("gamma_hi", K, 0.0, M, [](int k) { return idx(k); }, true);
      for (int k = 0; k < K; ++k) {
        m.obj[ghi + k] += 1.0;
        lhs[k].push_back({glo + k, -1.0});
        lhs[k].push_back({ghi + k, 1.0});
      }
    }
  } else if (type == AmbiguityType::Type2) {
    const int s = d.family("s", 1, -M, M, [](int) { return std::string("0"); }, true);
    const int u = d.family("u", J, -M, M, [](int k) { return idx(k); }, true);
    m.obj[s] += 1.0;
    const int w = m.num_vars();
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) d.product(i, u + j, "w_" + idx(i, j));
    b.layout.add("w", Range{w, I * J});
    for (int j = 0; j < J; ++j) {
      m.obj[u + j] += in.mu_bar[j];
      for (int i = 0; i < I; ++i) m.obj[w + i * J + j] += in.mu_bar[j] * in.lambda_mu[j][i];
    }
    const detail::QuadBlock q =
        detail::add_quad_block(d, b, in, "Y", "z", "v", M, false, opt.symmetry_rows);
    for (int j = 0; j < J; ++j)
      for (int jp = 0; jp < J; ++jp) {
        m.obj[q.Y + j * J + jp] += in.Sigma_bar(j, jp);
        for (int i = 0; i < I; ++i)
          m.obj[q.P + (i * J + j) * J + jp] += in.Sigma_bar(j, jp) * in.lambda_cov[i];
      }
    for (int k = 0; k < K; ++k) {
      lhs[k].push_back({s, 1.0});
      for (int j = 0; j < J; ++j) lhs[k].push_back({u + j, pts[k][j]});
    }
    detail::add_quadratic_rows(in, q, pts, lhs);
  } else {
    const int s = d.family("s", 1, -M, M, [](int) { return std::string("0"); }, true);
    const int z1 = d.family("z1", J * J, -M, M, [&](int k) { return idx(k / J, k % J); }, true);
    for (int j = 0; j < J; ++j) m.lower[z1 + j * J + j] = 0.0;
    if (opt.symmetry_rows)
      for (int j = 0; j < J; ++j)
        for (int jp = j + 1; jp < J; ++jp)
          m.add_row({{z1 + j * J + jp, 1.0}, {z1 + jp * J + j, -1.0}}, Relation::Equal, 0.0,
                    "z1_sym_" + idx(j, jp));
    const int z2 = d.family("z2", J, -M, M, [](int k) { return idx(k); }, true);
    const int z3 = d.family("z3", 1, 0.0, M, [](int) { return std::string("0"); }, true);
    m.obj[s] += 1.0;
    m.obj[z3] += in.gamma;
    const int w = m.num_vars();
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j)
        for (int jp = 0; jp < J; ++jp) d.product(i, z1 + j * J + jp, "w_" + idx(i, j, jp));
    b.layout.add("w", Range{w, I * J * J});
    const int u = m.num_vars();
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) d.product(i, z2 + j, "u_" + idx(i, j));
    b.layout.add("u", Range{u, I * J});
    const detail::QuadBlock q =
        detail::add_quad_block(d, b, in, "Y", "R", "v", M, true, opt.symmetry_rows);
    for (int j = 0; j < J; ++j) {
      m.obj[z2 + j] -= 2.0 * in.mu_bar[j];
      for (int i = 0; i < I; ++i) m.obj[u + i * J + j] -= 2.0 * in.mu_bar[j] * in.lambda_mu[j][i];
      for (int jp = 0; jp < J; ++jp) {
        const double sg = in.Sigma_bar(j, jp);
        m.obj[z1 + j * J + jp] += sg;
        m.obj[q.Y + j * J + jp] += in.eta_cov * sg;
        for (int i = 0; i < I; ++i) {
          m.obj[w + (i * J + j) * J + jp] += sg * in.lambda_cov[i];
          m.obj[q.P + (i * J + j) * J + jp] += in.eta_cov * sg * in.lambda_cov[i];
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      lhs[k].push_back({s, 1.0});
      for (int j = 0; j < J; ++j) lhs[k].push_back({z2 + j, -2.0 * pts[k][j]});
    }
    detail::add_quadratic_rows(in, q, pts, lhs);

    PsdBlockRef Z{"Z", J + 1, std::vector<std::vector<int>>(J + 1, std::vector<int>(J + 1))};
    for (int a = 0; a < J; ++a) {
      for (int c = 0; c < J; ++c) Z.cols[a][c] = z1 + a * J + c;
      Z.cols[a][J] = z2 + a;
      Z.cols[J][a] = z2 + a;
    }
    Z.cols[J][J] = z3;
    PsdBlockRef Yb{"Y", J, std::vector<std::vector<int>>(J, std::vector<int>(J))};
    for (int a = 0; a < J; ++a)
      for (int c = 0; c < J; ++c) Yb.cols[a][c] = q.Y + a * J + c;
    b.psd = {Z, Yb};
  }

  // Value rows, risk-neutral or CVaR-blended.
  if (!risk) {
    for (int k = 0; k < K; ++k) {
      lhs[k].push_back({theta + k, -1.0});
      m.add_row(std::move(lhs[k]), Relation::GreaterEq, 0.0, "value_" + std::to_string(k));
    }
  } else {
    const double lam = risk->lambda;
    const int eta = m.add_var("cvar_eta", -kInf, kInf, VarKind::Continuous, lam);
    b.layout.add("cvar_eta", Range{eta, 1});
    const int pi = m.num_vars();
    for (int k = 0; k < K; ++k) m.add_var("cvar_pi_" + std::to_string(k), 0.0, kInf);
    b.layout.add("cvar_pi", Range{pi, K});
    for (int k = 0; k < K; ++k) {
      m.add_row({{pi + k, 1.0}, {eta, 1.0}, {theta + k, -1.0}}, Relation::GreaterEq, 0.0,
                "cvar_shift_" + std::to_string(k));
      lhs[k].push_back({pi + k, -lam / (1.0 - risk->alpha)});
      lhs[k].push_back({theta + k, -(1.0 - lam)});
      m.add_row(std::move(lhs[k]), Relation::GreaterEq, 0.0, "value_" + std::to_string(k));
    }
  }
  return b;
}

inline StageBuild build_type1_stage(const Instance& in, int t, const Vec& x_prev, const Vec& xi,
                                    const CutPool& pool, const Risk* risk = nullptr,
                                    const StageBuildOptions& opt = {}) {
  return build_stage(in, AmbiguityType::Type1, t, x_prev, xi, pool, risk, opt);
}
inline StageBuild build_type2_stage(const Instance& in, int t, const Vec& x_prev, const Vec& xi,
                                    const CutPool& pool, const Risk* risk = nullptr,
                                    const StageBuildOptions& opt = {}) {
  return build_stage(in, AmbiguityType::Type2, t, x_prev, xi, pool, risk, opt);
}
inline StageBuild build_type3_stage(const Instance& in, int t, const Vec& x_prev, const Vec& xi,
                                    const CutPool& pool, const Risk* risk = nullptr,
                                    const StageBuildOptions& opt = {}) {
  return build_stage(in, AmbiguityType::Type3, t, x_prev, xi, pool, risk, opt);
}

// Risk record for the distribution of stage t+1, or nullptr when disabled.
inline const Risk* stage_risk(const Instance& in, int t, bool enabled, Risk& storage) {
  if (!enabled || t + 1 >= in.T) return nullptr;
  storage = Risk{in.risk_lambda[t + 1], in.risk_alpha[t + 1]};
  return &storage;
}

// Columns among the audited duals whose value sits within tol*M of a +-M bound.
inline std::vector<int> duals_at_bound(const StageBuild& b, const Vec& values, double rel_tol = 1e-6) {
  std::vector<int> out;
  const double M = b.dual_bound;
  for (int c : b.bounded_duals) {
    const double v = values[c];
    if (std::abs(v - M) <= rel_tol * M || (b.model.lower[c] < 0 && std::abs(v + M) <= rel_tol * M))
      out.push_back(c);
  }
  return out;
}

}  // namespace ddro
