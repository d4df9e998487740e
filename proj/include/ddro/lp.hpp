#pragma once

// Dense revised simplex over bounded variables.
//
// Every row i gets a logical r_i with a_i x - r_i = 0; the row relation becomes a
// bound on r_i. The basis inverse is kept explicitly and refactored by
// Gauss-Jordan every `refactor_every` pivots. Phase 1 minimizes the sum of
// bound infeasibilities of the basic variables (composite costs recomputed each
// iteration), so any starting basis works, which is what branch-and-bound uses
// for warm starts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ddro/errors.hpp"
#include "ddro/model.hpp"

namespace ddro {

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

struct LpOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  double pivot_tol = 1e-11;  // ratio-test entries at or below this count as zero
  int refactor_every = 64;
  // 0 means the default cap 10 * (num_vars + num_rows + 1000).
  long max_iters = 0;
};

// Simplex basis over num_vars structurals followed by num_rows logicals.
struct Basis {
  std::vector<int> head;                // basic variable per basis position
  std::vector<std::int8_t> status;      // per variable, see VarStatus
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> row_duals;        // d objective / d rhs
  std::vector<double> reduced_costs;
  long iterations = 0;
  Basis basis;
};

namespace detail {

enum VarStatus : std::int8_t { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeZero = 3 };

class Simplex {
 public:
  Simplex(const LinearModel& model, std::span<const double> lower, std::span<const double> upper,
          const LpOptions& opt)
      : opt_(opt), n_(model.num_vars()), m_(model.num_rows()), total_(n_ + m_) {
    // Column-major copy of A.
    std::vector<int> counts(n_, 0);
    for (const Row& r : model.rows)
      for (const Term& t : r.terms) ++counts[t.col];
    col_start_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + counts[j];
    row_idx_.resize(col_start_[n_]);
    val_.resize(col_start_[n_]);
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i)
      for (const Term& t : model.rows[i].terms) {
        if (t.coef == 0.0) continue;
        // Repeated terms on one column within a row are summed.
        if (fill[t.col] > col_start_[t.col] && row_idx_[fill[t.col] - 1] == i) {
          val_[fill[t.col] - 1] += t.coef;
          continue;
        }
        row_idx_[fill[t.col]] = i;
        val_[fill[t.col]++] = t.coef;
      }
    // Zero and repeated coefficients were skipped; compact each column.
    for (int j = 0; j < n_; ++j) counts[j] = fill[j] - col_start_[j];
    {
      std::vector<int> ns(n_ + 1, 0);
      for (int j = 0; j < n_; ++j) ns[j + 1] = ns[j] + counts[j];
      std::vector<int> ri(ns[n_]);
      std::vector<double> vv(ns[n_]);
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < counts[j]; ++k) {
          ri[ns[j] + k] = row_idx_[col_start_[j] + k];
          vv[ns[j] + k] = val_[col_start_[j] + k];
        }
      col_start_ = std::move(ns);
      row_idx_ = std::move(ri);
      val_ = std::move(vv);
    }

    lb_.resize(total_);
    ub_.resize(total_);
    cost_.assign(total_, 0.0);
    for (int j = 0; j < n_; ++j) {
      lb_[j] = lower[j];
      ub_[j] = upper[j];
      cost_[j] = model.obj[j];
    }
    for (int i = 0; i < m_; ++i) {
      const Row& r = model.rows[i];
      double lo = -kInf, hi = kInf;
      switch (r.rel) {
        case Relation::LessEq: hi = r.rhs; break;
        case Relation::GreaterEq: lo = r.rhs; break;
        case Relation::Equal: lo = hi = r.rhs; break;
      }
      lb_[n_ + i] = lo;
      ub_[n_ + i] = hi;
    }
    // Row equilibration by powers of two so absolute tolerances stay meaningful
    // next to large coefficients; duals are unscaled in finish().
    row_scale_.assign(m_, 1.0);
    {
      std::vector<double> amax(m_, 0.0);
      for (std::size_t k = 0; k < val_.size(); ++k)
        amax[row_idx_[k]] = std::max(amax[row_idx_[k]], std::abs(val_[k]));
      for (int i = 0; i < m_; ++i)
        if (amax[i] > 0.0) row_scale_[i] = std::exp2(std::round(std::log2(amax[i])));
      for (std::size_t k = 0; k < val_.size(); ++k) val_[k] /= row_scale_[row_idx_[k]];
      for (int i = 0; i < m_; ++i) {
        lb_[n_ + i] /= row_scale_[i];
        ub_[n_ + i] /= row_scale_[i];
      }
    }
    offset_ = model.obj_offset;
    max_iters_ = opt.max_iters > 0 ? opt.max_iters : 10L * (n_ + m_ + 1000);
  }

  LpSolution run(const Basis* warm) {
    LpSolution sol;
    for (int j = 0; j < total_; ++j)
      if (lb_[j] > ub_[j] + tol_of(lb_[j])) {
        sol.status = LpStatus::Infeasible;
        return sol;
      }
    init_basis(warm);
    refactor();

    long since_refactor = 0;
    int degenerate_run = 0;
    bool bland = false;
    int cleanups = 0;
    std::vector<double> y(m_), alpha(m_), cb(m_);

    while (true) {
      if (iters_ >= max_iters_) throw NumericalFailure("simplex iteration cap exceeded");
      if (since_refactor >= opt_.refactor_every) {
        refactor();
        since_refactor = 0;
      }

      // Phase selection from the current basic values.
      bool phase1 = false;
      for (int i = 0; i < m_; ++i) {
        const int b = head_[i];
        const double v = x_[b];
        if (v < lb_[b] - tol_of(lb_[b])) {
          cb[i] = -1.0;
          phase1 = true;
        } else if (v > ub_[b] + tol_of(ub_[b])) {
          cb[i] = 1.0;
          phase1 = true;
        } else {
          cb[i] = 0.0;
        }
      }
      if (!phase1)
        for (int i = 0; i < m_; ++i) cb[i] = cost_[head_[i]];

      std::fill(y.begin(), y.end(), 0.0);
      for (int i = 0; i < m_; ++i) {
        const double c = cb[i];
        if (c == 0.0) continue;
        const double* row = &binv_[static_cast<std::size_t>(i) * m_];
        for (int r = 0; r < m_; ++r) y[r] += c * row[r];
      }

      // Pricing.
      int enter = -1;
      int dir = 0;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        const std::int8_t st = status_[j];
        if (st == kBasic) continue;
        if (lb_[j] == ub_[j]) continue;
        double d = phase1 ? 0.0 : cost_[j];
        double scale = std::max(1.0, std::abs(d));
        if (j < n_) {
          for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
            const double term = y[row_idx_[k]] * val_[k];
            d -= term;
            scale = std::max(scale, std::abs(term));
          }
        } else {
          const double term = y[j - n_];
          d += term;
          scale = std::max(scale, std::abs(term));
        }
        const double tol = opt_.opt_tol * scale;
        int cand_dir = 0;
        if (st == kAtLower && d < -tol) cand_dir = 1;
        else if (st == kAtUpper && d > tol) cand_dir = -1;
        else if (st == kFreeZero && std::abs(d) > tol) cand_dir = d < 0 ? 1 : -1;
        if (cand_dir == 0) continue;
        if (bland) {
          enter = j;
          dir = cand_dir;
          break;
        }
        const double score = std::abs(d) / scale;
        if (score > best) {
          best = score;
          enter = j;
          dir = cand_dir;
        }
      }

      if (enter < 0) {
        if (phase1) {
          // Confirm on a fresh factorization before declaring infeasibility.
          if (since_refactor > 0 && cleanups < 3) {
            refactor();
            since_refactor = 0;
            ++cleanups;
            continue;
          }
          sol.status = LpStatus::Infeasible;
          sol.iterations = iters_;
          return sol;
        }
        if (since_refactor > 0 && cleanups < 3) {
          refactor();
          since_refactor = 0;
          ++cleanups;
          if (!basic_feasible()) continue;
        }
        finish(sol, y);
        return sol;
      }

      column(enter, alpha);

      // Harris two-pass ratio test.
      double range = ub_[enter] - lb_[enter];
      double tmax = kInf;
      // Pass 1 bounds the step with every nonnegligible entry: skipping small
      // ones lets long steps push their basics out of bounds.
      for (int i = 0; i < m_; ++i) {
        const double a = alpha[i];
        if (std::abs(a) <= opt_.pivot_tol) continue;
        const double rate = -dir * a;
        const int b = head_[i];
        double target;
        if (!block_target(b, rate, target)) continue;
        const double slack = tol_of(target);
        const double r = rate < 0 ? (x_[b] - target + slack) / -rate : (target + slack - x_[b]) / rate;
        tmax = std::min(tmax, std::max(r, 0.0));
      }
      int leave = -1;
      double leave_target = 0.0;
      double step = kInf;
      if (tmax < kInf) {
        double best_piv = 0.0;
        for (int i = 0; i < m_; ++i) {
          const double a = alpha[i];
          if (std::abs(a) <= opt_.pivot_tol) continue;
          const double rate = -dir * a;
          const int b = head_[i];
          double target;
          if (!block_target(b, rate, target)) continue;
          const double r = rate < 0 ? (x_[b] - target) / -rate : (target - x_[b]) / rate;
          if (r <= tmax && std::abs(a) > best_piv) {
            best_piv = std::abs(a);
            leave = i;
            leave_target = target;
            step = std::max(r, 0.0);
          }
        }
      }

      if (range < kInf && range <= step) {
        // Bound flip, basis unchanged.
        const double delta = dir * range;
        apply_step(enter, delta, alpha);
        status_[enter] = dir > 0 ? kAtUpper : kAtLower;
        x_[enter] = dir > 0 ? ub_[enter] : lb_[enter];
        ++iters_;
        ++since_refactor;
        degenerate_run = 0;
        bland = false;
        continue;
      }
      if (leave < 0) {
        if (phase1) throw NumericalFailure("simplex: unbounded ray in phase 1");
        sol.status = LpStatus::Unbounded;
        sol.iterations = iters_;
        return sol;
      }

      apply_step(enter, dir * step, alpha);
      const int out = head_[leave];
      x_[out] = leave_target;
      status_[out] = (leave_target == lb_[out]) ? kAtLower : kAtUpper;
      pos_[out] = -1;
      head_[leave] = enter;
      pos_[enter] = leave;
      status_[enter] = kBasic;
      pivot_update(leave, alpha);
      ++iters_;
      ++since_refactor;

      if (step <= 1e-12) {
        if (++degenerate_run > 50) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
  }

 private:
  double tol_of(double bound) const {
    return opt_.feas_tol * std::max(1.0, std::isfinite(bound) ? std::abs(bound) : 1.0);
  }

  bool basic_feasible() const {
    for (int i = 0; i < m_; ++i) {
      const int b = head_[i];
      if (x_[b] < lb_[b] - tol_of(lb_[b]) || x_[b] > ub_[b] + tol_of(ub_[b])) return false;
    }
    return true;
  }

  // Bound the basic variable b runs into when moving at `rate`.
  bool block_target(int b, double rate, double& target) const {
    const double v = x_[b];
    if (rate < 0) {
      if (v > ub_[b] + tol_of(ub_[b])) {
        target = ub_[b];
        return true;
      }
      if (v < lb_[b] - tol_of(lb_[b])) return false;
      if (lb_[b] == -kInf) return false;
      target = lb_[b];
      return true;
    }
    if (v < lb_[b] - tol_of(lb_[b])) {
      target = lb_[b];
      return true;
    }
    if (v > ub_[b] + tol_of(ub_[b])) return false;
    if (ub_[b] == kInf) return false;
    target = ub_[b];
    return true;
  }

  void nonbasic_value(int j) {
    switch (status_[j]) {
      case kAtLower: x_[j] = lb_[j]; break;
      case kAtUpper: x_[j] = ub_[j]; break;
      case kFreeZero: x_[j] = 0.0; break;
      default: break;
    }
  }

  std::int8_t default_status(int j) const {
    if (lb_[j] > -kInf) return kAtLower;
    if (ub_[j] < kInf) return kAtUpper;
    return kFreeZero;
  }

  // Keep a nonbasic status consistent with (possibly changed) bounds.
  std::int8_t fix_status(int j, std::int8_t st) const {
    if (st == kAtLower && lb_[j] > -kInf) return st;
    if (st == kAtUpper && ub_[j] < kInf) return st;
    if (st == kFreeZero && lb_[j] == -kInf && ub_[j] == kInf) return st;
    return default_status(j);
  }

  void init_basis(const Basis* warm) {
    x_.assign(total_, 0.0);
    status_.assign(total_, kAtLower);
    pos_.assign(total_, -1);
    head_.assign(m_, -1);
    const bool usable = warm && !warm->head.empty() &&
                        static_cast<int>(warm->status.size()) <= total_ &&
                        static_cast<int>(warm->head.size()) <= m_;
    if (usable) {
      // Warm bases from a model with fewer rows: extra rows get their logicals.
      const int old_total = static_cast<int>(warm->status.size());
      const int old_m = static_cast<int>(warm->head.size());
      const int old_n = old_total - old_m;
      if (old_n != n_) {
        cold_basis();
        return;
      }
      for (int j = 0; j < n_; ++j) status_[j] = warm->status[j];
      for (int i = 0; i < old_m; ++i) status_[n_ + i] = warm->status[old_n + i];
      for (int i = 0; i < m_; ++i) {
        int b = i < old_m ? warm->head[i] : n_ + i;
        if (b >= old_n && i < old_m) b = b - old_n + n_;
        head_[i] = b;
      }
      for (int i = old_m; i < m_; ++i) status_[n_ + i] = kBasic;
      for (int j = 0; j < total_; ++j) {
        if (status_[j] == kBasic) continue;
        status_[j] = fix_status(j, status_[j]);
        nonbasic_value(j);
      }
      for (int i = 0; i < m_; ++i) {
        status_[head_[i]] = kBasic;
        pos_[head_[i]] = i;
      }
      // Any variable marked basic but not in head becomes nonbasic.
      for (int j = 0; j < total_; ++j)
        if (status_[j] == kBasic && pos_[j] < 0) {
          status_[j] = default_status(j);
          nonbasic_value(j);
        }
      return;
    }
    cold_basis();
  }

  void cold_basis() {
    for (int j = 0; j < n_; ++j) {
      status_[j] = default_status(j);
      pos_[j] = -1;
      nonbasic_value(j);
    }
    for (int i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      status_[n_ + i] = kBasic;
      pos_[n_ + i] = i;
    }
  }

  // Dense column of variable j.
  void dense_column(int j, std::vector<double>& col) const {
    std::fill(col.begin(), col.end(), 0.0);
    if (j < n_) {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) col[row_idx_[k]] = val_[k];
    } else {
      col[j - n_] = -1.0;
    }
  }

  // alpha = B^{-1} a_j
  void column(int j, std::vector<double>& alpha) const {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    if (j < n_) {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
        const int r = row_idx_[k];
        const double v = val_[k];
        for (int i = 0; i < m_; ++i) alpha[i] += binv_[static_cast<std::size_t>(i) * m_ + r] * v;
      }
    } else {
      const int r = j - n_;
      for (int i = 0; i < m_; ++i) alpha[i] = -binv_[static_cast<std::size_t>(i) * m_ + r];
    }
  }

  void apply_step(int enter, double delta, const std::vector<double>& alpha) {
    x_[enter] += delta;
    // Entries the ratio test treats as zero move nothing.
    for (int i = 0; i < m_; ++i)
      if (std::abs(alpha[i]) > opt_.pivot_tol) x_[head_[i]] -= alpha[i] * delta;
  }

  void pivot_update(int p, const std::vector<double>& alpha) {
    double* prow = &binv_[static_cast<std::size_t>(p) * m_];
    const double inv = 1.0 / alpha[p];
    for (int r = 0; r < m_; ++r) prow[r] *= inv;
    for (int i = 0; i < m_; ++i) {
      if (i == p) continue;
      const double f = alpha[i];
      if (f == 0.0) continue;
      double* row = &binv_[static_cast<std::size_t>(i) * m_];
      for (int r = 0; r < m_; ++r) row[r] -= f * prow[r];
    }
  }

  // Rebuild B^{-1} from scratch and recompute the basic values. Columns that
  // turn out dependent are swapped for logicals.
  void refactor() {
    for (int attempt = 0; attempt < 3; ++attempt) {
      if (try_invert()) break;
      if (attempt == 2) throw NumericalFailure("simplex: basis repair failed");
    }
    recompute_basic();
  }

  bool try_invert() {
    const std::size_t mm = static_cast<std::size_t>(m_) * m_;
    std::vector<double> b(mm, 0.0);  // row-major B
    std::vector<double> col(m_);
    for (int k = 0; k < m_; ++k) {
      dense_column(head_[k], col);
      for (int r = 0; r < m_; ++r) b[static_cast<std::size_t>(r) * m_ + k] = col[r];
    }
    std::vector<double> e(mm, 0.0);
    for (int i = 0; i < m_; ++i) e[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    std::vector<int> piv_row(m_, -1);
    std::vector<char> used(m_, 0);
    std::vector<int> deficient;
    for (int k = 0; k < m_; ++k) {
      int pr = -1;
      double best = 1e-11;
      for (int r = 0; r < m_; ++r) {
        if (used[r]) continue;
        const double v = std::abs(b[static_cast<std::size_t>(r) * m_ + k]);
        if (v > best) {
          best = v;
          pr = r;
        }
      }
      if (pr < 0) {
        deficient.push_back(k);
        continue;
      }
      used[pr] = 1;
      piv_row[k] = pr;
      double* brow = &b[static_cast<std::size_t>(pr) * m_];
      double* erow = &e[static_cast<std::size_t>(pr) * m_];
      const double inv = 1.0 / brow[k];
      for (int c = 0; c < m_; ++c) {
        brow[c] *= inv;
        erow[c] *= inv;
      }
      for (int r = 0; r < m_; ++r) {
        if (r == pr) continue;
        const double f = b[static_cast<std::size_t>(r) * m_ + k];
        if (f == 0.0) continue;
        double* br = &b[static_cast<std::size_t>(r) * m_];
        double* er = &e[static_cast<std::size_t>(r) * m_];
        for (int c = k; c < m_; ++c) br[c] -= f * brow[c];
        for (int c = 0; c < m_; ++c) er[c] -= f * erow[c];
      }
    }
    if (!deficient.empty()) {
      std::size_t d = 0;
      for (int r = 0; r < m_ && d < deficient.size(); ++r) {
        if (used[r]) continue;
        const int k = deficient[d++];
        const int out = head_[k];
        pos_[out] = -1;
        status_[out] = default_status(out);
        nonbasic_value(out);
        const int logical = n_ + r;
        if (status_[logical] == kBasic) {
          // The logical is already basic elsewhere; fall back to a cold start.
          cold_basis();
          return false;
        }
        head_[k] = logical;
        status_[logical] = kBasic;
        pos_[logical] = k;
      }
      return false;
    }
    binv_.assign(mm, 0.0);
    for (int k = 0; k < m_; ++k) {
      const double* src = &e[static_cast<std::size_t>(piv_row[k]) * m_];
      std::copy(src, src + m_, &binv_[static_cast<std::size_t>(k) * m_]);
    }
    return true;
  }

  void recompute_basic() {
    // B x_B = -N x_N
    std::vector<double> rhs(m_, 0.0);
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == kBasic) continue;
      const double v = x_[j];
      if (v == 0.0) continue;
      if (j < n_) {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) rhs[row_idx_[k]] -= val_[k] * v;
      } else {
        rhs[j - n_] += v;
      }
    }
    for (int i = 0; i < m_; ++i) {
      double s = 0.0;
      const double* row = &binv_[static_cast<std::size_t>(i) * m_];
      for (int r = 0; r < m_; ++r) s += row[r] * rhs[r];
      x_[head_[i]] = s;
    }
  }

  void finish(LpSolution& sol, const std::vector<double>& y) {
    sol.status = LpStatus::Optimal;
    sol.iterations = iters_;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    double obj = offset_;
    for (int j = 0; j < n_; ++j) obj += cost_[j] * x_[j];
    sol.objective = obj;
    sol.row_duals.resize(m_);
    for (int i = 0; i < m_; ++i) sol.row_duals[i] = y[i] / row_scale_[i];
    sol.reduced_costs.resize(n_);
    for (int j = 0; j < n_; ++j) {
      double d = cost_[j];
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) d -= y[row_idx_[k]] * val_[k];
      sol.reduced_costs[j] = d;
    }
    sol.basis.head = head_;
    sol.basis.status = status_;
  }

  LpOptions opt_;
  int n_, m_, total_;
  std::vector<int> col_start_, row_idx_;
  std::vector<double> val_;
  std::vector<double> lb_, ub_, cost_, x_;
  std::vector<std::int8_t> status_;
  std::vector<int> pos_, head_;
  std::vector<double> binv_;
  std::vector<double> row_scale_;
  double offset_ = 0.0;
  long iters_ = 0;
  long max_iters_ = 0;
};

}  // namespace detail

// Solves the continuous relaxation of `model` (integrality flags ignored).
// `lower`/`upper` override the model's bounds when non-empty; `warm` seeds the
// starting basis.
inline LpSolution solve_lp(const LinearModel& model, const LpOptions& opt = {},
                           std::span<const double> lower = {}, std::span<const double> upper = {},
                           const Basis* warm = nullptr) {
  model.validate();
  std::span<const double> lo = lower.empty() ? std::span<const double>(model.lower) : lower;
  std::span<const double> hi = upper.empty() ? std::span<const double>(model.upper) : upper;
  detail::Simplex simplex(model, lo, hi, opt);
  return simplex.run(warm);
}

}  // namespace ddro
