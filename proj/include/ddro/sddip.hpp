#pragma once

// Multi-cut SDDiP over the compiled stage models. Forward passes sample
// realizations from the worst-case distribution at the trial state; backward
// passes add Lagrangian cuts built on copied state variables.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddro/ambiguity.hpp"
#include "ddro/errors.hpp"
#include "ddro/milp.hpp"
#include "ddro/misdp.hpp"
#include "ddro/reformulate.hpp"

namespace ddro {

// How Type 3 PSD blocks are handled in stage solves. Exact is for Types 1-2.
enum class BoundMode { Exact, Lower, Upper };

inline const char* to_string(BoundMode b) {
  switch (b) {
    case BoundMode::Exact: return "exact";
    case BoundMode::Lower: return "lb";
    case BoundMode::Upper: return "ub";
  }
  return "?";
}

inline BoundMode bound_mode_from(const std::string& s) {
  if (s == "exact") return BoundMode::Exact;
  if (s == "lb") return BoundMode::Lower;
  if (s == "ub") return BoundMode::Upper;
  throw ValidationError("bound_mode must be exact, lb or ub");
}

enum class StepRule { Kelley, Subgradient };

struct LagrangianOptions {
  StepRule rule = StepRule::Kelley;
  int max_iters = 60;
  double tol = 1e-9;  // relative gap between model bound and best value
};

struct SddipConfig {
  AmbiguityType type = AmbiguityType::Type1;
  int max_iters = 100;
  int num_paths = 1;
  double tol = 1e-6;
  bool risk = false;
  std::uint64_t seed = 1;
  BoundMode bound_mode = BoundMode::Exact;
  bool dd_iterative = false;
  LagrangianOptions lagrangian;
  MipOptions mip;
  bool literal_capacity = false;
  bool prob_bound_duals = false;
  // Optional override of the default dual bound.
  double dual_bound = 0.0;
};

struct IterationRecord {
  int iter = 0;
  double lb = 0.0;
  double ub = kInf;
  double gap = kInf;
  double seconds = 0.0;
};

struct SolveReport {
  std::string status = "IterationLimit";
  std::string message;
  AmbiguityType type = AmbiguityType::Type1;
  BoundMode bound_mode = BoundMode::Exact;
  std::vector<IterationRecord> iters;
  double lb = -kInf;
  double ub_estimate = kInf;
  double ub_stderr = 0.0;
  std::string ub_method = "exact";
  double gap = kInf;
  Vec first_stage_x;
  int iterations = 0;
  long stage_solves = 0;
  long lagrangian_solves = 0;
  long cuts = 0;
  std::vector<long> eigen_cuts_per_stage;
  double seconds = 0.0;
  std::string sampling = "worst-case";
  int empty_stage = -1;

  double objective() const { return lb; }
  std::vector<double> lb_per_iter() const {
    std::vector<double> v;
    for (const auto& r : iters) v.push_back(r.lb);
    return v;
  }
};

namespace detail {

inline nlohmann::ordered_json num(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace detail

// timing=false leaves out wall-clock fields so reports compare byte-for-byte.
inline nlohmann::ordered_json to_json(const SolveReport& r, bool timing = true) {
  nlohmann::ordered_json j;
  j["status"] = r.status;
  if (!r.message.empty()) j["message"] = r.message;
  j["type"] = static_cast<int>(r.type);
  j["bound_mode"] = to_string(r.bound_mode);
  j["objective"] = detail::num(r.lb);
  j["lb"] = detail::num(r.lb);
  j["ub_estimate"] = detail::num(r.ub_estimate);
  j["ub_stderr"] = r.ub_stderr;
  j["ub_method"] = r.ub_method;
  j["gap"] = detail::num(r.gap);
  j["first_stage_x"] = r.first_stage_x;
  j["iterations"] = r.iterations;
  j["stage_solves"] = r.stage_solves;
  j["lagrangian_solves"] = r.lagrangian_solves;
  j["cuts"] = r.cuts;
  j["sampling"] = r.sampling;
  if (!r.eigen_cuts_per_stage.empty()) j["eigen_cuts_per_stage"] = r.eigen_cuts_per_stage;
  if (r.empty_stage >= 0) j["empty_stage"] = r.empty_stage + 1;
  nlohmann::ordered_json lbs = nlohmann::ordered_json::array(), ubs = nlohmann::ordered_json::array();
  for (const auto& it : r.iters) {
    lbs.push_back(detail::num(it.lb));
    ubs.push_back(detail::num(it.ub));
  }
  j["lb_per_iter"] = lbs;
  j["ub_per_iter"] = ubs;
  if (timing) j["seconds"] = r.seconds;
  return j;
}

inline std::string to_csv(const SolveReport& r, bool timing = true) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,lb,ub,gap" << (timing ? ",seconds" : "") << "\n";
  for (const auto& it : r.iters) {
    os << it.iter << "," << it.lb << "," << it.ub << "," << it.gap;
    if (timing) os << "," << it.seconds;
    os << "\n";
  }
  return os.str();
}

inline std::string eigen_csv(const SolveReport& r) {
  std::ostringstream os;
  os << "stage,eigen_cuts\n";
  for (std::size_t t = 0; t < r.eigen_cuts_per_stage.size(); ++t)
    os << t + 1 << "," << r.eigen_cuts_per_stage[t] << "\n";
  return os.str();
}

struct StageResult {
  double objective = 0.0;  // model optimum
  double stage_cost = 0.0; // g_t at the solution
  Vec x;
  Vec theta;  // theta_k values, empty at the last stage
  Vec values;
};

// Maximizes L(pi) + pi^T xhat where L(pi) = min { stage objective - pi^T z }
// over the copied-state model. Returns the best (v, pi) with v = L(pi).
struct LagrangianResult {
  double L = -kInf;
  Vec pi;
  double value = -kInf;  // L + pi^T xhat
  int solves = 0;
};

inline LagrangianResult lagrangian_dual(const std::function<MipSolution(const Vec& pi)>& solve_relaxed,
                                        const Vec& xhat, double pi_box, const LagrangianOptions& opt) {
  const int I = static_cast<int>(xhat.size());
  LagrangianResult best;
  best.pi.assign(I, 0.0);
  // Each relaxed solve yields an affine minorant L(pi) <= f_i - pi^T z_i.
  struct Piece {
    double f;
    Vec z;
  };
  std::vector<Piece> pieces;
  Vec pi(I, 0.0);
  auto evaluate = [&](const Vec& p) {
    MipSolution s = solve_relaxed(p);
    ++best.solves;
    if (s.status != MipStatus::Optimal) throw SolverFailure("Lagrangian subproblem not optimal");
    return s;
  };
  auto record = [&](const Vec& p, double Lval, const Vec& z) {
    double g = Lval;
    for (int i = 0; i < I; ++i) g += p[i] * xhat[i];
    if (g > best.value + 1e-12 * std::max(1.0, std::abs(g))) {
      best.value = g;
      best.L = Lval;
      best.pi = p;
    }
    double f = Lval;
    for (int i = 0; i < I; ++i) f += p[i] * z[i];
    pieces.push_back({f, z});
  };

  // solve_relaxed appends the copied state z to the tail of values.
  std::function<std::pair<double, Vec>(const Vec&)> eval = [&](const Vec& p) {
    MipSolution s = evaluate(p);
    Vec z(s.values.end() - I, s.values.end());
    return std::make_pair(s.objective, z);
  };

  auto [L0, z0] = eval(pi);
  record(pi, L0, z0);
  if (opt.rule == StepRule::Subgradient) {
    const double a = std::max(1.0, std::abs(L0)) / std::max(1, I);
    const double b = 10.0;
    Vec z = z0;
    for (int m = 0; m < opt.max_iters; ++m) {
      bool zero = true;
      for (int i = 0; i < I; ++i) {
        const double gi = xhat[i] - z[i];
        if (gi != 0.0) zero = false;
        pi[i] = std::clamp(pi[i] + a / (b + m) * gi, -pi_box, pi_box);
      }
      if (zero) break;
      auto [Lm, zm] = eval(pi);
      record(pi, Lm, zm);
      z = zm;
    }
    return best;
  }

  // Kelley: maximize w + pi^T xhat, w <= f_i - pi^T z_i, pi in the box.
  for (int it = 0; it < opt.max_iters; ++it) {
    LinearModel lm;
    const int w = lm.add_var("w", -kInf, kInf, VarKind::Continuous, -1.0);
    for (int i = 0; i < I; ++i) lm.add_var("pi", -pi_box, pi_box, VarKind::Continuous, -xhat[i]);
    for (const auto& pc : pieces) {
      std::vector<Term> r{{w, 1.0}};
      for (int i = 0; i < I; ++i)
        if (pc.z[i] != 0.0) r.push_back({1 + i, pc.z[i]});
      lm.add_row(std::move(r), Relation::LessEq, pc.f);
    }
    const LpSolution s = solve_lp(lm);
    if (s.status != LpStatus::Optimal) throw SolverFailure("Kelley master not optimal");
    const double upper = -s.objective;
    if (upper - best.value <= opt.tol * std::max(1.0, std::abs(best.value))) break;
    for (int i = 0; i < I; ++i) pi[i] = s.x[1 + i];
    auto [Lm, zm] = eval(pi);
    record(pi, Lm, zm);
  }
  return best;
}

class Sddip {
 public:
  Sddip(const Instance& in, SddipConfig cfg) : in_(in), cfg_(std::move(cfg)), pool_(in) {
    validate(in_);
    if (cfg_.type == AmbiguityType::Type3 && cfg_.bound_mode == BoundMode::Exact)
      cfg_.bound_mode = BoundMode::Lower;
    if (cfg_.type != AmbiguityType::Type3) cfg_.bound_mode = BoundMode::Exact;
    eig_cache_.resize(in_.T);
    eig_counts_.assign(in_.T, 0);
    rng_.seed(cfg_.seed);
  }

  const CutPool& pool() const { return pool_; }
  CutPool& pool() { return pool_; }
  const SddipConfig& config() const { return cfg_; }

  const Risk* risk_for(int t, Risk& storage) const { return stage_risk(in_, t, cfg_.risk, storage); }

  StageBuild build(int t, const Vec& x_prev, const Vec& xi, bool copy_state, double M,
                   const Vec& history = {}) const {
    Risk rs;
    StageBuildOptions o;
    o.copy_state = copy_state;
    o.dual_bound = M;
    o.prob_bound_duals = cfg_.prob_bound_duals;
    o.literal_capacity = cfg_.literal_capacity;
    o.history = history;
    StageBuild b = build_stage(in_, cfg_.type, t, x_prev, xi, pool_, risk_for(t, rs), o);
    if (t == 0)
      for (int i = 0; i < static_cast<int>(x_fix_.size()); ++i)
        if (x_fix_[i] >= 0) b.model.lower[b.block.x_col(i)] = b.model.upper[b.block.x_col(i)] = x_fix_[i];
    return b;
  }

  // Greedy walk towards the lexicographically smallest first stage whose exact
  // policy value ties best_ub. Only used once the gap has closed.
  void polish_ties(double best_ub, Vec& best_x) {
    const double tie = 1e-9 * std::max(1.0, std::abs(best_ub)) + cfg_.tol * std::max(1.0, std::abs(best_ub));
    x_fix_.assign(in_.I, -1);
    std::string method;
    for (int i = 0; i < in_.I; ++i) {
      x_fix_[i] = 0;
      if (best_x[i] == 0.0) continue;
      try {
        const StageResult r = solve_stage(0, Vec(in_.I, 0.0), in_.support[0][0]);
        if (r.objective <= best_ub + tie && evaluate_policy(r, method).first <= best_ub + tie) {
          best_x = r.x;
          continue;
        }
      } catch (const SolverFailure&) {
      } catch (const EmptyAmbiguity&) {
      }
      x_fix_[i] = 1;
    }
    x_fix_.clear();
  }

  // Solves a compiled stage model under the bound mode. Extra objective terms
  // (Lagrangian -pi^T z) must already be in b.model.
  MipSolution solve_build(const StageBuild& b) {
    ++stage_solves_;
    if (b.psd.empty() || cfg_.bound_mode == BoundMode::Exact) return solve_milp(b.model, cfg_.mip);
    if (cfg_.bound_mode == BoundMode::Lower) {
      std::vector<Row> extra = seed_cuts(b.psd);
      for (const Row& r : eig_cache_[b.stage]) extra.push_back(r);
      OuterResult o = solve_misdp_outer(b.model, b.psd, kEigenCutTol, cfg_.mip, extra);
      for (Row& r : o.mip.cuts) eig_cache_[b.stage].push_back(r);
      eig_counts_[b.stage] += o.eigen_cuts;
      return o.mip;
    }
    int nz = 0, ny = 0;
    for (const auto& pb : b.psd) (pb.name == "Z" ? nz : ny) = pb.dim;
    DenseMatrix U = DenseMatrix::identity(nz), V = DenseMatrix::identity(ny);
    MipSolution s = solve_milp(add_dd_inner(b.model, b.psd, U, V), cfg_.mip);
    if (cfg_.dd_iterative && s.status == MipStatus::Optimal) {
      for (int round = 0; round < 3; ++round) {
        for (const auto& pb : b.psd) {
          const SymMatrix bv = block_value(pb, s.values);
          (pb.name == "Z" ? U : V) = dd_basis_from(bv);
        }
        MipSolution s2 = solve_milp(add_dd_inner(b.model, b.psd, U, V), cfg_.mip);
        ++stage_solves_;
        if (s2.status != MipStatus::Optimal || s2.objective >= s.objective - 1e-9 * std::max(1.0, std::abs(s.objective)))
          break;
        s = std::move(s2);
      }
    }
    s.values.resize(b.model.num_vars());
    return s;
  }

  // Stage solve with the dual-bound audit.
  StageResult solve_stage(int t, const Vec& x_prev, const Vec& xi, const Vec& history = {}) {
    const double M = cfg_.dual_bound > 0 ? cfg_.dual_bound : default_dual_bound(in_);
    StageBuild b = build(t, x_prev, xi, false, M, history);
    MipSolution s = solve_build(b);
    check_status(s, t, x_prev);
    if (b.has_future && !duals_at_bound(b, s.values).empty()) {
      StageBuild b10 = build(t, x_prev, xi, false, 10 * M, history);
      MipSolution s10 = solve_build(b10);
      check_status(s10, t, x_prev);
      if (std::abs(s10.objective - s.objective) > 1e-6 * std::max(1.0, std::abs(s.objective))) {
        Vec x(in_.I);
        for (int i = 0; i < in_.I; ++i) x[i] = s10.values[b10.block.x_col(i)] > 0.5 ? 1.0 : 0.0;
        if (!is_nonempty(in_, cfg_.type, in_.support[t + 1], x))
          throw EmptyAmbiguity("ambiguity set is empty at stage " + std::to_string(t + 2) +
                                   " for the chosen state; the model is unbounded",
                               t + 1);
        throw DualAtBound("stage " + std::to_string(t + 1) +
                          " dual variables sit at the bound; rerun with a larger dual_bound");
      }
    }
    StageResult r;
    r.objective = s.objective;
    r.values = s.values;
    r.x.resize(in_.I);
    for (int i = 0; i < in_.I; ++i) r.x[i] = s.values[b.block.x_col(i)] > 0.5 ? 1.0 : 0.0;
    for (int i = 0; i < in_.I; ++i)
      for (int j = 0; j < in_.J; ++j) {
        const int c = b.block.y_col(i, j);
        r.stage_cost += b.model.obj[c] * s.values[c];
      }
    if (b.has_future) {
      const Range th = b.layout.at("theta");
      r.theta.assign(s.values.begin() + th.begin, s.values.begin() + th.end());
    }
    return r;
  }

  // Lagrangian cut for Q_t(., xi_t^k) at trial state xhat.
  Cut make_cut(int t, int k, const Vec& xhat) {
    const double M = cfg_.dual_bound > 0 ? cfg_.dual_bound : default_dual_bound(in_);
    const StageBuild base = build(t, xhat, in_.support[t][k], true, M);
    const int I = in_.I;
    auto relaxed = [&](const Vec& pi) {
      StageBuild b = base;
      for (int i = 0; i < I; ++i) b.model.obj[b.block.prev_col(i)] -= pi[i];
      MipSolution s = solve_build(b);
      if (s.status == MipStatus::Optimal) {
        // Append z so the dual routine can read it from the tail.
        for (int i = 0; i < I; ++i) s.values.push_back(s.values[b.block.prev_col(i)] > 0.5 ? 1.0 : 0.0);
      } else if (s.status == MipStatus::Unbounded) {
        throw EmptyAmbiguity("stage " + std::to_string(t + 1) + " relaxation is unbounded", t);
      }
      return s;
    };
    const double box = 10.0 * (1.0 + std::abs(value_lower_bound(in_, t))) + 1e3;
    LagrangianResult lr = lagrangian_dual(relaxed, xhat, box, cfg_.lagrangian);
    lagrangian_solves_ += lr.solves;
    Cut c;
    c.v = lr.L;
    c.pi = lr.pi;
    c.origin = cfg_.bound_mode == BoundMode::Lower ? CutOrigin::RelaxedLagrangian : CutOrigin::Lagrangian;
    return c;
  }

  // Trial states per path: states[p][t] = x_t for t = 0..T-2.
  std::vector<std::vector<Vec>> forward_pass(int num_paths) {
    std::vector<std::vector<Vec>> states(num_paths);
    const StageResult first = solve_stage(0, Vec(in_.I, 0.0), in_.support[0][0]);
    last_lb_ = first.objective;
    last_first_ = first;
    for (int p = 0; p < num_paths; ++p) {
      states[p].push_back(first.x);
      Vec theta = first.theta;
      for (int t = 1; t + 1 < in_.T; ++t) {
        const Vec& xp = states[p].back();
        const int k = sample_worst_case(t, xp, theta);
        const StageResult r = solve_stage(t, xp, in_.support[t][k]);
        states[p].push_back(r.x);
        theta = r.theta;
      }
    }
    return states;
  }

  void backward_pass(const std::vector<std::vector<Vec>>& states) {
    for (int t = in_.T - 1; t >= 1; --t) {
      std::vector<Vec> seen;
      for (const auto& path : states) {
        const Vec& xhat = path[t - 1];
        if (std::find(seen.begin(), seen.end(), xhat) != seen.end()) continue;
        seen.push_back(xhat);
        for (int k = 0; k < in_.stage_K(t); ++k) {
          pool_.cuts[t][k].push_back(make_cut(t, k, xhat));
          ++cuts_;
        }
      }
    }
  }

  // Worst-case value of the current policy from stage t at x_prev over the full tree.
  double policy_tree_value(int t, const Vec& x_prev) {
    const Mat& pts = in_.support[t];
    Vec q(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const StageResult r = solve_stage(t, x_prev, pts[k]);
      q[k] = r.stage_cost + (t + 1 < in_.T ? policy_tree_value(t + 1, r.x) : 0.0);
    }
    Risk rs;
    return worst_case(in_, cfg_.type, pts, x_prev, q, risk_for(t - 1, rs), t).value;
  }

  // Upper bound of the policy whose first stage is `first`.
  std::pair<double, double> evaluate_policy(const StageResult& first, std::string& method) {
    double tree = 1.0;
    for (int t = 1; t < in_.T; ++t) tree *= in_.stage_K(t);
    if (in_.T == 1) {
      method = "exact";
      return {first.stage_cost, 0.0};
    }
    if (tree <= 1e5) {
      method = in_.T == 2 ? "exact" : "tree";
      return {first.stage_cost + policy_tree_value(1, first.x), 0.0};
    }
    method = "sampled";
    const int n = std::max(30, cfg_.num_paths * 10);
    std::vector<double> samples;
    for (int s = 0; s < n; ++s) {
      double cost = first.stage_cost;
      Vec x = first.x, theta = first.theta;
      for (int t = 1; t < in_.T; ++t) {
        const int k = sample_worst_case(t, x, theta);
        const StageResult r = solve_stage(t, x, in_.support[t][k]);
        cost += r.stage_cost;
        x = r.x;
        theta = r.theta;
      }
      samples.push_back(cost);
    }
    double mean = 0.0;
    for (double v : samples) mean += v / n;
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean) / std::max(1, n - 1);
    return {mean, std::sqrt(var / n)};
  }

  SolveReport run() {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    SolveReport rep;
    rep.type = cfg_.type;
    rep.bound_mode = cfg_.bound_mode;
    double best_ub = kInf, best_se = 0.0;
    Vec best_x;
    std::map<Vec, double> evaluated;
    try {
      for (int it = 1; it <= cfg_.max_iters; ++it) {
        const auto states = forward_pass(cfg_.num_paths);
        const StageResult first = last_first_;
        double ub;
        double se = 0.0;
        auto found = evaluated.find(first.x);
        if (found != evaluated.end() && in_.T == 2) {
          ub = found->second;
        } else {
          auto [u, s] = evaluate_policy(first, rep.ub_method);
          ub = u;
          se = s;
          if (in_.T == 2) evaluated[first.x] = ub;
        }
        const double tie = 1e-9 * std::max(1.0, std::abs(ub));
        if (ub < best_ub - tie || (std::abs(ub - best_ub) <= tie && first.x < best_x)) {
          best_ub = std::min(ub, best_ub);
          best_se = se;
          best_x = first.x;
        }
        // A valid LB is the stage-1 optimum before the new cuts.
        IterationRecord rec;
        rec.iter = it;
        rec.lb = last_lb_;
        if (!rep.iters.empty()) rec.lb = std::max(rec.lb, rep.iters.back().lb);
        rec.ub = best_ub;
        rec.gap = gap_of(rec.lb, best_ub);
        rec.seconds = elapsed();
        rep.iters.push_back(rec);
        rep.iterations = it;
        if (rep.ub_method != "sampled" && rec.gap <= cfg_.tol) {
          rep.status = "Optimal";
          break;
        }
        if (rep.iters.size() > 5) {
          const double prev = rep.iters[rep.iters.size() - 6].lb;
          if (std::abs(rec.lb - prev) <= cfg_.tol * std::max(1.0, std::abs(rec.lb))) {
            rep.status = "Stalled";
            break;
          }
        }
        backward_pass(states);
      }
    } catch (const EmptyAmbiguity& e) {
      rep.status = "Unbounded";
      rep.message = e.what();
      rep.empty_stage = e.stage();
    }
    if (rep.status == "Optimal") polish_ties(best_ub, best_x);
    rep.lb = rep.iters.empty() ? -kInf : rep.iters.back().lb;
    rep.ub_estimate = best_ub;
    rep.ub_stderr = best_se;
    rep.gap = gap_of(rep.lb, best_ub);
    rep.first_stage_x = best_x;
    rep.stage_solves = stage_solves_;
    rep.lagrangian_solves = lagrangian_solves_;
    rep.cuts = cuts_;
    if (cfg_.bound_mode == BoundMode::Lower) rep.eigen_cuts_per_stage = eig_counts_;
    rep.seconds = elapsed();
    return rep;
  }

  static double gap_of(double lb, double ub) {
    if (!std::isfinite(lb) || !std::isfinite(ub)) return kInf;
    return (ub - lb) / std::max(1.0, std::abs(ub));
  }

 private:
  void check_status(const MipSolution& s, int t, const Vec& x_prev) const {
    if (s.status == MipStatus::Optimal) return;
    if (s.status == MipStatus::Unbounded)
      throw EmptyAmbiguity("stage " + std::to_string(t + 1) + " model is unbounded", t + 1);
    (void)x_prev;
    throw SolverFailure(std::string("stage ") + std::to_string(t + 1) + " solve ended " + to_string(s.status));
  }

  // Draws k from the worst-case distribution at stage t given state x_prev.
  int sample_worst_case(int t, const Vec& x_prev, const Vec& theta) {
    const Mat& pts = in_.support[t];
    const int K = static_cast<int>(pts.size());
    if (K == 1) return 0;
    Risk rs;
    Vec q = theta;
    if (static_cast<int>(q.size()) != K) q.assign(K, 0.0);
    const WorstCase wc = worst_case(in_, cfg_.type, pts, x_prev, q, risk_for(t - 1, rs), t);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += std::max(0.0, wc.p[k]);
      if (u < acc) return k;
    }
    return K - 1;
  }

  const Instance& in_;
  SddipConfig cfg_;
  CutPool pool_;
  std::mt19937_64 rng_;
  std::vector<std::vector<Row>> eig_cache_;
  std::vector<long> eig_counts_;
  long stage_solves_ = 0, lagrangian_solves_ = 0, cuts_ = 0;
  double last_lb_ = -kInf;
  StageResult last_first_;
  std::vector<int> x_fix_;
};

inline SolveReport run(const Instance& in, const SddipConfig& cfg) {
  Sddip s(in, cfg);
  return s.run();
}

struct Type3Bounds {
  SolveReport lb;
  SolveReport ub;
  double gap = kInf;  // (ub - lb) / max(1, |ub|)
};

// Outer (eigen-cut) and inner (DD) runs on the same Type 3 instance.
inline Type3Bounds run_type3_bounds(const Instance& in, SddipConfig cfg) {
  cfg.type = AmbiguityType::Type3;
  Type3Bounds out;
  cfg.bound_mode = BoundMode::Lower;
  out.lb = run(in, cfg);
  cfg.bound_mode = BoundMode::Upper;
  out.ub = run(in, cfg);
  if (out.lb.status == "Unbounded" || out.ub.status == "Unbounded") return out;
  const double lb = out.lb.lb, ub = out.ub.lb;
  out.gap = Sddip::gap_of(lb, ub);
  if (lb > ub + 1e-6 * std::max(1.0, std::abs(ub)))
    throw SolverFailure("type 3 bounds crossed: lb " + std::to_string(lb) + " > ub " + std::to_string(ub));
  return out;
}

inline SddipConfig config_from_json(const nlohmann::json& j) {
  try {
    SddipConfig c;
    if (j.contains("type")) c.type = ambiguity_from_int(j.at("type").get<int>());
    c.max_iters = j.value("max_iters", c.max_iters);
    c.num_paths = j.value("num_paths", c.num_paths);
    c.tol = j.value("tol", c.tol);
    c.seed = j.value("seed", c.seed);
    c.risk = j.contains("risk_lambda") || j.value("risk", false);
    if (j.contains("bound_mode")) c.bound_mode = bound_mode_from(j.at("bound_mode").get<std::string>());
    c.dd_iterative = j.value("ub_mode", std::string("identity")) == "iterative";
    c.dual_bound = j.value("dual_bound", 0.0);
    if (j.contains("lagrangian")) {
      const auto& l = j.at("lagrangian");
      const std::string rule = l.value("rule", std::string("kelley"));
      if (rule != "kelley" && rule != "subgradient") throw ValidationError("lagrangian.rule must be kelley or subgradient");
      c.lagrangian.rule = rule == "kelley" ? StepRule::Kelley : StepRule::Subgradient;
      c.lagrangian.max_iters = l.value("max_iters", c.lagrangian.max_iters);
    }
    if (c.max_iters < 1 || c.num_paths < 1 || !(c.tol >= 0)) throw ValidationError("run config: bad limits");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("run config json: ") + e.what());
  }
}

// Applies risk_lambda/risk_alpha from a run config to every stage of the instance.
inline void apply_risk(Instance& in, const nlohmann::json& j) {
  if (j.contains("risk_lambda")) in.risk_lambda.assign(in.T, j.at("risk_lambda").get<double>());
  if (j.contains("risk_alpha")) in.risk_alpha.assign(in.T, j.at("risk_alpha").get<double>());
  validate(in);
}

}  // namespace ddro
