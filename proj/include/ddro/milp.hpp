#pragma once

// LP-based branch-and-bound. Best-bound node selection (FIFO among equal
// bounds) with plunging, most-fractional branching (lowest index on ties), children warm
// started from the parent basis. An optional separator can append global rows
// at every node LP; the eigen-cut loop of the MISDP outer approximation uses it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "ddro/errors.hpp"
#include "ddro/lp.hpp"
#include "ddro/model.hpp"

namespace ddro {

enum class MipStatus { Optimal, Infeasible, Unbounded, GapLimit };

inline const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::Optimal: return "Optimal";
    case MipStatus::Infeasible: return "Infeasible";
    case MipStatus::Unbounded: return "Unbounded";
    case MipStatus::GapLimit: return "GapLimit";
  }
  return "?";
}

struct MipOptions {
  long node_limit = 200000;
  double int_tol = 1e-6;
  double abs_gap = 1e-7;
  double rel_gap = 1e-9;
  // Separator rounds allowed at a fractional node before branching anyway.
  int sep_rounds_per_node = 1;
  // Total separator rounds over the whole search; exceeding it raises CutLoopLimit.
  long sep_round_limit = 1000;
  LpOptions lp;
};

struct MipSolution {
  MipStatus status = MipStatus::Infeasible;
  std::vector<double> values;
  double objective = kInf;
  double best_bound = -kInf;
  long nodes = 0;
  long lp_iterations = 0;
  long sep_rounds = 0;
  std::vector<Row> cuts;  // rows added by the separator
};

// Given a node LP solution, returns rows it violates (empty when none).
using Separator = std::function<std::vector<Row>(const std::vector<double>&)>;

namespace detail {

struct BoundChange {
  int var;
  double lower;
  double upper;
};

struct Node {
  double bound;
  long seq;
  std::vector<BoundChange> changes;
  std::shared_ptr<const Basis> basis;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

}  // namespace detail

inline MipSolution solve_milp(const LinearModel& input, const MipOptions& opt = {},
                              const Separator& separator = nullptr) {
  input.validate();
  LinearModel work = input;
  const LinearModel* model = &work;
  // Rows over integer columns with integer coefficients keep only integer
  // activities, so their right-hand sides can be rounded inward.
  for (Row& r : work.rows) {
    if (r.rel == Relation::Equal) continue;
    bool all_int = true;
    for (const Term& t : r.terms)
      if (!input.is_integer(t.col) || t.coef != std::round(t.coef)) {
        all_int = false;
        break;
      }
    if (!all_int) continue;
    if (r.rel == Relation::LessEq)
      r.rhs = std::floor(r.rhs + opt.int_tol);
    else
      r.rhs = std::ceil(r.rhs - opt.int_tol);
  }
  const int n = input.num_vars();
  MipSolution out;

  auto prune_tol = [&](double inc) { return std::max(opt.abs_gap, opt.rel_gap * std::abs(inc)); };

  std::priority_queue<detail::Node, std::vector<detail::Node>, detail::NodeOrder> open;
  open.push(detail::Node{-kInf, 0, {}, nullptr});
  long seq = 1;
  double incumbent = kInf;
  double pruned_bound = kInf;
  std::vector<double> lo(n), hi(n);
  bool any_unbounded = false;

  // After branching, the search plunges into one child before returning to
  // best-bound order, which finds incumbents early.
  std::optional<detail::Node> plunge;
  while (plunge || !open.empty()) {
    if (out.nodes >= opt.node_limit) {
      if (plunge) open.push(std::move(*plunge));
      break;
    }
    detail::Node node;
    if (plunge) {
      node = std::move(*plunge);
      plunge.reset();
    } else {
      node = open.top();
      open.pop();
    }
    if (node.bound >= incumbent - prune_tol(incumbent)) {
      pruned_bound = std::min(pruned_bound, node.bound);
      continue;
    }
    ++out.nodes;
    lo = model->lower;
    hi = model->upper;
    for (const auto& c : node.changes) {
      lo[c.var] = c.lower;
      hi[c.var] = c.upper;
    }

    LpSolution lp = solve_lp(*model, opt.lp, lo, hi, node.basis.get());
    out.lp_iterations += lp.iterations;
    int rounds_here = 0;
    int frac_var = -1;
    while (true) {
      if (lp.status != LpStatus::Optimal) break;
      if (lp.objective >= incumbent - prune_tol(incumbent)) break;
      frac_var = -1;
      double best_frac = -1.0;
      for (int j = 0; j < n; ++j) {
        if (!input.is_integer(j)) continue;
        const double v = lp.x[j];
        const double f = v - std::floor(v);
        const double dist = std::min(f, 1.0 - f);
        if (dist <= opt.int_tol) continue;
        if (dist > best_frac + 1e-12) {
          best_frac = dist;
          frac_var = j;
        }
      }
      if (!separator) break;
      if (frac_var >= 0 && rounds_here >= opt.sep_rounds_per_node) break;
      std::vector<Row> cuts = separator(lp.x);
      if (cuts.empty()) break;
      if (++out.sep_rounds > opt.sep_round_limit)
        throw CutLoopLimit("separator round limit exceeded");
      ++rounds_here;
      for (Row& r : cuts) {
        out.cuts.push_back(r);
        work.rows.push_back(std::move(r));
      }
      Basis warm = lp.basis;
      lp = solve_lp(*model, opt.lp, lo, hi, &warm);
      out.lp_iterations += lp.iterations;
    }

    if (lp.status == LpStatus::Infeasible) continue;
    if (lp.status == LpStatus::Unbounded) {
      any_unbounded = true;
      break;
    }
    if (lp.objective >= incumbent - prune_tol(incumbent)) {
      pruned_bound = std::min(pruned_bound, lp.objective);
      continue;
    }
    if (frac_var < 0) {
      std::vector<double> x = lp.x;
      for (int j = 0; j < n; ++j)
        if (input.is_integer(j)) x[j] = std::round(x[j]);
      incumbent = lp.objective;
      out.values = std::move(x);
      out.objective = input.objective_value(out.values);
      continue;
    }
    auto basis = std::make_shared<const Basis>(std::move(lp.basis));
    const double v = lp.x[frac_var];
    detail::Node down{lp.objective, seq++, node.changes, basis};
    down.changes.push_back({frac_var, lo[frac_var], std::floor(v)});
    detail::Node up{lp.objective, seq++, std::move(node.changes), basis};
    up.changes.push_back({frac_var, std::ceil(v), hi[frac_var]});
    if (v - std::floor(v) >= 0.5) {
      plunge = std::move(up);
      open.push(std::move(down));
    } else {
      plunge = std::move(down);
      open.push(std::move(up));
    }
  }

  if (any_unbounded) {
    out.status = MipStatus::Unbounded;
    out.best_bound = -kInf;
    return out;
  }
  if (!open.empty()) {
    double b = incumbent;
    auto rest = open;
    while (!rest.empty()) {
      b = std::min(b, rest.top().bound);
      rest.pop();
    }
    out.status = MipStatus::GapLimit;
    out.best_bound = std::min(b, pruned_bound);
    return out;
  }
  if (incumbent == kInf) {
    out.status = MipStatus::Infeasible;
    return out;
  }
  out.status = MipStatus::Optimal;
  out.objective = incumbent;
  out.best_bound = std::min(incumbent, pruned_bound);
  return out;
}

}  // namespace ddro
