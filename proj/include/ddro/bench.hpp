#pragma once

// Experiment front door: two-stage enumeration oracle, pattern suites with
// their decision-independent baselines, and grid runners emitting CSV.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddro/ambiguity.hpp"
#include "ddro/instance.hpp"
#include "ddro/milp.hpp"
#include "ddro/sddip.hpp"
#include "ddro/stage_block.hpp"

namespace ddro {

struct Candidate {
  Vec x;
  double stage_cost = 0.0;
  double value = kInf;
  bool empty = false;
  Vec q;
};

struct EnumResult {
  std::string status = "Optimal";  // or "Unbounded"
  double objective = kInf;
  Vec best_x;
  std::vector<Candidate> table;
};

inline double stage_block_value(const Instance& in, int t, const Vec& x_prev, const Vec& xi,
                                const Vec* fix_x = nullptr) {
  StageBlock b = build_stage_block(in, t, x_prev, xi);
  if (fix_x)
    for (int i = 0; i < in.I; ++i) b.model.lower[b.layout.x_col(i)] = b.model.upper[b.layout.x_col(i)] = (*fix_x)[i];
  const MipSolution s = solve_milp(b.model);
  if (s.status == MipStatus::Infeasible) return kInf;
  if (s.status != MipStatus::Optimal) throw SolverFailure("stage MILP not optimal in enumeration");
  return s.objective;
}

// Exact two-stage value for each budget-feasible first-stage x.
inline EnumResult enumerate_two_stage(const Instance& in, AmbiguityType type, bool risk = false) {
  validate(in);
  if (in.T != 2) throw ValidationError("enumeration needs T = 2");
  if (in.I > 12) throw ValidationError("enumeration needs I <= 12");
  EnumResult out;
  const Vec zero(in.I, 0.0);
  for (int mask = 0; mask < (1 << in.I); ++mask) {
    Candidate c;
    c.x.resize(in.I);
    double spend = 0.0;
    for (int i = 0; i < in.I; ++i) {
      c.x[i] = (mask >> i) & 1;
      spend += in.f[0][i] * c.x[i];
    }
    if (spend > in.N + 1e-9) continue;
    c.stage_cost = stage_block_value(in, 0, zero, in.support[0][0], &c.x);
    for (const auto& xi : in.support[1]) c.q.push_back(stage_block_value(in, 1, c.x, xi));
    Risk r{in.risk_lambda[1], in.risk_alpha[1]};
    try {
      c.value = c.stage_cost + worst_case(in, type, in.support[1], c.x, c.q, risk ? &r : nullptr, 1).value;
    } catch (const EmptyAmbiguity&) {
      c.empty = true;
      c.value = -kInf;
      out.status = "Unbounded";
    }
    out.table.push_back(c);
  }
  // Lexicographically smallest x among ties.
  std::vector<const Candidate*> order;
  for (const auto& c : out.table) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const Candidate* a, const Candidate* b) { return a->x < b->x; });
  for (const Candidate* c : order) {
    const double tie = 1e-9 * std::max(1.0, std::abs(c->value));
    if (out.best_x.empty() || c->value < out.objective - tie) {
      out.objective = c->value;
      out.best_x = c->x;
    }
  }
  if (out.status == "Unbounded") out.objective = -kInf;
  return out;
}

// Decision-independent counterpart: every impact coefficient set to zero.
inline Instance make_didr(Instance in) {
  for (auto& row : in.lambda_mu) std::fill(row.begin(), row.end(), 0.0);
  for (auto& row : in.lambda_S) std::fill(row.begin(), row.end(), 0.0);
  std::fill(in.lambda_cov.begin(), in.lambda_cov.end(), 0.0);
  return in;
}

// Pattern suites on flat costs (c = 10, f = 100, N = 100, R = 100).
struct PatternCase {
  std::string name;
  AmbiguityType type;
  Instance inst;
  double paper_value;  // reported optimum, orientation only
  double paper_didr;   // reported decision-independent value, NaN when absent
};

namespace detail {

inline Instance pattern_base(int I, int J, int K) {
  Instance in;
  in.T = 2;
  in.I = I;
  in.J = J;
  in.K = K;
  for (int i = 0; i < I; ++i) in.facility_xy.push_back({10 * i, 0});
  for (int j = 0; j < J; ++j) in.customer_xy.push_back({0, 10 * j});
  in.c.assign(I, Vec(J, 10.0));
  in.f.assign(2, Vec(I, 100.0));
  in.h.assign(2, Vec(I, 1000.0));
  in.N = 100.0;
  in.R.assign(J, 100.0);
  in.mu_bar.assign(J, 10.0);
  in.sigma_bar.assign(J, 0.1);
  in.rho_bar = 0.01;
  in.Sigma_bar = SymMatrix::identity(J);
  in.lambda_mu.assign(J, Vec(I, 0.0));
  in.lambda_S.assign(J, Vec(I, 0.0));
  in.lambda_cov.assign(I, 0.0);
  in.eps_mu.assign(J, 5.0);
  in.eps_S_lo.assign(J, 0.5);
  in.eps_S_hi.assign(J, 1.5);
  in.risk_lambda.assign(2, 0.0);
  in.risk_alpha.assign(2, 0.95);
  in.support.assign(2, Mat{});
  in.support[0] = {in.mu_bar};
  return in;
}

// Budget-feasible first-stage candidates (at most one facility under N = f).
inline std::vector<Vec> budget_candidates(const Instance& in) {
  std::vector<Vec> out;
  for (int mask = 0; mask < (1 << in.I); ++mask) {
    Vec x(in.I);
    double spend = 0;
    for (int i = 0; i < in.I; ++i) spend += in.f[0][i] * (x[i] = (mask >> i) & 1);
    if (spend <= in.N + 1e-9) out.push_back(x);
  }
  return out;
}

inline bool nonempty_everywhere(const Instance& in, AmbiguityType type) {
  for (const auto& x : budget_candidates(in))
    if (!is_nonempty(in, type, in.support[1], x)) return false;
  return true;
}

}  // namespace detail

// Seeded two-stage instance (I = 3, J alternating 1/2, K in 6..12) whose
// ambiguity set is nonempty at every budget-feasible first stage. Types 2 and 3
// anchor the nominal moments at the uniform distribution on the support and
// damp the impacts to a tenth; draws with an empty set are rejected.
inline Instance equivalence_instance(AmbiguityType type, std::uint64_t seed) {
  for (int attempt = 1; attempt <= 1000; ++attempt) {
    GenOptions o;
    o.seed = seed * 1000 + attempt;
    o.T = 2;
    o.I = 3;
    o.J = 1 + static_cast<int>(seed % 2);
    o.K = 6 + static_cast<int>(seed % 7);
    Instance in = generate_instance(o);
    if (type != AmbiguityType::Type1) {
      Vec m(in.J, 0.0);
      for (const auto& p : in.support[1])
        for (int j = 0; j < in.J; ++j) m[j] += p[j] / in.K;
      in.mu_bar = m;
      in.support[0] = {m};
      SymMatrix S(in.J);
      for (int a = 0; a < in.J; ++a)
        for (int b = a; b < in.J; ++b) {
          double v = 0.0;
          for (const auto& p : in.support[1]) v += (p[a] - m[a]) * (p[b] - m[b]) / in.K;
          S.set(a, b, v);
        }
      in.Sigma_bar = S;
      for (auto& row : in.lambda_mu)
        for (double& v : row) v *= 0.1;
      for (double& v : in.lambda_cov) v *= 0.1;
    }
    if (detail::nonempty_everywhere(in, type)) return in;
  }
  throw ValidationError("no nonempty instance found for seed " + std::to_string(seed));
}

inline std::vector<PatternCase> pattern_suite(int type, std::uint64_t seed = 1, int K = 10) {
  std::vector<PatternCase> out;
  const double nan = std::nan("");
  if (type == 1) {
    struct P { const char* name; Vec lmu, lS; double paper; double didr; };
    const P ps[] = {{"1-1", {0.9, 0.5, 0.1}, {0.5, 0.5, 0.5}, -2160, -1463},
                    {"1-2", {0.5, 0.5, 0.5}, {0.9, 0.5, 0.1}, -1800, -1463},
                    {"1-3", {0.1, 0.1, 0.1}, {0.9, 0.5, 0.1}, nan, -1463},
                    {"1-4", {0.5, 0.9, 0.1}, {0.9, 0.5, 0.1}, nan, -1463}};
    for (const P& p : ps) {
      Instance in = detail::pattern_base(3, 1, K);
      in.lambda_mu = {p.lmu};
      in.lambda_S = {p.lS};
      // Evenly spaced demand levels on [0, 30].
      for (int k = 0; k < K; ++k) in.support[1].push_back({30.0 * k / (K - 1)});
      out.push_back({p.name, AmbiguityType::Type1, in, p.paper, p.didr});
    }
    return out;
  }
  if (type == 2) {
    struct P { const char* name; Vec lam, cov; double paper; double didr; };
    const P ps[] = {{"2-1", {0.1, 0.2, 0.3}, {0.5, 0.5, 0.5}, -4140, -3600},
                    {"2-2", {0.1, 0.2, 0.3}, {0.9, 0.5, 0.1}, nan, -3600},
                    {"2-3", {0.3, 0.3, 0.3}, {0.9, 0.5, 0.1}, nan, -3600}};
    Sampler s(seed);
    for (const P& p : ps) {
      Instance in = detail::pattern_base(3, 2, K);
      in.mu_bar = {10.0, 10.0};
      in.support[0] = {in.mu_bar};
      in.Sigma_bar = SymMatrix{{10.0, 10.0}, {10.0, 10.0}};
      in.sigma_bar = {std::sqrt(10.0), std::sqrt(10.0)};
      in.lambda_mu = {p.lam, p.lam};
      in.lambda_cov = p.cov;
      // Diagonal support points (a, a): the nominal covariance has rank one.
      for (int attempt = 0; attempt < 100000; ++attempt) {
        in.support[1].clear();
        for (int k = 0; k < K; ++k) {
          const double a = s.uniform(0.0, 40.0);
          in.support[1].push_back({a, a});
        }
        if (detail::nonempty_everywhere(in, AmbiguityType::Type2) &&
            detail::nonempty_everywhere(make_didr(in), AmbiguityType::Type2))
          break;
      }
      out.push_back({p.name, AmbiguityType::Type2, in, p.paper, p.didr});
    }
    return out;
  }
  if (type == 3) {
    struct P { const char* name; Mat lmu; Vec cov; double paper; };
    const P ps[] = {{"3-1", {{0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}}, {0.5, 0.5, 0.5}, -3856.2},
                    {"3-2", {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}, {0.9, 0.5, 0.1}, nan},
                    {"3-3", {{0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}}, {0.1, 0.5, 0.9}, nan},
                    {"3-4", {{0.1, 0.5, 0.9}, {0.9, 0.5, 0.1}}, {0.5, 0.5, 0.5}, nan}};
    Sampler s(seed);
    for (const P& p : ps) {
      Instance in = detail::pattern_base(3, 2, K);
      in.mu_bar = {10.0, 10.0};
      in.support[0] = {in.mu_bar};
      in.Sigma_bar = SymMatrix{{0.1, 0.2}, {0.2, 0.9}};
      in.sigma_bar = {std::sqrt(0.1), std::sqrt(0.9)};
      in.lambda_mu = p.lmu;
      in.lambda_cov = p.cov;
      in.gamma = 1000.0;
      in.eta_cov = 500.0;
      const DenseMatrix L = cholesky(in.Sigma_bar.scaled(2.0));
      for (int attempt = 0; attempt < 100000; ++attempt) {
        in.support[1].clear();
        for (int k = 0; k < K; ++k) {
          const double u = s.uniform();
          const double n0 = s.normal(), n1 = s.normal();
          Vec pt(2);
          for (int j = 0; j < 2; ++j) pt[j] = in.mu_bar[j] * (1 + u) + L(j, 0) * n0 + L(j, 1) * n1;
          for (double& v : pt) v = std::max(0.0, v);
          in.support[1].push_back(pt);
        }
        if (detail::nonempty_everywhere(in, AmbiguityType::Type3) &&
            detail::nonempty_everywhere(make_didr(in), AmbiguityType::Type3))
          break;
      }
      out.push_back({p.name, AmbiguityType::Type3, in, p.paper, nan});
    }
    return out;
  }
  throw ValidationError("pattern suite type must be 1, 2 or 3");
}

// Grid experiments mirroring the paper's sweeps.
struct ExperimentSpec {
  std::string table;
  std::vector<int> K{10};
  std::vector<double> rho_bar{0.8};
  std::vector<double> N{100};
  std::vector<std::uint64_t> seeds{1};
  Distribution distribution = Distribution::Normal;
  int T = 2, I = 3, J = 1;
  int type = 1;
  int max_iters = 50;
  double tol = 1e-6;
  double eps_mu = 25.0, eps_S_lo = 0.1, eps_S_hi = 1.9;
};

inline ExperimentSpec experiment_from_json(const nlohmann::json& j) {
  try {
    ExperimentSpec s;
    s.table = j.at("table").get<std::string>();
    static const char* tables[] = {"patterns_type1", "patterns_type2", "patterns_type3", "support_sweep",
                                   "variance_sweep", "budget_sweep", "timing_sweep"};
    if (std::find_if(std::begin(tables), std::end(tables), [&](const char* t) { return s.table == t; }) ==
        std::end(tables))
      throw ValidationError("unknown table " + s.table);
    if (j.contains("K")) s.K = j.at("K").get<std::vector<int>>();
    if (j.contains("rho_bar")) s.rho_bar = j.at("rho_bar").get<std::vector<double>>();
    if (j.contains("N")) s.N = j.at("N").get<std::vector<double>>();
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const std::string dist = j.value("distribution", std::string("Normal"));
    if (dist != "Normal" && dist != "LogNormal") throw ValidationError("distribution must be Normal or LogNormal");
    s.distribution = dist == "Normal" ? Distribution::Normal : Distribution::LogNormal;
    s.T = j.value("T", s.T);
    s.I = j.value("I", s.I);
    s.J = j.value("J", s.J);
    s.type = j.value("type", s.type);
    s.max_iters = j.value("max_iters", s.max_iters);
    s.tol = j.value("tol", s.tol);
    s.eps_mu = j.value("eps_mu", s.eps_mu);
    s.eps_S_lo = j.value("eps_S_lo", s.eps_S_lo);
    s.eps_S_hi = j.value("eps_S_hi", s.eps_S_hi);
    if (s.K.empty() || s.rho_bar.empty() || s.N.empty() || s.seeds.empty())
      throw ValidationError("experiment grids must be nonempty");
    if (s.type < 1 || s.type > 3) throw ValidationError("type must be 1, 2 or 3");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment json: ") + e.what());
  }
}

struct CellResult {
  std::string label;
  std::string model;  // DDDR or DIDR
  double x_value = 0.0;
  std::string status;
  double lb = -kInf, ub = kInf, gap = kInf;
  Vec x1;
  double seconds = 0.0;
};

namespace detail {

inline CellResult run_cell(const Instance& in, AmbiguityType type, const std::string& label,
                           const std::string& model, double xval, int max_iters, double tol) {
  CellResult c;
  c.label = label;
  c.model = model;
  c.x_value = xval;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    SddipConfig cfg;
    cfg.type = type;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    const SolveReport r = run(in, cfg);
    c.status = r.status;
    c.lb = r.lb;
    c.ub = r.ub_estimate;
    c.gap = r.gap;
    c.x1 = r.first_stage_x;
  } catch (const EmptyAmbiguity&) {
    c.status = "Unbounded";
  } catch (const Error& e) {
    c.status = std::string("Failed: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

inline std::string fmt(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::vector<CellResult> run_experiment(const ExperimentSpec& spec) {
  std::vector<CellResult> cells;
  if (spec.table.rfind("patterns_type", 0) == 0) {
    const int type = spec.table.back() - '0';
    for (auto seed : spec.seeds)
      for (const auto& pc : pattern_suite(type, seed, spec.K.front())) {
        cells.push_back(detail::run_cell(pc.inst, pc.type, pc.name, "DDDR", 0, spec.max_iters, spec.tol));
        cells.push_back(detail::run_cell(make_didr(pc.inst), pc.type, pc.name, "DIDR", 0, spec.max_iters, spec.tol));
      }
    return cells;
  }
  for (auto seed : spec.seeds)
    for (int K : spec.K)
      for (double rho : spec.rho_bar)
        for (double N : spec.N) {
          GenOptions o;
          o.seed = seed;
          o.T = spec.T;
          o.I = spec.I;
          o.J = spec.J;
          o.K = K;
          o.rho_bar = rho;
          o.N = N;
          o.distribution = spec.distribution;
          o.eps_mu = spec.eps_mu;
          o.eps_S_lo = spec.eps_S_lo;
          o.eps_S_hi = spec.eps_S_hi;
          double xv = K;
          if (spec.table == "variance_sweep") xv = rho;
          if (spec.table == "budget_sweep") xv = N;
          if (spec.table == "timing_sweep") xv = spec.I;
          const Instance in = generate_instance(o);
          const std::string label = "seed" + std::to_string(seed);
          const auto type = ambiguity_from_int(spec.type);
          cells.push_back(detail::run_cell(in, type, label, "DDDR", xv, spec.max_iters, spec.tol));
          cells.push_back(detail::run_cell(make_didr(in), type, label, "DIDR", xv, spec.max_iters, spec.tol));
        }
  return cells;
}

inline std::string cells_csv(const std::vector<CellResult>& cells, bool timing = true) {
  std::ostringstream os;
  os << "label,model,x,status,lb,ub,gap,x1" << (timing ? ",seconds" : "") << "\n";
  for (const auto& c : cells) {
    std::string xs;
    for (double v : c.x1) xs += std::to_string(static_cast<int>(v));
    os << c.label << "," << c.model << "," << detail::fmt(c.x_value) << "," << c.status << ","
       << detail::fmt(c.lb) << "," << detail::fmt(c.ub) << "," << detail::fmt(c.gap) << "," << xs;
    if (timing) os << "," << detail::fmt(c.seconds);
    os << "\n";
  }
  return os.str();
}

// Plot series: objective by x for each model; timing series for timing sweeps.
inline std::string plot_csv(const ExperimentSpec& spec, const std::vector<CellResult>& cells) {
  std::ostringstream os;
  os << "series,x,y\n";
  for (const auto& c : cells) {
    if (c.status == "Unbounded" || c.status.rfind("Failed", 0) == 0) continue;
    if (spec.table == "timing_sweep")
      os << c.model << "_seconds," << detail::fmt(c.x_value) << "," << detail::fmt(c.seconds) << "\n";
    else
      os << c.model << "_" << c.label << "," << detail::fmt(c.x_value) << "," << detail::fmt(c.lb) << "\n";
  }
  return os.str();
}

}  // namespace ddro
