#pragma once

// Command-line front end. Exit codes: 0 ok, 1 validation, 2 solver failure,
// 3 empty ambiguity set / unbounded model.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ddro/bench.hpp"
#include "ddro/lp_format.hpp"
#include "ddro/misdp.hpp"
#include "ddro/sddip.hpp"

namespace ddro {

enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitSolver = 2, kExitUnbounded = 3 };

namespace cli {

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// Writes to a sibling temp file and renames, so readers never see half a file.
inline void write_file(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path);
    f << body;
  }
  std::filesystem::rename(tmp, path);
}

inline void emit(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") std::cout << body;
  else write_file(path, body);
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline Vec parse_state(const std::string& s, int I) {
  if (s.empty()) return Vec(I, 0.0);
  if (static_cast<int>(s.size()) != I) throw ValidationError("--state needs one 0/1 digit per facility");
  Vec x(I);
  for (int i = 0; i < I; ++i) {
    if (s[i] != '0' && s[i] != '1') throw ValidationError("--state digits must be 0 or 1");
    x[i] = s[i] - '0';
  }
  return x;
}

inline nlohmann::ordered_json enum_json(const EnumResult& r, AmbiguityType type, bool risk) {
  nlohmann::ordered_json j;
  j["status"] = r.status;
  j["type"] = static_cast<int>(type);
  j["risk"] = risk;
  j["objective"] = detail::num(r.objective);
  j["best_x"] = r.best_x;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : r.table) {
    nlohmann::ordered_json cj;
    cj["x"] = c.x;
    cj["stage_cost"] = detail::num(c.stage_cost);
    cj["value"] = c.empty ? nlohmann::ordered_json("unbounded") : detail::num(c.value);
    rows.push_back(cj);
  }
  j["candidates"] = rows;
  return j;
}

inline double json_number(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  throw ValidationError(std::string("field ") + key + " is not a number");
}

struct Args {
  // gen
  GenOptions gen;
  std::string distribution = "Normal", cost = "manhattan";
  // shared
  std::string instance, config, out, csv, eigen_csv, bound = "", ub_mode = "", spec, state;
  int type = 0, max_iters = 0, stage = 1, scenario = 0;
  std::uint64_t seed = 0;
  bool seed_set = false, risk = false, didr = false, timing = false;
  // verify
  std::string lb_file, ub_file, exact_file;
};

inline int run_gen(Args& a) {
  if (a.distribution != "Normal" && a.distribution != "LogNormal")
    throw ValidationError("--distribution must be Normal or LogNormal");
  a.gen.distribution = a.distribution == "Normal" ? Distribution::Normal : Distribution::LogNormal;
  if (a.cost != "manhattan" && a.cost != "flat") throw ValidationError("--cost must be manhattan or flat");
  a.gen.cost_mode = a.cost == "flat" ? CostMode::Flat : CostMode::ManhattanOver4;
  if (a.seed_set) a.gen.seed = a.seed;
  emit(a.out, dump(to_json(generate_instance(a.gen))));
  return kExitOk;
}

inline SddipConfig solve_config(const Args& a, Instance& in) {
  SddipConfig cfg;
  if (!a.config.empty()) {
    const nlohmann::json j = read_json(a.config);
    cfg = config_from_json(j);
    apply_risk(in, j);
  }
  if (a.type) cfg.type = ambiguity_from_int(a.type);
  if (!a.bound.empty()) cfg.bound_mode = bound_mode_from(a.bound);
  if (!a.ub_mode.empty()) {
    if (a.ub_mode != "identity" && a.ub_mode != "iterative") throw ValidationError("--ub-mode must be identity or iterative");
    cfg.dd_iterative = a.ub_mode == "iterative";
  }
  if (a.max_iters) cfg.max_iters = a.max_iters;
  if (a.seed_set) cfg.seed = a.seed;
  if (a.risk) cfg.risk = true;
  return cfg;
}

inline int run_solve(const Args& a) {
  Instance in = instance_from_json(read_json(a.instance));
  const SddipConfig cfg = solve_config(a, in);
  if (a.didr) in = make_didr(in);
  const SolveReport r = run(in, cfg);
  emit(a.out, dump(to_json(r, a.timing)));
  if (!a.csv.empty()) write_file(a.csv, to_csv(r, a.timing));
  if (!a.eigen_csv.empty()) write_file(a.eigen_csv, eigen_csv(r));
  if (r.status == "Unbounded") {
    std::cerr << "unbounded: " << r.message << "\n";
    return kExitUnbounded;
  }
  return kExitOk;
}

inline int run_enum(const Args& a) {
  Instance in = instance_from_json(read_json(a.instance));
  SddipConfig cfg = solve_config(a, in);
  if (a.didr) in = make_didr(in);
  const EnumResult r = enumerate_two_stage(in, cfg.type, cfg.risk);
  emit(a.out, dump(enum_json(r, cfg.type, cfg.risk)));
  if (r.status == "Unbounded") {
    std::cerr << "unbounded: ambiguity set empty for some candidate\n";
    return kExitUnbounded;
  }
  return kExitOk;
}

inline int run_bench(const Args& a) {
  const ExperimentSpec spec = experiment_from_json(read_json(a.spec));
  if (a.out.empty()) throw ValidationError("bench needs --out DIR");
  std::filesystem::create_directories(a.out);
  const auto cells = run_experiment(spec);
  const std::string dir = a.out + "/";
  write_file(dir + "cells.csv", cells_csv(cells, a.timing));
  write_file(dir + "plot.csv", plot_csv(spec, cells));
  nlohmann::ordered_json idx;
  idx["table"] = spec.table;
  idx["cells"] = cells.size();
  long failed = 0, unbounded = 0;
  for (const auto& c : cells) {
    failed += c.status.rfind("Failed", 0) == 0;
    unbounded += c.status == "Unbounded";
  }
  idx["failed_cells"] = failed;
  idx["unbounded_cells"] = unbounded;
  idx["files"] = {"cells.csv", "plot.csv"};
  write_file(dir + "index.json", dump(idx));
  return kExitOk;
}

inline int run_export(const Args& a) {
  Instance in = instance_from_json(read_json(a.instance));
  const SddipConfig cfg = solve_config(a, in);
  const int t = a.stage - 1;
  if (t < 0 || t >= in.T) throw ValidationError("--stage must be in 1..T");
  if (a.scenario < 0 || a.scenario >= static_cast<int>(in.support[t].size()))
    throw ValidationError("--scenario out of range");
  const Vec x_prev = parse_state(a.state, in.I);
  const CutPool pool(in);
  const Risk rk{in.risk_lambda[std::min(t + 1, in.T - 1)], in.risk_alpha[std::min(t + 1, in.T - 1)]};
  StageBuild b = build_stage(in, cfg.type, t, x_prev, in.support[t][a.scenario], pool, cfg.risk ? &rk : nullptr);
  LinearModel m = b.model;
  std::string title = "stage " + std::to_string(a.stage) + " type " + std::to_string(static_cast<int>(cfg.type));
  if (!b.psd.empty()) {
    if (cfg.bound_mode == BoundMode::Upper) {
      m = add_dd_inner(m, b.psd);
      title += ", PSD blocks as DD(I) rows";
    } else {
      for (Row& r : seed_cuts(b.psd)) m.rows.push_back(std::move(r));
      title += ", PSD blocks relaxed to seed eigen-cuts";
    }
  }
  std::ostringstream os;
  write_lp(os, m, title);
  emit(a.out, os.str());
  return kExitOk;
}

inline int run_verify(const Args& a) {
  const nlohmann::json lo = read_json(a.lb_file), hi = read_json(a.ub_file);
  for (const auto* j : {&lo, &hi})
    if (j->value("status", std::string()) == "Unbounded") {
      std::cerr << "verify: a report is unbounded\n";
      return kExitUnbounded;
    }
  const double lb = json_number(lo, "lb"), ub = json_number(hi, "lb");
  const double slack = 1e-6 * std::max(1.0, std::abs(ub));
  bool ok = lb <= ub + slack;
  std::cout << "lb " << detail::fmt(lb) << " ub " << detail::fmt(ub) << " gap " << detail::fmt(Sddip::gap_of(lb, ub))
            << "\n";
  if (!a.exact_file.empty()) {
    const double ex = json_number(read_json(a.exact_file), "objective");
    const double s = 1e-6 * std::max(1.0, std::abs(ex));
    const bool sand = lb <= ex + s && ex <= ub + s;
    std::cout << "exact " << detail::fmt(ex) << (sand ? " inside" : " OUTSIDE") << " [lb, ub]\n";
    ok = ok && sand;
  }
  for (const auto* j : {&lo, &hi}) {
    if (!j->contains("lb_per_iter")) continue;
    double prev = -kInf;
    for (const auto& v : j->at("lb_per_iter")) {
      const double x = v.is_number() ? v.get<double>() : (v.get<std::string>() == "inf" ? kInf : -kInf);
      if (x < prev - 1e-9 * std::max(1.0, std::abs(prev))) ok = false;
      prev = x;
    }
  }
  std::cout << (ok ? "verify: ok" : "verify: FAILED") << "\n";
  return ok ? kExitOk : kExitSolver;
}

}  // namespace cli

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"ddro: multistage decision-dependent DRO solver kit"};
  app.require_subcommand(1);
  cli::Args a;

  auto add_solve_flags = [&](CLI::App* s, bool with_out = true) {
    s->add_option("--instance", a.instance, "instance JSON")->required();
    s->add_option("--config", a.config, "run config JSON");
    s->add_option("--type", a.type, "ambiguity type 1, 2 or 3")->check(CLI::Range(1, 3));
    s->add_option("--bound", a.bound, "exact, lb or ub (Type 3)");
    s->add_option("--ub-mode", a.ub_mode, "identity or iterative DD basis");
    s->add_option("--max-iters", a.max_iters);
    s->add_option("--seed", a.seed)->each([&](const std::string&) { a.seed_set = true; });
    s->add_flag("--risk", a.risk, "use the CVaR blend from the instance");
    s->add_flag("--didr", a.didr, "zero every decision-impact coefficient first");
    if (with_out) s->add_option("--out", a.out, "output file (stdout when omitted)");
  };

  auto* gen = app.add_subcommand("gen", "generate an instance");
  gen->add_option("--seed", a.seed)->each([&](const std::string&) { a.seed_set = true; });
  gen->add_option("--T", a.gen.T);
  gen->add_option("--I", a.gen.I);
  gen->add_option("--J", a.gen.J);
  gen->add_option("--K", a.gen.K);
  gen->add_option("--rho-bar", a.gen.rho_bar);
  gen->add_option("--N", a.gen.N);
  gen->add_option("--distribution", a.distribution);
  gen->add_option("--cost", a.cost, "manhattan or flat");
  gen->add_option("--gamma", a.gen.gamma);
  gen->add_option("--eta", a.gen.eta_cov);
  gen->add_option("--eps-mu", a.gen.eps_mu);
  gen->add_option("--risk-lambda", a.gen.risk_lambda);
  gen->add_option("--risk-alpha", a.gen.risk_alpha);
  gen->add_option("--out", a.out);

  auto* solve = app.add_subcommand("solve", "run SDDiP");
  add_solve_flags(solve);
  solve->add_option("--csv", a.csv, "per-iteration CSV");
  solve->add_option("--eigen-csv", a.eigen_csv, "per-stage eigen-cut counts");
  solve->add_flag("--timing", a.timing, "include wall-clock fields");

  auto* en = app.add_subcommand("enum", "two-stage enumeration oracle");
  add_solve_flags(en);

  auto* bench = app.add_subcommand("bench", "run an experiment grid");
  bench->add_option("--spec", a.spec)->required();
  bench->add_option("--out", a.out, "artifact directory")->required();
  bench->add_flag("--timing", a.timing);

  auto* ex = app.add_subcommand("export-lp", "dump a stage model in LP format");
  add_solve_flags(ex);
  ex->add_option("--stage", a.stage, "stage 1..T");
  ex->add_option("--state", a.state, "previous state as 0/1 digits");
  ex->add_option("--scenario", a.scenario, "support index at the stage");

  auto* ver = app.add_subcommand("verify", "check lb <= [exact <=] ub across reports");
  ver->add_option("--lb", a.lb_file)->required();
  ver->add_option("--ub", a.ub_file)->required();
  ver->add_option("--exact", a.exact_file, "enum report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) return cli::run_gen(a);
    if (*solve) return cli::run_solve(a);
    if (*en) return cli::run_enum(a);
    if (*bench) return cli::run_bench(a);
    if (*ex) return cli::run_export(a);
    if (*ver) return cli::run_verify(a);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EmptyAmbiguity& e) {
    std::cerr << "empty ambiguity set: " << e.what() << "\n";
    return kExitUnbounded;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace ddro
