#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qpdec/admm.hpp"
#include "qpdec/hvac.hpp"
#include "qpdec/oracle.hpp"
#include "qpdec/outer_loop.hpp"

namespace {

using nlohmann::json;
using namespace qpdec;

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("BENCH_LOG");
    if (!env) return LogLevel::quiet;
    const std::string value(env);
    if (value == "debug") return LogLevel::debug;
    if (value == "info") return LogLevel::info;
    return LogLevel::quiet;
  }();
  return level;
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::info) std::cerr << "[bench] " << message << "\n";
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::debug) std::cerr << "[bench] " << message << "\n";
}

std::string csv_cell(const std::optional<double>& value) {
  if (!value) return "";
  std::ostringstream os;
  os.precision(17);
  os << *value;
  return os.str();
}

void write_csv(const std::string& path, const std::vector<IterationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << "iter,cost,eq_infeas,ineq_infeas,rel_gap,alpha,step_norm,comm_floats,wall_ms\n";
  out.precision(17);
  for (const auto& r : records) {
    out << r.iter << ',' << r.cost << ',' << r.eq_infeas << ',' << r.ineq_infeas << ','
        << csv_cell(r.rel_gap) << ',' << r.alpha << ',' << r.step_norm << ',' << r.comm_floats
        << ',' << r.wall_ms << "\n";
  }
}

json timing_json(const TimingInfo& timing) {
  const TimingBreakdown b = timing_breakdown(timing);
  json out;
  out["sensitivity_eval_pct"] = b.sensitivity_pct;
  out["local_solves_pct"] = b.local_solve_pct;
  out["coordination_pct"] = b.coordination_pct;
  out["line_search_pct"] = b.line_search_pct;
  out["other_pct"] = b.other_pct;
  out["total_wall_ms"] = timing.total_wall_ms;
  return out;
}

json summary_json(const SolveReport& report, const json& config_echo,
                  const std::optional<double>& reference, double tol_gap, double tol_infeas) {
  json out;
  out["status"] = to_string(report.status);
  if (!report.message.empty()) out["message"] = report.message;
  out["objective"] = report.objective;
  out["eq_infeas"] = report.eq_infeas;
  out["ineq_infeas"] = report.ineq_infeas;
  out["iterations"] = report.iterations.size();
  out["comm_floats"] = report.comm_floats_total;
  out["config"] = config_echo;
  out["timing"] = timing_json(report.timing);
  if (reference) {
    const double denom = std::max(std::abs(*reference), 1e-12);
    out["rel_gap"] = std::abs(report.objective - *reference) / denom;
    out["reference_objective"] = *reference;
    int to_threshold = -1;
    for (const auto& r : report.iterations) {
      if (r.rel_gap && *r.rel_gap <= tol_gap && std::max(r.eq_infeas, r.ineq_infeas) <= tol_infeas) {
        to_threshold = r.iter;
        break;
      }
    }
    out["iterations_to_threshold"] = to_threshold;
  }
  return out;
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << doc.dump(1) << "\n";
}

std::string summary_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".summary.json");
  return p.string();
}

std::optional<unsigned long long> embedded_seed(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json doc;
  try {
    doc = json::parse(in);
  } catch (...) {
    return std::nullopt;
  }
  if (doc.contains("meta") && doc["meta"].contains("seed")) {
    return doc["meta"]["seed"].get<unsigned long long>();
  }
  return std::nullopt;
}

SolveReport oracle_as_report(const BlockQP& problem, const OracleSolution& sol, double wall_ms) {
  SolveReport report;
  report.y = coupling_part(problem, sol.x_full);
  report.x = split_locals(problem, sol.x_full);
  report.status = SolveStatus::Converged;
  const Metrics m = termination_check(problem, report.y, report.x);
  report.objective = m.cost;
  report.eq_infeas = m.eq_infeas;
  report.ineq_infeas = m.ineq_infeas;
  IterationRecord rec;
  rec.iter = 0;
  rec.cost = m.cost;
  rec.eq_infeas = m.eq_infeas;
  rec.ineq_infeas = m.ineq_infeas;
  rec.rel_gap = 0.0;
  rec.alpha = 1.0;
  rec.wall_ms = wall_ms;
  report.iterations.push_back(rec);
  report.timing.total_wall_ms = wall_ms;
  return report;
}

struct SolveOptions {
  std::string method = "al";
  double rho = 100.0;
  int iters = 0;  // 0 -> method default
  int threads = 0; // 0 -> hardware
  double tol_gap = 1e-4;
  double tol_infeas = 1e-5;
};

SolveReport dispatch_solve(const BlockQP& problem, const SolveOptions& opt,
                           const std::optional<double>& reference) {
  const int threads =
      opt.threads > 0 ? opt.threads : int(std::max(1u, std::thread::hardware_concurrency()));
  if (opt.method == "al" || opt.method == "l1") {
    SolverConfig cfg;
    cfg.threads = threads;
    if (opt.iters > 0) cfg.max_outer = opt.iters;
    cfg.reference_objective = reference;
    return opt.method == "al" ? run_al(problem, cfg) : run_l1(problem, cfg);
  }
  if (opt.method == "admm") {
    AdmmConfig cfg;
    cfg.threads = threads;
    cfg.max_iterations = opt.iters > 0 ? opt.iters : 100;
    cfg.reference_objective = reference;
    return run_admm(problem, opt.rho, cfg);
  }
  if (opt.method == "oracle") {
    const auto t0 = std::chrono::steady_clock::now();
    const OracleSolution sol = solve_monolithic(assemble_monolithic(problem));
    const double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return oracle_as_report(problem, sol, wall);
  }
  throw ValidationError("unknown method '" + opt.method + "'");
}

int run_generate(int buildings, int horizon, int zones, unsigned long long seed, double grid_cap,
                 const std::string& output) {
  log_info("generating instance");
  const ScenarioConfig cfg = synthesize_scenario(seed, buildings, horizon, zones, grid_cap);
  const BlockQP problem = build_instance(cfg);
  const auto violations = validate(problem);
  if (!violations.empty()) {
    throw ValidationError("generated instance failed validation: " + violations.front().invariant);
  }
  json doc = json::parse(problem_to_json_text(problem));
  doc["meta"] = {{"generator", "hvac"},
                 {"seed", seed},
                 {"buildings", buildings},
                 {"horizon", horizon},
                 {"zones", zones},
                 {"grid_cap", cfg.v_bar}};
  write_json(output, doc);
  log_info("wrote " + output);
  return 0;
}

int run_solve(const std::string& instance, const SolveOptions& opt, const std::string& output) {
  const BlockQP problem = load_problem(instance);
  log_info("solving " + instance + " with method " + opt.method);

  std::optional<double> reference;
  const SolveReport report = dispatch_solve(problem, opt, reference);
  write_csv(output, report.iterations);

  json config_echo;
  config_echo["method"] = opt.method;
  config_echo["instance"] = instance;
  config_echo["rho"] = opt.rho;
  config_echo["iters"] = opt.iters;
  config_echo["threads"] = opt.threads;
  config_echo["tol_gap"] = opt.tol_gap;
  config_echo["tol_infeas"] = opt.tol_infeas;
  if (const auto seed = embedded_seed(instance)) config_echo["seed"] = *seed;
  write_json(summary_path_for(output), summary_json(report, config_echo, reference, opt.tol_gap,
                                                    opt.tol_infeas));
  log_info("wrote " + output + " and " + summary_path_for(output));
  for (const auto& r : report.iterations) {
    std::ostringstream os;
    os << "iter " << r.iter << " cost " << r.cost << " eq " << r.eq_infeas << " ineq "
       << r.ineq_infeas;
    log_debug(os.str());
  }
  return report.status == SolveStatus::ComponentFailure ? 1 : 0;
}

int run_compare(const std::string& instance, std::string methods_csv, const SolveOptions& base,
                const std::string& output_dir) {
  const BlockQP problem = load_problem(instance);
  std::filesystem::create_directories(output_dir);

  std::vector<std::string> methods;
  std::stringstream ss(methods_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) methods.push_back(item);
  }
  if (methods.empty()) throw ValidationError("no methods requested");

  std::optional<double> reference;
  json summary;
  summary["instance"] = instance;
  if (const auto seed = embedded_seed(instance)) summary["seed"] = *seed;
  int exit_code = 0;

  // the oracle runs first so the other methods can report their gap against it
  const bool want_oracle =
      std::find(methods.begin(), methods.end(), "oracle") != methods.end();
  if (want_oracle) {
    SolveOptions opt = base;
    opt.method = "oracle";
    log_info("running oracle");
    const SolveReport report = dispatch_solve(problem, opt, std::nullopt);
    reference = report.objective;
    write_csv(output_dir + "/oracle.csv", report.iterations);
    json echo;
    echo["method"] = "oracle";
    summary["methods"]["oracle"] =
        summary_json(report, echo, reference, base.tol_gap, base.tol_infeas);
  }

  for (const auto& method : methods) {
    if (method == "oracle") continue;
    SolveOptions opt = base;
    opt.method = method;
    log_info("running " + method);
    const SolveReport report = dispatch_solve(problem, opt, reference);
    write_csv(output_dir + "/" + method + ".csv", report.iterations);
    json echo;
    echo["method"] = method;
    echo["rho"] = opt.rho;
    echo["iters"] = opt.iters;
    summary["methods"][method] =
        summary_json(report, echo, reference, base.tol_gap, base.tol_infeas);
    if (report.status == SolveStatus::ComponentFailure) exit_code = 1;
  }
  write_json(output_dir + "/summary.json", summary);
  log_info("wrote " + output_dir + "/summary.json");
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-separable QP decomposition benchmark driver"};
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Synthesize a building-control instance");
  int buildings = 3, horizon = 8, zones = 2;
  unsigned long long seed = 0;
  double grid_cap = 0.0;
  std::string gen_output = "instance.json";
  generate->add_option("--buildings", buildings, "Number of buildings")->check(CLI::PositiveNumber);
  generate->add_option("--horizon", horizon, "Time steps")->check(CLI::PositiveNumber);
  generate->add_option("--zones", zones, "Thermal zones per building")->check(CLI::PositiveNumber);
  generate->add_option("--seed", seed, "Random seed");
  generate->add_option("--grid-cap", grid_cap, "Grid capacity override (kW per step)");
  generate->add_option("-o,--output", gen_output, "Instance file to write");

  auto* solve = app.add_subcommand("solve", "Run one method on an instance");
  SolveOptions opt;
  std::string instance;
  std::string solve_output = "bench_log.csv";
  solve->add_option("--method", opt.method, "al | l1 | admm | oracle")
      ->check(CLI::IsMember({"al", "l1", "admm", "oracle"}));
  solve->add_option("--rho", opt.rho, "ADMM penalty parameter");
  solve->add_option("--iters", opt.iters, "Iteration budget (method default when 0)");
  solve->add_option("--threads", opt.threads, "Subproblem fan-out width (hardware when 0)");
  solve->add_option("--tol-gap", opt.tol_gap, "Reporting threshold on the relative gap");
  solve->add_option("--tol-infeas", opt.tol_infeas, "Reporting threshold on infeasibility");
  solve->add_option("-o,--output", solve_output, "Per-iteration CSV to write");
  solve->add_option("instance", instance, "Problem file")->required();

  auto* compare = app.add_subcommand("compare", "Run several methods and collect gaps");
  std::string methods = "al,l1,admm,oracle";
  std::string compare_output = "compare_out";
  std::string compare_instance;
  compare->add_option("--methods", methods, "Comma-separated method list");
  compare->add_option("--rho", opt.rho, "ADMM penalty parameter");
  compare->add_option("--iters", opt.iters, "Iteration budget (method default when 0)");
  compare->add_option("--threads", opt.threads, "Subproblem fan-out width");
  compare->add_option("--tol-gap", opt.tol_gap, "Threshold on the relative gap");
  compare->add_option("--tol-infeas", opt.tol_infeas, "Threshold on infeasibility");
  compare->add_option("-o,--output", compare_output, "Output directory");
  compare->add_option("instance", compare_instance, "Problem file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      return run_generate(buildings, horizon, zones, seed, grid_cap, gen_output);
    }
    if (solve->parsed()) {
      return run_solve(instance, opt, solve_output);
    }
    return run_compare(compare_instance, methods, opt, compare_output);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
