// vmf: batch front-end over the mean-field solver and blow-up diagnostics.
// Subcommands: solve, continue, analyze, hamiltonian. Exit codes: 0 success,
// 1 config or usage error, 2 non-convergence (fold candidates, stalls).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vmf/blowup.hpp"
#include "vmf/config.hpp"
#include "vmf/domain.hpp"
#include "vmf/greens.hpp"
#include "vmf/io.hpp"
#include "vmf/kirchhoff.hpp"
#include "vmf/solver.hpp"

namespace fs = std::filesystem;

namespace {

struct Args {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

struct Run {
  vmf::Scenario scenario;
  fs::path out;
};

// Loads the scenario and prepares the output directory. Throws on config
// problems; callers map that to exit code 1.
Run prepare(const Args& a, const std::string& command) {
  Run r;
  r.scenario = vmf::Config::parse_file(a.config_path).scenario();
  if (a.has_seed) r.scenario.rng_seed = a.seed;
  std::string dir = !a.out_override.empty() ? a.out_override : r.scenario.out_dir;
  if (dir.empty()) dir = ".";
  r.out = fs::path(dir);
  fs::create_directories(r.out);

  vmf::Json meta = vmf::Json::object();
  meta.set("command", command);
  meta.set("config", a.config_path);
  meta.set("out", r.out.string());
  if (a.has_seed)
    meta.set("seed", static_cast<unsigned long long>(a.seed));
  else
    meta.set("seed", vmf::Json());
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  meta.set("timestamp", stamp);
  vmf::write_text((r.out / "run_meta.json").string(), meta.dump());
  return r;
}

vmf::MeanFieldProblem problem_of(const vmf::Scenario& s, double lambda) {
  vmf::MeanFieldProblem p;
  p.variant = s.variant;
  p.measure = s.measure;
  p.lambda = lambda;
  return p;
}

vmf::Field initial_guess(const vmf::Grid& g, const vmf::Scenario& s) {
  if (s.has_bump) return vmf::bump_field(g, s.bump);
  return vmf::Field(g.count(), 0.0);
}

vmf::GreensEvaluator make_evaluator(const vmf::Scenario& s, const vmf::Grid& g) {
  switch (g.domain.kind) {
    case vmf::DomainKind::UnitDisk:
      return vmf::GreensEvaluator::analytic_disk();
    case vmf::DomainKind::FlatTorus:
      return vmf::GreensEvaluator::fourier_torus(g.domain, s.torus_modes);
    case vmf::DomainKind::Rectangle:
    default:
      return vmf::GreensEvaluator::numeric(g);
  }
}

std::string snapshot_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_%03zu.csv", i);
  return buf;
}

std::string report_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "blowup_report_%03zu.json", i);
  return buf;
}

int cmd_solve(const Args& a) {
  Run r = prepare(a, "solve");
  const vmf::Scenario& s = r.scenario;
  if (s.lambda_list.size() != 1) {
    std::cerr << "config error: key 'lambda': solve needs exactly one lambda\n";
    return 1;
  }
  vmf::Grid g = vmf::build_grid(s.domain, s.n);
  vmf::MeanFieldProblem p = problem_of(s, s.lambda_list[0]);
  vmf::validate_problem(g.domain, p);

  vmf::NewtonResult nr = vmf::solve_newton(g, p, initial_guess(g, s), s.newton);
  vmf::write_field_csv((r.out / "solution.csv").string(), g, nr.v);
  vmf::Json j = vmf::Json::object();
  j.set("variant", vmf::variant_name(s.variant));
  j.set("n", s.n);
  vmf::Json summary = vmf::solve_summary_json(p.lambda, nr, g);
  j.set("result", std::move(summary));
  j.set("converged", nr.converged);
  vmf::write_text((r.out / "result.json").string(), j.dump());
  if (!nr.converged) {
    std::cerr << "solve did not converge: " << nr.message << "\n";
    return 2;
  }
  return 0;
}

int cmd_continue(const Args& a) {
  Run r = prepare(a, "continue");
  const vmf::Scenario& s = r.scenario;
  if (s.lambda_list.empty()) {
    std::cerr << "config error: key 'lambda_list': continue needs a lambda ladder\n";
    return 1;
  }
  vmf::Grid g = vmf::build_grid(s.domain, s.n);
  vmf::MeanFieldProblem base = problem_of(s, s.lambda_list.front());
  vmf::validate_problem(g.domain, base);

  vmf::ContinuationOptions opt;
  opt.policy = s.seed_policy;
  opt.bump = s.bump;
  opt.newton = s.newton;

  vmf::ContinuationResult trace;
  try {
    trace = vmf::continuation(g, base, s.lambda_list, opt);
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  vmf::Json steps = vmf::Json::array();
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const vmf::ContinuationStep& st = trace.steps[i];
    std::string snap = snapshot_name(i);
    vmf::write_field_csv((r.out / snap).string(), g, st.result.v);
    vmf::Json e = vmf::solve_summary_json(st.lambda, st.result, g);
    e.set("snapshot", snap);
    steps.push(std::move(e));
  }
  vmf::Json j = vmf::Json::object();
  j.set("variant", vmf::variant_name(s.variant));
  j.set("n", s.n);
  j.set("completed", trace.completed);
  j.set("message", trace.message);
  j.set("steps", std::move(steps));
  vmf::write_text((r.out / "trace.json").string(), j.dump());
  if (!trace.completed) {
    std::cerr << trace.message << "\n";
    return 2;
  }
  return 0;
}

// One snapshot's full diagnostic pass; each call builds its own evaluator so
// parallel passes never share the lazy Green caches.
vmf::Json analyze_snapshot(const vmf::Scenario& s, const vmf::Grid& g, double lambda,
                           const vmf::Field& v) {
  vmf::MeanFieldProblem p = problem_of(s, lambda);
  vmf::GreensEvaluator green = make_evaluator(s, g);
  vmf::BlowupReport rep = vmf::make_blowup_report(g, p, v, green, s.analysis);
  vmf::annotate_location_residuals(rep, green);
  vmf::Json j = vmf::blowup_report_json(rep, s.n);

  // Brezis-Merle-type exponential bound evaluated on the solution's own
  // right-hand side; Dirichlet domains only, skipped for a vanishing source.
  if (g.domain.kind != vmf::DomainKind::FlatTorus) {
    vmf::Field f = vmf::nonlinearity(g, p, v).rhs;
    double l1 = 0.0;
    for (int q = 0; q < g.count(); ++q) l1 += g.w[q] * std::abs(f[q]);
    vmf::Json bm = vmf::Json::array();
    if (l1 > 0.0) {
      for (double delta : s.estimate_deltas) {
        vmf::BrezisMerleReport b = vmf::brezis_merle_check(g, f, delta);
        vmf::Json e = vmf::Json::object();
        e.set("delta", b.delta);
        e.set("lhs", b.lhs);
        e.set("rhs", b.rhs);
        e.set("holds", b.holds);
        bm.push(std::move(e));
      }
    }
    j.set("brezis_merle", std::move(bm));
  }
  return j;
}

int analysis_threads(std::size_t jobs) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VMF_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = static_cast<unsigned>(std::min<long>(v, 64));
  }
  return static_cast<int>(std::min<std::size_t>(hw, jobs));
}

int cmd_analyze(const Args& a) {
  Run r = prepare(a, "analyze");
  const vmf::Scenario& s = r.scenario;
  vmf::Grid g = vmf::build_grid(s.domain, s.n);

  // Inputs: a continuation trace (per-step snapshots) or a single solve.
  std::vector<std::pair<double, std::string>> inputs;
  bool from_trace = fs::exists(r.out / "trace.json");
  if (from_trace) {
    std::ifstream in(r.out / "trace.json");
    nlohmann::json trace = nlohmann::json::parse(in);
    for (const auto& step : trace.at("steps"))
      inputs.emplace_back(step.at("lambda").get<double>(),
                          step.at("snapshot").get<std::string>());
  } else if (fs::exists(r.out / "result.json")) {
    std::ifstream in(r.out / "result.json");
    nlohmann::json res = nlohmann::json::parse(in);
    inputs.emplace_back(res.at("result").at("lambda").get<double>(), "solution.csv");
  } else {
    std::cerr << "analyze: no trace.json or result.json under " << r.out << "\n";
    return 1;
  }
  if (inputs.empty()) {
    std::cerr << "analyze: trace has no steps\n";
    return 1;
  }

  std::vector<vmf::Field> fields(inputs.size());
  try {
    for (std::size_t i = 0; i < inputs.size(); ++i)
      fields[i] = vmf::read_field_csv((r.out / inputs[i].second).string(), g);
  } catch (const std::runtime_error& e) {
    std::cerr << "analyze: " << e.what() << "\n";
    return 1;
  }

  std::vector<std::string> reports(inputs.size());
  std::vector<std::string> errors(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= inputs.size()) return;
      try {
        reports[i] = analyze_snapshot(s, g, inputs[i].first, fields[i]).dump();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  int nthreads = analysis_threads(inputs.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "analyze failed on " << inputs[i].second << ": " << errors[i] << "\n";
      return 1;
    }
    std::string name = from_trace ? report_name(i) : std::string("blowup_report.json");
    vmf::write_text((r.out / name).string(), reports[i]);
  }
  return 0;
}

int cmd_hamiltonian(const Args& a) {
  Run r = prepare(a, "hamiltonian");
  const vmf::Scenario& s = r.scenario;
  if (!s.has_vortex) {
    std::cerr << "config error: key 'vortex': hamiltonian needs a vortex list\n";
    return 1;
  }
  vmf::Grid g = vmf::build_grid(s.domain, s.n);
  vmf::GreensEvaluator green = make_evaluator(s, g);

  vmf::VortexConfig start = s.vortex;
  vmf::VortexConfig c = s.vortex;
  vmf::FindCriticalOptions opt;
  opt.tol = s.newton.tol;
  vmf::CriticalityReport rep = vmf::find_critical(c, green, opt);
  double h_value = vmf::hamiltonian(c, green);
  std::vector<double> loc;
  try {
    loc = vmf::location_residual(c.points, c.intensities, green);
  } catch (const std::invalid_argument&) {
    // zero-intensity vortices have no location residual
  }
  vmf::write_text((r.out / "critical.json").string(),
                  vmf::critical_json(start, c, h_value, rep, loc).dump());
  if (!rep.converged && !rep.degenerate) {
    std::cerr << "critical point search did not converge: " << rep.message << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field vortex toolkit: solve, continue, analyze, hamiltonian"};
  app.require_subcommand(1);

  Args args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "scenario config file")->required();
    sub->add_option("--out", args.out_override, "output directory (overrides config)");
    sub->add_option("--seed", args.seed, "override the scenario rng seed")
        ->each([&](const std::string&) { args.has_seed = true; });
  };
  CLI::App* solve = app.add_subcommand("solve", "single solve at one lambda");
  CLI::App* cont = app.add_subcommand("continue", "lambda-continuation along a ladder");
  CLI::App* analyze = app.add_subcommand("analyze", "blow-up diagnostics for stored runs");
  CLI::App* ham = app.add_subcommand("hamiltonian", "Kirchhoff energy / critical points");
  for (CLI::App* sub : {solve, cont, analyze, ham}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(args);
    if (cont->parsed()) return cmd_continue(args);
    if (analyze->parsed()) return cmd_analyze(args);
    return cmd_hamiltonian(args);
  } catch (const vmf::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
