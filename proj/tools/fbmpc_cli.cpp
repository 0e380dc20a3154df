// fbmpc command line: offline solves, closed-loop runs, derivative audit,
// dimension tables and controller comparison.
//
// Exit codes: 0 success, 2 invalid config or model, 3 solver failure,
// 4 invariant breach (aborted run, failed check, derivative tolerance).

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fbmpc/harness/derivatives.hpp"
#include "fbmpc/harness/report.hpp"
#include "fbmpc/multibody/robots.hpp"

namespace fs = std::filesystem;
using namespace fbmpc;

namespace {

constexpr int kOk = 0, kInvalid = 2, kSolver = 3, kBreach = 4;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt, rate, delay;

  void apply(Scenario& sc) const {
    if (seed) sc.seed = *seed;
    if (dt) sc.control.control_dt = *dt;
    if (rate) sc.mpc.update_rate = *rate;
    if (delay) {
      sc.mpc.expected_delay = *delay;
      sc.sim.latency = *delay;
    }
  }
};

Scenario load(const std::string& path, const Overrides& o) {
  Scenario sc = load_scenario(path);
  o.apply(sc);
  return sc;
}

void write_run(const fs::path& dir, const RobotModel& model, const SimResult& r) {
  fs::create_directories(dir);
  std::ofstream series(dir / "series.csv");
  write_series_csv(series, model, r);
  std::ofstream(dir / "summary.json") << summary_json(r).dump(2) << '\n';
  if (r.aborted) std::ofstream(dir / "dump.txt") << r.abort_dump;
}

int run_status(const SimResult& r) { return r.aborted || !r.checks_pass() ? kBreach : kOk; }

int cmd_solve(const std::string& path, const Overrides& o, int iters, const std::string& log) {
  const Scenario sc = load(path, o);
  const RobotModel model = load_model(sc.model_path);
  Simulation sim(model, sc);
  MpcConfig cfg = sc.mpc;
  cfg.initial_iterations = iters;
  SolverOptions sopt = sc.solver;
  sopt.max_iters = std::max(sopt.max_iters, iters);
  Mpc mpc(model, sim.schedule(), sc.weights, cfg, sc.problem, sopt);
  const PolicyMessage msg = mpc.initialize(sim.initial_state(), 0.0);
  const auto& hist = mpc.solver().log();
  if (!log.empty()) {
    std::ofstream out(log);
    out << "iter,cost,gap,mu,alpha,qu_norm,expected,actual,accepted\n";
    for (const IterationLog& l : hist) {
      out << l.iter << ',' << detail::fmt_double(l.cost) << ',' << detail::fmt_double(l.gap) << ','
          << detail::fmt_double(l.mu) << ',' << detail::fmt_double(l.alpha) << ',' << detail::fmt_double(l.qu_norm)
          << ',' << detail::fmt_double(l.expected) << ',' << detail::fmt_double(l.actual) << ',' << l.accepted
          << '\n';
    }
  }
  Json j;
  j["scenario"] = sc.name;
  j["nodes"] = mpc.problem().size();
  j["status"] = msg.diagnostics.status;
  j["iterations"] = msg.diagnostics.iterations;
  j["cost"] = msg.diagnostics.cost;
  j["gap"] = msg.diagnostics.gap;
  std::cout << j.dump(2) << '\n';
  if (!std::isfinite(msg.diagnostics.cost)) return kSolver;
  return msg.diagnostics.status == "converged" ? kOk : kSolver;
}

int cmd_run(const std::string& path, const Overrides& o, const std::string& controller, const std::string& out) {
  const Scenario sc = load(path, o);
  const RobotModel model = load_model(sc.model_path);
  Simulation sim(model, sc);
  const SimResult r = sim.run(controller.empty() ? sc.controller : controller_from_string(controller));
  write_run(out, model, r);
  std::cout << summary_json(r)["checks"].dump(2) << '\n';
  if (r.aborted) std::cerr << "run aborted; see " << (fs::path(out) / "dump.txt").string() << '\n';
  return run_status(r);
}

int cmd_check_derivs(const std::string& model_path, const Overrides& o, int samples, double tol) {
  const RobotModel model = model_path.empty() ? robots::planar_quadruped() : load_model(model_path);
  const DerivativeReport rep = check_derivatives(model, o.seed.value_or(1), samples, tol);
  std::printf("%-16s %12s %8s\n", "block", "max_rel_err", "samples");
  for (const auto& b : rep.blocks) std::printf("%-16s %12.3e %8d\n", b.name.c_str(), b.max_rel_err, b.samples);
  std::printf("samples %d (zero velocity %d), tolerance %.1e, %.2f s: %s\n", rep.samples, rep.zero_velocity_samples,
              rep.tolerance, rep.seconds, rep.pass() ? "pass" : "FAIL");
  return rep.pass() ? kOk : kBreach;
}

int cmd_dims(const std::string& model_path, std::optional<int> contacts) {
  const RobotModel model = load_model(model_path);
  const int nc = static_cast<int>(model.contacts.size());
  if (contacts && (*contacts < 0 || *contacts > nc)) {
    throw InvalidConfig("--contacts must lie in [0, " + std::to_string(nc) + "]");
  }
  std::printf("model %s: nq %d, nv %d, nu %d, contacts %d\n", model.name.c_str(), model.nq(), model.nv(), model.nu(),
              nc);
  std::printf("%8s %10s %11s %8s\n", "contacts", "full-body", "centroidal", "larger");
  const int lo = contacts.value_or(0), hi = contacts.value_or(nc);
  for (int k = lo; k <= hi; ++k) {
    const ModelDimensions d = model_dimensions(model, k);
    std::printf("%8d %10d %11d %8s\n", k, d.fullbody, d.centroidal, d.centroidal >= d.fullbody ? "centroid" : "full");
  }
  const ModelDimensions d = model_dimensions(model, 0);
  std::printf("centroidal >= full-body from %d force components (%d contacts)\n", d.crossover_force_dim,
              d.crossover_contacts);
  return kOk;
}

int cmd_compare(const std::string& path, const Overrides& o, const std::string& out) {
  const Scenario sc = load(path, o);
  const RobotModel model = load_model(sc.model_path);
  Simulation sim(model, sc);
  Json j;
  j["scenario"] = sc.name;
  int status = kOk;
  double k_err[2] = {0.0, 0.0};
  for (ControllerKind kind : {ControllerKind::Riccati, ControllerKind::Wbc}) {
    const SimResult r = sim.run(kind);
    const std::string name = to_string(kind);
    if (!out.empty()) write_run(fs::path(out) / name, model, r);
    j[name] = summary_json(r);
    j[name].erase("contact_events");
    k_err[kind == ControllerKind::Wbc] = r.metrics.momentum_error_integral;
    status = std::max(status, run_status(r));
  }
  j["momentum_error_integral"] = {{"riccati", k_err[0]}, {"wbc", k_err[1]}};
  j["riccati_le_wbc"] = k_err[0] <= k_err[1];
  std::cout << j.dump(2) << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbmpc: full-body MPC for planar legged robots"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--seed", o.seed, "RNG seed (scenario runs, derivative samples)");
  app.add_option("--dt", o.dt, "control period [s]")->check(CLI::PositiveNumber);
  app.add_option("--rate", o.rate, "MPC update rate [Hz]")->check(CLI::PositiveNumber);
  app.add_option("--delay", o.delay, "MPC message delay, expected and simulated [s]")->check(CLI::NonNegativeNumber);

  std::string scenario, model_path, controller, out, log;
  int iters = 100, samples = 100;
  double tol = 1e-4;
  std::optional<int> contacts;

  auto* solve = app.add_subcommand("solve", "offline solve of the initial horizon");
  solve->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  solve->add_option("--iters", iters, "iteration budget")->check(CLI::PositiveNumber);
  solve->add_option("--log", log, "per-iteration CSV");

  auto* run = app.add_subcommand("run", "closed-loop simulation");
  run->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  run->add_option("--controller", controller, "riccati | wbc (default: scenario)")
      ->check(CLI::IsMember({"riccati", "wbc"}));
  run->add_option("--out", out, "output directory")->required();

  auto* derivs = app.add_subcommand("check-derivs", "finite-difference audit of analytical derivatives");
  derivs->add_option("--model", model_path, "model file (default: built-in quadruped)")->check(CLI::ExistingFile);
  derivs->add_option("--samples", samples, "random states")->check(CLI::PositiveNumber);
  derivs->add_option("--tol", tol, "relative error tolerance")->check(CLI::PositiveNumber);

  auto* dims = app.add_subcommand("dims", "full-body vs centroidal problem dimensions");
  dims->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  dims->add_option("--contacts", contacts, "active contacts (default: all counts)");

  auto* compare = app.add_subcommand("compare", "run both controllers on one scenario");
  compare->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  compare->add_option("--out", out, "optional output directory (one subdirectory per controller)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*solve) return cmd_solve(scenario, o, iters, log);
    if (*run) return cmd_run(scenario, o, controller, out);
    if (*derivs) return cmd_check_derivs(model_path, o, samples, tol);
    if (*dims) return cmd_dims(model_path, contacts);
    if (*compare) return cmd_compare(scenario, o, out);
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const InvalidModel& e) {
    std::cerr << "invalid model: " << e.what() << '\n';
    return kInvalid;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBreach;
  }
  return kOk;
}
