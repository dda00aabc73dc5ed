// hdgmax: command-line front end for single runs, studies, line traces, VTK
// export and the invariant suite.
//
// Exit codes: 0 success (a SUMMARY line goes to stderr), 1 numerical
// failure, 2 bad arguments. Values from --config FILE override flags.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "hdgmax/hdgmax.hpp"

using namespace hdgmax;

namespace {

struct Options {
  int n = 4, p = 1, samples = 201;
  real kappa = 5.0, tol = 1e-10, x0 = 0.5, y0 = 0.5;
  std::string case_name = "plane_wave", convention = "minus", minus_variant = "conjugate", tau_mode = "global", solver = "direct",
              ordering = "nd", rule = "fixed", kappas, ns, ps, out;
  bool no_reuse = false;
};

struct BadArguments : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw BadArguments(std::string("bad entry '") + item + "' in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw BadArguments(std::string(what) + " must be a nonempty comma-separated list");
  return out;
}

RunConfig run_config(const Options& o) {
  RunConfig c;
  c.n = o.n;
  c.p = o.p;
  c.kappa = o.kappa;
  c.convention = parse_sign_convention(o.convention);
  c.minus_variant = parse_minus_variant(o.minus_variant);
  c.tau_mode = parse_tau_mode(o.tau_mode);
  c.solver_options.tol = o.tol;
  c.solver_options.ordering = parse_ordering(o.ordering);
  if (o.solver == "gmres") {
    c.solver = SolverKind::iterative;
  } else {
    c.solver = SolverKind::direct;
    if (o.solver != "direct") c.solver_options.direct_method = parse_direct_method(o.solver);
  }
  c.reuse_local_operators = !o.no_reuse;
  c.validate();
  return c;
}

/// Output stream: the --out file, or stdout.
class Sink {
public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path);
    if (!file_) throw BadArguments("cannot open output file '" + path + "'");
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
  std::ofstream file_;
};

void add_run_flags(CLI::App* sub, Options& o) {
  sub->add_option("--n", o.n, "cube subdivisions per axis (6 n^3 tetrahedra)");
  sub->add_option("--p", o.p, "polynomial order");
  sub->add_option("--kappa", o.kappa, "wave number");
  sub->add_option("--case", o.case_name, "plane_wave | polynomial (degree p)");
  sub->add_option("--convention", o.convention, "minus (e^{-iwt}) | plus (e^{+iwt})");
  sub->add_option("--minus-variant", o.minus_variant, "conjugate | boundary-only");
  sub->add_option("--tau-mode", o.tau_mode, "global | local mesh size in tau");
  sub->add_option("--solver", o.solver, "direct | llt | lu | gmres");
  sub->add_option("--ordering", o.ordering, "nd | amd | natural");
  sub->add_option("--tol", o.tol, "relative residual tolerance");
  sub->add_flag("--no-reuse", o.no_reuse, "assemble every element separately");
  sub->add_option("--out", o.out, "output file (default stdout)");
}

void summary(const std::string& cmd, const std::string& fields) { std::cerr << "SUMMARY status=ok command=" << cmd << ' ' << fields << '\n'; }

std::string report_fields(const ErrorReport& r) {
  using io::num;
  return "n=" + std::to_string(r.n) + " p=" + std::to_string(r.p) + " kappa=" + num(r.kappa) + " dofs=" + std::to_string(r.dofs) +
         " rel_u=" + num(r.rel_u) + " rel_w=" + num(r.rel_w) + " energy_rel=" + num(r.energy_relative()) +
         " solver_residual=" + num(r.solver_residual) + " seconds=" + num(r.timings.total());
}

/// Appends the entries of the config file as trailing --key=value arguments,
/// so they win over earlier flags under the take-last policy.
std::vector<std::string> with_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw BadArguments("cannot read config file '" + path + "'");
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--" || item.name == "config") continue;
    std::string value;
    for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
    if (item.inputs.empty()) value = "true";
    args.push_back("--" + item.fullname() + "=" + value);
  }
  return args;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDG solver for the time-harmonic curl-curl Maxwell problem on the unit cube"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; its entries override flags")->expected(1);
  Options o;
  int exit_code = 0;

  auto* solve_cmd = app.add_subcommand("solve", "single run; CSV ErrorReport");
  add_run_flags(solve_cmd, o);
  auto* study_cmd = app.add_subcommand("study", "convergence table as CSV");
  add_run_flags(study_cmd, o);
  study_cmd->add_option("--rule", o.rule, "fixed | kh=C | k3h2=C");
  study_cmd->add_option("--kappas", o.kappas, "comma-separated wave numbers (default --kappa)");
  study_cmd->add_option("--ns", o.ns, "comma-separated subdivisions for the fixed rule (default --n)");
  study_cmd->add_option("--ps", o.ps, "comma-separated orders (default --p)");
  auto* trace_cmd = app.add_subcommand("trace", "u_h along x = x0, y = y0 as CSV");
  add_run_flags(trace_cmd, o);
  trace_cmd->add_option("--samples", o.samples, "points on z in [0, 1]");
  trace_cmd->add_option("--x0", o.x0);
  trace_cmd->add_option("--y0", o.y0);
  auto* vtk_cmd = app.add_subcommand("export-vtk", "legacy ASCII VTK of Re/Im u_h");
  add_run_flags(vtk_cmd, o);
  auto* check_cmd = app.add_subcommand("check", "runtime invariant suite");
  check_cmd->add_option("--out", o.out, "output file (default stdout)");
  for (auto* sub : {solve_cmd, study_cmd, trace_cmd, vtk_cmd, check_cmd})
    sub->add_option("--config", config_path, "key = value file; its entries override flags");

  try {
    const std::vector<std::string> args = with_config(std::vector<std::string>(argv + 1, argv + argc));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*check_cmd) {
      Sink sink(o.out);
      std::ostream& out = sink.get();
      out << "check,passed,worst,tolerance,seconds,detail\n";
      int failed = 0;
      for (const CheckResult& r : run_invariant_checks()) {
        io::row(out, io::field(r.name), r.passed ? 1 : 0, io::num(r.worst), io::num(r.tolerance), io::num(r.seconds), io::field(r.detail));
        failed += r.passed ? 0 : 1;
      }
      if (failed) {
        std::cerr << "SUMMARY status=fail command=check failed=" << failed << '\n';
        return 1;
      }
      summary("check", "failed=0");
      return 0;
    }

    const RunConfig cfg = run_config(o);
    const ManufacturedCase mc = make_case(o.case_name, cfg.kappa, cfg.convention, cfg.p);
    if (*solve_cmd) {
      Sink sink(o.out);
      const ErrorReport r = run_case(cfg, mc);
      write_report_csv(sink.get(), r);
      if (r.solver.residual_warning) std::cerr << "warning: solver residual " << r.solver_residual << " above tolerance\n";
      summary("solve", report_fields(r));
    } else if (*study_cmd) {
      StudyConfig sc;
      sc.base = cfg;
      sc.case_name = o.case_name;
      sc.rule = MeshRule::parse(o.rule);
      sc.kappas = o.kappas.empty() ? std::vector<real>{cfg.kappa} : parse_list<real>(o.kappas, "--kappas");
      sc.ns = o.ns.empty() ? std::vector<int>{cfg.n} : parse_list<int>(o.ns, "--ns");
      sc.ps = o.ps.empty() ? std::vector<int>{cfg.p} : parse_list<int>(o.ps, "--ps");
      for (int n : sc.ns)
        if (n < 1 || n > max_subdivisions) throw hdgmax::invalid_argument("--ns entries must lie in 1.." + std::to_string(max_subdivisions));
      Sink sink(o.out);
      const StudyTable t = convergence_study(sc);
      write_study_csv(sink.get(), t);
      if (!t.complete) {
        std::cerr << "error: " << t.rows.back().failure << "\nSUMMARY status=fail command=study rows=" << t.rows.size() << '\n';
        return 1;
      }
      summary("study", "rows=" + std::to_string(t.rows.size()));
    } else if (*trace_cmd) {
      const DiscreteSolution s = solve_case(cfg, mc);
      const auto samples = line_trace(s, mc, o.samples, o.x0, o.y0);
      Sink sink(o.out);
      write_trace_csv(sink.get(), samples);
      summary("trace", "samples=" + std::to_string(samples.size()));
    } else if (*vtk_cmd) {
      const DiscreteSolution s = solve_case(cfg, mc);
      Sink sink(o.out);
      write_vtk(sink.get(), s, "u_h " + mc.name + " n=" + std::to_string(cfg.n) + " p=" + std::to_string(cfg.p));
      summary("export-vtk", "elements=" + std::to_string(s.mesh->num_elements()));
    }
  } catch (const BadArguments& e) {
    std::cerr << "error: " << e.what() << '\n';
    exit_code = 2;
  } catch (const hdgmax::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    exit_code = 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\nSUMMARY status=fail\n";
    exit_code = 1;
  }
  return exit_code;
}
