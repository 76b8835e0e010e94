#include <parasplit/parasplit.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace parasplit;

namespace {

struct Common {
  std::string example = "5.1";
  std::optional<double> alpha;
  std::optional<double> beta;
  double gamma = 1.0;
  double eps = 1e-12;
  int kmax = 20000;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool solver_options) {
  cmd->add_option("--example", c.example, "manufactured example: 5.1 or 5.2")->required();
  cmd->add_option("--out", c.out, "output CSV file")->required();
  cmd->add_option("--alpha", c.alpha, "control cost (default: example value)");
  if (!solver_options) return;
  cmd->add_option("--beta", c.beta, "penalty parameter (default: example value)");
  cmd->add_option("--gamma", c.gamma, "correction relaxation in (0, 2)");
  cmd->add_option("--eps", c.eps, "stop once the squared H-norm increment is below this");
  cmd->add_option("--kmax", c.kmax, "iteration cap");
  cmd->add_option("--threads", c.threads, "worker threads");
}

SolverConfig solver_config(const Common& c, const ManufacturedProblem& p) {
  SolverConfig cfg;
  cfg.beta = c.beta.value_or(p.beta);
  cfg.gamma = c.gamma;
  cfg.epsilon = c.eps;
  cfg.max_iterations = c.kmax;
  cfg.threads = c.threads;
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

void close_output(std::ofstream& os, const std::string& path) {
  os.close();
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel splitting solver for parabolic optimal control"};
  app.require_subcommand(1);

  Common conv, iter, bench, box;

  auto* converge = app.add_subcommand("converge", "discretization error study over mesh levels");
  add_common(converge, conv, true);
  std::vector<int> levels{4, 8, 16, 32};
  std::string mode = "oracle";
  converge->add_option("--levels", levels, "cells per side, ascending")->delimiter(',');
  converge->add_option("--mode", mode, "oracle or splitting")->check(CLI::IsMember({"oracle", "splitting"}));

  auto* iterate = app.add_subcommand("iterate", "H-norm history of the splitting iteration");
  add_common(iterate, iter, true);
  int iter_n = 4;
  iterate->add_option("--n", iter_n, "cells per side")->required();

  auto* benchmark_cmd = app.add_subcommand("bench", "thread scaling of a fixed iteration count");
  add_common(benchmark_cmd, bench, false);
  int bench_n = 32;
  int bench_k = 100;
  std::vector<int> thread_counts{1, 2, 4, 8};
  benchmark_cmd->add_option("--n", bench_n, "cells per side")->required();
  benchmark_cmd->add_option("--k", bench_k, "iterations per run");
  benchmark_cmd->add_option("--threads", thread_counts, "thread counts")->delimiter(',');
  benchmark_cmd->add_option("--beta", bench.beta, "penalty parameter (default: example value)");

  auto* box_cmd = app.add_subcommand("box", "splitting with state bounds");
  add_common(box_cmd, box, true);
  int box_n = 8;
  double lower = 0.0;
  double upper = 0.8;
  box_cmd->add_option("--n", box_n, "cells per side")->required();
  box_cmd->add_option("--lower", lower, "lower state bound")->required();
  box_cmd->add_option("--upper", upper, "upper state bound")->required();
  std::optional<double> copy_scale;
  box_cmd->add_option("--copy-scale", copy_scale, "scale c of the copy constraint c (Y - P) = 0 (default 0.1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*converge) {
      const auto p = example_by_name(conv.example, conv.alpha);
      const auto rows = convergence_study(p, levels, solver_config(conv, p),
                                          mode == "oracle" ? SolveMode::Oracle : SolveMode::Splitting);
      auto os = open_output(conv.out);
      write_convergence_csv(os, rows);
      close_output(os, conv.out);
      for (const auto& r : rows) {
        std::cout << "n=" << r.level << " err_y=" << format_number(r.err_y_final)
                  << " err_u=" << format_number(r.err_u_spacetime) << " order_y=" << format_number(r.order_y)
                  << " order_u=" << format_number(r.order_u) << '\n';
      }
    } else if (*iterate) {
      const auto p = example_by_name(iter.example, iter.alpha);
      const auto records = iteration_history(build_level(p, iter_n), solver_config(iter, p));
      auto os = open_output(iter.out);
      write_iteration_csv(os, records);
      close_output(os, iter.out);
      std::cout << records.size() << " iterations written to " << iter.out << '\n';
    } else if (*benchmark_cmd) {
      const auto p = example_by_name(bench.example, bench.alpha);
      SolverConfig cfg;
      cfg.beta = bench.beta.value_or(p.beta);
      for (int t : thread_counts) {
        if (t < 1) throw std::invalid_argument("thread counts must be positive");
      }
      const auto report = benchmark(build_level(p, bench_n), cfg, bench_k, thread_counts);
      auto os = open_output(bench.out);
      write_benchmark_csv(os, report.rows);
      close_output(os, bench.out);
      for (const auto& r : report.rows) {
        std::cout << "threads=" << r.threads << " seconds=" << format_number(r.seconds_total)
                  << " psf=" << format_number(r.psf) << '\n';
      }
      if (!report.identical) throw std::runtime_error("iterates differ across thread counts");
    } else if (*box_cmd) {
      const auto p = example_by_name(box.example, box.alpha);
      SolverConfig cfg = solver_config(box, p);
      cfg.bounds = Bounds{lower, upper};
      if (copy_scale) cfg.copy_scale = *copy_scale;
      cfg.validate();
      const BoxRun run = run_box(build_level(p, box_n), cfg);
      auto os = open_output(box.out);
      write_box_csv(os, run.records);
      close_output(os, box.out);
      const auto& rep = run.result.report;
      std::cout << rep.iterations << " iterations, converged=" << (rep.converged ? "yes" : "no")
                << " |Y-P|=" << format_number(rep.box_gap_history.empty() ? 0.0 : rep.box_gap_history.back())
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "parasplit: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
