// Command-line front end for the FHN optimal-control experiments.
#include "fhn/harness.hpp"
#include "fhn/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace fhn;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string backend;
  std::string out;
  int k = 0;
  int workers = 0;
  bool no_cache = false;
  bool no_fields = false;
  std::vector<int> k_list;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = ExperimentConfig::load(o.config);
  else if (!o.preset.empty()) cfg = ExperimentConfig::preset(o.preset);
  if (!o.config.empty() && !o.preset.empty()) {
    ExperimentConfig p = ExperimentConfig::preset(o.preset);
    cfg.dx = p.dx;
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.k > 0) cfg.k = o.k;
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.no_cache) cfg.use_cache = false;
  if (o.no_fields) cfg.write_fields = false;
  if (!o.backend.empty()) cfg.backends = {parse_backend(o.backend)};
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
  return cfg;
}

void print_summary(const ComparisonReport& rep) {
  std::printf("%-9s %12s %5s %5s %7s %9s %10s %10s %10s\n", "backend", "J", "CG", "LS", "Newton", "seconds",
              "speedup", "err_y", "err_z");
  for (const auto& r : rep.results) {
    const auto& o = r.optimum.report;
    const auto s = rep.speedup(r.backend);
    std::printf("%-9s %12.4e %5d %5d %7s %9.3f %10s %10.3e %10.3e\n", to_string(r.backend).c_str(), r.J,
                o.iterations, o.line_searches,
                o.mean_newton_iterations ? io::format_double(*o.mean_newton_iterations).substr(0, 6).c_str() : "-",
                r.online_seconds, s ? io::format_double(*s).substr(0, 8).c_str() : "-", r.error_y, r.error_z);
  }
  std::printf("k = %d (RIC %.6f)\n", rep.k, rep.ric);
}

int cmd_solve(const Options& o) {
  ExperimentConfig cfg = resolve(o);
  const FullOrderStage fos = prepare_full_order(cfg, false);
  const fs::path out = fs::path(cfg.out_dir) / "solve";
  io::CsvTable t{{"step", "time", "integral_y", "integral_z"}, {}};
  for (size_t n = 0; n < fos.natural.first.size(); ++n) {
    t.add_row({std::to_string(n), io::format_double(fos.natural.times[n]),
               io::format_double(integrate(*fos.space, fos.natural.first[n])),
               io::format_double(integrate(*fos.space, fos.natural.second[n]))});
    if (cfg.write_fields) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%04zu.vtk", n);
      io::write_vtk((out / "fields" / name).string(), *fos.space,
                    {{"y", &fos.natural.first[n]}, {"z", &fos.natural.second[n]}});
    }
  }
  t.write((out / "trajectory.csv").string());
  std::printf("dofs %d, steps %d, mean Newton iterations %.3f, %.3f s\n", fos.dofs(), cfg.params.steps(),
              fos.natural.mean_newton_iterations(), fos.natural_seconds);
  return 0;
}

int cmd_reduce(const Options& o) {
  ExperimentConfig cfg = resolve(o);
  const FullOrderStage fos = prepare_full_order(cfg, false);
  const SnapshotStage s = build_snapshots(fos, cfg);
  const fs::path out = fs::path(cfg.out_dir) / "reduce";
  io::singular_value_table(s.pod_y.singular_values).write((out / "singular_values_y.csv").string());
  io::singular_value_table(s.pod_z.singular_values).write((out / "singular_values_z.csv").string());
  io::singular_value_table(Eigen::BDCSVD<Matrix>(s.G.data).singularValues())
      .write((out / "singular_values_g.csv").string());
  io::write_pod(out.string(), "pod_y", s.pod_y);
  io::write_pod(out.string(), "pod_z", s.pod_z);
  const int m = std::min(cfg.deim_rank > 0 ? cfg.deim_rank : s.k, numerical_rank(s.G.data));
  const DeimModel deim = build_deim(s.G, s.pod_y, m);
  io::write_deim(out.string(), "deim", deim);
  const DmdModel dmd = build_dmd(s.G_head, s.G_tail, cfg.params.dt, cfg.dmd_rank > 0 ? cfg.dmd_rank : s.k);
  io::write_dmd(out.string(), "dmd", dmd);
  io::write_matrix_market((out / "mass.mtx").string(), fos.ops_y.mass);
  io::write_matrix_market((out / "stiffness.mtx").string(), fos.ops_y.stiffness);
  io::write_matrix_market((out / "convection.mtx").string(), fos.ops_y.convection);
  std::printf("k = %d (RIC %.6f), DEIM m = %d (cond %.3e), DMD rank %d (residual %.3e)\n", s.k, s.pod_y.ric, m,
              deim.condition, dmd.rank, dmd.residual);
  return 0;
}

int cmd_compare(const Options& o, bool single) {
  ExperimentConfig cfg = resolve(o);
  if (single && o.backend.empty()) throw InputError("optimize needs --backend");
  const ComparisonReport rep = run_experiment(cfg);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  print_summary(rep);
  return 0;
}

int cmd_sweep(const Options& o) {
  ExperimentConfig cfg = resolve(o);
  std::vector<int> ks = !o.k_list.empty() ? o.k_list : cfg.sweep_k;
  if (ks.empty()) {
    for (int k = 2; k <= 14; ++k) ks.push_back(k);
  }
  const auto points = mode_sweep(cfg, ks);
  std::printf("%4s %-9s %12s %10s %10s %10s\n", "k", "backend", "J", "err_u", "err_y", "err_z");
  for (const auto& p : points) {
    if (p.ok) {
      std::printf("%4d %-9s %12.4e %10.3e %10.3e %10.3e\n", p.k, to_string(p.backend).c_str(), p.J, p.error_u,
                  p.error_y, p.error_z);
    } else {
      std::printf("%4d %-9s failed: %s\n", p.k, to_string(p.backend).c_str(), p.error.c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order optimal control of the convective FitzHugh-Nagumo system"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "reference or coarse");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--k", o.k, "fixed POD rank")->check(CLI::PositiveNumber);
    sub->add_option("--workers", o.workers, "concurrent sweep runs")->check(CLI::PositiveNumber);
    sub->add_flag("--no-cache", o.no_cache, "recompute full-order stages");
    sub->add_flag("--no-fields", o.no_fields, "skip VTK output");
  };
  auto* solve = app.add_subcommand("solve", "uncontrolled full-order solve");
  auto* reduce = app.add_subcommand("reduce", "build POD, DEIM and DMD models");
  auto* optimize = app.add_subcommand("optimize", "optimize with one back-end");
  auto* compare = app.add_subcommand("compare", "full pipeline over the selected back-ends");
  auto* sweep = app.add_subcommand("sweep", "reduced optimizations over a list of ranks");
  for (auto* s : {solve, reduce, optimize, compare, sweep}) common(s);
  optimize->add_option("--backend", o.backend, "fom, pod, pod-deim or pod-dmd")->required();
  compare->add_option("--backend", o.backend, "restrict to one back-end");
  sweep->add_option("--ks", o.k_list, "ranks to sweep (default 2..14)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return cmd_solve(o);
    if (reduce->parsed()) return cmd_reduce(o);
    if (optimize->parsed()) return cmd_compare(o, true);
    if (compare->parsed()) return cmd_compare(o, false);
    if (sweep->parsed()) return cmd_sweep(o);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
