#pragma once

#include "fhn/dg.hpp"
#include "fhn/fom.hpp"
#include "fhn/optimizer.hpp"
#include "fhn/reduction.hpp"
#include "fhn/rom.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fhn {

/// Everything a run depends on. Loaded from JSON; unknown keys are errors.
struct ExperimentConfig {
  FhnParams params;
  double L = 65.0;
  double H = 4.0;
  double dx = 0.5;
  double gamma = kDefaultPenalty;
  // Initial activator pulse y0 = 1 on pulse_begin <= x <= pulse_end.
  double pulse_begin = 2.0;
  double pulse_end = 2.2;

  double ric_threshold = 0.9999;
  std::optional<int> k;  // fixed POD rank; otherwise chosen by RIC
  int deim_rank = 0;     // 0: same as k
  int dmd_rank = 0;      // 0: same as k

  OptimizeConfig optimizer;
  std::vector<Backend> backends{Backend::fom, Backend::pod, Backend::pod_deim, Backend::pod_dmd};
  std::vector<int> sweep_k;

  std::string out_dir = "out";
  bool write_fields = true;
  bool write_models = true;
  bool use_cache = true;
  int workers = 1;

  /// "reference" (dx = 0.5) or "coarse" (dx = 1.0).
  static ExperimentConfig preset(const std::string& name);
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;

  /// Throws InputError; returns warnings for questionable but legal values.
  std::vector<std::string> validate() const;
  bool has(Backend b) const;
};

/// FNV-1a over the canonical JSON of the full config and of the part that
/// determines the full-order stages.
std::uint64_t fnv1a(const std::string& bytes);
std::string config_hash(const ExperimentConfig& cfg);
std::string full_order_hash(const ExperimentConfig& cfg);

/// Full-order data shared by all back-ends.
struct FullOrderStage {
  std::shared_ptr<DgSpace> space;
  Operators ops_y, ops_z;
  Vector y0, z0;
  Trajectory natural;
  int target_step = 0;
  Vector y_T, z_T;
  double assembly_seconds = 0.0;
  double natural_seconds = 0.0;

  // Present when the FOM back-end was optimized.
  std::optional<OptimizeResult> fom;
  Trajectory fom_state;
  bool from_cache = false;

  int dofs() const { return space->num_dofs(); }
  ControlGrid zero_control(const OptimizeConfig& cfg) const;
};

/// Index of the stored step nearest T/2.
int target_step(const FhnParams& params);

/// Mesh, operators, uncontrolled run, desired states and (optionally) the
/// FOM optimization. Cached under <out>/cache/<hash> when enabled.
FullOrderStage prepare_full_order(const ExperimentConfig& cfg, bool optimize_fom);

/// Objective and inner product for the FOM back-end.
ObjectiveFn full_order_objective(const FullOrderStage& stage, const FhnParams& params);
InnerProductFn control_inner_product(const FullOrderStage& stage, const FhnParams& params);

struct SnapshotStage {
  SnapshotSet Y, Z, G, G_head, G_tail;
  PodBasis pod_y, pod_z;
  int k = 0;
  double seconds = 0.0;
};

/// Snapshots of the uncontrolled run and the M-orthonormal POD bases.
SnapshotStage build_snapshots(const FullOrderStage& stage, const ExperimentConfig& cfg,
                              std::optional<int> k_override = {});

struct BackendResult {
  Backend backend = Backend::fom;
  int k = 0;
  int deim_rank = 0;
  int dmd_rank = 0;
  OptimizeResult optimum;
  double J = 0.0;        // objective of the back-end at its optimum
  double J_full = 0.0;   // full-order objective at the same control
  double error_u = 0.0;  // relative Frobenius errors against the FOM optimum
  double error_y = 0.0;
  double error_z = 0.0;
  double online_seconds = 0.0;   // optimization loop only
  double offline_seconds = 0.0;  // assembly, snapshots, bases, projection
  std::vector<Vector> y, z;      // lifted optimal trajectories
  std::optional<DeimModel> deim;
  std::optional<DmdModel> dmd;
  std::vector<std::string> warnings;

  double total_seconds() const { return online_seconds + offline_seconds; }
};

/// Runs one reduced back-end on the shared stages.
BackendResult run_reduced(const FullOrderStage& fos, const SnapshotStage& snaps, const ExperimentConfig& cfg,
                          Backend backend);

/// FOM back-end result assembled from the stage.
BackendResult full_order_result(const FullOrderStage& fos, const ExperimentConfig& cfg);

struct ComparisonReport {
  std::string config_hash;
  std::string full_order_hash;
  int k = 0;
  double ric = 0.0;
  Vector sigma_y, sigma_z, sigma_g;
  std::vector<BackendResult> results;
  std::vector<std::string> warnings;

  const BackendResult* find(Backend b) const;
  /// FOM seconds over back-end seconds, online or including offline cost.
  std::optional<double> speedup(Backend b, bool include_offline = false) const;
};

/// The full protocol; writes report.csv, timings.csv, iters.csv,
/// singular_values_{y,z,g}.csv, fields/ and manifest.json.
ComparisonReport run_experiment(const ExperimentConfig& cfg);

struct SweepPoint {
  int k = 0;
  Backend backend = Backend::pod;
  bool ok = false;
  std::string error;
  double J = 0.0;
  double J_full = 0.0;
  double error_u = 0.0, error_y = 0.0, error_z = 0.0;
  int iterations = 0;
  double online_seconds = 0.0;
};

/// Reduced optimizations for every k in k_list and every reduced back-end,
/// run concurrently up to cfg.workers. Writes sweep.csv and sweep_timings.csv.
std::vector<SweepPoint> mode_sweep(const ExperimentConfig& cfg, const std::vector<int>& k_list);

/// Writes report artifacts for an already computed report.
void write_report(const ExperimentConfig& cfg, const ComparisonReport& report, const FullOrderStage& fos);

}  // namespace fhn
