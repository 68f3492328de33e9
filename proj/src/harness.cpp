#include "fhn/harness.hpp"

#include "fhn/io.hpp"
#include "fhn/mesh.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

namespace fhn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kCacheVersion = "fhn-cache-2";

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const double kNaN = std::numeric_limits<double>::quiet_NaN();

json params_json(const FhnParams& p) {
  return {{"c1", p.c1}, {"c2", p.c2}, {"c3", p.c3}, {"eps", p.eps}, {"D1", p.D1}, {"D2", p.D2},
          {"vmax", p.vmax}, {"lambda", p.lambda}, {"T", p.T}, {"dt", p.dt}};
}

json optimizer_json(const OptimizeConfig& o) {
  return {{"stop_tol", o.stop_tol},
          {"gradient_tol", o.gradient_tol},
          {"max_iterations", o.max_iterations},
          {"initial_step", o.initial_step},
          {"backtrack", o.backtrack},
          {"armijo", o.armijo},
          {"max_line_search", o.max_line_search},
          {"restart_every", o.restart_every},
          {"lower", o.lower},
          {"upper", o.upper}};
}

json full_order_json(const ExperimentConfig& c) {
  json j = params_json(c.params);
  j["L"] = c.L;
  j["H"] = c.H;
  j["dx"] = c.dx;
  j["gamma"] = c.gamma;
  j["pulse_begin"] = c.pulse_begin;
  j["pulse_end"] = c.pulse_end;
  j["optimizer"] = optimizer_json(c.optimizer);
  return j;
}

template <class T>
T get(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw InputError("config key '" + key + "' has the wrong type");
  }
}

void apply_optimizer(OptimizeConfig& o, const json& j) {
  if (!j.is_object()) throw InputError("config key 'optimizer' must be an object");
  for (const auto& [key, v] : j.items()) {
    const std::string name = "optimizer." + key;
    if (key == "stop_tol") o.stop_tol = get<double>(v, name);
    else if (key == "gradient_tol") o.gradient_tol = get<double>(v, name);
    else if (key == "max_iterations") o.max_iterations = get<int>(v, name);
    else if (key == "initial_step") o.initial_step = get<double>(v, name);
    else if (key == "backtrack") o.backtrack = get<double>(v, name);
    else if (key == "armijo") o.armijo = get<double>(v, name);
    else if (key == "max_line_search") o.max_line_search = get<int>(v, name);
    else if (key == "restart_every") o.restart_every = get<int>(v, name);
    else if (key == "lower") o.lower = get<double>(v, name);
    else if (key == "upper") o.upper = get<double>(v, name);
    else throw InputError("unknown config key '" + name + "'");
  }
}

// Evaluates and remembers the last state so a value-only call followed by a
// gradient call at the same point solves the state once.
template <class State>
struct StateMemo {
  Vector u;
  State state;
  bool valid = false;

  template <class Solve>
  const State& get(const ControlGrid& control, Solve&& solve) {
    if (!valid || u.size() != control.values.size() || !(u.array() == control.values.array()).all()) {
      state = solve(control);
      u = control.values;
      valid = true;
    }
    return state;
  }
};

void save_natural(const std::string& path, const Trajectory& t, double seconds) {
  io::BinaryWriter w(path);
  w.vectors(t.first);
  w.vectors(t.second);
  w.doubles(t.times);
  w.integer(t.newton_iterations);
  w.scalar(seconds);
  w.close();
}

Trajectory load_trajectory(io::BinaryReader& r) {
  Trajectory t;
  t.first = r.vectors();
  t.second = r.vectors();
  t.times = r.doubles();
  t.newton_iterations = static_cast<int>(r.integer());
  return t;
}

void save_fom(const std::string& path, const OptimizeResult& res, const Trajectory& state) {
  io::BinaryWriter w(path);
  w.vector(res.control.values);
  const OptimizeReport& rep = res.report;
  w.scalar(rep.final_value);
  w.integer(rep.iterations);
  w.integer(rep.line_search_trials);
  w.integer(rep.line_searches);
  w.scalar(rep.mean_newton_iterations.value_or(kNaN));
  w.scalar(rep.seconds);
  w.integer(static_cast<long>(rep.status));
  w.doubles(rep.history);
  w.integer(static_cast<long>(rep.log.size()));
  for (const auto& rec : rep.log) {
    w.integer(rec.iteration);
    w.scalar(rec.value);
    w.scalar(rec.step);
    w.scalar(rec.projected_gradient_norm);
    w.integer(rec.trials);
  }
  w.vectors(state.first);
  w.vectors(state.second);
  w.doubles(state.times);
  w.integer(state.newton_iterations);
  w.close();
}

void load_fom(const std::string& path, OptimizeResult& res, Trajectory& state) {
  io::BinaryReader r(path);
  res.control.values = r.vector();
  OptimizeReport& rep = res.report;
  rep.final_value = r.scalar();
  rep.iterations = static_cast<int>(r.integer());
  rep.line_search_trials = static_cast<int>(r.integer());
  rep.line_searches = static_cast<int>(r.integer());
  const double mean = r.scalar();
  if (!std::isnan(mean)) rep.mean_newton_iterations = mean;
  rep.seconds = r.scalar();
  rep.status = static_cast<OptimizeStatus>(r.integer());
  rep.history = r.doubles();
  const long n = r.integer();
  for (long i = 0; i < n; ++i) {
    IterationRecord rec;
    rec.iteration = static_cast<int>(r.integer());
    rec.value = r.scalar();
    rec.step = r.scalar();
    rec.projected_gradient_norm = r.scalar();
    rec.trials = static_cast<int>(r.integer());
    rep.log.push_back(rec);
  }
  state = load_trajectory(r);
}

std::string fmt(double v) { return io::format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

double relative_control_error(const ControlGrid& ref, const ControlGrid& u) {
  const double denom = ref.values.norm();
  if (denom == 0.0) return (u.values - ref.values).norm() == 0.0 ? 0.0 : kNaN;
  return (u.values - ref.values).norm() / denom;
}

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "reference") c.dx = 0.5;
  else if (name == "coarse") c.dx = 1.0;
  else throw InputError("unknown preset '" + name + "' (expected reference or coarse)");
  return c;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");

  ExperimentConfig c;
  if (j.contains("preset")) c = preset(get<std::string>(j["preset"], "preset"));
  FhnParams& p = c.params;
  for (const auto& [key, v] : j.items()) {
    if (key == "preset") continue;
    else if (key == "c1") p.c1 = get<double>(v, key);
    else if (key == "c2") p.c2 = get<double>(v, key);
    else if (key == "c3") p.c3 = get<double>(v, key);
    else if (key == "eps") p.eps = get<double>(v, key);
    else if (key == "D1") p.D1 = get<double>(v, key);
    else if (key == "D2") p.D2 = get<double>(v, key);
    else if (key == "vmax") p.vmax = get<double>(v, key);
    else if (key == "lambda") p.lambda = get<double>(v, key);
    else if (key == "T") p.T = get<double>(v, key);
    else if (key == "dt") p.dt = get<double>(v, key);
    else if (key == "L") c.L = get<double>(v, key);
    else if (key == "H") c.H = get<double>(v, key);
    else if (key == "dx") c.dx = get<double>(v, key);
    else if (key == "gamma") c.gamma = get<double>(v, key);
    else if (key == "pulse_begin") c.pulse_begin = get<double>(v, key);
    else if (key == "pulse_end") c.pulse_end = get<double>(v, key);
    else if (key == "ric_threshold") c.ric_threshold = get<double>(v, key);
    else if (key == "k") c.k = v.is_null() ? std::nullopt : std::optional<int>(get<int>(v, key));
    else if (key == "deim_rank") c.deim_rank = get<int>(v, key);
    else if (key == "dmd_rank") c.dmd_rank = get<int>(v, key);
    else if (key == "optimizer") apply_optimizer(c.optimizer, v);
    else if (key == "backends") {
      c.backends.clear();
      for (const auto& b : get<std::vector<std::string>>(v, key)) c.backends.push_back(parse_backend(b));
    } else if (key == "sweep_k") c.sweep_k = get<std::vector<int>>(v, key);
    else if (key == "out") c.out_dir = get<std::string>(v, key);
    else if (key == "write_fields") c.write_fields = get<bool>(v, key);
    else if (key == "write_models") c.write_models = get<bool>(v, key);
    else if (key == "cache") c.use_cache = get<bool>(v, key);
    else if (key == "workers") c.workers = get<int>(v, key);
    else throw InputError("unknown config key '" + key + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json j = full_order_json(*this);
  j["ric_threshold"] = ric_threshold;
  j["k"] = k ? json(*k) : json(nullptr);
  j["deim_rank"] = deim_rank;
  j["dmd_rank"] = dmd_rank;
  std::vector<std::string> names;
  for (Backend b : backends) names.push_back(to_string(b));
  j["backends"] = names;
  j["sweep_k"] = sweep_k;
  j["out"] = out_dir;
  j["write_fields"] = write_fields;
  j["write_models"] = write_models;
  j["cache"] = use_cache;
  j["workers"] = workers;
  return j.dump(2);
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> warnings = params.validate();
  if (!(L > 0.0 && H > 0.0 && dx > 0.0)) throw InputError("L, H and dx must be positive");
  if (std::abs(L / dx - std::round(L / dx)) > 1e-9 || std::abs(H / dx - std::round(H / dx)) > 1e-9) {
    throw InputError("L and H must be integer multiples of dx");
  }
  if (!(gamma > 0.0)) throw InputError("gamma must be positive");
  if (gamma < kPenaltyStabilityThreshold) {
    warnings.push_back("gamma below the stability threshold; the diffusion matrix may be indefinite");
  }
  if (!(pulse_begin <= pulse_end)) throw InputError("pulse_begin must not exceed pulse_end");
  if (!(ric_threshold > 0.0 && ric_threshold <= 1.0)) throw InputError("ric_threshold must lie in (0, 1]");
  if (k && *k < 1) throw InputError("k must be positive");
  if (deim_rank < 0 || dmd_rank < 0) throw InputError("deim_rank and dmd_rank must be non-negative");
  optimizer.validate();
  if (backends.empty()) throw InputError("no back-end selected");
  if (std::set<Backend>(backends.begin(), backends.end()).size() != backends.size()) {
    throw InputError("duplicate back-end in selection");
  }
  for (int kk : sweep_k) {
    if (kk < 1) throw InputError("sweep_k entries must be positive");
  }
  if (workers < 1) throw InputError("workers must be at least 1");
  if (out_dir.empty()) throw InputError("output directory is empty");
  return warnings;
}

bool ExperimentConfig::has(Backend b) const {
  return std::find(backends.begin(), backends.end(), b) != backends.end();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {
std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
  json j = json::parse(cfg.to_json());
  // Where results go and how fast they are produced does not change them.
  for (const char* key : {"out", "cache", "workers", "write_fields", "write_models"}) j.erase(key);
  return hex(fnv1a(j.dump()));
}

std::string full_order_hash(const ExperimentConfig& cfg) {
  json j = full_order_json(cfg);
  j["version"] = kCacheVersion;
  return hex(fnv1a(j.dump()));
}

// ---------------------------------------------------------------- full order

int target_step(const FhnParams& params) {
  const long n = std::lround(0.5 * params.T / params.dt);
  return static_cast<int>(std::clamp<long>(n, 0, params.steps()));
}

ControlGrid FullOrderStage::zero_control(const OptimizeConfig& cfg) const {
  return ControlGrid::zeros(dofs(), static_cast<int>(natural.first.size()) - 1, cfg.lower, cfg.upper);
}

ObjectiveFn full_order_objective(const FullOrderStage& stage, const FhnParams& params) {
  auto memo = std::make_shared<StateMemo<Trajectory>>();
  return [&stage, params, memo](const ControlGrid& u, bool need_gradient) {
    const Trajectory& s = memo->get(u, [&](const ControlGrid& c) {
      return solve_state(stage.ops_y, stage.ops_z, params, c, stage.y0, stage.z0);
    });
    Evaluation e;
    e.value = cost(params, s, u, stage.y_T, stage.z_T, stage.ops_y);
    e.newton_iterations = s.newton_iterations;
    e.state_steps = s.steps();
    if (need_gradient) {
      e.gradient = gradient(solve_adjoint(stage.ops_y, stage.ops_z, params, s, stage.y_T, stage.z_T), u, params);
    }
    return e;
  };
}

InnerProductFn control_inner_product(const FullOrderStage& stage, const FhnParams& params) {
  const double dt = params.dt;
  return [&stage, dt](const ControlGrid& a, const ControlGrid& b) {
    return control_inner(stage.ops_y.mass, dt, a, b);
  };
}

FullOrderStage prepare_full_order(const ExperimentConfig& cfg, bool optimize_fom) {
  FullOrderStage st;
  const FhnParams& p = cfg.params;
  auto t0 = std::chrono::steady_clock::now();
  st.space = std::make_shared<DgSpace>(std::make_shared<Mesh>(build_uniform_mesh(cfg.L, cfg.H, cfg.dx)));
  st.ops_y = assemble_operators(*st.space, p.D1, p.vmax, cfg.gamma);
  st.ops_z = assemble_operators(*st.space, p.D2, p.vmax, cfg.gamma);
  const double a = cfg.pulse_begin, b = cfg.pulse_end;
  st.y0 = project_initial(
      *st.space, [a, b](const Point& x) { return x.x >= a && x.x <= b ? 1.0 : 0.0; }, Breaklines{{a, b}, {}});
  st.z0 = Vector::Zero(st.space->num_dofs());
  st.assembly_seconds = seconds_since(t0);

  const fs::path cache_dir = fs::path(cfg.out_dir) / "cache" / full_order_hash(cfg);
  const fs::path natural_file = cache_dir / "natural.bin";
  const fs::path fom_file = cache_dir / "fom.bin";
  if (cfg.use_cache) fs::create_directories(cache_dir);

  bool cached_natural = false;
  if (cfg.use_cache && fs::exists(natural_file)) {
    io::BinaryReader r(natural_file.string());
    st.natural = load_trajectory(r);
    st.natural_seconds = r.scalar();
    cached_natural = true;
  } else {
    t0 = std::chrono::steady_clock::now();
    st.natural = solve_state(st.ops_y, st.ops_z, p,
                             ControlGrid::zeros(st.dofs(), p.steps(), cfg.optimizer.lower, cfg.optimizer.upper),
                             st.y0, st.z0);
    st.natural_seconds = seconds_since(t0);
    if (cfg.use_cache) save_natural(natural_file.string(), st.natural, st.natural_seconds);
  }
  st.target_step = target_step(p);
  st.y_T = st.natural.first[st.target_step];
  st.z_T = st.natural.second[st.target_step];
  st.from_cache = cached_natural;

  if (optimize_fom) {
    OptimizeResult res;
    if (cfg.use_cache && fs::exists(fom_file)) {
      load_fom(fom_file.string(), res, st.fom_state);
      res.control.dofs = st.dofs();
      res.control.steps = p.steps();
      res.control.lower = cfg.optimizer.lower;
      res.control.upper = cfg.optimizer.upper;
    } else {
      st.from_cache = false;
      OptimizeConfig oc = cfg.optimizer;
      oc.variant = CgVariant::nonlinear_pr_plus;
      res = minimize(full_order_objective(st, p), control_inner_product(st, p), st.zero_control(oc), oc);
      st.fom_state = solve_state(st.ops_y, st.ops_z, p, res.control, st.y0, st.z0);
      if (cfg.use_cache) save_fom(fom_file.string(), res, st.fom_state);
    }
    st.fom = std::move(res);
  }
  return st;
}

// ---------------------------------------------------------------- snapshots

SnapshotStage build_snapshots(const FullOrderStage& fos, const ExperimentConfig& cfg, std::optional<int> k_override) {
  const auto t0 = std::chrono::steady_clock::now();
  SnapshotStage s;
  const Trajectory& nat = fos.natural;
  s.Y = make_snapshots(nat.first, nat.times, "uncontrolled activator");
  s.Z = make_snapshots(nat.second, nat.times, "uncontrolled inhibitor");
  std::vector<Vector> g;
  g.reserve(nat.first.size());
  for (const Vector& y : nat.first) g.push_back(reaction_vector(*fos.space, y, cfg.params.reaction()));
  std::vector<double> head_t(nat.times.begin(), nat.times.end() - 1), tail_t(nat.times.begin() + 1, nat.times.end());
  s.G = make_snapshots(g, nat.times, "uncontrolled nonlinearity");
  s.G_head = make_snapshots(std::vector<Vector>(g.begin(), g.end() - 1), head_t, "nonlinearity t0..tN-1");
  s.G_tail = make_snapshots(std::vector<Vector>(g.begin() + 1, g.end()), tail_t, "nonlinearity t1..tN");

  const std::optional<int> fixed = k_override ? k_override : cfg.k;
  s.pod_y = fixed ? build_pod_rank(s.Y, fos.ops_y.mass, *fixed) : build_pod(s.Y, fos.ops_y.mass, cfg.ric_threshold);
  s.k = s.pod_y.rank;
  s.pod_z = build_pod_rank(s.Z, fos.ops_z.mass, s.k);
  s.seconds = seconds_since(t0);
  return s;
}

// ---------------------------------------------------------------- back-ends

BackendResult full_order_result(const FullOrderStage& fos, const ExperimentConfig& cfg) {
  if (!fos.fom) throw InputError("full-order optimum was not computed");
  BackendResult r;
  r.backend = Backend::fom;
  r.k = fos.dofs();
  r.optimum = *fos.fom;
  r.J = r.optimum.report.final_value;
  r.J_full = r.J;
  r.online_seconds = r.optimum.report.seconds;
  r.offline_seconds = fos.assembly_seconds + fos.natural_seconds;
  r.y = fos.fom_state.first;
  r.z = fos.fom_state.second;
  (void)cfg;
  return r;
}

BackendResult run_reduced(const FullOrderStage& fos, const SnapshotStage& snaps, const ExperimentConfig& cfg,
                          Backend backend) {
  if (backend == Backend::fom) throw InputError("run_reduced: fom is not a reduced back-end");
  const FhnParams& p = cfg.params;
  BackendResult r;
  r.backend = backend;
  r.k = snaps.k;

  auto t0 = std::chrono::steady_clock::now();
  const DeimModel* deim = nullptr;
  const DmdModel* dmd = nullptr;
  if (backend == Backend::pod_deim) {
    const int available = numerical_rank(snaps.G.data);
    int m = cfg.deim_rank > 0 ? cfg.deim_rank : snaps.k;
    if (m > available) {
      r.warnings.push_back("DEIM rank " + std::to_string(m) + " capped at nonlinear snapshot rank " +
                           std::to_string(available));
      m = available;
    }
    r.deim = build_deim(snaps.G, snaps.pod_y, m);
    r.deim_rank = m;
    deim = &*r.deim;
  } else if (backend == Backend::pod_dmd) {
    const int rank = cfg.dmd_rank > 0 ? cfg.dmd_rank : snaps.k;
    r.dmd = build_dmd(snaps.G_head, snaps.G_tail, p.dt, rank);
    r.dmd_rank = r.dmd->rank;
    for (const auto& w : r.dmd->warnings) r.warnings.push_back(w);
    dmd = &*r.dmd;
  }
  const ReducedOperators rops = reduce_operators(fos.ops_y, fos.ops_z, snaps.pod_y, snaps.pod_z, backend, p, deim, dmd);
  const Vector y0r = project(rops.psi_y, rops.mass, fos.y0);
  const Vector z0r = project(rops.psi_z, rops.mass, fos.z0);
  const ReducedTarget target = reduce_target(rops, fos.y_T, fos.z_T);
  r.offline_seconds = fos.assembly_seconds + fos.natural_seconds + snaps.seconds + seconds_since(t0);

  auto memo = std::make_shared<StateMemo<ReducedTrajectory>>();
  const bool linear = backend == Backend::pod_dmd;
  ObjectiveFn objective = [&, memo](const ControlGrid& u, bool need_gradient) {
    const ReducedTrajectory& s =
        memo->get(u, [&](const ControlGrid& c) { return solve_reduced_state(rops, p, c, y0r, z0r); });
    Evaluation e;
    e.value = reduced_cost(rops, p, s, u, target);
    if (!linear) {
      e.newton_iterations = s.newton_iterations;
      e.state_steps = s.steps();
    }
    if (need_gradient) e.gradient = reduced_gradient(rops, solve_reduced_adjoint(rops, p, s, target), u, p);
    return e;
  };
  OptimizeConfig oc = cfg.optimizer;
  oc.variant = linear ? CgVariant::linear : CgVariant::nonlinear_pr_plus;
  r.optimum = minimize(objective, control_inner_product(fos, p), fos.zero_control(oc), oc);
  r.online_seconds = r.optimum.report.seconds;
  r.J = r.optimum.report.final_value;

  const ReducedTrajectory s = solve_reduced_state(rops, p, r.optimum.control, y0r, z0r);
  r.y = lift(rops.psi_y, s.first);
  r.z = lift(rops.psi_z, s.second);
  const Trajectory full = solve_state(fos.ops_y, fos.ops_z, p, r.optimum.control, fos.y0, fos.z0);
  r.J_full = cost(p, full, r.optimum.control, fos.y_T, fos.z_T, fos.ops_y);
  if (fos.fom) {
    r.error_u = relative_control_error(fos.fom->control, r.optimum.control);
    r.error_y = frobenius_error(fos.fom_state.first, r.y);
    r.error_z = frobenius_error(fos.fom_state.second, r.z);
  } else {
    r.error_u = r.error_y = r.error_z = kNaN;
  }
  return r;
}

// ---------------------------------------------------------------- report

const BackendResult* ComparisonReport::find(Backend b) const {
  for (const auto& r : results) {
    if (r.backend == b) return &r;
  }
  return nullptr;
}

std::optional<double> ComparisonReport::speedup(Backend b, bool include_offline) const {
  const BackendResult* fom = find(Backend::fom);
  const BackendResult* other = find(b);
  if (!fom || !other) return std::nullopt;
  const double num = include_offline ? fom->total_seconds() : fom->online_seconds;
  const double den = include_offline ? other->total_seconds() : other->online_seconds;
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

void write_report(const ExperimentConfig& cfg, const ComparisonReport& rep, const FullOrderStage& fos) {
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  io::CsvTable report{{"backend", "k", "deim_rank", "dmd_rank", "J", "J_full", "cg_iterations", "line_searches",
                       "line_search_trials", "mean_newton_iterations", "status", "error_u", "error_y", "error_z"},
                      {}};
  io::CsvTable timings{{"backend", "online_seconds", "total_seconds", "speedup_online", "speedup_total"}, {}};
  io::CsvTable iters{{"backend", "iteration", "J", "step", "projected_gradient_norm", "trials"}, {}};
  for (const auto& r : rep.results) {
    const OptimizeReport& o = r.optimum.report;
    report.add_row({to_string(r.backend), std::to_string(r.k), std::to_string(r.deim_rank),
                    std::to_string(r.dmd_rank), fmt(r.J), fmt(r.J_full), std::to_string(o.iterations),
                    std::to_string(o.line_searches), std::to_string(o.line_search_trials),
                    fmt(o.mean_newton_iterations), to_string(o.status), fmt(r.error_u), fmt(r.error_y),
                    fmt(r.error_z)});
    timings.add_row({to_string(r.backend), fmt(r.online_seconds), fmt(r.total_seconds()),
                     fmt(rep.speedup(r.backend, false)), fmt(rep.speedup(r.backend, true))});
    for (const auto& rec : o.log) {
      iters.add_row({to_string(r.backend), std::to_string(rec.iteration), fmt(rec.value), fmt(rec.step),
                     fmt(rec.projected_gradient_norm), std::to_string(rec.trials)});
    }
  }
  report.write((out / "report.csv").string());
  timings.write((out / "timings.csv").string());
  iters.write((out / "iters.csv").string());
  io::singular_value_table(rep.sigma_y).write((out / "singular_values_y.csv").string());
  io::singular_value_table(rep.sigma_z).write((out / "singular_values_z.csv").string());
  io::singular_value_table(rep.sigma_g).write((out / "singular_values_g.csv").string());

  std::vector<std::string> artifacts{"report.csv", "timings.csv", "iters.csv", "singular_values_y.csv",
                                     "singular_values_z.csv", "singular_values_g.csv"};
  if (cfg.write_fields) {
    const Vector zero = Vector::Zero(fos.dofs());
    io::write_vtk((out / "fields" / "target.vtk").string(), *fos.space, {{"y", &fos.y_T}, {"z", &fos.z_T}});
    artifacts.push_back("fields/target.vtk");
    for (const auto& r : rep.results) {
      for (size_t n = 0; n < r.y.size(); ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%04zu.vtk", n);
        const Vector u = n == 0 ? zero : Vector(r.optimum.control.step(static_cast<int>(n)));
        const std::string rel = "fields/" + to_string(r.backend) + "/" + name;
        io::write_vtk((out / rel).string(), *fos.space, {{"y", &r.y[n]}, {"z", &r.z[n]}, {"u", &u}});
      }
      artifacts.push_back("fields/" + to_string(r.backend) + "/");
    }
  }

  json models = json::object();
  for (const auto& r : rep.results) {
    if (r.deim) {
      models["deim"] = {{"rank", r.deim->rank()}, {"condition", r.deim->condition}};
      if (cfg.write_models) {
        io::write_deim((out / "models").string(), "deim", *r.deim);
        artifacts.push_back("models/deim_basis.csv");
        artifacts.push_back("models/deim_indices.csv");
      }
    }
    if (r.dmd) {
      models["dmd"] = {{"rank", r.dmd->rank}, {"residual", r.dmd->residual}, {"t_fit", r.dmd->t_fit}};
      if (cfg.write_models) {
        io::write_dmd((out / "models").string(), "dmd", *r.dmd);
        artifacts.push_back("models/dmd_spectrum.csv");
      }
    }
  }

  json manifest;
  manifest["config"] = json::parse(cfg.to_json());
  manifest["config_hash"] = rep.config_hash;
  manifest["full_order_hash"] = rep.full_order_hash;
  manifest["versions"] = {{"fhnrom", "1.0.0"},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"cache", kCacheVersion}};
  manifest["dofs"] = fos.dofs();
  manifest["steps"] = cfg.params.steps();
  manifest["target_step"] = fos.target_step;
  manifest["k"] = rep.k;
  manifest["ric"] = rep.ric;
  manifest["models"] = models;
  manifest["full_order_from_cache"] = fos.from_cache;
  manifest["artifacts"] = artifacts;
  manifest["warnings"] = rep.warnings;
  std::ofstream mf(out / "manifest.json");
  if (!mf) throw InputError("cannot write manifest in " + cfg.out_dir);
  mf << manifest.dump(2) << '\n';
}

ComparisonReport run_experiment(const ExperimentConfig& cfg) {
  ComparisonReport rep;
  rep.warnings = cfg.validate();
  rep.config_hash = config_hash(cfg);
  rep.full_order_hash = full_order_hash(cfg);

  FullOrderStage fos;
  try {
    fos = prepare_full_order(cfg, cfg.has(Backend::fom));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("full-order stage: ") + e.what());
  }
  for (const auto& w : fos.ops_y.warnings) rep.warnings.push_back(w);

  SnapshotStage snaps;
  try {
    snaps = build_snapshots(fos, cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("snapshot stage: ") + e.what());
  }
  rep.k = snaps.k;
  rep.ric = snaps.pod_y.ric;
  rep.sigma_y = snaps.pod_y.singular_values;
  rep.sigma_z = snaps.pod_z.singular_values;
  rep.sigma_g = Eigen::BDCSVD<Matrix>(snaps.G.data).singularValues();

  if (cfg.has(Backend::fom)) rep.results.push_back(full_order_result(fos, cfg));
  for (Backend b : cfg.backends) {
    if (b == Backend::fom) continue;
    try {
      rep.results.push_back(run_reduced(fos, snaps, cfg, b));
    } catch (const std::exception& e) {
      write_report(cfg, rep, fos);  // keep what is done
      throw std::runtime_error("reduced stage " + to_string(b) + ": " + e.what());
    }
    for (const auto& w : rep.results.back().warnings) rep.warnings.push_back(to_string(b) + ": " + w);
  }
  write_report(cfg, rep, fos);
  return rep;
}

// ---------------------------------------------------------------- sweep

std::vector<SweepPoint> mode_sweep(const ExperimentConfig& cfg, const std::vector<int>& k_list) {
  cfg.validate();
  const fs::path out = fs::path(cfg.out_dir) / "sweep";
  io::CsvTable table{{"k", "backend", "ok", "J", "J_full", "error_u", "error_y", "error_z", "cg_iterations", "error"},
                     {}};
  io::CsvTable timing{{"k", "backend", "online_seconds"}, {}};
  std::vector<SweepPoint> points;
  if (k_list.empty()) {
    table.write((out / "sweep.csv").string());
    timing.write((out / "sweep_timings.csv").string());
    return points;
  }

  const FullOrderStage fos = prepare_full_order(cfg, true);
  std::vector<Backend> reduced;
  for (Backend b : cfg.backends) {
    if (b != Backend::fom) reduced.push_back(b);
  }

  std::vector<std::vector<SweepPoint>> per_k(k_list.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < k_list.size(); i = next++) {
      const int k = k_list[i];
      std::optional<SnapshotStage> snaps;
      std::string snap_error;
      try {
        snaps = build_snapshots(fos, cfg, k);
      } catch (const std::exception& e) {
        snap_error = e.what();
      }
      for (Backend b : reduced) {
        SweepPoint pt;
        pt.k = k;
        pt.backend = b;
        if (!snaps) {
          pt.error = snap_error;
          per_k[i].push_back(pt);
          continue;
        }
        try {
          const BackendResult r = run_reduced(fos, *snaps, cfg, b);
          pt.ok = true;
          pt.J = r.J;
          pt.J_full = r.J_full;
          pt.error_u = r.error_u;
          pt.error_y = r.error_y;
          pt.error_z = r.error_z;
          pt.iterations = r.optimum.report.iterations;
          pt.online_seconds = r.online_seconds;
          char dir[32];
          std::snprintf(dir, sizeof dir, "k_%03d", k);
          write_iteration_log((out / dir / ("iters_" + to_string(b) + ".csv")).string(), r.optimum.report);
        } catch (const std::exception& e) {
          pt.error = e.what();
        }
        per_k[i].push_back(pt);
      }
    }
  };
  for (int k : k_list) {
    char dir[32];
    std::snprintf(dir, sizeof dir, "k_%03d", k);
    fs::create_directories(out / dir);
  }
  const int n_workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(k_list.size())));
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < n_workers; ++w) jobs.push_back(std::async(std::launch::async, worker));
  for (auto& j : jobs) j.get();

  for (const auto& group : per_k) {
    for (const SweepPoint& pt : group) {
      points.push_back(pt);
      std::string err = pt.error;
      for (char& ch : err) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      table.add_row({std::to_string(pt.k), to_string(pt.backend), pt.ok ? "1" : "0", fmt(pt.J), fmt(pt.J_full),
                     fmt(pt.error_u), fmt(pt.error_y), fmt(pt.error_z), std::to_string(pt.iterations), err});
      timing.add_row({std::to_string(pt.k), to_string(pt.backend), fmt(pt.online_seconds)});
    }
  }
  table.write((out / "sweep.csv").string());
  timing.write((out / "sweep_timings.csv").string());
  return points;
}

}  // namespace fhn
