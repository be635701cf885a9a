#include "sthdg/cli.hpp"

#include "sthdg/config.hpp"
#include "sthdg/log.hpp"
#include "sthdg/parallel.hpp"
#include "sthdg/verify.hpp"
#include "sthdg/vtk.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace sthdg {

namespace {

constexpr const char* kVersion = "1.0.0";

const std::vector<std::string> kKeys = {
    "problem", "eps",   "dim",     "ps",      "cycles", "mode",  "dt-policy", "slabs",   "cells",
    "out",     "seed",  "threads", "timing",  "vtk",    "solver",  "max-dofs", "slices",
    "levels",  "samples"};

// section.key of a config file -> flag name
const std::map<std::string, std::string> kSectionKeys = {
    {"problem.name", "problem"},       {"problem.eps", "eps"},
    {"problem.dim", "dim"},            {"discretization.ps", "ps"},
    {"mesh.slabs", "slabs"},           {"mesh.cells", "cells"},
    {"mesh.dt-policy", "dt-policy"},   {"study.cycles", "cycles"},
    {"study.mode", "mode"},            {"study.max-dofs", "max-dofs"},
    {"study.solver", "solver"},
    {"output.out", "out"},             {"output.seed", "seed"},
    {"output.threads", "threads"},     {"output.timing", "timing"},
    {"output.vtk", "vtk"},             {"output.slices", "slices"},
    {"verify.levels", "levels"},       {"verify.samples", "samples"}};

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw UsageError("invalid value for --" + key + ": '" + v + "' is not a number");
  }
  if (pos != v.size() || !std::isfinite(x)) throw UsageError("invalid value for --" + key + ": '" + v + "'");
  return x;
}

long long parse_int(const std::string& key, const std::string& v, long long lo, long long hi) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw UsageError("invalid value for --" + key + ": '" + v + "' is not an integer");
  }
  if (pos != v.size()) throw UsageError("invalid value for --" + key + ": '" + v + "' is not an integer");
  if (x < lo || x > hi)
    throw UsageError("invalid value for --" + key + ": " + v + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("invalid value for --" + key + ": '" + v + "' is not a boolean");
}

ProblemSpec make_problem(const RunConfig& cfg) {
  if (cfg.problem == "linear") return linear_problem(cfg.dim, cfg.epsilon, {1.0, 0.5});
  return builtin_problem(cfg.problem, cfg.epsilon, cfg.dim);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

const char* solver_name(SolveMode m) {
  switch (m) {
    case SolveMode::monolithic: return "direct";
    case SolveMode::slab_sequential: return "slab";
    case SolveMode::krylov: return "krylov";
    case SolveMode::automatic: break;
  }
  return "auto";
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json config_json(const RunConfig& c) {
  return {{"command", c.command},
          {"problem", c.problem},
          {"eps", c.epsilon},
          {"dim", c.dim},
          {"ps", c.p_s},
          {"cycles", c.cycles},
          {"mode", to_string(c.mode)},
          {"dt_policy", c.policy == TimeStepPolicy::quadratic ? "h2" : "h"},
          {"slabs", c.effective_slabs()},
          {"cells", c.n_cells},
          {"out", c.out},
          {"seed", c.seed},
          {"threads", c.threads},
          {"solver", solver_name(c.solver)},
          {"max_dofs", c.max_dofs},
          {"slices", c.slices},
          {"levels", c.levels},
          {"samples", c.samples}};
}

nlohmann::json manifest(const RunConfig& c) {
  return {{"program", "sthdg"},
          {"version", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"solver_backend", solver_backend()},
          {"config", config_json(c)}};
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream os(p);
  os << j.dump(2) << '\n';
}

std::string cycle_name(const char* stem, int cycle, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02d%s", stem, cycle, ext);
  return buf;
}

void write_estimates_csv(std::ostream& os, const SpaceTimeMesh& mesh, const EstimateResult& est) {
  os << "element,level,slab,regime,eta_R,eta_J1,eta_J21,eta_J22,eta_J3Q,eta_J3R,eta_BC1,eta_BC2,eta_K,osc_K,osc_N\n";
  for (std::size_t k = 0; k < est.elements.size(); ++k) {
    const auto& e = est.elements[k];
    const auto& K = mesh.element(static_cast<int>(k));
    os << K.id << ',' << K.level << ',' << K.slab << ',' << to_string(e.weights.regime);
    for (double v : {e.eta_R, e.eta_J1, e.eta_J21, e.eta_J22, e.eta_J3Q, e.eta_J3R, e.eta_BC1, e.eta_BC2, e.eta,
                     e.osc_K, e.osc_N})
      os << ',' << fmt(v);
    os << '\n';
  }
}

void write_slices(const std::filesystem::path& dir, const std::string& stem, const DiscreteSolution& sol,
                  const std::vector<double>& slices) {
  for (std::size_t i = 0; i < slices.size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_slice%02zu.vtk", stem.c_str(), i);
    write_vtk_slice_file((dir / buf).string(), sol, slices[i]);
  }
}

int run_solve(const RunConfig& cfg, const ProblemSpec& spec, const std::filesystem::path& dir) {
  auto j = manifest(cfg);
  const auto start = std::chrono::steady_clock::now();
  const SpaceTimeMesh mesh = SpaceTimeMesh::build(spec.domain, cfg.effective_slabs(), cfg.n_cells, cfg.policy);
  const HdgSpace space(mesh, cfg.p_s);
  CycleOutput out;
  try {
    out = solve_on(space, spec, cfg.solver);
  } catch (const SolverError& e) {
    j["status"] = "solver_failure";
    j["message"] = e.what();
    write_json(dir / "run.json", j);
    std::cerr << "sthdg: " << e.what() << '\n';
    return static_cast<int>(ExitCode::solver);
  }
  const EstimateResult est = estimate(out.solution, spec);
  if (cfg.vtk) {
    write_vtk_file((dir / "solution.vtk").string(), out.solution, &est);
    write_slices(dir, "solution", out.solution, cfg.slices);
  }
  {
    std::ofstream os(dir / "estimates.csv");
    write_estimates_csv(os, mesh, est);
  }
  j["status"] = "ok";
  j["n_elements"] = mesh.n_elements();
  j["n_dofs"] = space.dofs().n_dofs;
  j["eta"] = est.eta;
  j["solver"] = {{"method", out.report.method}, {"relative_residual", out.report.relative_residual}};
  std::cout << "elements " << mesh.n_elements() << "  dofs " << space.dofs().n_dofs << "  eta " << fmt(est.eta);
  if (spec.exact) {
    const auto err = error_norms(out.solution, spec, est.eta);
    j["true_error"] = json_number(err.sT);
    j["eff_index"] = json_number(err.eff_index);
    std::cout << "  error " << fmt(err.sT) << "  eff " << fmt(err.eff_index);
  }
  std::cout << '\n';
  j["elapsed_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "run.json", j);
  return 0;
}

int run_study_command(const RunConfig& cfg, const ProblemSpec& spec, const std::filesystem::path& dir) {
  StudyOptions so;
  so.mode = cfg.mode;
  so.cycles = cfg.cycles;
  so.p_s = cfg.p_s;
  so.policy = cfg.policy;
  so.n_slabs = cfg.effective_slabs();
  so.n_cells = cfg.n_cells;
  so.solve_mode = cfg.solver;
  so.max_dofs = cfg.max_dofs;
  if (cfg.vtk)
    so.on_cycle = [&](const CycleView& v) {
      write_vtk_file((dir / cycle_name("cycle", v.cycle, ".vtk")).string(), v.solution, &v.estimate);
      write_slices(dir, cycle_name("cycle", v.cycle, ""), v.solution, cfg.slices);
    };
  const auto start = std::chrono::steady_clock::now();
  const StudyResult res = run_study(spec, so);
  {
    std::ofstream os(dir / "study.csv");
    write_study_csv(os, res.records, cfg.timing);
  }
  {
    std::ofstream os(dir / "diagnostics.csv");
    os << "cycle,reliability_ratio,max_local_efficiency,decomposition_defect,solver_residual\n";
    for (const auto& r : res.records)
      os << r.cycle << ',' << fmt(r.reliability_ratio) << ',' << fmt(r.max_local_efficiency) << ','
         << fmt(r.decomposition_defect) << ',' << fmt(r.solver_residual) << '\n';
  }
  auto j = manifest(cfg);
  j["status"] = res.solver_failed ? "solver_failure" : (res.capped ? "capped" : "ok");
  j["message"] = res.message;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : res.records)
    recs.push_back({{"cycle", r.cycle},
                    {"n_elements", r.n_elements},
                    {"n_dofs", r.n_dofs},
                    {"eta", json_number(r.eta)},
                    {"true_error", json_number(r.true_error)},
                    {"eff_index", json_number(r.eff_index)},
                    {"wall_ms", r.wall_ms}});
  j["records"] = recs;
  j["elapsed_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "run.json", j);
  if (res.solver_failed) {
    std::cerr << "sthdg: " << res.message << '\n';
    return static_cast<int>(ExitCode::solver);
  }
  return 0;
}

int run_verify(const RunConfig& cfg, const ProblemSpec& spec, const std::filesystem::path& dir) {
  std::ofstream os(dir / "constants.csv");
  os << "inequality,level,samples,constant\n";
  auto emit = [&](const ConstantReport& r) {
    os << r.inequality << ',' << r.level << ',' << r.samples << ',' << fmt(r.constant) << '\n';
  };
  auto j = manifest(cfg);
  SpaceTimeMesh mesh = SpaceTimeMesh::build(spec.domain, cfg.effective_slabs(), cfg.n_cells, cfg.policy);
  const SolveMode mode = cfg.solver;
  for (int level = 0; level < cfg.levels; ++level) {
    if (level > 0) mesh = refine_uniform(mesh);
    for (const auto& r : inequality_constants(mesh, cfg.p_s, cfg.samples, cfg.seed)) emit(r);
    const auto& K = mesh.element(0);
    for (const auto& r :
         bubble_constants(K.box, cfg.dim, cfg.p_s, BubbleKind::element, 1.0, cfg.samples, cfg.seed, level))
      emit(r);
    const auto w = regime_and_weights(K, spec.epsilon);
    const double kappa = std::clamp(std::sqrt(w.eps_tilde * spec.epsilon), 1e-6, 1.0);
    for (const auto& r :
         bubble_constants(K.box, cfg.dim, cfg.p_s, BubbleKind::facet, kappa, cfg.samples, cfg.seed, level))
      emit(r);
    try {
      if (spec.exact) {
        const auto sat = measure_saturation(spec, mesh, cfg.p_s, mode);
        emit({"saturation_rho", level, 1, sat.rho});
      }
      const auto go = check_galerkin_orthogonality(spec, mesh, cfg.p_s, 0.0, mode);
      emit({"galerkin_orthogonality", level, 1, go.relative});
    } catch (const SolverError& e) {
      os.flush();
      j["status"] = "solver_failure";
      j["message"] = e.what();
      write_json(dir / "run.json", j);
      std::cerr << "sthdg: " << e.what() << '\n';
      return static_cast<int>(ExitCode::solver);
    }
  }
  j["status"] = "ok";
  write_json(dir / "run.json", j);
  return 0;
}

}  // namespace

int RunConfig::effective_slabs() const {
  if (n_slabs > 0) return n_slabs;
  return policy == TimeStepPolicy::quadratic ? n_cells * n_cells : n_cells;
}

RunConfig make_config(const std::string& command, const std::map<std::string, std::string>& s) {
  RunConfig c;
  if (command != "solve" && command != "study" && command != "verify")
    throw UsageError("unknown command '" + command + "' (expected solve, study or verify)");
  c.command = command;
  for (const auto& [k, v] : s)
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) throw UsageError("unknown setting '" + k + "'");
  auto get = [&](const char* k) -> const std::string* {
    auto it = s.find(k);
    return it == s.end() ? nullptr : &it->second;
  };
  if (auto v = get("problem")) {
    if (*v != "rotating_pulse" && *v != "boundary_layer" && *v != "interior_layer" && *v != "linear")
      throw UsageError("unknown problem '" + *v + "'");
    c.problem = *v;
  }
  if (auto v = get("eps")) {
    c.epsilon = parse_double("eps", *v);
    if (!(c.epsilon > 0.0)) throw UsageError("invalid value for --eps: must be positive");
  }
  if (auto v = get("dim")) c.dim = static_cast<int>(parse_int("dim", *v, 1, 2));
  if (auto v = get("ps")) c.p_s = static_cast<int>(parse_int("ps", *v, 1, 8));
  if (auto v = get("cycles")) c.cycles = static_cast<int>(parse_int("cycles", *v, 1, 64));
  if (auto v = get("mode")) {
    if (*v == "amr")
      c.mode = StudyMode::amr;
    else if (*v == "uniform")
      c.mode = StudyMode::uniform;
    else
      throw UsageError("invalid value for --mode: '" + *v + "' (expected uniform or amr)");
  }
  if (auto v = get("dt-policy")) {
    if (*v == "h")
      c.policy = TimeStepPolicy::proportional;
    else if (*v == "h2")
      c.policy = TimeStepPolicy::quadratic;
    else
      throw UsageError("invalid value for --dt-policy: '" + *v + "' (expected h or h2)");
  }
  if (auto v = get("slabs")) c.n_slabs = static_cast<int>(parse_int("slabs", *v, 0, 1 << 20));
  if (auto v = get("cells")) c.n_cells = static_cast<int>(parse_int("cells", *v, 1, 1 << 14));
  if (auto v = get("out")) {
    if (v->empty()) throw UsageError("invalid value for --out: empty path");
    c.out = *v;
  }
  if (auto v = get("seed")) c.seed = static_cast<std::uint64_t>(parse_int("seed", *v, 0, std::numeric_limits<long long>::max()));
  if (auto v = get("threads")) c.threads = static_cast<int>(parse_int("threads", *v, 0, 1024));
  if (auto v = get("timing")) c.timing = parse_bool("timing", *v);
  if (auto v = get("vtk")) c.vtk = parse_bool("vtk", *v);
  if (auto v = get("solver")) {
    if (*v == "auto")
      c.solver = SolveMode::automatic;
    else if (*v == "direct")
      c.solver = SolveMode::monolithic;
    else if (*v == "slab")
      c.solver = SolveMode::slab_sequential;
    else if (*v == "krylov")
      c.solver = SolveMode::krylov;
    else
      throw UsageError("invalid value for --solver: '" + *v + "' (expected auto, direct, slab or krylov)");
  }
  if (auto v = get("max-dofs"))
    c.max_dofs = static_cast<std::size_t>(parse_int("max-dofs", *v, 0, std::numeric_limits<long long>::max()));
  if (auto v = get("levels")) c.levels = static_cast<int>(parse_int("levels", *v, 1, 8));
  if (auto v = get("samples")) c.samples = static_cast<int>(parse_int("samples", *v, 1, 1000000));
  if (auto v = get("slices")) {
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const double t = parse_double("slices", item);
      if (t < 0.0) throw UsageError("invalid value for --slices: negative time");
      c.slices.push_back(t);
    }
  }
  return c;
}

std::map<std::string, std::string> config_file_settings(const std::string& path) {
  std::map<std::string, std::string> out;
  std::map<std::string, std::string> raw;
  try {
    raw = load_config(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  for (const auto& [k, v] : raw) {
    std::string key = k;
    if (auto it = kSectionKeys.find(k); it != kSectionKeys.end()) key = it->second;
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      throw UsageError("unknown key '" + k + "' in " + path);
    out[key] = v;
  }
  return out;
}

RunConfig parse_command_line(int argc, char** argv, bool* help_shown) {
  CLI::App app{"Space-time HDG solver for advection-diffusion with a posteriori error estimation"};
  app.require_subcommand(1);
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> opts;
  std::string config_path;
  bool timing = false, no_vtk = false;
  CLI::Option* timing_opt = nullptr;
  CLI::Option* novtk_opt = nullptr;
  CLI::Option* config_opt = nullptr;
  const std::vector<std::pair<std::string, std::string>> valued = {
      {"problem", "rotating_pulse | boundary_layer | interior_layer | linear"},
      {"eps", "diffusion coefficient"},
      {"dim", "spatial dimension (1 or 2)"},
      {"ps", "spatial polynomial degree"},
      {"cycles", "study cycles"},
      {"mode", "uniform | amr"},
      {"dt-policy", "h | h2"},
      {"slabs", "initial time slabs (0: derived)"},
      {"cells", "initial cells per spatial axis"},
      {"out", "output directory"},
      {"seed", "random seed"},
      {"threads", "worker threads (0: all cores)"},
      {"max-dofs", "stop a study before exceeding this many dofs"},
      {"solver", "auto | direct | slab | krylov"},
      {"slices", "comma-separated times for VTK cuts"},
      {"levels", "verify: uniform refinement levels"},
      {"samples", "verify: random samples per element shape"}};
  std::vector<CLI::App*> subs = {app.add_subcommand("solve", "solve once and write the solution"),
                                 app.add_subcommand("study", "run a refinement study"),
                                 app.add_subcommand("verify", "measure analysis constants")};
  for (auto& [name, _] : valued) values[name];
  for (auto* sub : subs) {
    for (auto& [name, desc] : valued) {
      auto* o = sub->add_option("--" + name, values[name], desc);
      opts[sub->get_name() + name] = o;
    }
    config_opt = sub->add_option("--config", config_path, "key=value config file; flags win");
    opts[sub->get_name() + "config"] = config_opt;
    timing_opt = sub->add_flag("--timing", timing, "write real wall times into study.csv");
    opts[sub->get_name() + "timing"] = timing_opt;
    novtk_opt = sub->add_flag("--no-vtk", no_vtk, "skip VTK output");
    opts[sub->get_name() + "no-vtk"] = novtk_opt;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    if (help_shown) *help_shown = true;
    return {};
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    if (help_shown) *help_shown = true;
    return {};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  std::map<std::string, std::string> settings;
  if (opts[cmd + "config"]->count() > 0) settings = config_file_settings(config_path);
  for (auto& [name, _] : valued)
    if (opts[cmd + name]->count() > 0) settings[name] = values[name];
  if (opts[cmd + "timing"]->count() > 0) settings["timing"] = "true";
  if (opts[cmd + "no-vtk"]->count() > 0) settings["vtk"] = "false";
  return make_config(cmd, settings);
}

int run(const RunConfig& cfg) {
  ProblemSpec spec;
  try {
    spec = make_problem(cfg);
  } catch (const ProblemError& e) {
    throw UsageError(e.what());
  }
  for (double t : cfg.slices)
    if (t > spec.domain.t_end) throw UsageError("slice time beyond the final time");
  set_threads(cfg.threads);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  if (cfg.command == "solve") return run_solve(cfg, spec, dir);
  if (cfg.command == "study") return run_study_command(cfg, spec, dir);
  return run_verify(cfg, spec, dir);
}

int cli_main(int argc, char** argv) {
  try {
    bool help = false;
    const RunConfig cfg = parse_command_line(argc, argv, &help);
    if (help) return 0;
    return run(cfg);
  } catch (const UsageError& e) {
    std::cerr << "sthdg: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  } catch (const MeshError& e) {
    std::cerr << "sthdg: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  } catch (const SolverError& e) {
    std::cerr << "sthdg: " << e.what() << '\n';
    return static_cast<int>(ExitCode::solver);
  } catch (const std::exception& e) {
    std::cerr << "sthdg: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sthdg
