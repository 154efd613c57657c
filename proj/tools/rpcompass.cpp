// rpcompass: orientation sweeps, nucleus-count scans and invariant checks for
// radical-pair compass models.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "rpcompass/errors.hpp"
#include "rpcompass/metrology.hpp"
#include "rpcompass/model_io.hpp"
#include "rpcompass/sweep.hpp"

namespace fs = std::filesystem;
using namespace rpcompass;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct RunConfig {
  std::string model;
  bool include_eed = false;
  std::optional<std::size_t> n_keep;
  std::string n_range;
  double theta_step_deg = 1.0;
  double phi_step_deg = 5.0;
  bool full_phi = false;
  double b0_mT = 0.05;
  std::optional<double> k_b;
  std::optional<double> k_f;
  double delta_deg = 0.1;
  std::size_t n_trials = 1;
  std::string out = "out";
  unsigned workers = 0;
  bool dump_rho = false;
  unsigned seed = 1;
};

/// Input problems (missing file, parse or validation failure, bad flags).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_model(const std::string& name) {
  const fs::path direct(name);
  if (fs::exists(direct)) return direct;
  // Bare names resolve against the shipped model directory.
  if (direct.parent_path().empty()) {
    for (const fs::path candidate : {fs::path(RPCOMPASS_MODEL_DIR) / name,
                                     fs::path(RPCOMPASS_MODEL_DIR) / (name + ".tomlish")})
      if (fs::exists(candidate)) return candidate;
  }
  throw InputError("cannot open model file '" + name + "'");
}

std::size_t dimension_cap() {
  const char* env = std::getenv("RPCOMPASS_DIM_CAP");
  if (env == nullptr || *env == '\0') return kDefaultDimensionCap;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || errno == ERANGE || v < 4)
    throw InputError(std::string("RPCOMPASS_DIM_CAP must be an integer >= 4, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

SpinSystem load_model(const RunConfig& cfg) {
  const fs::path path = resolve_model(cfg.model);
  SpinSystem s;
  try {
    s = load_spin_system(path, dimension_cap());
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    throw InputError(what.find(path.string()) == std::string::npos ? path.string() + ": " + what : what);
  }
  if (cfg.k_b) s.k_b = *cfg.k_b;
  if (cfg.k_f) s.k_f = *cfg.k_f;
  try {
    s.validate(dimension_cap());
  } catch (const std::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return s;
}

SweepGrid make_grid(const RunConfig& cfg) {
  SweepGrid g{cfg.theta_step_deg, cfg.phi_step_deg, cfg.full_phi};
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  return g;
}

SweepOptions make_options(const RunConfig& cfg) {
  if (!(cfg.delta_deg > 0.0 && cfg.delta_deg < 180.0)) throw InputError("--delta-deg must lie in (0, 180)");
  if (!(cfg.b0_mT >= 0.0)) throw InputError("--b0-mT must be >= 0");
  if (cfg.n_trials < 1) throw InputError("--n-trials must be >= 1");
  SweepOptions o;
  o.include_eed = cfg.include_eed;
  o.n_trials = cfg.n_trials;
  o.b0_mT = cfg.b0_mT;
  o.delta_rad = units::deg_to_rad(cfg.delta_deg);
  o.workers = cfg.workers;
  return o;
}

std::string eed_tag(bool eed) { return eed ? "eed" : "noeed"; }

fs::path ensure_out(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InputError("cannot create output directory '" + cfg.out + "': " + ec.message());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string csv_text(const SweepResult& r) {
  std::ostringstream s;
  write_sweep_csv(s, r);
  return s.str();
}

void print_extrema(const SweepResult& r) {
  std::printf("model %s  EED %s  grid %zu x %zu  B0 %.4g mT\n", r.model.c_str(), r.options.include_eed ? "on" : "off",
              r.grid.theta_count(), r.grid.phi_count(), r.options.b0_mT);
  std::printf("  %-14s %16s %10s %10s\n", "quantity", "value", "theta_deg", "phi_deg");
  auto row = [](const char* name, const GridLocation& l) {
    std::printf("  %-14s %16.8g %10.2f %10.2f\n", name, l.value, units::rad_to_deg(l.theta), units::rad_to_deg(l.phi));
  };
  row("qfi max", r.qfi_max);
  row("qfi min", r.qfi_min);
  row("inv_n_var max", r.inv_n_var_max);
  row("inv_n_var min", r.inv_n_var_min);
  std::printf("  %-14s %16.8g\n", "phi_s mean", r.phi_s_mean);
  std::printf("  %-14s %16.8g\n", "phi_s max", r.phi_s_max);
  std::printf("  %-14s %16.8g\n", "phi_s min", r.phi_s_min);
  std::printf("  %-14s %16.8g\n", "gamma", r.gamma);
  try {
    const MetrologyRecord best = best_precision_point(r);
    std::printf("  best precision at (%.2f, %.2f) deg: inv_n_var %.8g, qfi %.8g, optimality %.8g\n",
                units::rad_to_deg(best.theta), units::rad_to_deg(best.phi), best.inv_n_var, best.qfi, best.optimality);
  } catch (const NotFoundError&) {
    std::printf("  best precision: none (yield variance infinite everywhere)\n");
  }
}

void dump_rho(const fs::path& path, const SpinSystem& system, const SweepResult& r) {
  MetrologyRecord at;
  try {
    at = best_precision_point(r);
  } catch (const NotFoundError&) {
    at = r.records.front();
  }
  FieldOrientation f;
  f.b0_mT = r.options.b0_mT;
  f.theta = at.theta;
  f.phi = at.phi;
  const SteadyStateResult ss = SteadyStateSolver(system, r.options.include_eed).solve(f);
  std::ostringstream s;
  s << std::setprecision(17);
  s << "# rho_ss at theta_deg = " << units::rad_to_deg(at.theta) << ", phi_deg = " << units::rad_to_deg(at.phi)
    << ", dimension " << ss.rho_ss.rows() << "\n# each row: re(0) im(0) re(1) im(1) ...\n";
  for (Eigen::Index i = 0; i < ss.rho_ss.rows(); ++i) {
    for (Eigen::Index j = 0; j < ss.rho_ss.cols(); ++j)
      s << (j ? " " : "") << ss.rho_ss(i, j).real() << ' ' << ss.rho_ss(i, j).imag();
    s << '\n';
  }
  write_text(path, s.str());
}

int cmd_sweep(const RunConfig& cfg) {
  SpinSystem system = load_model(cfg);
  if (cfg.n_keep) {
    if (*cfg.n_keep > system.nuclei.size())
      throw InputError("--n-keep " + std::to_string(*cfg.n_keep) + " exceeds the " +
                       std::to_string(system.nuclei.size()) + " nuclei of '" + system.name + "'");
    system = rank_and_truncate(system, *cfg.n_keep);
  }
  const SweepGrid grid = make_grid(cfg);
  const SweepOptions opts = make_options(cfg);
  const fs::path out = ensure_out(cfg);

  const SweepResult r = sweep(system, grid, opts);
  std::string stem = system.name;
  if (cfg.n_keep) stem += "_n" + std::to_string(*cfg.n_keep);
  stem += "_" + eed_tag(cfg.include_eed);

  write_text(out / (stem + "_sweep.csv"), csv_text(r));
  auto summary = sweep_summary_json(r);
  summary["n_nuclei"] = system.nuclei.size();
  summary["k_b_per_us"] = system.k_b;
  summary["k_f_per_us"] = system.k_f;
  write_text(out / (stem + "_summary.json"), summary.dump(2) + "\n");
  if (cfg.dump_rho) dump_rho(out / (stem + "_rho_ss.txt"), system, r);

  print_extrema(r);
  std::printf("wrote %s, %s\n", (out / (stem + "_sweep.csv")).string().c_str(),
              (out / (stem + "_summary.json")).string().c_str());
  return kExitOk;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text, std::size_t count) {
  if (text.empty()) return {1, count};
  const auto dots = text.find("..");
  auto number = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != s.size()) throw InputError("--n-range expects A..B with integers, got '" + text + "'");
    return v;
  };
  if (dots == std::string::npos) {
    const auto n = number(text);
    return {n, n};
  }
  return {number(text.substr(0, dots)), number(text.substr(dots + 2))};
}

int cmd_scan(const RunConfig& cfg) {
  const SpinSystem system = load_model(cfg);
  if (system.nuclei.empty()) throw InputError("model '" + system.name + "' has no nuclei to scan");
  const auto [first, last] = parse_range(cfg.n_range, system.nuclei.size());
  if (first < 1 || first > last || last > system.nuclei.size())
    throw InputError("--n-range " + std::to_string(first) + ".." + std::to_string(last) + " must lie within 1.." +
                     std::to_string(system.nuclei.size()));
  const SweepGrid grid = make_grid(cfg);
  const SweepOptions opts = make_options(cfg);
  const fs::path out = ensure_out(cfg);
  const std::string stem = system.name + "_" + eed_tag(cfg.include_eed);

  const TruncationSummary summary =
      truncation_scan(system, grid, first, last, opts, [&](std::size_t n, const SweepResult& r) {
        auto j = sweep_summary_json(r);
        j["n_nuclei"] = n;
        const fs::path path = out / (stem + "_n" + std::to_string(n) + "_summary.json");
        write_text(path, j.dump(2) + "\n");
        std::printf("n = %zu  gamma %.8g  -> %s\n", n, r.gamma, path.string().c_str());
        std::fflush(stdout);
      });

  const fs::path scan_path = out / (stem + "_scan.json");
  write_text(scan_path, truncation_summary_json(summary).dump(2) + "\n");

  std::printf("%-6s %14s %14s %14s %14s\n", "n", "gamma", "inv_n_var", "qfi", "optimality");
  for (const auto& e : summary.entries)
    std::printf("%-6zu %14.8g %14.8g %14.8g %14.8g\n", e.n_nuclei, e.gamma, e.best.inv_n_var, e.best.qfi,
                e.best.optimality);
  std::printf("optimality row: n=%zu %.6g  max %.6g  min %.6g  robust average %.6g\n", first, summary.row.first,
              summary.row.max, summary.row.min, summary.row.robust_average);
  std::printf("wrote %s\n", scan_path.string().c_str());
  return kExitOk;
}

struct CheckLine {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass() const { return worst <= tolerance; }
};

int cmd_check(const RunConfig& cfg) {
  const SpinSystem system = load_model(cfg);
  const SweepOptions opts = make_options(cfg);
  const SteadyStateSolver solver(system, cfg.include_eed);
  const SteadyStateSolver resolvent(system, cfg.include_eed, SteadyStateMethod::Resolvent);
  const bool run_oracle = system.hilbert_dimension() <= 256;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> theta(0.0, std::numbers::pi), phi(0.0, 2.0 * std::numbers::pi);

  std::vector<CheckLine> checks{{"flux balance", 0, 1e-8},
                                {"QCRB chain (cfi <= qfi)", 0, 1e-6},
                                {"SLD residual", 0, 1e-8},
                                {"QFI route agreement", 0, 1e-8},
                                {"rho_ss positivity", 0, 1e-10},
                                {"resolvent vs Sylvester", 0, 1e-8},
                                {"resolvent vs propagation", 0, 1e-6}};
  for (int k = 0; k < 8; ++k) {
    FieldOrientation f;
    f.b0_mT = opts.b0_mT;
    f.theta = theta(rng);
    f.phi = phi(rng);
    const OrientationProbe probe = probe_orientation(solver, f, opts.delta_rad);
    const MetrologyRecord r = evaluate_probe(probe, f, system, opts.n_trials);
    checks[0].worst = std::max(checks[0].worst, std::abs(r.flux_balance - 1.0));
    if (r.qfi > kEstimatorQfiFloor || r.cfi > kEstimatorQfiFloor) {
      checks[1].worst = std::max(checks[1].worst, r.cfi / r.qfi - 1.0);
      checks[3].worst = std::max({checks[3].worst, std::abs(r.qfi_sld - r.qfi) / r.qfi, std::abs(r.qfi_vec - r.qfi) / r.qfi});
    }
    checks[2].worst = std::max(checks[2].worst, r.sld_residual);
    const DenseMatrix& rho = probe.center.rho_ss;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    checks[4].worst = std::max(checks[4].worst, -eig.eigenvalues().minCoeff());
    const SteadyStateResult res = resolvent.solve(f);
    checks[5].worst = std::max(checks[5].worst, (res.rho_ss - rho).cwiseAbs().maxCoeff());
    if (run_oracle) {
      const SteadyStateResult prop = propagate_time_domain(system, f, cfg.include_eed);
      checks[6].worst = std::max(checks[6].worst, (res.rho_ss - prop.rho_ss).cwiseAbs().maxCoeff());
    }
  }

  std::printf("check %s (d = %zu, EED %s, 8 orientations, seed %u)\n", system.name.c_str(), system.hilbert_dimension(),
              cfg.include_eed ? "on" : "off", cfg.seed);
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    if (c.name == "resolvent vs propagation" && !run_oracle) {
      std::printf("  skip  %-28s d > 256\n", c.name.c_str());
      continue;
    }
    std::printf("  %-4s  %-28s worst %.3g  tol %.0e\n", c.pass() ? "ok" : "FAIL", c.name.c_str(), c.worst,
                c.tolerance);
    if (!c.pass()) failed.push_back(c.name);
  }
  if (failed.empty()) {
    std::printf("all invariants hold\n");
    return kExitOk;
  }
  std::fprintf(stderr, "failed invariants:");
  for (const auto& f : failed) std::fprintf(stderr, " [%s]", f.c_str());
  std::fprintf(stderr, "\n");
  return kExitCheckFailed;
}

void add_common(CLI::App* app, RunConfig& cfg) {
  app->add_option("--model", cfg.model, "Model file, or the name of a shipped model (e.g. fad_z_1n)")->required();
  app->add_flag("--eed,!--no-eed", cfg.include_eed, "Include the electron-electron dipolar coupling (default: off)");
  app->add_option("--b0-mT", cfg.b0_mT, "Field magnitude, mT")->capture_default_str();
  app->add_option("--kb", cfg.k_b, "Singlet recombination rate k_b, us^-1 (default: model value, 1.0 if unset)");
  app->add_option("--kf", cfg.k_f, "Product formation rate k_f, us^-1 (default: model value, 1.0 if unset)");
  app->add_option("--delta-deg", cfg.delta_deg, "Finite-difference step in theta, deg")->capture_default_str();
  app->add_option("--n-trials", cfg.n_trials, "Independent trials N in 1/(N var)")->capture_default_str();
}

void add_grid(CLI::App* app, RunConfig& cfg) {
  app->add_option("--theta-step", cfg.theta_step_deg, "Theta grid step over [0, 180], deg")->capture_default_str();
  app->add_option("--phi-step", cfg.phi_step_deg, "Phi grid step over [0, 180], deg")->capture_default_str();
  app->add_flag("--full-phi", cfg.full_phi, "Sample phi over [0, 360) for tensors without inversion symmetry");
  app->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app->add_option("--workers", cfg.workers, "Worker threads (0 = available parallelism; 1 = serial)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radical-pair compass precision: orientation sweeps, nucleus-count scans and invariant checks.\n"
               "Environment: RPCOMPASS_DIM_CAP overrides the Hilbert dimension cap (default 4096)."};
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep the orientation grid; write CSV + JSON summary");
  add_common(sweep_cmd, cfg);
  add_grid(sweep_cmd, cfg);
  sweep_cmd->add_option("--n-keep", cfg.n_keep, "Keep only the n strongest nuclei (default: all)");
  sweep_cmd->add_flag("--dump-rho", cfg.dump_rho, "Also write rho_ss at the best precision point as text");

  CLI::App* scan_cmd = app.add_subcommand("scan", "Truncation scan over the number of nuclei");
  add_common(scan_cmd, cfg);
  add_grid(scan_cmd, cfg);
  scan_cmd->add_option("--n-range", cfg.n_range, "Nucleus counts A..B (default: 1..all)");

  CLI::App* check_cmd = app.add_subcommand("check", "Run invariant checks at 8 random orientations");
  add_common(check_cmd, cfg);
  check_cmd->add_option("--seed", cfg.seed, "Seed for the orientations")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep_cmd->parsed()) return cmd_sweep(cfg);
    if (scan_cmd->parsed()) return cmd_scan(cfg);
    return cmd_check(cfg);
  } catch (const InputError& e) {
    std::fprintf(stderr, "rpcompass: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rpcompass: %s\n", e.what());
    return kExitRuntime;
  }
}
