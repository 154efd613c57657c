// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Full default-grid sweeps of every shipped model (with and without EED) are
// computed once and shared by the criteria that range over sweep points.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rpcompass/metrology.hpp"
#include "rpcompass/model_io.hpp"
#include "rpcompass/operators.hpp"
#include "rpcompass/sweep.hpp"

using namespace rpcompass;

namespace {

// Pinned tolerances.
constexpr double kChainTol = 1e-6;
constexpr double kNoiseFloor = 1e-10;
constexpr double kSaturationTol = 1e-12;
constexpr double kS2VarianceTol = 1e-12;
constexpr double kOperatorIdentityTol = 1e-14;
constexpr double kOracleTol = 1e-6;
constexpr double kFluxTol = 1e-8;
constexpr double kAnchorTol = 1e-10;
constexpr double kQfiRouteTol = 1e-8;
constexpr double kSldResidualTol = 1e-8;
constexpr double kEstimatorMeanTol = 1e-8;
constexpr double kEstimatorVarTol = 1e-6;
constexpr double kNullTol = 1e-10;
constexpr double kQuadratureTol = 1e-4;
constexpr double kBandLow = 1.0;
constexpr double kBandHigh = 1e3;
constexpr double kParsevalTol = 1e-12;
constexpr double kSelfDistanceTol = 1e-7;   // arccos(1 - eps) ~ sqrt(2 eps)
constexpr double kOneNucleusBudgetSeconds = 300.0;

const std::vector<std::string> kModels = {"fad_z_1n", "fad_w_1n", "fad_w_2n", "fad_z_3n", "fad_w_3n", "null_bare_pair"};
const std::vector<std::string> kNullModels = {"null_bare_pair"};
const std::vector<std::string> kBandModels = {"fad_z_1n", "fad_w_1n"};

int g_failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s  %-34s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SpinSystem load(const std::string& name) {
  return load_spin_system(std::filesystem::path(RPCOMPASS_MODEL_DIR) / (name + ".tomlish"));
}

FieldOrientation orientation(double theta, double phi, double b0 = 0.05) {
  FieldOrientation f;
  f.b0_mT = b0;
  f.theta = theta;
  f.phi = phi;
  return f;
}

double max_abs(const DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

bool at_noise_floor(const MetrologyRecord& r) { return r.qfi <= kNoiseFloor && r.cfi <= kNoiseFloor; }

struct Run {
  std::string model;
  bool eed = false;
  SpinSystem system;
  SweepResult result;
  double seconds = 0.0;
};

std::vector<Run> run_sweeps() {
  std::vector<Run> runs;
  for (const auto& name : kModels) {
    for (bool eed : {false, true}) {
      Run run{name, eed, load(name), {}, 0.0};
      SweepOptions opts;
      opts.include_eed = eed;
      const auto t0 = std::chrono::steady_clock::now();
      run.result = sweep(run.system, SweepGrid{}, opts);
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("      sweep %-15s eed=%d  %zu points  %.1f s  gamma=%.6g\n", name.c_str(), eed ? 1 : 0,
                  run.result.records.size(), run.seconds, run.result.gamma);
      std::fflush(stdout);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

void qcrb_chain(const std::vector<Run>& runs) {
  std::size_t checked = 0, floor = 0, bad = 0;
  double worst_opt = std::numeric_limits<double>::infinity();
  double budget_seconds = 0.0;
  for (const auto& run : runs) {
    if (run.model == "fad_z_1n") budget_seconds = std::max(budget_seconds, run.seconds);
    for (const auto& r : run.result.records) {
      if (at_noise_floor(r)) {
        ++floor;
        continue;
      }
      ++checked;
      const bool ok = r.cfi <= r.qfi * (1 + kChainTol) && r.optimality >= 1 - kChainTol;
      if (!ok) ++bad;
      worst_opt = std::min(worst_opt, r.optimality);
    }
  }
  report(bad == 0 && checked > 0, "QCRB chain",
         fmt("%zu points checked, %zu at noise floor (qfi, cfi <= 1e-10), %zu violations, min optimality %.6g", checked,
             floor, bad, worst_opt));
  report(budget_seconds < kOneNucleusBudgetSeconds, "QCRB chain runtime (1 nucleus)",
         fmt("fad_z_1n 181x37 sweep %.1f s (budget %.0f s)", budget_seconds, kOneNucleusBudgetSeconds));
}

void cfi_saturation(const std::vector<Run>& runs) {
  std::size_t n = 0, bad = 0;
  double worst = 0.0;
  for (const auto& run : runs)
    for (const auto& r : run.result.records) {
      ++n;
      const double diff = std::abs(r.cfi - r.inv_n_var);
      const double rel = r.cfi > 0.0 ? diff / r.cfi : diff;
      if (!(diff <= kSaturationTol * r.cfi) && !(r.cfi == r.inv_n_var)) ++bad;
      if (std::isfinite(rel)) worst = std::max(worst, rel);
    }
  report(bad == 0, "CFI saturation", fmt("%zu points, max relative gap %.3g (tol %.0e)", n, worst, kSaturationTol));
}

void s2_variance_identity(const std::vector<Run>& runs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> phi(1e-3, 1.0 - 1e-3), slope(-1.0, 1.0);
  std::size_t bad = 0;
  double worst = 0.0;
  auto check = [&](double p, double d, double via_s2) {
    const double binomial = yield_variance(p, d, 1);
    if (std::isinf(binomial) && std::isinf(via_s2)) return;
    const double rel = std::abs(via_s2 - binomial) / binomial;
    worst = std::max(worst, rel);
    if (!(rel <= kS2VarianceTol)) ++bad;
  };
  for (int k = 0; k < 1000; ++k) {
    const double p = phi(rng), d = slope(rng);
    check(p, d, yield_variance_s2(p, d, 1));
  }
  std::size_t points = 0;
  for (const auto& run : runs)
    for (const auto& r : run.result.records) {
      ++points;
      check(r.phi_s, r.dphi_s_dtheta, r.variance_s2);
    }
  report(bad == 0, "S^2 variance identity",
         fmt("1000 random pairs + %zu sweep points, max relative gap %.3g (tol %.0e)", points, worst, kS2VarianceTol));
}

void operator_identity() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> mult(2, 3), side(0, 1);
  double worst = 0.0;
  std::size_t systems = 0;
  for (std::size_t n = 0; n <= 3; ++n)
    for (int rep = 0; rep < 4; ++rep) {
      SpinSystem s;
      for (std::size_t i = 0; i < n; ++i) {
        Nucleus nuc;
        nuc.label = "X";
        nuc.multiplicity = rep == 0 ? static_cast<int>(2 + i % 2) : mult(rng);
        nuc.radical = side(rng) ? Radical::B : Radical::A;
        s.nuclei.push_back(nuc);
      }
      const DenseMatrix p(singlet_projector(s)), s2(total_spin_squared(s));
      const auto d = p.rows();
      worst = std::max(worst, max_abs(s2 - 2.0 * (DenseMatrix::Identity(d, d) - p)));
      ++systems;
    }
  for (const auto& name : kModels) {
    const SpinSystem s = load(name);
    const DenseMatrix p(singlet_projector(s)), s2(total_spin_squared(s));
    worst = std::max(worst, max_abs(s2 - 2.0 * (DenseMatrix::Identity(p.rows(), p.rows()) - p)));
    ++systems;
  }
  report(worst <= kOperatorIdentityTol, "S^2 = 2(1 - P_S)",
         fmt("%zu systems with 0-3 nuclei, max entry error %.3g (tol %.0e)", systems, worst, kOperatorIdentityTol));
}

void oracle_equivalence(const std::vector<Run>& runs) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  double worst = 0.0;
  std::size_t cases = 0;
  for (const auto& name : kModels) {
    const SpinSystem s = load(name);
    if (s.hilbert_dimension() > 48) continue;
    for (bool eed : {false, true}) {
      const SteadyStateSolver resolvent(s, eed, SteadyStateMethod::Resolvent);
      for (int k = 0; k < 3; ++k) {
        const FieldOrientation f = orientation(angle(rng), angle(rng));
        const SteadyStateResult a = resolvent.solve(f);
        const SteadyStateResult b = propagate_time_domain(s, f, eed);
        worst = std::max(worst, max_abs(a.rho_ss - b.rho_ss));
        ++cases;
      }
    }
  }
  report(worst <= kOracleTol, "steady state: resolvent vs propagation",
         fmt("%zu (model, EED, orientation) cases, max entry gap %.3g (tol %.0e)", cases, worst, kOracleTol));

  double worst_flux = 0.0;
  std::size_t points = 0;
  for (const auto& run : runs)
    for (const auto& r : run.result.records) {
      worst_flux = std::max(worst_flux, std::abs(r.flux_balance - 1.0));
      ++points;
    }
  report(worst_flux <= kFluxTol, "flux balance",
         fmt("%zu sweep points, max |k_b Tr[P_S rho] + k_f Tr[rho] - 1| = %.3g (tol %.0e)", points, worst_flux,
             kFluxTol));
}

void analytic_anchor() {
  SpinSystem s;
  s.name = "zero_hamiltonian";
  Nucleus n;
  n.label = "N";
  n.multiplicity = 3;
  n.hyperfine_mT.setZero();
  s.nuclei = {n};
  SweepOptions opts;
  opts.b0_mT = 0.0;
  const SweepResult r = sweep(s, SweepGrid{}, opts);
  double worst = 0.0;
  for (const auto& rec : r.records) worst = std::max(worst, std::abs(rec.phi_s - 0.5));
  report(worst <= kAnchorTol && r.gamma <= kAnchorTol, "H = 0 anchor",
         fmt("max |Phi_S - 0.5| = %.3g, gamma = %.3g over %zu orientations (tol %.0e)", worst, r.gamma,
             r.records.size(), kAnchorTol));
}

void qfi_routes(const std::vector<Run>& runs) {
  double worst_route = 0.0, worst_residual = 0.0;
  std::size_t compared = 0, total = 0;
  for (const auto& run : runs)
    for (const auto& r : run.result.records) {
      ++total;
      worst_residual = std::max(worst_residual, r.sld_residual);
      if (r.qfi <= kNoiseFloor) continue;
      ++compared;
      worst_route = std::max({worst_route, std::abs(r.qfi_sld - r.qfi) / r.qfi, std::abs(r.qfi_vec - r.qfi) / r.qfi});
    }
  report(worst_route <= kQfiRouteTol, "QFI routes agree",
         fmt("%zu points with qfi > 1e-10, max relative gap %.3g (tol %.0e)", compared, worst_route, kQfiRouteTol));
  report(worst_residual <= kSldResidualTol, "SLD residual",
         fmt("%zu points, max ||{L, rho}/2 - d rho|| = %.3g (tol %.0e)", total, worst_residual, kSldResidualTol));
}

void estimator_moments(const std::vector<Run>& runs) {
  std::mt19937_64 rng(16);
  double worst_mean = 0.0, worst_var = 0.0;
  std::size_t evaluated = 0;
  std::string skipped;
  std::map<std::string, bool> done;
  for (const auto& run : runs) {
    if (done[run.model]) continue;
    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < run.result.records.size(); ++k)
      if (run.result.records[k].qfi > kEstimatorQfiFloor) eligible.push_back(k);
    if (eligible.empty()) {
      skipped += (skipped.empty() ? "" : ", ") + run.model;
      done[run.model] = true;
      continue;
    }
    done[run.model] = true;
    const SteadyStateSolver solver(run.system, run.eed);
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    for (int k = 0; k < 16; ++k) {
      const MetrologyRecord& rec = run.result.records[eligible[pick(rng)]];
      const FieldOrientation f = orientation(rec.theta, rec.phi, run.result.options.b0_mT);
      const OrientationProbe probe = probe_orientation(solver, f, run.result.options.delta_rad);
      const double qfi = qfi_spectral(probe.state);
      const DenseMatrix l = sld_solve(probe.state);
      const DenseMatrix m = optimal_estimator(f.theta, l, qfi);
      const DenseMatrix& rho = probe.state.rho;
      worst_mean = std::max(worst_mean, std::abs((m * rho).trace().real() - f.theta));
      DenseMatrix c = m;
      c.diagonal().array() -= f.theta;
      worst_var = std::max(worst_var, std::abs((c * c * rho).trace().real() * qfi - 1.0));
      ++evaluated;
    }
  }
  report(worst_mean <= kEstimatorMeanTol && worst_var <= kEstimatorVarTol && evaluated > 0, "optimal estimator moments",
         fmt("%zu points (16 per model), max |Tr(M rho) - theta| = %.3g, max relative variance gap %.3g%s", evaluated,
             worst_mean, worst_var,
             skipped.empty() ? "" : ("; no point with qfi > 1e-10 in " + skipped + ", estimator undefined").c_str()));
}

void null_compass(const std::vector<Run>& runs) {
  double worst_qfi = 0.0, worst_cfi = 0.0, worst_gamma = 0.0;
  for (const auto& run : runs) {
    if (std::find(kNullModels.begin(), kNullModels.end(), run.model) == kNullModels.end()) continue;
    worst_gamma = std::max(worst_gamma, run.result.gamma);
    for (const auto& r : run.result.records) {
      worst_qfi = std::max(worst_qfi, r.qfi);
      worst_cfi = std::max(worst_cfi, r.cfi);
    }
  }
  report(worst_qfi <= kNullTol && worst_cfi <= kNullTol && worst_gamma <= kNullTol, "null compass",
         fmt("max qfi %.3g, max cfi %.3g, gamma %.3g (tol %.0e)", worst_qfi, worst_cfi, worst_gamma, kNullTol));
}

void quadrature() {
  const SweepGrid grid;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.theta_count(); ++i)
    for (std::size_t j = 0; j < grid.phi_count(); ++j)
      v[i * grid.phi_count() + j] = std::pow(std::cos(units::deg_to_rad(grid.theta_deg(i))), 2);
  const double avg = sphere_average(grid, v);
  report(std::abs(avg - 1.0 / 3.0) <= kQuadratureTol, "quadrature cos^2 average",
         fmt("%.10f vs 1/3, error %.3g (tol %.0e)", avg, std::abs(avg - 1.0 / 3.0), kQuadratureTol));
}

void contextual_band(const std::vector<Run>& runs) {
  bool ok = true;
  std::string detail;
  for (const auto& run : runs) {
    if (std::find(kBandModels.begin(), kBandModels.end(), run.model) == kBandModels.end()) continue;
    const MetrologyRecord best = best_precision_point(run.result);
    const bool in_band = best.optimality >= kBandLow && best.optimality <= kBandHigh;
    ok = ok && in_band;
    detail += fmt("%s%s eed=%d: %.4g at (%.0f, %.0f) deg", detail.empty() ? "" : "; ", run.model.c_str(),
                  run.eed ? 1 : 0, best.optimality, units::rad_to_deg(best.theta), units::rad_to_deg(best.phi));
  }
  report(ok, "contextual band [1, 1e3]", detail);
}

void spin_components(const std::vector<Run>& runs) {
  std::size_t defined = 0, out_of_range = 0;
  for (const auto& run : runs)
    for (const auto& r : run.result.records)
      for (double d : {r.ortho_dist_s2, r.ortho_dist_ps}) {
        if (std::isnan(d)) continue;
        ++defined;
        if (!(d >= 0.0 && d <= std::numbers::pi / 2)) ++out_of_range;
      }
  report(out_of_range == 0 && defined > 0, "orthogonality distance range",
         fmt("%zu distances, %zu outside [0, pi/2]", defined, out_of_range));

  // Parseval and reconstruction on estimators from a reference model plus random operators.
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g;
  std::vector<DenseMatrix> ops;
  for (int k = 0; k < 50; ++k) {
    DenseMatrix a(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = {g(rng), g(rng)};
    ops.push_back(0.5 * (a + a.adjoint()));
  }
  const SpinSystem s = load("fad_w_2n");
  const SteadyStateSolver solver(s, true);
  for (double theta : {0.3, 1.2, 2.2}) {
    const OrientationProbe probe = probe_orientation(solver, orientation(theta, 0.4), units::deg_to_rad(0.1));
    const double qfi = qfi_spectral(probe.state);
    ops.push_back(optimal_estimator(theta, sld_solve(probe.state), qfi));
  }
  ops.push_back(electronic::total_spin_squared());
  ops.push_back(electronic::singlet_projector());

  const auto& basis = spin_component_basis();
  double worst_parseval = 0.0, worst_rebuild = 0.0, worst_self = 0.0;
  for (const auto& op : ops) {
    const auto c = spin_component_decomposition(op);
    DenseMatrix rebuilt = DenseMatrix::Zero(4, 4);
    double sum = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      rebuilt += c[i] * basis[i];
      sum += c[i] * c[i];
    }
    const double scale = std::max(1.0, (op * op).trace().real());
    worst_parseval = std::max(worst_parseval, std::abs(sum - (op * op).trace().real()) / scale);
    worst_rebuild = std::max(worst_rebuild, max_abs(rebuilt - op) / std::max(1.0, max_abs(op)));
    worst_self = std::max(worst_self, std::abs(orthogonality_distance(op, op) - std::numbers::pi / 2));
  }
  report(worst_parseval <= kParsevalTol && worst_rebuild <= kParsevalTol, "16-component Parseval",
         fmt("%zu operators, Parseval gap %.3g, reconstruction gap %.3g (tol %.0e)", ops.size(), worst_parseval,
             worst_rebuild, kParsevalTol));
  report(worst_self <= kSelfDistanceTol, "distance(O, O) = pi/2",
         fmt("max |distance - pi/2| = %.3g (arccos rounding tol %.0e)", worst_self, kSelfDistanceTol));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::printf("acceptance: full 181x37 sweeps of %zu models, with and without EED\n", kModels.size());
  std::fflush(stdout);
  std::vector<Run> runs;
  try {
    runs = run_sweeps();
  } catch (const std::exception& e) {
    std::printf("FAIL  sweeps                             %s\n", e.what());
    return 1;
  }

  qcrb_chain(runs);
  cfi_saturation(runs);
  s2_variance_identity(runs);
  operator_identity();
  oracle_equivalence(runs);
  analytic_anchor();
  qfi_routes(runs);
  estimator_moments(runs);
  null_compass(runs);
  quadrature();
  contextual_band(runs);
  spin_components(runs);

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("acceptance: %d failing criteria, %.1f s\n", g_failures, total);
  return g_failures == 0 ? 0 : 1;
}
