#include "rpcompass/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "rpcompass/errors.hpp"

namespace rpcompass {

namespace {

std::size_t steps_in(double range, double step, const char* what) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument(std::string(what) + " step must be positive");
  const double n = range / step;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
    throw InvalidArgument(std::string(what) + " step " + std::to_string(step) + " deg does not divide " +
                          std::to_string(range) + " deg evenly");
  return static_cast<std::size_t>(rounded);
}

std::vector<double> trapezoid(std::size_t n, bool periodic) {
  std::vector<double> w(n, 1.0);
  if (!periodic && n > 1) {
    w.front() = 0.5;
    w.back() = 0.5;
  }
  return w;
}

GridLocation locate(const MetrologyRecord& r, double value) { return GridLocation{value, r.theta, r.phi}; }

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Non-finite doubles in JSON become null.
nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json location_json(const GridLocation& l) {
  return {{"value", number(l.value)}, {"theta_deg", units::rad_to_deg(l.theta)}, {"phi_deg", units::rad_to_deg(l.phi)}};
}

nlohmann::ordered_json record_json(const MetrologyRecord& r) {
  return {{"theta_deg", units::rad_to_deg(r.theta)},
          {"phi_deg", units::rad_to_deg(r.phi)},
          {"phi_s", number(r.phi_s)},
          {"dphi_s_dtheta", number(r.dphi_s_dtheta)},
          {"qfi", number(r.qfi)},
          {"cfi", number(r.cfi)},
          {"inv_n_var", number(r.inv_n_var)},
          {"optimality", number(r.optimality)},
          {"ortho_dist_s2", number(r.ortho_dist_s2)},
          {"ortho_dist_ps", number(r.ortho_dist_ps)}};
}

nlohmann::ordered_json row_json(const OptimalityRow& row) {
  return {{"n1", number(row.first)},
          {"max", number(row.max)},
          {"min", number(row.min)},
          {"robust_average", number(row.robust_average)}};
}

}  // namespace

void SweepGrid::validate() const {
  (void)theta_count();
  (void)phi_count();
}

std::size_t SweepGrid::theta_count() const { return steps_in(180.0, theta_step_deg, "theta") + 1; }

std::size_t SweepGrid::phi_count() const {
  return full_phi ? steps_in(360.0, phi_step_deg, "phi") : steps_in(180.0, phi_step_deg, "phi") + 1;
}

std::vector<double> sphere_weights(const SweepGrid& grid) {
  const std::size_t nt = grid.theta_count();
  const std::size_t np = grid.phi_count();
  const auto wt = trapezoid(nt, false);
  const auto wp = trapezoid(np, grid.full_phi);

  std::vector<double> w(nt * np);
  for (std::size_t i = 0; i < nt; ++i) {
    const double s = std::sin(units::deg_to_rad(grid.theta_deg(i)));
    for (std::size_t j = 0; j < np; ++j) w[i * np + j] = wt[i] * s * wp[j];
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

double sphere_average(const SweepGrid& grid, std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("sphere average of an empty grid");
  const auto w = sphere_weights(grid);
  if (w.size() != values.size())
    throw InvalidArgument("value count " + std::to_string(values.size()) + " does not match the grid size " +
                          std::to_string(w.size()));
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * values[k];
  return acc;
}

double anisotropy(SweepResult& result) {
  auto& recs = result.records;
  if (recs.empty()) throw InvalidArgument("anisotropy of an empty grid");

  std::vector<double> yields(recs.size());
  std::transform(recs.begin(), recs.end(), yields.begin(), [](const MetrologyRecord& r) { return r.phi_s; });
  result.phi_s_mean = sphere_average(result.grid, yields);

  // Strict comparisons in theta-major order give lexicographic (theta, phi)
  // tie-breaking.
  const MetrologyRecord* s_max = &recs.front();
  const MetrologyRecord* s_min = &recs.front();
  const MetrologyRecord* q_max = &recs.front();
  const MetrologyRecord* q_min = &recs.front();
  const MetrologyRecord* v_max = &recs.front();
  const MetrologyRecord* v_min = &recs.front();
  for (const auto& r : recs) {
    if (r.phi_s > s_max->phi_s) s_max = &r;
    if (r.phi_s < s_min->phi_s) s_min = &r;
    if (r.qfi > q_max->qfi) q_max = &r;
    if (r.qfi < q_min->qfi) q_min = &r;
    if (r.inv_n_var > v_max->inv_n_var) v_max = &r;
    if (r.inv_n_var < v_min->inv_n_var) v_min = &r;
  }
  result.phi_s_max = s_max->phi_s;
  result.phi_s_min = s_min->phi_s;
  result.qfi_max = locate(*q_max, q_max->qfi);
  result.qfi_min = locate(*q_min, q_min->qfi);
  result.inv_n_var_max = locate(*v_max, v_max->inv_n_var);
  result.inv_n_var_min = locate(*v_min, v_min->inv_n_var);
  result.gamma = (result.phi_s_max - result.phi_s_min) / result.phi_s_mean;
  return result.gamma;
}

SweepResult sweep(const SpinSystem& system, const SweepGrid& grid, const SweepOptions& options) {
  grid.validate();
  const SteadyStateSolver solver(system, options.include_eed, options.method);

  SweepResult result;
  result.model = system.name;
  result.grid = grid;
  result.options = options;
  const std::size_t np = grid.phi_count();
  const std::size_t total = grid.size();
  result.records.resize(total);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::size_t error_index = total;
  std::string error_message;

  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      FieldOrientation field;
      field.b0_mT = options.b0_mT;
      field.theta = units::deg_to_rad(grid.theta_deg(k / np));
      field.phi = units::deg_to_rad(grid.phi_deg(k % np));
      try {
        const OrientationProbe probe = probe_orientation(solver, field, options.delta_rad);
        result.records[k] = evaluate_probe(probe, field, solver.system(), options.n_trials);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (k < error_index) {
          error_index = k;
          error_message = e.what();
        }
        failed.store(true);
      }
    }
  };

  const unsigned workers = std::min<std::size_t>(resolve_workers(options.workers), total);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  }

  if (failed) {
    throw std::runtime_error("sweep failed at theta = " + std::to_string(grid.theta_deg(error_index / np)) +
                             " deg, phi = " + std::to_string(grid.phi_deg(error_index % np)) + " deg: " + error_message);
  }
  anisotropy(result);
  return result;
}

MetrologyRecord best_precision_point(const SweepResult& result) {
  if (result.records.empty()) throw InvalidArgument("best precision point of an empty sweep");
  const MetrologyRecord* best = nullptr;
  for (const auto& r : result.records) {
    if (!(r.inv_n_var > 0.0) || !std::isfinite(r.inv_n_var)) continue;
    if (best == nullptr || r.inv_n_var > best->inv_n_var) best = &r;
  }
  if (best == nullptr) throw NotFoundError("every grid point has infinite yield variance");
  return *best;
}

OptimalityRow summarize_optimality(std::span<const double> optimality_by_n) {
  if (optimality_by_n.empty()) throw InvalidArgument("optimality summary needs at least one entry");
  OptimalityRow row;
  row.first = optimality_by_n.front();
  row.max = *std::max_element(optimality_by_n.begin(), optimality_by_n.end());
  row.min = *std::min_element(optimality_by_n.begin(), optimality_by_n.end());
  std::vector<double> sorted(optimality_by_n.begin(), optimality_by_n.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t keep = std::min<std::size_t>(7, sorted.size());
  row.robust_average = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep), 0.0) /
                       static_cast<double>(keep);
  return row;
}

TruncationSummary truncation_scan(const SpinSystem& full_system, const SweepGrid& grid, std::size_t n_first,
                                  std::size_t n_last, const SweepOptions& options,
                                  const TruncationCallback& on_sweep) {
  if (n_first < 1 || n_first > n_last || n_last > full_system.nuclei.size())
    throw InvalidArgument("nucleus range " + std::to_string(n_first) + ".." + std::to_string(n_last) +
                          " must lie within 1.." + std::to_string(full_system.nuclei.size()));
  TruncationSummary summary;
  summary.model = full_system.name;
  summary.include_eed = options.include_eed;
  std::vector<double> optimality;
  for (std::size_t n = n_first; n <= n_last; ++n) {
    const SweepResult s = sweep(rank_and_truncate(full_system, n), grid, options);
    if (on_sweep) on_sweep(n, s);
    TruncationEntry entry{n, s.gamma, best_precision_point(s)};
    optimality.push_back(entry.best.optimality);
    summary.entries.push_back(entry);
  }
  summary.row = summarize_optimality(optimality);
  return summary;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << kSweepCsvHeader << '\n';
  char line[512];
  for (const auto& r : result.records) {
    std::snprintf(line, sizeof line, "%.10g,%.10g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  units::rad_to_deg(r.theta), units::rad_to_deg(r.phi), r.phi_s, r.dphi_s_dtheta, r.qfi, r.cfi,
                  r.inv_n_var, r.optimality, r.ortho_dist_s2, r.ortho_dist_ps);
    out << line;
  }
}

nlohmann::ordered_json sweep_summary_json(const SweepResult& result) {
  nlohmann::ordered_json j;
  j["model"] = result.model;
  j["include_eed"] = result.options.include_eed;
  j["b0_mT"] = result.options.b0_mT;
  j["n_trials"] = result.options.n_trials;
  j["delta_deg"] = units::rad_to_deg(result.options.delta_rad);
  j["grid"] = {{"theta_step_deg", result.grid.theta_step_deg},
               {"phi_step_deg", result.grid.phi_step_deg},
               {"full_phi", result.grid.full_phi},
               {"theta_count", result.grid.theta_count()},
               {"phi_count", result.grid.phi_count()}};
  j["phi_s"] = {{"mean", number(result.phi_s_mean)}, {"max", number(result.phi_s_max)}, {"min", number(result.phi_s_min)}};
  j["gamma"] = number(result.gamma);
  j["extrema"] = {{"qfi_max", location_json(result.qfi_max)},
                  {"qfi_min", location_json(result.qfi_min)},
                  {"inv_n_var_max", location_json(result.inv_n_var_max)},
                  {"inv_n_var_min", location_json(result.inv_n_var_min)}};
  try {
    const MetrologyRecord best = best_precision_point(result);
    j["best_point"] = record_json(best);
    const double opt[] = {best.optimality};
    j["table_row"] = row_json(summarize_optimality(opt));
  } catch (const NotFoundError&) {
    j["best_point"] = nullptr;
    j["table_row"] = nullptr;
  }
  return j;
}

nlohmann::ordered_json truncation_summary_json(const TruncationSummary& summary) {
  nlohmann::ordered_json j;
  j["model"] = summary.model;
  j["include_eed"] = summary.include_eed;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : summary.entries) {
    nlohmann::ordered_json item;
    item["n_nuclei"] = e.n_nuclei;
    item["gamma"] = number(e.gamma);
    item["best_inv_n_var"] = number(e.best.inv_n_var);
    item["matched_qfi"] = number(e.best.qfi);
    item["optimality"] = number(e.best.optimality);
    item["best_point"] = record_json(e.best);
    entries.push_back(std::move(item));
  }
  j["entries"] = std::move(entries);
  j["table_row"] = row_json(summary.row);
  return j;
}

}  // namespace rpcompass
