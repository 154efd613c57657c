#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rpcompass/liouville.hpp"
#include "rpcompass/metrology.hpp"
#include "rpcompass/spin_system.hpp"
#include "rpcompass/units.hpp"

namespace rpcompass {

/// Rectangular orientation grid in degrees.
///
/// theta always spans [0, 180]. phi spans [0, 180] by default (inversion
/// symmetric tensors); with `full_phi` it spans [0, 360) periodically.
struct SweepGrid {
  double theta_step_deg = 1.0;
  double phi_step_deg = 5.0;
  bool full_phi = false;

  /// Throws InvalidArgument when a step does not divide its range.
  void validate() const;
  std::size_t theta_count() const;
  std::size_t phi_count() const;
  std::size_t size() const { return theta_count() * phi_count(); }
  double theta_deg(std::size_t i) const { return static_cast<double>(i) * theta_step_deg; }
  double phi_deg(std::size_t j) const { return static_cast<double>(j) * phi_step_deg; }
};

/// Normalized sphere-average weights matching the grid's record order
/// (theta-major): trapezoid in theta times sin(theta), trapezoid (or periodic
/// rectangle rule) in phi, scaled so the weights sum to one.
std::vector<double> sphere_weights(const SweepGrid& grid);

/// Sphere average of per-point values in grid order.
double sphere_average(const SweepGrid& grid, std::span<const double> values);

struct SweepOptions {
  bool include_eed = false;
  std::size_t n_trials = 1;
  double b0_mT = 0.05;
  double delta_rad = units::deg_to_rad(0.1);
  unsigned workers = 0;   // 0 = hardware concurrency
  SteadyStateMethod method = SteadyStateMethod::Auto;
};

struct GridLocation {
  double value = 0.0;
  double theta = 0.0;   // rad
  double phi = 0.0;     // rad
};

struct SweepResult {
  std::string model;
  SweepGrid grid;
  SweepOptions options;
  std::vector<MetrologyRecord> records;   // theta-major

  double phi_s_mean = 0.0;
  double phi_s_max = 0.0;
  double phi_s_min = 0.0;
  double gamma = 0.0;

  GridLocation qfi_max;
  GridLocation qfi_min;
  GridLocation inv_n_var_max;
  GridLocation inv_n_var_min;

  const MetrologyRecord& at(std::size_t theta_index, std::size_t phi_index) const {
    return records[theta_index * grid.phi_count() + phi_index];
  }
};

/// Full metrology evaluation over the grid. Grid points are independent and
/// run on a worker pool; results are deterministic for any worker count.
/// A failing point aborts the sweep with its (theta, phi) in the message.
SweepResult sweep(const SpinSystem& system, const SweepGrid& grid, const SweepOptions& options);

/// Recomputes phi_s_mean / max / min / gamma and the extrema locations from
/// the stored records; returns gamma = (max - min) / mean.
double anisotropy(SweepResult& result);

/// Record with the largest inv_n_var; ties go to smaller theta, then smaller
/// phi. Throws NotFoundError when every point has infinite variance.
MetrologyRecord best_precision_point(const SweepResult& result);

struct TruncationEntry {
  std::size_t n_nuclei = 0;
  double gamma = 0.0;
  MetrologyRecord best;   // best_precision_point of the truncated sweep
};

/// One Table-1-shaped row summarizing optimality over the scanned n.
struct OptimalityRow {
  double first = 0.0;    // value at the smallest scanned n (n = 1 when scanned)
  double max = 0.0;
  double min = 0.0;
  double robust_average = 0.0;   // mean of the 7 smallest, or of all when fewer
};

struct TruncationSummary {
  std::string model;
  bool include_eed = false;
  std::vector<TruncationEntry> entries;
  OptimalityRow row;
};

OptimalityRow summarize_optimality(std::span<const double> optimality_by_n);

using TruncationCallback = std::function<void(std::size_t n_nuclei, const SweepResult&)>;

/// For each n in [n_first, n_last]: keep the n strongest nuclei, sweep, and
/// take the best precision point. `on_sweep`, when set, sees every truncated
/// sweep before it is discarded.
TruncationSummary truncation_scan(const SpinSystem& full_system, const SweepGrid& grid, std::size_t n_first,
                                  std::size_t n_last, const SweepOptions& options,
                                  const TruncationCallback& on_sweep = {});

/// Frozen CSV schema.
inline constexpr const char* kSweepCsvHeader =
    "theta_deg,phi_deg,phi_s,dphi_s_dtheta,qfi,cfi,inv_n_var,optimality,ortho_dist_s2,ortho_dist_ps";

void write_sweep_csv(std::ostream& out, const SweepResult& result);
nlohmann::ordered_json sweep_summary_json(const SweepResult& result);
nlohmann::ordered_json truncation_summary_json(const TruncationSummary& summary);

}  // namespace rpcompass
