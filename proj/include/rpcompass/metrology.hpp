#pragma once

#include <array>
#include <cstddef>

#include "rpcompass/liouville.hpp"
#include "rpcompass/spin_system.hpp"
#include "rpcompass/types.hpp"

namespace rpcompass {

/// A one-parameter state family at a point: rho(theta) and d rho / d theta.
struct StateDerivative {
  DenseMatrix rho;
  DenseMatrix drho_dtheta;   // rad^-1
  double step = 0.0;         // finite-difference width actually used, rad
};

/// Everything derived from the steady-state solves at one orientation.
struct OrientationProbe {
  StateDerivative state;     // normalized reduced electronic state
  SteadyStateResult center;
  double phi_s = 0.0;
  double dphi_s_dtheta = 0.0;
};

/// Finite-difference probe of the steady state in theta.
///
/// Uses the symmetric pair theta +- delta/2, clipped to [0, pi]; at the poles
/// the difference becomes one-sided over the remaining half-interval. The same
/// two solves feed both d rho / d theta and d Phi_S / d theta.
OrientationProbe probe_orientation(const SteadyStateSolver& solver, const FieldOrientation& field, double delta);

/// Convenience wrapper building a solver for a single derivative.
StateDerivative state_derivative(const SpinSystem& system, const FieldOrientation& field, double delta,
                                 bool include_eed);

inline constexpr double kSpectralGuard = 1e-12;

/// F = 2 sum_{p_i + p_j > eps} |<i| d rho |j>|^2 / (p_i + p_j).
double qfi_spectral(const StateDerivative& sd);

/// Symmetric logarithmic derivative from the vectorized Lyapunov equation
///   vec(L) = 2 (conj(rho) (x) 1 + 1 (x) rho)^-1 vec(d rho),
/// with rho's eigenvalues floored at 1e-12 and renormalized first.
DenseMatrix sld_solve(const StateDerivative& sd);

/// Tr(L^2 rho).
double qfi_from_sld(const StateDerivative& sd, const DenseMatrix& sld);

/// vec(d rho)^dagger vec(L).
double qfi_vectorized(const StateDerivative& sd, const DenseMatrix& sld);

/// || (L rho + rho L)/2 - d rho ||_F.
double sld_residual(const StateDerivative& sd, const DenseMatrix& sld);

/// Fisher information of the singlet/triplet measurement:
/// (dPhi)^2 / (Phi (1 - Phi)). +inf at Phi in {0, 1} with a nonzero slope.
double cfi_yield(double phi_s, double dphi_s_dtheta);

/// Binomial error propagation: Phi (1 - Phi) / (N |dPhi/dtheta|^2).
/// +inf for a vanishing slope.
double yield_variance(double phi_s, double dphi_s_dtheta, std::size_t n_trials);

/// Generic error propagation Var(O) / (N |d<O>/dtheta|^2).
double error_propagation_variance(double observable_variance, double dmean_dtheta, std::size_t n_trials);

/// The yield variance obtained instead from S^2 statistics: S^2 takes the
/// value 0 on the singlet and 2 on the triplets, so <S^2> = 2(1 - Phi),
/// <S^4> = 4(1 - Phi), fed through error_propagation_variance.
double yield_variance_s2(double phi_s, double dphi_s_dtheta, std::size_t n_trials);

/// M = theta 1 + L / F. Throws UndefinedEstimatorError for F <= 0.
DenseMatrix optimal_estimator(double theta, const DenseMatrix& sld, double qfi);

/// The 16 two-spin components (1/2) sigma_a (x) sigma_b, a, b in {1, x, y, z},
/// index 4a + b. Orthonormal under Tr(A^dagger B).
const std::array<DenseMatrix, 16>& spin_component_basis();

/// c_i = Tr[O S_i] for a Hermitian 4x4 operator.
std::array<double, 16> spin_component_decomposition(const DenseMatrix& op);

/// | arccos(c_M . c_O / (|c_M| |c_O|)) - pi/2 |, in [0, pi/2].
double orthogonality_distance(const DenseMatrix& m_est, const DenseMatrix& observable);

/// Per-orientation metrology bundle.
struct MetrologyRecord {
  double theta = 0.0;
  double phi = 0.0;
  double phi_s = 0.0;
  double dphi_s_dtheta = 0.0;
  double qfi = 0.0;
  double cfi = 0.0;
  double inv_n_var = 0.0;     // 1 / (N Delta^2 theta)
  double optimality = 0.0;    // qfi / inv_n_var
  double ortho_dist_s2 = 0.0; // vs S^2
  double ortho_dist_ps = 0.0; // vs P_S
  // Diagnostics for the invariant checks.
  double qfi_sld = 0.0;
  double qfi_vec = 0.0;
  double sld_residual = 0.0;
  double flux_balance = 0.0;  // k_b Tr[P_S rho] + k_f Tr[rho]
  double total_population = 0.0;
  double variance_s2 = 0.0;   // Delta^2 theta by the S^2 route
};

/// Below this QFI the optimal estimator, and with it the orthogonality
/// distances, are reported as NaN.
inline constexpr double kEstimatorQfiFloor = 1e-10;

/// Evaluates one grid point from a probe.
MetrologyRecord evaluate_probe(const OrientationProbe& probe, const FieldOrientation& field, const SpinSystem& system,
                               std::size_t n_trials = 1);

}  // namespace rpcompass
