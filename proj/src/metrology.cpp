#include "rpcompass/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "rpcompass/errors.hpp"
#include "rpcompass/operators.hpp"

namespace rpcompass {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kHermitianTolerance = 1e-10;
constexpr double kEigenvalueFloor = 1e-12;
constexpr double kBoundaryYield = 1e-9;

void require_family(const StateDerivative& sd) {
  if (sd.rho.rows() != sd.rho.cols() || sd.drho_dtheta.rows() != sd.rho.rows() ||
      sd.drho_dtheta.cols() != sd.rho.cols())
    throw InvalidArgument("state and derivative must be square matrices of equal size");
  if (!is_hermitian(sd.rho, kHermitianTolerance)) throw InvalidArgument("state is not Hermitian");
  if ((sd.drho_dtheta - sd.drho_dtheta.adjoint()).norm() > kHermitianTolerance * std::max(sd.rho.norm(), 1.0))
    throw InvalidArgument("state derivative is not Hermitian");
}

DenseMatrix hermitian_part(const DenseMatrix& m) { return 0.5 * (m + m.adjoint()); }

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

OrientationProbe probe_orientation(const SteadyStateSolver& solver, const FieldOrientation& field, double delta) {
  if (!(delta > 0.0 && delta < std::numbers::pi)) throw InvalidArgument("derivative step must lie in (0, pi)");
  if (!(field.theta >= 0.0 && field.theta <= std::numbers::pi)) throw InvalidArgument("theta must lie in [0, pi]");

  OrientationProbe probe;
  probe.center = solver.solve(field);

  const double lower_theta = std::max(field.theta - 0.5 * delta, 0.0);
  const double upper_theta = std::min(field.theta + 0.5 * delta, std::numbers::pi);
  auto at = [&](double theta) {
    if (theta == field.theta) return probe.center;
    FieldOrientation shifted = field;
    shifted.theta = theta;
    return solver.solve(shifted);
  };
  const SteadyStateResult lower = at(lower_theta);
  const SteadyStateResult upper = at(upper_theta);
  const double width = upper_theta - lower_theta;

  probe.state.rho = probe.center.rho_electronic;
  probe.state.drho_dtheta = (upper.rho_electronic - lower.rho_electronic) / width;
  probe.state.step = width;
  probe.phi_s = probe.center.phi_s;
  probe.dphi_s_dtheta = (upper.phi_s - lower.phi_s) / width;
  return probe;
}

StateDerivative state_derivative(const SpinSystem& system, const FieldOrientation& field, double delta,
                                 bool include_eed) {
  const SteadyStateSolver solver(system, include_eed);
  return probe_orientation(solver, field, delta).state;
}

double qfi_spectral(const StateDerivative& sd) {
  require_family(sd);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(hermitian_part(sd.rho));
  const Eigen::VectorXd& p = eig.eigenvalues();
  const DenseMatrix d = eig.eigenvectors().adjoint() * sd.drho_dtheta * eig.eigenvectors();
  double f = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double s = p[i] + p[j];
      if (s > kSpectralGuard) f += std::norm(d(i, j)) / s;
    }
  return 2.0 * f;
}

DenseMatrix sld_solve(const StateDerivative& sd) {
  require_family(sd);
  const Eigen::Index n = sd.rho.rows();

  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(hermitian_part(sd.rho));
  Eigen::VectorXd p = eig.eigenvalues().cwiseMax(kEigenvalueFloor);
  p /= p.sum();
  const DenseMatrix rho_reg = eig.eigenvectors() * p.cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint();

  const DenseMatrix id = DenseMatrix::Identity(n, n);
  const DenseMatrix kron_sum = kron(rho_reg.conjugate(), id) + kron(id, rho_reg);
  const Eigen::PartialPivLU<DenseMatrix> lu(kron_sum);
  const DenseVector vec_l = lu.solve(2.0 * vectorize(sd.drho_dtheta));
  if (!vec_l.allFinite()) throw NumericalError("Kronecker-sum SLD system is singular", kInf);
  return hermitian_part(devectorize(vec_l));
}

double qfi_from_sld(const StateDerivative& sd, const DenseMatrix& sld) { return (sld * sld * sd.rho).trace().real(); }

double qfi_vectorized(const StateDerivative& sd, const DenseMatrix& sld) {
  return vectorize(sd.drho_dtheta).dot(vectorize(sld)).real();
}

double sld_residual(const StateDerivative& sd, const DenseMatrix& sld) {
  return (0.5 * (sld * sd.rho + sd.rho * sld) - sd.drho_dtheta).norm();
}

double cfi_yield(double phi_s, double dphi_s_dtheta) {
  if (dphi_s_dtheta == 0.0) return 0.0;
  if (phi_s <= kBoundaryYield || phi_s >= 1.0 - kBoundaryYield) return kInf;
  return dphi_s_dtheta * dphi_s_dtheta / (phi_s * (1.0 - phi_s));
}

double error_propagation_variance(double observable_variance, double dmean_dtheta, std::size_t n_trials) {
  if (n_trials < 1) throw InvalidArgument("number of trials must be >= 1");
  if (dmean_dtheta == 0.0) return kInf;
  return observable_variance / (static_cast<double>(n_trials) * dmean_dtheta * dmean_dtheta);
}

double yield_variance(double phi_s, double dphi_s_dtheta, std::size_t n_trials) {
  return error_propagation_variance(phi_s * (1.0 - phi_s), dphi_s_dtheta, n_trials);
}

double yield_variance_s2(double phi_s, double dphi_s_dtheta, std::size_t n_trials) {
  const double triplet = 1.0 - phi_s;
  const double mean = 2.0 * triplet;           // <S^2>
  const double second_moment = 4.0 * triplet;  // <S^4>
  const double dmean = -2.0 * dphi_s_dtheta;
  return error_propagation_variance(second_moment - mean * mean, dmean, n_trials);
}

DenseMatrix optimal_estimator(double theta, const DenseMatrix& sld, double qfi) {
  if (!(qfi > 0.0) || !std::isfinite(qfi))
    throw UndefinedEstimatorError("optimal estimator needs a positive, finite QFI (got " + std::to_string(qfi) + ")");
  DenseMatrix m = sld / qfi;
  m.diagonal().array() += theta;
  return m;
}

const std::array<DenseMatrix, 16>& spin_component_basis() {
  static const std::array<DenseMatrix, 16> basis = [] {
    const SpinMatrices s = angular_momentum_ops(2);
    const std::array<DenseMatrix, 4> sigma{DenseMatrix::Identity(2, 2), 2.0 * s.x, 2.0 * s.y, 2.0 * s.z};
    std::array<DenseMatrix, 16> out;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) out[4 * a + b] = 0.5 * kron(sigma[a], sigma[b]);
    return out;
  }();
  return basis;
}

std::array<double, 16> spin_component_decomposition(const DenseMatrix& op) {
  if (op.rows() != 4 || op.cols() != 4) throw InvalidArgument("spin-component decomposition needs a 4x4 operator");
  if (!is_hermitian(op, kHermitianTolerance)) throw InvalidArgument("spin-component decomposition needs a Hermitian operator");
  const auto& basis = spin_component_basis();
  std::array<double, 16> c{};
  for (std::size_t i = 0; i < 16; ++i) c[i] = (op * basis[i]).trace().real();
  return c;
}

double orthogonality_distance(const DenseMatrix& m_est, const DenseMatrix& observable) {
  const auto cm = spin_component_decomposition(m_est);
  const auto co = spin_component_decomposition(observable);
  double dot = 0.0, nm = 0.0, no = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    dot += cm[i] * co[i];
    nm += cm[i] * cm[i];
    no += co[i] * co[i];
  }
  if (nm == 0.0 || no == 0.0) throw InvalidArgument("orthogonality distance of a zero operator is undefined");
  const double cosine = std::clamp(dot / (std::sqrt(nm) * std::sqrt(no)), -1.0, 1.0);
  return std::abs(std::acos(cosine) - 0.5 * std::numbers::pi);
}

MetrologyRecord evaluate_probe(const OrientationProbe& probe, const FieldOrientation& field, const SpinSystem& system,
                               std::size_t n_trials) {
  MetrologyRecord r;
  r.theta = field.theta;
  r.phi = field.phi;
  r.phi_s = probe.phi_s;
  r.dphi_s_dtheta = probe.dphi_s_dtheta;

  r.qfi = qfi_spectral(probe.state);
  const DenseMatrix sld = sld_solve(probe.state);
  r.qfi_sld = qfi_from_sld(probe.state, sld);
  r.qfi_vec = qfi_vectorized(probe.state, sld);
  r.sld_residual = sld_residual(probe.state, sld);

  r.cfi = cfi_yield(r.phi_s, r.dphi_s_dtheta);
  const double variance = yield_variance(r.phi_s, r.dphi_s_dtheta, n_trials);
  r.variance_s2 = yield_variance_s2(r.phi_s, r.dphi_s_dtheta, n_trials);
  r.inv_n_var = std::isinf(variance) ? 0.0 : 1.0 / (static_cast<double>(n_trials) * variance);

  if (r.inv_n_var > 0.0) {
    r.optimality = r.qfi / r.inv_n_var;
  } else {
    r.optimality = r.qfi > kEstimatorQfiFloor ? kInf : kNaN;
  }
  if (r.qfi <= kEstimatorQfiFloor && r.inv_n_var <= kEstimatorQfiFloor) r.optimality = kNaN;

  if (r.qfi > kEstimatorQfiFloor) {
    const DenseMatrix m = optimal_estimator(field.theta, sld, r.qfi);
    static const DenseMatrix s2 = electronic::total_spin_squared();
    static const DenseMatrix p_s = electronic::singlet_projector();
    r.ortho_dist_s2 = orthogonality_distance(m, s2);
    r.ortho_dist_ps = orthogonality_distance(m, p_s);
  } else {
    r.ortho_dist_s2 = kNaN;
    r.ortho_dist_ps = kNaN;
  }

  r.total_population = probe.center.total_population;
  r.flux_balance = system.k_b * probe.center.singlet_population + system.k_f * probe.center.total_population;
  return r;
}

}  // namespace rpcompass
