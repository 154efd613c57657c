#include "rpcompass/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "rpcompass/errors.hpp"

namespace rpcompass {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr std::size_t kSparseLuLimit = 65536;

SparseMatrix sparse_kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Eigen::Triplet<cplx>> entries;
  entries.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Eigen::Index ka = 0; ka < a.outerSize(); ++ka)
    for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia)
      for (Eigen::Index kb = 0; kb < b.outerSize(); ++kb)
        for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib)
          entries.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                               ia.value() * ib.value());
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

DenseMatrix effective_hamiltonian(const DenseMatrix& h, const DenseMatrix& p_s, double k_b, double k_f) {
  DenseMatrix heff = h - kI * (0.5 * k_b) * p_s;
  heff.diagonal().array() -= kI * (0.5 * k_f);
  return heff;
}

void require_square(const DenseMatrix& m, const char* what) {
  if (m.rows() != m.cols()) throw InvalidArgument(std::string(what) + " must be square");
}

}  // namespace

DenseVector vectorize(const DenseMatrix& m) {
  require_square(m, "vectorize input");
  return Eigen::Map<const DenseVector>(m.data(), m.size());
}

DenseMatrix devectorize(const DenseVector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) throw InvalidArgument("vector length " + std::to_string(v.size()) + " is not a square");
  return Eigen::Map<const DenseMatrix>(v.data(), n, n);
}

SuperOperator build_liouvillian(const SparseMatrix& hamiltonian, const SparseMatrix& singlet_projector, double k_b,
                                double k_f) {
  if (hamiltonian.rows() != hamiltonian.cols() || singlet_projector.rows() != singlet_projector.cols() ||
      hamiltonian.rows() != singlet_projector.rows())
    throw InvalidArgument("Hamiltonian and singlet projector must be square and of equal dimension");

  const Eigen::Index d = hamiltonian.rows();
  const SparseMatrix id = sparse_identity(d);
  const SparseMatrix h_t = hamiltonian.transpose();
  const SparseMatrix p_t = singlet_projector.transpose();

  SparseMatrix m = (-kI) * (sparse_kron(id, hamiltonian) - sparse_kron(h_t, id));
  m -= cplx(0.5 * k_b) * (sparse_kron(id, singlet_projector) + sparse_kron(p_t, id));
  m -= cplx(k_f) * sparse_identity(d * d);
  m.prune(cplx(0.0));
  m.makeCompressed();
  return SuperOperator{std::move(m), static_cast<std::size_t>(d), k_b, k_f};
}

DenseMatrix apply_master_equation(const DenseMatrix& rho, const DenseMatrix& hamiltonian,
                                  const DenseMatrix& singlet_projector, double k_b, double k_f) {
  return -kI * (hamiltonian * rho - rho * hamiltonian) -
         (0.5 * k_b) * (singlet_projector * rho + rho * singlet_projector) - k_f * rho;
}

DenseMatrix partial_trace_electronic(const DenseMatrix& rho, std::size_t nuclear_dim) {
  const auto z = static_cast<Eigen::Index>(nuclear_dim);
  if (rho.rows() != rho.cols() || rho.rows() != 4 * z)
    throw InvalidArgument("density matrix of size " + std::to_string(rho.rows()) + "x" + std::to_string(rho.cols()) +
                          " does not match 4 x " + std::to_string(nuclear_dim));
  DenseMatrix out(4, 4);
  for (Eigen::Index a = 0; a < 4; ++a)
    for (Eigen::Index b = 0; b < 4; ++b) out(a, b) = rho.block(a * z, b * z, z, z).trace();
  return out;
}

DenseMatrix partial_trace_electronic(const DenseMatrix& rho, const SpinSystem& system) {
  return partial_trace_electronic(rho, system.nuclear_dimension());
}

SteadyStateResult make_steady_state_result(DenseMatrix rho_ss, const SparseMatrix& singlet_projector, double k_b,
                                           std::size_t nuclear_dim) {
  SteadyStateResult r;
  r.singlet_population = (singlet_projector * rho_ss).trace().real();
  r.total_population = rho_ss.trace().real();
  r.phi_s = k_b * r.singlet_population;
  r.rho_electronic = partial_trace_electronic(rho_ss, nuclear_dim);
  r.rho_electronic /= r.rho_electronic.trace();
  r.rho_ss = std::move(rho_ss);
  return r;
}

SteadyStateResult steady_state(const SuperOperator& generator, const SparseMatrix& singlet_projector,
                               std::size_t nuclear_dim, const ResolventOptions& options) {
  if (!(generator.k_f > 0.0))
    throw SingularSystemError("steady state requires k_f > 0; the generator is singular at s = 0");
  const auto d = static_cast<Eigen::Index>(generator.hilbert_dim);
  if (generator.matrix.rows() != d * d || singlet_projector.rows() != d)
    throw InvalidArgument("superoperator and singlet projector dimensions disagree");
  if (static_cast<std::size_t>(d) != 4 * nuclear_dim)
    throw InvalidArgument("nuclear dimension inconsistent with the Hilbert dimension");

  const DenseMatrix source = DenseMatrix(singlet_projector) / static_cast<double>(nuclear_dim);
  const DenseVector rhs = -vectorize(source);

  LinearSolver solver = options.solver;
  if (solver == LinearSolver::Auto)
    solver = static_cast<std::size_t>(d * d) <= kSparseLuLimit ? LinearSolver::SparseLU : LinearSolver::Krylov;

  DenseVector x;
  if (solver == LinearSolver::SparseLU) {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(generator.matrix);
    if (lu.info() != Eigen::Success) throw SingularSystemError("sparse LU factorization failed: " + lu.lastErrorMessage());
    x = lu.solve(rhs);
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<cplx>> krylov;
    krylov.preconditioner().setDroptol(1e-6);
    krylov.preconditioner().setFillfactor(20);
    krylov.setTolerance(options.tolerance * 1e-2);
    krylov.setMaxIterations(options.max_iterations);
    krylov.compute(generator.matrix);
    if (krylov.info() != Eigen::Success) throw NumericalError("Krylov preconditioner setup failed", 1.0);
    x = krylov.solve(rhs);
  }

  const double residual = (generator.matrix * x - rhs).norm() / rhs.norm();
  if (!(residual <= options.tolerance)) throw NumericalError("steady-state resolvent solve did not converge", residual);

  return make_steady_state_result(devectorize(x), singlet_projector, generator.k_b, nuclear_dim);
}

double steady_state_residual(const DenseMatrix& rho, const DenseMatrix& hamiltonian,
                             const DenseMatrix& singlet_projector, double k_b, double k_f, std::size_t nuclear_dim) {
  return (apply_master_equation(rho, hamiltonian, singlet_projector, k_b, k_f) +
          singlet_projector / static_cast<double>(nuclear_dim))
      .norm();
}

SteadyStateResult steady_state_sylvester(const SparseMatrix& hamiltonian, const SparseMatrix& singlet_projector,
                                         double k_b, double k_f, std::size_t nuclear_dim) {
  if (!(k_f > 0.0)) throw SingularSystemError("steady state requires k_f > 0");
  const Eigen::Index d = hamiltonian.rows();
  if (hamiltonian.cols() != d || singlet_projector.rows() != d || singlet_projector.cols() != d)
    throw InvalidArgument("Hamiltonian and singlet projector dimensions disagree");

  const DenseMatrix p_s(singlet_projector);
  const DenseMatrix heff = effective_hamiltonian(DenseMatrix(hamiltonian), p_s, k_b, k_f);

  // H_eff = U T U^dagger; solve T Y - Y T^dagger = U^dagger C U column by column
  // from the right. Diagonal shifts T_ii - conj(T_jj) have imaginary part
  // <= -k_f, so every triangular solve is nonsingular.
  Eigen::ComplexSchur<DenseMatrix> schur(heff);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed", 1.0);
  const DenseMatrix& t = schur.matrixT();
  const DenseMatrix& u = schur.matrixU();

  const DenseMatrix c = u.adjoint() * ((-kI / static_cast<double>(nuclear_dim)) * p_s) * u;
  DenseMatrix y = DenseMatrix::Zero(d, d);
  DenseMatrix shifted = t;
  for (Eigen::Index j = d - 1; j >= 0; --j) {
    DenseVector rhs = c.col(j);
    if (j + 1 < d) rhs.noalias() += y.rightCols(d - j - 1) * t.row(j).tail(d - j - 1).adjoint();
    shifted.diagonal() = t.diagonal().array() - std::conj(t(j, j));
    y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  DenseMatrix rho = u * y * u.adjoint();
  return make_steady_state_result(std::move(rho), singlet_projector, k_b, nuclear_dim);
}

SteadyStateResult propagate_time_domain(const SpinSystem& system, const FieldOrientation& field, bool include_eed,
                                        const PropagationOptions& options) {
  system.validate();
  if (options.taylor_order < 4) throw InvalidArgument("Taylor order must be >= 4");
  const std::size_t z = system.nuclear_dimension();
  const SparseMatrix p_sparse = singlet_projector(system);
  const DenseMatrix p_s(p_sparse);
  const DenseMatrix h(build_hamiltonian(system, field, include_eed));
  const DenseMatrix heff = effective_hamiltonian(h, p_s, system.k_b, system.k_f);
  const DenseMatrix heff_adj = heff.adjoint();
  const DenseMatrix source = p_s / static_cast<double>(z);
  const Eigen::Index d = h.rows();

  const double dt = options.dt > 0.0 ? options.dt : 0.5 / heff.cwiseAbs().colwise().sum().maxCoeff();
  const double t_max = options.t_max > 0.0 ? options.t_max : 60.0 / system.k_f;

  // Over one substep: U = exp(-i H_eff dt) and Q = int_0^dt U(s) S U(s)^dagger ds,
  // both from truncated Taylor series of the exact flow.
  auto apply = [&](const DenseMatrix& x) -> DenseMatrix { return -kI * (heff * x - x * heff_adj); };
  DenseMatrix u = DenseMatrix::Identity(d, d);
  DenseMatrix u_term = DenseMatrix::Identity(d, d);
  DenseMatrix q = source * dt;
  DenseMatrix q_term = q;
  for (int k = 1; k <= options.taylor_order; ++k) {
    u_term = (-kI * dt / static_cast<double>(k)) * (heff * u_term);
    u += u_term;
    if (k < options.taylor_order) {
      q_term = apply(q_term) * (dt / static_cast<double>(k + 1));
      q += q_term;
    }
  }

  // Double the substep up to a stride of about 1/(16 k_f):
  // U(2t) = U(t)^2, Q(2t) = U(t) Q(t) U(t)^dagger + Q(t).
  double stride = dt;
  while (2.0 * stride <= 0.0625 / system.k_f) {
    q = u * q * u.adjoint() + q;
    u = u * u;
    stride *= 2.0;
  }

  DenseMatrix rho = DenseMatrix::Zero(d, d);
  double derivative_norm = source.norm();
  const auto max_steps = static_cast<long long>(std::ceil(t_max / stride));
  for (long long step = 0; step <= max_steps; ++step) {
    derivative_norm = (apply(rho) + source).norm();
    if (derivative_norm < options.derivative_tolerance)
      return make_steady_state_result(std::move(rho), p_sparse, system.k_b, z);
    rho = u * rho * u.adjoint() + q;
  }
  throw NumericalError("time propagation did not reach steady state within t_max = " + std::to_string(t_max) + " us",
                       derivative_norm);
}

SteadyStateSolver::SteadyStateSolver(const SpinSystem& system, bool include_eed, SteadyStateMethod method)
    : system_((system.validate(), system)),
      include_eed_(include_eed),
      method_(method),
      builder_(system, include_eed),
      singlet_projector_(rpcompass::singlet_projector(system)) {}

SteadyStateResult SteadyStateSolver::solve(const FieldOrientation& field) const {
  const std::size_t z = system_.nuclear_dimension();
  switch (method_) {
    case SteadyStateMethod::Sylvester:
      return steady_state_sylvester(builder_(field), singlet_projector_, system_.k_b, system_.k_f, z);
    case SteadyStateMethod::Resolvent:
      return steady_state(build_liouvillian(builder_(field), singlet_projector_, system_.k_b, system_.k_f),
                          singlet_projector_, z);
    case SteadyStateMethod::Propagation:
      return propagate_time_domain(system_, field, include_eed_);
    case SteadyStateMethod::Auto:
      break;
  }
  const SparseMatrix h = builder_(field);
  SteadyStateResult r = steady_state_sylvester(h, singlet_projector_, system_.k_b, system_.k_f, z);
  const DenseMatrix p_s(singlet_projector_);
  const double source_norm = p_s.norm() / static_cast<double>(z);
  const double residual = steady_state_residual(r.rho_ss, DenseMatrix(h), p_s, system_.k_b, system_.k_f, z);
  if (residual <= 1e-10 * source_norm) return r;
  return steady_state(build_liouvillian(h, singlet_projector_, system_.k_b, system_.k_f), singlet_projector_, z);
}

}  // namespace rpcompass
