#pragma once

#include <cstddef>

#include "rpcompass/operators.hpp"
#include "rpcompass/spin_system.hpp"
#include "rpcompass/types.hpp"

namespace rpcompass {

/// Column-stacking vectorization: vec(A X B) = (B^T (x) A) vec(X).
DenseVector vectorize(const DenseMatrix& m);
DenseMatrix devectorize(const DenseVector& v);

/// Generator of the Haberkorn master equation in Liouville space (dim d^2).
struct SuperOperator {
  SparseMatrix matrix;
  std::size_t hilbert_dim = 0;
  double k_b = 0.0;
  double k_f = 0.0;
};

/// M vec(rho) = vec(-i[H, rho] - (k_b/2){P_S, rho} - k_f rho), i.e.
/// M = -i(1 (x) H - H^T (x) 1) - (k_b/2)(1 (x) P_S + P_S^T (x) 1) - k_f 1.
SuperOperator build_liouvillian(const SparseMatrix& hamiltonian, const SparseMatrix& singlet_projector, double k_b,
                                double k_f);

/// Right-hand side of the master equation evaluated directly on a matrix.
DenseMatrix apply_master_equation(const DenseMatrix& rho, const DenseMatrix& hamiltonian,
                                  const DenseMatrix& singlet_projector, double k_b, double k_f);

/// Continuous-generation steady state with generation normalized to k0 c = 1.
struct SteadyStateResult {
  DenseMatrix rho_ss;           // d x d, concentration weighted
  DenseMatrix rho_electronic;   // 4 x 4, unit trace
  double phi_s = 0.0;           // k_b Tr[P_S rho_ss]
  double singlet_population = 0.0;  // Tr[P_S rho_ss]
  double total_population = 0.0;    // Tr[rho_ss], the unnormalized electronic trace
};

/// Packs a steady-state density operator into a result: populations, Phi_S and
/// the trace-normalized reduced electronic state.
SteadyStateResult make_steady_state_result(DenseMatrix rho_ss, const SparseMatrix& singlet_projector, double k_b,
                                           std::size_t nuclear_dim);

enum class LinearSolver {
  Auto,      // sparse LU up to 65536 unknowns, Krylov above
  SparseLU,
  Krylov,    // BiCGSTAB with incomplete-LU preconditioning
};

struct ResolventOptions {
  LinearSolver solver = LinearSolver::Auto;
  double tolerance = 1e-10;   // relative residual
  int max_iterations = 5000;
};

/// Solves M vec(rho_ss) = -vec(P_S / Z) on the superoperator.
/// Throws SingularSystemError for k_f <= 0 and NumericalError when the residual
/// stays above tolerance.
SteadyStateResult steady_state(const SuperOperator& generator, const SparseMatrix& singlet_projector,
                               std::size_t nuclear_dim, const ResolventOptions& options = {});

/// Same steady state from the Hilbert-space Sylvester form
///   H_eff rho - rho H_eff^dagger = -i P_S / Z,   H_eff = H - i(k_b/2) P_S - i(k_f/2) 1,
/// solved by Bartels-Stewart on the complex Schur form of H_eff. O(d^3).
SteadyStateResult steady_state_sylvester(const SparseMatrix& hamiltonian, const SparseMatrix& singlet_projector,
                                         double k_b, double k_f, std::size_t nuclear_dim);

/// Norm of M vec(rho) + vec(P_S/Z), evaluated without forming M.
double steady_state_residual(const DenseMatrix& rho, const DenseMatrix& hamiltonian,
                             const DenseMatrix& singlet_projector, double k_b, double k_f, std::size_t nuclear_dim);

struct PropagationOptions {
  double t_max = 0.0;   // us; 0 selects 60 / k_f
  double dt = 0.0;      // Taylor substep, us; 0 selects 1 / (2 ||H_eff||_1)
  int taylor_order = 18;
  double derivative_tolerance = 1e-10;
};

/// Integrates d rho/dt = master equation + P_S/Z from rho(0) = 0 until
/// ||d rho/dt|| falls below tolerance.
///
/// The one-step flow over `dt` (propagator and integrated source) comes from
/// truncated Taylor series and is doubled up to a stride of about 1/(16 k_f),
/// so the march costs two products per stride. Independent of the resolvent
/// solvers; used as their oracle.
SteadyStateResult propagate_time_domain(const SpinSystem& system, const FieldOrientation& field, bool include_eed,
                                        const PropagationOptions& options = {});

/// Traces out every nuclear site (electrons occupy the two leading sites).
DenseMatrix partial_trace_electronic(const DenseMatrix& rho, std::size_t nuclear_dim);
DenseMatrix partial_trace_electronic(const DenseMatrix& rho, const SpinSystem& system);

enum class SteadyStateMethod {
  Auto,         // Sylvester, with a residual check and resolvent fallback
  Sylvester,
  Resolvent,
  Propagation,
};

/// Per-system steady-state solver reused across orientations. Immutable after
/// construction; `solve` is safe to call concurrently.
class SteadyStateSolver {
 public:
  SteadyStateSolver(const SpinSystem& system, bool include_eed, SteadyStateMethod method = SteadyStateMethod::Auto);

  SteadyStateResult solve(const FieldOrientation& field) const;

  const SpinSystem& system() const { return system_; }
  bool include_eed() const { return include_eed_; }
  const SparseMatrix& singlet_projector() const { return singlet_projector_; }
  SparseMatrix hamiltonian(const FieldOrientation& field) const { return builder_(field); }

 private:
  SpinSystem system_;
  bool include_eed_;
  SteadyStateMethod method_;
  HamiltonianBuilder builder_;
  SparseMatrix singlet_projector_;
};

}  // namespace rpcompass
