#pragma once

#include <array>
#include <cstddef>

#include "rpcompass/spin_system.hpp"
#include "rpcompass/types.hpp"

namespace rpcompass {

struct SpinMatrices {
  DenseMatrix x;
  DenseMatrix y;
  DenseMatrix z;

  const DenseMatrix& operator[](std::size_t axis) const;
};

/// Spin matrices for a spin of the given multiplicity (2S+1), basis ordered
/// m = S, S-1, ..., -S.
SpinMatrices angular_momentum_ops(int multiplicity);

/// 1 (x) ... (x) op (x) ... (x) 1 with `op` placed at `site` in the global
/// site order of `system`.
SparseMatrix embed_site_operator(const DenseMatrix& op, std::size_t site, const SpinSystem& system);

SparseMatrix identity_operator(const SpinSystem& system);

/// P_S = 1/4 - S_A . S_B on the full space.
SparseMatrix singlet_projector(const SpinSystem& system);

/// S^2 = (S_A + S_B)^2 on the full space.
SparseMatrix total_spin_squared(const SpinSystem& system);

/// Full Hamiltonian in rad/us:
///   sum_i [ sum_j S_i . A_ij . I_ij + omega . S_i ] + S_A . D . S_B
/// with omega = -gamma B. The EED term is added only when `include_eed` is set
/// and the system carries a tensor.
SparseMatrix build_hamiltonian(const SpinSystem& system, const FieldOrientation& field, bool include_eed);

/// Field-independent part of the Hamiltonian plus the three Zeeman generators,
/// assembled once and recombined per orientation.
class HamiltonianBuilder {
 public:
  HamiltonianBuilder(const SpinSystem& system, bool include_eed);

  SparseMatrix operator()(const FieldOrientation& field) const;

  const SparseMatrix& static_part() const { return static_; }
  std::size_t dimension() const { return static_cast<std::size_t>(static_.rows()); }

 private:
  double gamma_;
  SparseMatrix static_;
  std::array<SparseMatrix, 3> total_spin_;
};

/// Two-electron operators on the 4-dimensional electronic space
/// (electron A (x) electron B).
namespace electronic {

DenseMatrix identity();
DenseMatrix singlet_projector();
DenseMatrix triplet_projector();
DenseMatrix total_spin_squared();
/// S_{A,axis} (x) 1 for axis 0..2.
DenseMatrix spin_a(std::size_t axis);
/// 1 (x) S_{B,axis} for axis 0..2.
DenseMatrix spin_b(std::size_t axis);

}  // namespace electronic

bool is_hermitian(const DenseMatrix& m, double relative_tolerance);

}  // namespace rpcompass
