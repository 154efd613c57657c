#include "rpcompass/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rpcompass/errors.hpp"

namespace rpcompass {

namespace {

constexpr cplx kI{0.0, 1.0};

SparseMatrix sparse_identity(std::size_t dim) {
  SparseMatrix id(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  id.setIdentity();
  return id;
}

// S_a . T . S_b for operators already embedded in the same space.
SparseMatrix bilinear(const std::array<SparseMatrix, 3>& left, const Matrix3& tensor,
                      const std::array<SparseMatrix, 3>& right) {
  SparseMatrix out(left[0].rows(), left[0].cols());
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (tensor(a, b) != 0.0) out += cplx(tensor(a, b)) * (left[a] * right[b]);
  return out;
}

std::array<SparseMatrix, 3> embed_spin(int multiplicity, std::size_t site, const SpinSystem& system) {
  const SpinMatrices s = angular_momentum_ops(multiplicity);
  return {embed_site_operator(s.x, site, system), embed_site_operator(s.y, site, system),
          embed_site_operator(s.z, site, system)};
}

}  // namespace

const DenseMatrix& SpinMatrices::operator[](std::size_t axis) const {
  switch (axis) {
    case 0: return x;
    case 1: return y;
    case 2: return z;
    default: throw InvalidArgument("spin axis must be 0, 1 or 2");
  }
}

SpinMatrices angular_momentum_ops(int multiplicity) {
  if (multiplicity < 2) throw InvalidArgument("multiplicity must be >= 2, got " + std::to_string(multiplicity));
  const auto n = static_cast<Eigen::Index>(multiplicity);
  const double s = 0.5 * static_cast<double>(multiplicity - 1);

  SpinMatrices out{DenseMatrix::Zero(n, n), DenseMatrix::Zero(n, n), DenseMatrix::Zero(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const double m = s - static_cast<double>(k);
    out.z(k, k) = m;
    if (k + 1 < n) {
      // <m|S+|m-1> = sqrt(s(s+1) - m(m-1))
      const double raise = std::sqrt(s * (s + 1.0) - m * (m - 1.0));
      out.x(k, k + 1) = 0.5 * raise;
      out.x(k + 1, k) = 0.5 * raise;
      out.y(k, k + 1) = -0.5 * kI * raise;
      out.y(k + 1, k) = 0.5 * kI * raise;
    }
  }
  return out;
}

SparseMatrix embed_site_operator(const DenseMatrix& op, std::size_t site, const SpinSystem& system) {
  const auto dims = system.site_dimensions();
  if (site >= dims.size())
    throw InvalidArgument("site " + std::to_string(site) + " out of range (" + std::to_string(dims.size()) + " sites)");
  const auto local = static_cast<std::size_t>(op.rows());
  if (op.rows() != op.cols() || local != dims[site])
    throw InvalidArgument("operator of size " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                          " does not match site " + std::to_string(site) + " of dimension " +
                          std::to_string(dims[site]));

  std::size_t left = 1, right = 1;
  for (std::size_t i = 0; i < site; ++i) left *= dims[i];
  for (std::size_t i = site + 1; i < dims.size(); ++i) right *= dims[i];
  const std::size_t dim = left * local * right;

  std::vector<Eigen::Triplet<cplx>> entries;
  std::size_t nnz_local = 0;
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index j = 0; j < op.cols(); ++j)
      if (op(i, j) != cplx(0.0)) ++nnz_local;
  entries.reserve(nnz_local * left * right);

  for (std::size_t l = 0; l < left; ++l)
    for (Eigen::Index i = 0; i < op.rows(); ++i)
      for (Eigen::Index j = 0; j < op.cols(); ++j) {
        const cplx v = op(i, j);
        if (v == cplx(0.0)) continue;
        const std::size_t row0 = (l * local + static_cast<std::size_t>(i)) * right;
        const std::size_t col0 = (l * local + static_cast<std::size_t>(j)) * right;
        for (std::size_t r = 0; r < right; ++r)
          entries.emplace_back(static_cast<Eigen::Index>(row0 + r), static_cast<Eigen::Index>(col0 + r), v);
      }

  SparseMatrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

SparseMatrix identity_operator(const SpinSystem& system) { return sparse_identity(system.hilbert_dimension()); }

SparseMatrix singlet_projector(const SpinSystem& system) {
  const auto sa = embed_spin(2, 0, system);
  const auto sb = embed_spin(2, 1, system);
  SparseMatrix p = 0.25 * identity_operator(system);
  for (int a = 0; a < 3; ++a) p -= sa[a] * sb[a];
  p.prune(cplx(0.0));
  return p;
}

SparseMatrix total_spin_squared(const SpinSystem& system) {
  const auto sa = embed_spin(2, 0, system);
  const auto sb = embed_spin(2, 1, system);
  SparseMatrix s2(sa[0].rows(), sa[0].cols());
  for (int a = 0; a < 3; ++a) {
    const SparseMatrix s = sa[a] + sb[a];
    s2 += s * s;
  }
  s2.prune(cplx(0.0));
  return s2;
}

HamiltonianBuilder::HamiltonianBuilder(const SpinSystem& system, bool include_eed)
    : gamma_(system.gyromagnetic_ratio()) {
  const auto sa = embed_spin(2, 0, system);
  const auto sb = embed_spin(2, 1, system);
  const auto sites = system.nucleus_sites();

  static_ = SparseMatrix(sa[0].rows(), sa[0].cols());
  for (std::size_t i = 0; i < system.nuclei.size(); ++i) {
    const Nucleus& n = system.nuclei[i];
    const auto spin_i = embed_spin(n.multiplicity, sites[i], system);
    const auto& electron = n.radical == Radical::A ? sa : sb;
    static_ += gamma_ * bilinear(electron, n.hyperfine_mT, spin_i);
  }
  if (include_eed && system.eed_mT) static_ += gamma_ * bilinear(sa, *system.eed_mT, sb);
  static_.prune(cplx(0.0));

  for (int a = 0; a < 3; ++a) total_spin_[a] = sa[a] + sb[a];
}

SparseMatrix HamiltonianBuilder::operator()(const FieldOrientation& field) const {
  // omega = -gamma B, common to both radicals.
  const Vector3 omega = -gamma_ * field.field_vector_mT();
  SparseMatrix h = static_;
  for (int a = 0; a < 3; ++a)
    if (omega[a] != 0.0) h += cplx(omega[a]) * total_spin_[a];
  return h;
}

SparseMatrix build_hamiltonian(const SpinSystem& system, const FieldOrientation& field, bool include_eed) {
  system.validate();
  return HamiltonianBuilder(system, include_eed)(field);
}

namespace electronic {

namespace {
DenseMatrix kron2(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}
}  // namespace

DenseMatrix identity() { return DenseMatrix::Identity(4, 4); }

DenseMatrix spin_a(std::size_t axis) { return kron2(angular_momentum_ops(2)[axis], DenseMatrix::Identity(2, 2)); }

DenseMatrix spin_b(std::size_t axis) { return kron2(DenseMatrix::Identity(2, 2), angular_momentum_ops(2)[axis]); }

DenseMatrix singlet_projector() {
  DenseMatrix p = 0.25 * identity();
  for (std::size_t a = 0; a < 3; ++a) p -= spin_a(a) * spin_b(a);
  return p;
}

DenseMatrix triplet_projector() { return identity() - singlet_projector(); }

DenseMatrix total_spin_squared() {
  DenseMatrix s2 = DenseMatrix::Zero(4, 4);
  for (std::size_t a = 0; a < 3; ++a) {
    const DenseMatrix s = spin_a(a) + spin_b(a);
    s2 += s * s;
  }
  return s2;
}

}  // namespace electronic

bool is_hermitian(const DenseMatrix& m, double relative_tolerance) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).norm() <= relative_tolerance * m.norm();
}

}  // namespace rpcompass
