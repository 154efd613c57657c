#pragma once

#include <complex>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rpcompass {

using cplx = std::complex<double>;

/// Operators on the spin Hilbert space. Assembly is always sparse; algorithms
/// that need a factorization convert to dense.
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;
using DenseMatrix = Eigen::MatrixXcd;
using DenseVector = Eigen::VectorXcd;

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

}  // namespace rpcompass
