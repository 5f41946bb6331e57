#pragma once

#include <complex>

#include <Eigen/Dense>

namespace afrelay {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Singular value decomposition with nonincreasing singular values.
///
/// `u` and `v` are full unitary matrices (rows x rows, cols x cols) and
/// `m == u * diag(sigma) * v^H` with the diagonal padded to the input shape.
/// Phases are fixed so that the largest-magnitude entry of each column of
/// `u` is real and nonnegative; the matching column of `v` absorbs the
/// rotation. Columns that share a singular value are ordered by the index of
/// their largest-magnitude entry.
struct OrderedSVD {
    CMatrix u;
    RVector sigma;
    CMatrix v;
};

/// Eigen decomposition of a Hermitian matrix with nonincreasing eigenvalues and
/// the same phase/ordering convention as OrderedSVD.
struct OrderedHermitianEig {
    CMatrix vectors;
    RVector values;
};

// Throws InvalidInput on any NaN/Inf entry.
void require_finite(const CMatrix& m, const char* what);

OrderedSVD svd_ordered(const CMatrix& m);

// Input must be Hermitian to 1e-10 (relative to max(1, ||m||_F)); it is symmetrized before solving.
OrderedHermitianEig eig_hermitian_ordered(const CMatrix& m);

/// Hermitian square root of a positive semidefinite matrix. Eigenvalues down
/// to -1e-10 * ||m||_2 are clamped to zero; anything more negative throws
/// NotPositiveSemidefinite.
CMatrix herm_sqrt(const CMatrix& m);

/// Inverse Hermitian square root; throws SingularMatrix unless the smallest
/// eigenvalue exceeds 1e-12 times the largest.
CMatrix herm_inv_sqrt(const CMatrix& m);

// Solves m * x = rhs for Hermitian positive definite m.
CMatrix hermitian_solve(const CMatrix& m, const CMatrix& rhs);

CMatrix hermitian_part(const CMatrix& m);

// Largest principal angle (radians) between the column spans of two matrices
// with orthonormal columns.
double subspace_angle(const CMatrix& a, const CMatrix& b);

}  // namespace afrelay
