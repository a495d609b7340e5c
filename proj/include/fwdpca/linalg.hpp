#pragma once

#include <cstddef>

#include "fwdpca/curves.hpp"

namespace fwdpca {

/// Eigenpairs of a real symmetric matrix, in the order the solver left them
/// (column i of `vectors` belongs to `values[i]`).
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
    int sweeps = 0;
};

/// Cyclic Jacobi rotation solver. Deterministic: the sweep order is fixed and
/// no pivoting depends on anything but the matrix entries.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps = 60);

/// Largest |A - A^T| entry.
double max_asymmetry(const Matrix& a);

Matrix symmetrize(const Matrix& a);

struct PsdProjection {
    Matrix matrix;
    /// Sum of the magnitudes of the eigenvalues that were clipped to zero.
    double clipped = 0.0;
};

/// Symmetrize, then clip negative eigenvalues at zero.
PsdProjection clip_to_psd(const Matrix& a);

/// Number of eigenvalues above rel_tol * max |eigenvalue|.
std::size_t numerical_rank(const Matrix& symmetric, double rel_tol = 1e-10);

}  // namespace fwdpca
