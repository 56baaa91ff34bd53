#pragma once

#include "ella/arch.hpp"

namespace ella {

// Largest singular value by power iteration on the smaller of A^T A / A A^T;
// deterministic start vector, relative tolerance on the Rayleigh quotient.
double power_iteration_norm(const Matrix& A, double tol = 1e-10, long max_iters = 10000);

// Spectral norm of a symmetric matrix via eigendecomposition.
double sym_norm(const Matrix& S);

double min_eig_sym(const Matrix& S);

// Eigendecomposition pseudo-inverse of a PSD matrix; eigenvalues below
// rel_cutoff * lambda_max are treated as zero. Throws if nothing survives.
Matrix pinv_psd(const Matrix& S, double rel_cutoff = 1e-12);

// Cholesky factor of an SPD matrix; throws on factorization failure.
Matrix chol_lower_spd(const Matrix& S);

}  // namespace ella
