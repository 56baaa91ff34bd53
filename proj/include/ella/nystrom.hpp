#pragma once

#include <cstdint>
#include <vector>

#include "ella/autodiff.hpp"
#include "ella/dataset.hpp"

namespace ella {

struct Landmark {
  long datum = 0;  // index into the training set
  int cls = 0;     // output index, 0-based
};

struct LandmarkSet {
  std::vector<Landmark> entries;
  std::uint64_t seed = 0;
};

// M i.i.d. draws with replacement from (uniform data) x (uniform classes)
LandmarkSet sample_landmarks(const Dataset& ds, int C, long M, std::uint64_t seed);

// row m is grad_row(x_m, i_m)
Matrix landmark_jacobian(const FlatParams& p, const Dataset& ds, const LandmarkSet& lm);

struct NystromSketch {
  Vector eigenvalues;  // kept eigenvalues of the landmark gram, descending
  Matrix V;            // K x P, row k is v_k = J~^T u_k / sqrt(lambda_k)
  Matrix U;            // M x K eigenvectors (in-memory only; empty after load)
  long M = 0;
  int K = 0;            // kept rank (may be below requested_K)
  int requested_K = 0;
  std::uint64_t seed = 0;
};

// Eigendecomposes the M x M gram J~ J~^T and keeps the top-K eigenpairs with
// eigenvalue above rank_cutoff * lambda_1. Eigenvectors are sign-normalized
// so their first nonzero component is positive.
NystromSketch build_sketch(const Matrix& J_landmarks, int K, double rank_cutoff = 1e-10);

struct PhiResult {
  Vector g;         // network output, identical to forward()
  Matrix features;  // C x K, column k is J(x) v_k
};

// exactly K jvp passes
PhiResult phi(const FlatParams& p, const NystromSketch& sketch, const Vector& x);

// relative spectral-norm error of the Nystrom reconstruction of J_X J_X^T
double nystrom_error(const Matrix& J_train, const Matrix& J_landmarks);

}  // namespace ella
