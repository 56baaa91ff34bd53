#pragma once

#include <cstdint>
#include <string>

#include "ella/dataset.hpp"
#include "ella/likelihood.hpp"
#include "ella/posterior.hpp"

#include <json.hpp>

namespace ella {

// Dense reference computations for desk-scale problems. Everything here
// materializes P x P or NC x NC matrices, so construction is gated to
// P <= 1e5 and N*C <= 5e3 and throws beyond that.

struct LlaOracle {
  FlatParams net;
  Dataset data;
  Head head;
  double sigma0_sq = 1.0;
  Matrix J;       // NC x P, row (i, c) at index i*C + c
  Matrix Lambda;  // NC x NC, block diagonal per datum
  Matrix Sigma;   // P x P weight-space covariance
  long N = 0;
  int C = 0;

  long row(long i, int c) const { return i * C + c; }
};

// stacked per-item Jacobians, row (i, c) at index i*C + c
Matrix dense_jacobian(const FlatParams& p, const Dataset& ds);

// block diagonal curvature of the likelihood at the current net outputs
Matrix dense_lambda(const FlatParams& p, const Dataset& ds, const Head& head);

LlaOracle make_lla_oracle(const FlatParams& p, const Dataset& ds, const Head& head,
                          double sigma0_sq);

// weight-space covariance, direct inverse of the P x P precision
Matrix sigma_from_ggn(const Matrix& J, const Matrix& Lambda, double sigma0_sq);

// the same covariance through the NC x NC inner system; needs invertible Lambda
Matrix sigma_woodbury(const Matrix& J, const Matrix& Lambda, double sigma0_sq);

// function-space covariance J(x) Sigma J(x')^T
Matrix kappa_from_sigma(const Matrix& Jx, const Matrix& Sigma, const Matrix& Jx2);

// the same kernel through tangent-kernel blocks alone; needs invertible Lambda
Matrix kappa_kernel_form(const Matrix& Jx, const Matrix& Jx2, const Matrix& J,
                         const Matrix& Lambda, double sigma0_sq);

// covariance recovered from landmark rows only, the all-landmark sketch limit
Matrix sigma_prime(const Matrix& J_landmarks, const Matrix& J, const Matrix& Lambda,
                   double sigma0_sq);

Matrix kappa_lla_exact(const LlaOracle& o, const Vector& x, const Vector& x2);

// diagonal-precision baseline
Matrix kappa_lla_diag(const LlaOracle& o, const Vector& x, const Vector& x2);

// covariance restricted to the parameters of the final dense layer
Matrix kappa_lla_lastlayer(const LlaOracle& o, const Vector& x, const Vector& x2);

struct TheoremInstance {
  Matrix J_landmarks;  // M x P
  Matrix J_X;          // NC x P
  Matrix Lambda;       // NC x NC
  double sigma0_sq = 1.0;
  long M = 0;
  long N = 0;
  int C = 1;
  std::uint64_t seed = 0;
};

struct TheoremBoundReport {
  double E = 0.0;                 // || sigma_prime - Sigma ||
  double eps_prime = 0.0;         // kernel approximation error, absolute
  double c_lambda = 0.0;
  double c_kappa = 0.0;
  double lambda_tilde_next = 0.0; // (M+1)-th largest eigenvalue of J_X J_X^T
  double delta = 0.0;
  double bound_thm0 = 0.0;      // sigma0^4 c_lambda eps_prime + sigma0^2, deterministic
  double bound_nystrom = 0.0;   // high-probability bound on eps_prime itself
  double bound_corollary = 0.0; // the two composed
  bool holds_thm0 = false;
  bool holds_nystrom = false;
  bool holds_corollary = false;
  long M = 0;
  long N = 0;
  int C = 1;
  long P = 0;
  std::uint64_t seed = 0;
};

TheoremBoundReport check_theorem_bounds(const TheoremInstance& inst, double delta);

nlohmann::json report_to_json(const TheoremBoundReport& r);

// small random MLP instance with well conditioned landmark rows
TheoremInstance random_theorem_instance(std::uint64_t seed);

// KL(p || q) between two Gaussians; +inf if p is singular
double kl_gaussian(const Vector& mu1, const Matrix& S1, const Vector& mu2, const Matrix& S2);

// mean over the set of relative sketch-vs-exact covariance error at each point
double epsilon_ella(const EllaPosterior& post, const LlaOracle& o, const Dataset& points);

}  // namespace ella
