#include "ella/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "ella/rng.hpp"

namespace ella {

double power_iteration_norm(const Matrix& A, double tol, long max_iters) {
  if (A.size() == 0) return 0.0;
  const bool tall = A.rows() >= A.cols();
  const long n = tall ? A.cols() : A.rows();

  Rng rng(0x9ull);  // fixed start so results are reproducible
  Vector v(n);
  for (long i = 0; i < n; ++i) v[i] = rng.normal();
  v.normalize();

  double lambda = 0.0;
  for (long it = 0; it < max_iters; ++it) {
    Vector w = tall ? Vector(A.transpose() * (A * v)) : Vector(A * (A.transpose() * v));
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * std::max(std::abs(next), 1.0)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double sym_norm(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_norm: eigendecomposition failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_eig_sym(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("min_eig_sym: eigendecomposition failed");
  return es.eigenvalues().minCoeff();
}

Matrix pinv_psd(const Matrix& S, double rel_cutoff) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("pinv_psd: eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  const double cutoff = ev.maxCoeff() * rel_cutoff;
  if (!(ev.maxCoeff() > 0.0)) throw std::runtime_error("pinv_psd: matrix is numerically zero");
  Vector inv = Vector::Zero(ev.size());
  long kept = 0;
  for (long i = 0; i < ev.size(); ++i)
    if (ev[i] > cutoff) {
      inv[i] = 1.0 / ev[i];
      ++kept;
    }
  if (kept == 0) throw std::runtime_error("pinv_psd: matrix is numerically singular");
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix chol_lower_spd(const Matrix& S) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("chol_lower_spd: matrix is not positive definite");
  return llt.matrixL();
}

}  // namespace ella
