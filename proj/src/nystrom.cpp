#include "ella/nystrom.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "ella/linalg.hpp"
#include "ella/rng.hpp"

namespace ella {

LandmarkSet sample_landmarks(const Dataset& ds, int C, long M, std::uint64_t seed) {
  if (ds.size() == 0) throw std::invalid_argument("sample_landmarks: empty dataset");
  if (M < 1) throw std::invalid_argument("sample_landmarks: M must be >= 1");
  if (C < 1) throw std::invalid_argument("sample_landmarks: C must be >= 1");
  Rng rng(seed);
  LandmarkSet lm;
  lm.seed = seed;
  lm.entries.resize(static_cast<std::size_t>(M));
  for (auto& e : lm.entries) {
    e.datum = static_cast<long>(rng.index(static_cast<std::size_t>(ds.size())));
    e.cls = static_cast<int>(rng.index(static_cast<std::size_t>(C)));
  }
  return lm;
}

Matrix landmark_jacobian(const FlatParams& p, const Dataset& ds, const LandmarkSet& lm) {
  const long M = static_cast<long>(lm.entries.size());
  Matrix J(M, p.values.size());
  for (long m = 0; m < M; ++m) {
    const Landmark& e = lm.entries[static_cast<std::size_t>(m)];
    if (e.datum < 0 || e.datum >= ds.size())
      throw std::out_of_range("landmark_jacobian: datum index out of range");
    J.row(m) = grad_row(p, ds.x(e.datum), e.cls).transpose();
  }
  return J;
}

NystromSketch build_sketch(const Matrix& J_landmarks, int K, double rank_cutoff) {
  const long M = J_landmarks.rows();
  if (K < 1) throw std::invalid_argument("build_sketch: K must be >= 1");
  if (K > M)
    throw std::invalid_argument("build_sketch: K = " + std::to_string(K) +
                                " exceeds the number of landmarks M = " + std::to_string(M));

  Matrix gram = J_landmarks * J_landmarks.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("build_sketch: eigendecomposition failed");

  const Vector& ev = es.eigenvalues();  // ascending
  const double lambda1 = ev[M - 1];
  if (!(lambda1 > 0.0)) throw std::runtime_error("build_sketch: kernel numerically rank zero");
  const double cutoff = lambda1 * rank_cutoff;

  long surviving = 0;
  for (long i = 0; i < M; ++i)
    if (ev[i] > cutoff) ++surviving;
  if (surviving == 0) throw std::runtime_error("build_sketch: kernel numerically rank zero");

  const int kept = static_cast<int>(std::min<long>(K, surviving));
  NystromSketch sk;
  sk.M = M;
  sk.K = kept;
  sk.requested_K = K;
  sk.eigenvalues.resize(kept);
  sk.U.resize(M, kept);
  sk.V.resize(kept, J_landmarks.cols());
  for (int k = 0; k < kept; ++k) {
    const long src = M - 1 - k;  // descending order
    Vector u = es.eigenvectors().col(src);
    for (long i = 0; i < M; ++i) {
      if (u[i] != 0.0) {
        if (u[i] < 0.0) u = -u;
        break;
      }
    }
    const double lambda = ev[src];
    sk.eigenvalues[k] = lambda;
    sk.U.col(k) = u;
    sk.V.row(k) = (J_landmarks.transpose() * u).transpose() / std::sqrt(lambda);
  }
  return sk;
}

PhiResult phi(const FlatParams& p, const NystromSketch& sketch, const Vector& x) {
  if (sketch.K < 1) throw std::invalid_argument("phi: sketch has no directions");
  if (sketch.V.cols() != p.values.size())
    throw std::invalid_argument("phi: sketch parameter dimension does not match params");
  PhiResult out;
  for (int k = 0; k < sketch.K; ++k) {
    JvpResult r = jvp(p, x, sketch.V.row(k).transpose());
    if (k == 0) {
      out.g = std::move(r.value);
      out.features.resize(out.g.size(), sketch.K);
    }
    out.features.col(k) = r.tangent;
  }
  return out;
}

double nystrom_error(const Matrix& J_train, const Matrix& J_landmarks) {
  if (J_train.cols() != J_landmarks.cols())
    throw std::invalid_argument("nystrom_error: parameter dimension mismatch");
  Matrix gram = J_landmarks * J_landmarks.transpose();
  Matrix inv = pinv_psd(gram, 1e-12);  // throws when the gram is numerically zero
  Matrix cross = J_train * J_landmarks.transpose();
  Matrix exact = J_train * J_train.transpose();
  const double denom = sym_norm(exact);
  if (denom == 0.0) throw std::runtime_error("nystrom_error: training kernel is zero");
  Matrix diff = cross * inv * cross.transpose() - exact;
  return sym_norm(diff) / denom;
}

}  // namespace ella
