#include "ella/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ella/autodiff.hpp"
#include "ella/linalg.hpp"
#include "ella/rng.hpp"
#include "ella/train.hpp"

namespace ella {

namespace {

Matrix sym(const Matrix& A) { return 0.5 * (A + A.transpose()); }

Matrix inv_sym(const Matrix& A, const char* what) {
  Matrix S = sym(A);
  Eigen::LDLT<Matrix> ldlt(S);
  Matrix X = ldlt.solve(Matrix::Identity(A.rows(), A.cols()));
  double resid = (S * X - Matrix::Identity(A.rows(), A.cols())).norm();
  if (!X.allFinite() || resid > 1e-6 * (1.0 + S.norm()))
    throw std::runtime_error(std::string(what) + " is numerically singular");
  return X;
}

// SPD solve with an escalating trace-scaled jitter, used for the NC x NC
// inner systems where roundoff can push a tiny eigenvalue negative
Matrix spd_solve(const Matrix& A, const Matrix& B, const char* what) {
  Matrix S = sym(A);
  double base = 1e-12 * std::max(S.trace() / static_cast<double>(S.rows()), 0.0);
  for (int attempt = -1; attempt < 3; ++attempt) {
    Matrix M = S;
    if (attempt >= 0) M.diagonal().array() += std::max(base, 1e-300) * std::pow(10.0, attempt);
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() == Eigen::Success) return llt.solve(B);
  }
  throw std::runtime_error(std::string(what) + " stayed singular after jitter");
}

void gate_size(long P, long NC) {
  if (P > 100000) throw std::invalid_argument("dense reference limited to 1e5 parameters");
  if (NC > 5000) throw std::invalid_argument("dense reference limited to 5e3 output rows");
}

}  // namespace

Matrix dense_jacobian(const FlatParams& p, const Dataset& ds) {
  const long C = p.arch.output_dim();
  const long P = p.arch.param_count();
  gate_size(P, ds.size() * C);
  Matrix J(ds.size() * C, P);
  for (long i = 0; i < ds.size(); ++i) J.middleRows(i * C, C) = jacobian(p, ds.x(i));
  return J;
}

Matrix dense_lambda(const FlatParams& p, const Dataset& ds, const Head& head) {
  const long C = p.arch.output_dim();
  gate_size(p.arch.param_count(), ds.size() * C);
  Matrix Lambda = Matrix::Zero(ds.size() * C, ds.size() * C);
  for (long i = 0; i < ds.size(); ++i) {
    Vector g = forward(p, ds.x(i));
    Lambda.block(i * C, i * C, C, C) = lambda_hessian(head, g);
  }
  return Lambda;
}

LlaOracle make_lla_oracle(const FlatParams& p, const Dataset& ds, const Head& head,
                          double sigma0_sq) {
  if (!(sigma0_sq > 0.0)) throw std::invalid_argument("prior variance must be positive");
  if (ds.size() == 0) throw std::invalid_argument("cannot build a reference on an empty dataset");
  ds.check();
  if (!head_matches(head, ds)) throw std::invalid_argument("likelihood head does not match the dataset");
  if (p.arch.output_dim() != ds.C) throw std::invalid_argument("network output dimension does not match the dataset");
  gate_size(p.arch.param_count(), ds.size() * p.arch.output_dim());
  LlaOracle o;
  o.net = p;
  o.data = ds;
  o.head = head;
  o.sigma0_sq = sigma0_sq;
  o.N = ds.size();
  o.C = static_cast<int>(p.arch.output_dim());
  o.J = dense_jacobian(p, ds);
  o.Lambda = dense_lambda(p, ds, head);
  o.Sigma = sigma_from_ggn(o.J, o.Lambda, sigma0_sq);
  return o;
}

Matrix sigma_from_ggn(const Matrix& J, const Matrix& Lambda, double sigma0_sq) {
  Matrix precision = J.transpose() * Lambda * J;
  precision.diagonal().array() += 1.0 / sigma0_sq;
  return sym(inv_sym(precision, "weight-space precision"));
}

Matrix sigma_woodbury(const Matrix& J, const Matrix& Lambda, double sigma0_sq) {
  const long P = J.cols();
  Matrix inner = inv_sym(Lambda, "likelihood curvature") / sigma0_sq + J * J.transpose();
  Matrix X = spd_solve(inner, J, "inner system");
  Matrix S = sigma0_sq * (Matrix::Identity(P, P) - J.transpose() * X);
  return sym(S);
}

Matrix kappa_from_sigma(const Matrix& Jx, const Matrix& Sigma, const Matrix& Jx2) {
  return Jx * Sigma * Jx2.transpose();
}

Matrix kappa_kernel_form(const Matrix& Jx, const Matrix& Jx2, const Matrix& J,
                         const Matrix& Lambda, double sigma0_sq) {
  Matrix inner = inv_sym(Lambda, "likelihood curvature") / sigma0_sq + J * J.transpose();
  Matrix cross2 = J * Jx2.transpose();
  Matrix solved = spd_solve(inner, cross2, "inner system");
  return sigma0_sq * (Jx * Jx2.transpose() - (Jx * J.transpose()) * solved);
}

Matrix sigma_prime(const Matrix& J_landmarks, const Matrix& J, const Matrix& Lambda,
                   double sigma0_sq) {
  Matrix cross = J_landmarks * J.transpose();  // M x NC
  Matrix inner = cross * Lambda * cross.transpose() +
                 (J_landmarks * J_landmarks.transpose()) / sigma0_sq;
  Matrix X = spd_solve(inner, J_landmarks, "landmark system");
  return sym(J_landmarks.transpose() * X);
}

Matrix kappa_lla_exact(const LlaOracle& o, const Vector& x, const Vector& x2) {
  Matrix Jx = jacobian(o.net, x);
  Matrix Jx2 = jacobian(o.net, x2);
  return kappa_from_sigma(Jx, o.Sigma, Jx2);
}

Matrix kappa_lla_diag(const LlaOracle& o, const Vector& x, const Vector& x2) {
  Matrix T = o.Lambda * o.J;
  Vector d = o.J.cwiseProduct(T).colwise().sum().transpose();
  d.array() += 1.0 / o.sigma0_sq;
  Matrix Jx = jacobian(o.net, x);
  Matrix Jx2 = jacobian(o.net, x2);
  return Jx * d.cwiseInverse().asDiagonal() * Jx2.transpose();
}

Matrix kappa_lla_lastlayer(const LlaOracle& o, const Vector& x, const Vector& x2) {
  long idx = -1;
  for (long i = 0; i < static_cast<long>(o.net.arch.layers.size()); ++i)
    if (std::holds_alternative<Dense>(o.net.arch.layers[static_cast<std::size_t>(i)])) idx = i;
  if (idx < 0) throw std::invalid_argument("network has no dense layer");
  long off = o.net.arch.param_offset(idx);
  long cnt = o.net.arch.layer_param_count(idx);
  Matrix Jll = o.J.middleCols(off, cnt);
  Matrix precision = Jll.transpose() * o.Lambda * Jll;
  precision.diagonal().array() += 1.0 / o.sigma0_sq;
  Matrix Sll = inv_sym(precision, "last-layer precision");
  Matrix Jx = jacobian(o.net, x).middleCols(off, cnt);
  Matrix Jx2 = jacobian(o.net, x2).middleCols(off, cnt);
  return Jx * Sll * Jx2.transpose();
}

TheoremBoundReport check_theorem_bounds(const TheoremInstance& inst, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (!(inst.sigma0_sq > 0.0)) throw std::invalid_argument("prior variance must be positive");
  const long NC = inst.J_X.rows();
  const long P = inst.J_X.cols();
  if (inst.J_landmarks.cols() != P) throw std::invalid_argument("landmark rows have the wrong width");
  if (inst.J_landmarks.rows() != inst.M) throw std::invalid_argument("landmark count disagrees with M");
  if (NC != inst.N * inst.C) throw std::invalid_argument("row count disagrees with N*C");
  if (inst.Lambda.rows() != NC || inst.Lambda.cols() != NC)
    throw std::invalid_argument("curvature matrix has the wrong size");

  TheoremBoundReport r;
  r.M = inst.M;
  r.N = inst.N;
  r.C = inst.C;
  r.P = P;
  r.seed = inst.seed;
  r.delta = delta;

  Matrix Sigma = sigma_from_ggn(inst.J_X, inst.Lambda, inst.sigma0_sq);
  Matrix SigmaP = sigma_prime(inst.J_landmarks, inst.J_X, inst.Lambda, inst.sigma0_sq);
  r.E = sym_norm(SigmaP - Sigma);

  Matrix exact = inst.J_X * inst.J_X.transpose();
  Matrix cross = inst.J_X * inst.J_landmarks.transpose();
  Matrix gram = inst.J_landmarks * inst.J_landmarks.transpose();
  Matrix approx = cross * spd_solve(gram, cross.transpose(), "landmark gram");
  r.eps_prime = sym_norm(approx - exact);

  r.c_lambda = sym_norm(inst.Lambda);
  r.c_kappa = exact.diagonal().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(exact), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  // eigenvalues ascending; the (M+1)-th largest sits at index NC-1-M
  r.lambda_tilde_next = inst.M < NC ? std::max(0.0, es.eigenvalues()[NC - 1 - inst.M]) : 0.0;

  const double s2 = inst.sigma0_sq;
  r.bound_thm0 = s2 * s2 * r.c_lambda * r.eps_prime + s2;
  r.bound_nystrom = r.lambda_tilde_next +
                    (static_cast<double>(NC) / std::sqrt(static_cast<double>(inst.M))) *
                        r.c_kappa * (2.0 + std::log(1.0 / delta));
  r.bound_corollary = s2 * s2 * r.c_lambda * r.bound_nystrom + s2;

  const double slack = 1e-8;
  r.holds_thm0 = r.E <= r.bound_thm0 + slack;
  r.holds_nystrom = r.eps_prime <= r.bound_nystrom + slack;
  r.holds_corollary = r.E <= r.bound_corollary + slack;
  return r;
}

nlohmann::json report_to_json(const TheoremBoundReport& r) {
  return nlohmann::json{{"E", r.E},
                        {"eps_prime", r.eps_prime},
                        {"c_lambda", r.c_lambda},
                        {"c_kappa", r.c_kappa},
                        {"lambda_tilde_next", r.lambda_tilde_next},
                        {"delta", r.delta},
                        {"bound_thm0", r.bound_thm0},
                        {"bound_nystrom", r.bound_nystrom},
                        {"bound_corollary", r.bound_corollary},
                        {"holds_thm0", r.holds_thm0},
                        {"holds_nystrom", r.holds_nystrom},
                        {"holds_corollary", r.holds_corollary},
                        {"M", r.M},
                        {"N", r.N},
                        {"C", r.C},
                        {"P", r.P},
                        {"seed", r.seed}};
}

TheoremInstance random_theorem_instance(std::uint64_t seed) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::uint64_t sub = Rng::mix(seed, 7000 + static_cast<std::uint64_t>(attempt));
    Rng rng(sub);
    int d = 1 + static_cast<int>(rng.index(3));
    int C = 1 + static_cast<int>(rng.index(3));
    long hidden = 1 + static_cast<long>(rng.index(2));
    Act act = rng.index(2) == 0 ? Act::Tanh : Act::Relu;

    Arch arch;
    arch.input = Shape{d, 0, 0};
    int prev = d;
    for (long h = 0; h < hidden; ++h) {
      int w = 2 + static_cast<int>(rng.index(3));
      arch.layers.push_back(Dense{prev, w, true});
      arch.layers.push_back(Activation{act});
      prev = w;
    }
    arch.layers.push_back(Dense{prev, C, true});
    arch.validate();

    FlatParams params{arch, init_params(arch, Rng::mix(sub, 1))};
    long N = 1 + static_cast<long>(rng.index(20));
    long NC = N * C;
    long P = arch.param_count();

    Matrix J(NC, P);
    Matrix Lambda = Matrix::Zero(NC, NC);
    Head head;
    if (rng.index(2) == 0)
      head = GaussianHead{rng.uniform(0.05, 2.0)};
    else
      head = CategoricalHead{};
    for (long i = 0; i < N; ++i) {
      Vector x(d);
      for (long k = 0; k < d; ++k) x[k] = rng.normal();
      J.middleRows(i * C, C) = jacobian(params, x);
      Lambda.block(i * C, i * C, C, C) = lambda_hessian(head, forward(params, x));
    }
    double sigma0_sq = std::exp(rng.uniform(std::log(1e-3), std::log(2.0)));

    long max_m = std::min(NC, P);
    long M = 1 + static_cast<long>(rng.index(max_m));
    std::vector<long> order(static_cast<std::size_t>(NC));
    std::iota(order.begin(), order.end(), 0);
    for (long i = 0; i < M; ++i) {
      long j = i + static_cast<long>(rng.index(static_cast<std::uint64_t>(NC - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    Matrix Jl(M, P);
    for (long i = 0; i < M; ++i) Jl.row(i) = J.row(order[static_cast<std::size_t>(i)]);

    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(Jl * Jl.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) continue;
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || lo < 1e-10 * hi) continue;

    TheoremInstance inst;
    inst.J_landmarks = std::move(Jl);
    inst.J_X = std::move(J);
    inst.Lambda = std::move(Lambda);
    inst.sigma0_sq = sigma0_sq;
    inst.M = M;
    inst.N = N;
    inst.C = C;
    inst.seed = seed;
    return inst;
  }
  throw std::runtime_error("failed to draw a well conditioned landmark set");
}

double kl_gaussian(const Vector& mu1, const Matrix& S1, const Vector& mu2, const Matrix& S2) {
  const long C = mu1.size();
  if (mu2.size() != C || S1.rows() != C || S1.cols() != C || S2.rows() != C || S2.cols() != C)
    throw std::invalid_argument("Gaussian dimensions disagree");
  Matrix S2s = sym(S2);
  double base = 1e-12 * std::max(S2s.trace() / static_cast<double>(C), 0.0);
  Eigen::LLT<Matrix> llt;
  bool ok = false;
  for (int attempt = -1; attempt < 3 && !ok; ++attempt) {
    Matrix M = S2s;
    if (attempt >= 0) M.diagonal().array() += std::max(base, 1e-300) * std::pow(10.0, attempt);
    llt.compute(M);
    if (llt.info() == Eigen::Success) ok = true;
  }
  if (!ok) throw std::runtime_error("second covariance is not positive definite");
  double logdet2 = 0.0;
  for (long i = 0; i < C; ++i) logdet2 += 2.0 * std::log(llt.matrixL()(i, i));

  Eigen::LDLT<Matrix> ldlt(sym(S1));
  double logdet1 = 0.0;
  for (long i = 0; i < C; ++i) {
    double dv = ldlt.vectorD()[i];
    if (!(dv > 0.0)) return std::numeric_limits<double>::infinity();
    logdet1 += std::log(dv);
  }
  double tr = llt.solve(sym(S1)).trace();
  Vector diff = mu2 - mu1;
  double quad = diff.dot(llt.solve(diff));
  return 0.5 * (tr + quad - static_cast<double>(C) + logdet2 - logdet1);
}

double epsilon_ella(const EllaPosterior& post, const LlaOracle& o, const Dataset& points) {
  if (points.size() == 0) throw std::invalid_argument("need at least one evaluation point");
  double total = 0.0;
  for (long i = 0; i < points.size(); ++i) {
    Matrix ke = kappa_ella(post, o.net, points.x(i), points.x(i));
    Matrix kl = kappa_lla_exact(o, points.x(i), points.x(i));
    double denom = sym_norm(kl);
    if (!(denom > 0.0)) throw std::runtime_error("exact kernel vanished at an evaluation point");
    total += sym_norm(ke - kl) / denom;
  }
  return total / static_cast<double>(points.size());
}

}  // namespace ella
