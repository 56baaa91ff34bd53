#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "ella/linalg.hpp"
#include "ella/oracle.hpp"
#include "ella/rng.hpp"
#include "ella/train.hpp"

using namespace ella;

namespace {

struct SmallInstance {
  FlatParams p;
  Dataset ds;
  Head head;
  double s0 = 1.0;
};

// force_gaussian picks an invertible curvature, needed by the routes that
// invert Lambda outright
SmallInstance random_instance(std::uint64_t seed, bool force_gaussian = false) {
  Rng r(seed);
  SmallInstance inst;
  int d = 1 + static_cast<int>(r.index(3));
  int C = 1 + static_cast<int>(r.index(3));
  int w = 2 + static_cast<int>(r.index(4));
  Arch a = parse_arch(std::to_string(d),
                      "dense:" + std::to_string(w) + ",tanh,dense:" + std::to_string(C));
  inst.p = FlatParams{a, init_params(a, r.next_u64())};

  long N = 2 + static_cast<long>(r.index(8));
  Dataset ds;
  ds.X = Matrix(N, d);
  for (long i = 0; i < N; ++i)
    for (int j = 0; j < d; ++j) ds.X(i, j) = r.normal();
  ds.input = Shape{d, 0, 0};
  ds.C = C;
  if (!force_gaussian && r.index(2) == 0) {
    ds.classification = true;
    for (long i = 0; i < N; ++i) ds.labels.push_back(static_cast<int>(r.index(C)));
    inst.head = CategoricalHead{};
  } else {
    ds.Y = Matrix(N, C);
    for (long i = 0; i < N; ++i)
      for (int c = 0; c < C; ++c) ds.Y(i, c) = r.normal();
    inst.head = GaussianHead{r.uniform(0.1, 1.5)};
  }
  inst.ds = ds;
  inst.s0 = r.uniform(0.2, 2.0);
  return inst;
}

}  // namespace

TEST_CASE("oracle construction and jacobian layout") {
  SmallInstance inst = random_instance(1);
  LlaOracle o = make_lla_oracle(inst.p, inst.ds, inst.head, inst.s0);
  CHECK(o.N == inst.ds.size());
  CHECK(o.J.rows() == o.N * o.C);
  for (long i = 0; i < o.N; ++i) {
    Matrix Ji = jacobian(inst.p, inst.ds.x(i));
    for (int c = 0; c < o.C; ++c)
      CHECK((o.J.row(o.row(i, c)) - Ji.row(c)).norm() == 0.0);
  }
  // Lambda is block diagonal with the per-item output curvature
  for (long i = 0; i < o.N; ++i) {
    Matrix block = o.Lambda.block(i * o.C, i * o.C, o.C, o.C);
    Matrix expect = lambda_hessian(inst.head, forward(inst.p, inst.ds.x(i)));
    CHECK((block - expect).norm() < 1e-14);
  }
}

TEST_CASE("direct and woodbury covariances agree") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    SmallInstance inst = random_instance(100 + s, true);
    Matrix J = dense_jacobian(inst.p, inst.ds);
    Matrix L = dense_lambda(inst.p, inst.ds, inst.head);
    Matrix direct = sigma_from_ggn(J, L, inst.s0);
    Matrix wood = sigma_woodbury(J, L, inst.s0);
    CHECK(sym_norm(direct - wood) / sym_norm(direct) < 1e-8);
  }
}

TEST_CASE("primal and kernel forms of the posterior kernel agree") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    SmallInstance inst = random_instance(200 + s, true);
    LlaOracle o = make_lla_oracle(inst.p, inst.ds, inst.head, inst.s0);
    Vector x = inst.ds.x(0), x2 = inst.ds.x(inst.ds.size() - 1);
    Matrix Jx = jacobian(inst.p, x), Jx2 = jacobian(inst.p, x2);
    Matrix primal = kappa_from_sigma(Jx, o.Sigma, Jx2);
    Matrix kernel = kappa_kernel_form(Jx, Jx2, o.J, o.Lambda, o.sigma0_sq);
    CHECK(sym_norm(primal - kernel) / (sym_norm(primal) + 1e-300) < 1e-8);
  }
}

TEST_CASE("kernel collapses without data or prior") {
  SmallInstance inst = random_instance(31);
  Vector x = inst.ds.x(0), x2 = inst.ds.x(1);
  Matrix Jx = jacobian(inst.p, x), Jx2 = jacobian(inst.p, x2);

  // no data: the prior gp with scale sigma0^2
  Matrix empty_J(0, inst.p.arch.param_count());
  Matrix empty_L(0, 0);
  Matrix prior = kappa_kernel_form(Jx, Jx2, empty_J, empty_L, 2.5);
  CHECK((prior - 2.5 * Jx * Jx2.transpose()).norm() < 1e-10);

  // collapsed prior: sigma0^2 -> 0 sends everything to zero
  Matrix tiny = kappa_from_sigma(
      Jx, sigma_from_ggn(dense_jacobian(inst.p, inst.ds),
                         dense_lambda(inst.p, inst.ds, inst.head), 1e-12),
      Jx2);
  CHECK(tiny.norm() < 1e-8);
}

TEST_CASE("diagonal baseline") {
  // a bias-free linear model on axis-aligned inputs has a diagonal ggn
  Arch a;
  a.input = Shape{3, 0, 0};
  a.layers.push_back(Dense{3, 1, false});
  Vector theta(3);
  theta << 0.4, -0.2, 0.9;
  Dataset ds;
  ds.X = Matrix::Zero(3, 3);
  ds.X(0, 0) = 1.0;
  ds.X(1, 1) = 2.0;
  ds.X(2, 2) = 0.5;
  ds.Y = Matrix::Zero(3, 1);
  ds.input = Shape{3, 0, 0};
  ds.C = 1;
  FlatParams p{a, theta};
  LlaOracle o = make_lla_oracle(p, ds, GaussianHead{0.7}, 1.3);
  Vector x(3);
  x << 0.3, 0.1, -0.2;
  Vector x2(3);
  x2 << -1.0, 0.4, 0.6;
  CHECK((kappa_lla_diag(o, x, x2) - kappa_lla_exact(o, x, x2)).norm() < 1e-10);

  // generic instance: the diagonal approximation is a different kernel
  SmallInstance g = random_instance(37);
  LlaOracle og = make_lla_oracle(g.p, g.ds, g.head, g.s0);
  Vector gx = g.ds.x(0);
  CHECK((kappa_lla_diag(og, gx, gx) - kappa_lla_exact(og, gx, gx)).norm() > 1e-12);
}

TEST_CASE("last layer baseline") {
  // when the whole net is one dense layer, restriction changes nothing
  Dataset ds = gen_sine_regression(5, 3);
  Arch a = parse_arch("1", "dense:1");
  FlatParams p{a, init_params(a, 9)};
  LlaOracle o = make_lla_oracle(p, ds, GaussianHead{0.3}, 0.8);
  Vector x(1), x2(1);
  x << 0.2;
  x2 << -0.7;
  CHECK((kappa_lla_lastlayer(o, x, x2) - kappa_lla_exact(o, x, x2)).norm() < 1e-10);

  SmallInstance g = random_instance(41);
  LlaOracle og = make_lla_oracle(g.p, g.ds, g.head, g.s0);
  Vector gx = g.ds.x(0);
  CHECK((kappa_lla_lastlayer(og, gx, gx) - kappa_lla_exact(og, gx, gx)).norm() > 1e-12);

  Arch nodense = parse_arch("2", "bn");
  FlatParams bnp{nodense, init_params(nodense, 1)};
  Dataset bds;
  bds.X = Matrix::Ones(1, 2);
  bds.Y = Matrix::Zero(1, 2);
  bds.input = Shape{2, 0, 0};
  bds.C = 2;
  LlaOracle ob = make_lla_oracle(bnp, bds, GaussianHead{1.0}, 1.0);
  CHECK_THROWS_WITH_AS(kappa_lla_lastlayer(ob, bds.x(0), bds.x(0)),
                       doctest::Contains("dense"), std::invalid_argument);
}

TEST_CASE("landmark-restricted covariance") {
  SmallInstance inst = random_instance(43);
  Matrix J = dense_jacobian(inst.p, inst.ds);
  Matrix L = dense_lambda(inst.p, inst.ds, inst.head);
  long P = J.cols();

  // full-rank landmarks leave only the projector defect
  Matrix Sp = sigma_prime(J, J, L, inst.s0);
  Matrix S = sigma_from_ggn(J, L, inst.s0);
  CHECK(sym_norm(Sp - S) <= inst.s0 + 1e-8);

  // zero data rows: sigma_prime is the scaled row-space projector
  Matrix J0 = Matrix::Zero(J.rows(), P);
  Matrix proj = J.transpose() * pinv_psd(J * J.transpose(), 1e-12) * J;
  Matrix Sp0 = sigma_prime(J, J0, L, inst.s0);
  CHECK(sym_norm(Sp0 - inst.s0 * proj) < 1e-6 * inst.s0);
  Matrix S0 = inst.s0 * Matrix::Identity(P, P);
  CHECK(sym_norm(Sp0 - S0) <= inst.s0 + 1e-10);
}

TEST_CASE("deterministic bound holds on random instances") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    TheoremInstance inst = random_theorem_instance(s);
    TheoremBoundReport rep = check_theorem_bounds(inst, 0.05);
    CHECK(rep.holds_thm0);
    CHECK(rep.E <= rep.bound_thm0 + 1e-8);
    CHECK(rep.c_lambda >= 0.0);
    CHECK(rep.eps_prime >= 0.0);
  }
}

TEST_CASE("tiny prior scale keeps the bound tight") {
  TheoremInstance inst = random_theorem_instance(7);
  inst.sigma0_sq = 1e-6;
  TheoremBoundReport rep = check_theorem_bounds(inst, 0.05);
  CHECK(rep.holds_thm0);
  CHECK(rep.bound_thm0 ==
        doctest::Approx(1e-12 * rep.c_lambda * rep.eps_prime + 1e-6).epsilon(1e-12));
}

TEST_CASE("full landmarks make the kernel error vanish") {
  TheoremInstance inst = random_theorem_instance(11);
  inst.J_landmarks = inst.J_X;
  inst.M = inst.J_X.rows();
  TheoremBoundReport rep = check_theorem_bounds(inst, 0.05);
  CHECK(rep.eps_prime <= 1e-8 * std::max(1.0, sym_norm(inst.J_X * inst.J_X.transpose())));
  CHECK(rep.lambda_tilde_next == 0.0);
}

TEST_CASE("delta handling") {
  TheoremInstance inst = random_theorem_instance(13);
  TheoremBoundReport at_one = check_theorem_bounds(inst, 1.0);  // log term drops out
  CHECK(at_one.bound_nystrom ==
        doctest::Approx(at_one.lambda_tilde_next +
                        (static_cast<double>(inst.N * inst.C) / std::sqrt(double(inst.M))) *
                            at_one.c_kappa * 2.0)
            .epsilon(1e-12));
  CHECK_THROWS(check_theorem_bounds(inst, 0.0));
  CHECK_THROWS(check_theorem_bounds(inst, 1.5));
}

TEST_CASE("report serialization carries every field") {
  TheoremBoundReport rep = check_theorem_bounds(random_theorem_instance(17), 0.05);
  nlohmann::json j = report_to_json(rep);
  for (const char* key :
       {"E", "eps_prime", "c_lambda", "c_kappa", "lambda_tilde_next", "delta", "bound_thm0",
        "bound_nystrom", "bound_corollary", "holds_thm0", "holds_nystrom", "holds_corollary",
        "M", "N", "C", "P", "seed"})
    CHECK(j.contains(key));
  CHECK(j["holds_thm0"].is_boolean());
}

TEST_CASE("kl divergence") {
  Vector mu = Vector::Zero(2);
  Matrix S = Matrix::Identity(2, 2);
  CHECK(kl_gaussian(mu, S, mu, S) <= 1e-10);

  Vector mu2(1), mu3(1);
  mu2 << 0.0;
  mu3 << 1.0;
  Matrix one = Matrix::Identity(1, 1);
  CHECK(kl_gaussian(mu2, one, mu3, one) == doctest::Approx(0.5).epsilon(1e-12));

  // random pair against a monte carlo estimate
  Rng r(23);
  Matrix A(2, 2), B(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      A(i, j) = r.normal();
      B(i, j) = r.normal();
    }
  Matrix S1 = A * A.transpose() + 0.5 * Matrix::Identity(2, 2);
  Matrix S2 = B * B.transpose() + 0.5 * Matrix::Identity(2, 2);
  Vector m1(2), m2(2);
  m1 << 0.3, -0.2;
  m2 << -0.1, 0.4;
  double exact = kl_gaussian(m1, S1, m2, S2);
  CHECK(exact >= 0.0);

  Matrix L1 = chol_lower_spd(S1);
  Matrix P1 = S1.inverse(), P2 = S2.inverse();
  double ld1 = std::log(S1.determinant()), ld2 = std::log(S2.determinant());
  double acc = 0;
  const long n = 1000000;
  for (long t = 0; t < n; ++t) {
    Vector z(2);
    z << r.normal(), r.normal();
    Vector x = m1 + L1 * z;
    double lp = -0.5 * ((x - m1).dot(P1 * (x - m1))) - 0.5 * ld1;
    double lq = -0.5 * ((x - m2).dot(P2 * (x - m2))) - 0.5 * ld2;
    acc += lp - lq;
  }
  CHECK(std::abs(acc / n - exact) / exact < 1e-2);

  // singular first argument
  Matrix sing = Matrix::Zero(2, 2);
  sing(0, 0) = 1.0;
  CHECK(std::isinf(kl_gaussian(m1, sing, m2, S2)));
}

TEST_CASE("mean relative kernel error against the oracle") {
  FlatParams p;
  Dataset ds = gen_two_moons(6, 47);
  Arch a = parse_arch("2", "dense:5,tanh,dense:2");
  TrainConfig cfg;
  cfg.iters = 40;
  cfg.seed = 1;
  p = train_map(a, ds, CategoricalHead{}, cfg);
  double s0 = 1.2;
  LlaOracle o = make_lla_oracle(p, ds, CategoricalHead{}, s0);

  LandmarkSet lm;
  for (long i = 0; i < ds.size(); ++i)
    for (int c = 0; c < 2; ++c) lm.entries.push_back(Landmark{i, c});
  Matrix J = landmark_jacobian(p, ds, lm);
  NystromSketch full = build_sketch(J, static_cast<int>(J.rows()));
  EllaPosterior exact_post = fit(full, p, ds, CategoricalHead{}, s0);
  CHECK(epsilon_ella(exact_post, o, ds) < 1e-6);

  NystromSketch crude = build_sketch(J, 2);
  EllaPosterior crude_post = fit(crude, p, ds, CategoricalHead{}, s0);
  CHECK(epsilon_ella(crude_post, o, ds) > 1e-8);
}

TEST_CASE("desk-scale gates") {
  Arch big = parse_arch("1", "dense:400,tanh,dense:250");  // just over 1e5 parameters
  FlatParams p{big, Vector::Zero(big.param_count())};
  Dataset ds = gen_sine_regression(3, 1);
  Dataset wide;
  wide.X = ds.X;
  wide.Y = Matrix::Zero(3, 250);
  wide.input = Shape{1, 0, 0};
  wide.C = 250;
  CHECK_THROWS(make_lla_oracle(p, wide, GaussianHead{1.0}, 1.0));

  Dataset many = gen_sine_regression(5001, 2);
  Arch small = parse_arch("1", "dense:2,tanh,dense:1");
  FlatParams sp{small, init_params(small, 1)};
  CHECK_THROWS(make_lla_oracle(sp, many, GaussianHead{1.0}, 1.0));
}
