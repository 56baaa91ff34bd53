#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "ella/likelihood.hpp"
#include "ella/rng.hpp"

using namespace ella;

namespace {

Vector rand_vec(long n, Rng& r) {
  Vector v(n);
  for (long i = 0; i < n; ++i) v(i) = r.normal();
  return v;
}

}  // namespace

TEST_CASE("gaussian nll") {
  GaussianHead h{1.0};
  Vector g(2), y(2);
  g << 0.3, -0.5;
  y = g;
  CHECK(gaussian_nll(h, g, y) == 0.0);
  y << 0.3, 0.5;
  CHECK(gaussian_nll(h, g, y) == doctest::Approx(0.5).epsilon(1e-14));  // 1.0^2/2
  GaussianHead h2{0.5};
  CHECK(gaussian_nll(h2, g, y) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("categorical nll vs log-sum-exp brute force") {
  Vector g(2);
  g << 0, 0;
  CHECK(categorical_nll(g, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  Rng r(5);
  for (int t = 0; t < 50; ++t) {
    Vector logits = 3.0 * rand_vec(4, r);
    int y = static_cast<int>(r.index(4));
    double lse = 0;
    for (int c = 0; c < 4; ++c) lse += std::exp(logits(c));
    double direct = std::log(lse) - logits(y);
    CHECK(categorical_nll(logits, y) == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK_THROWS(categorical_nll(g, 2));
  CHECK_THROWS(categorical_nll(g, -1));
}

TEST_CASE("nll gradients match finite differences") {
  Rng r(8);
  for (int t = 0; t < 20; ++t) {
    Vector g = rand_vec(3, r);
    Vector y = rand_vec(3, r);
    GaussianHead h{0.7};
    Vector grad = gaussian_nll_grad(h, g, y);
    int label = static_cast<int>(r.index(3));
    Vector cgrad = categorical_nll_grad(g, label);
    for (int i = 0; i < 3; ++i) {
      Vector e = Vector::Zero(3);
      e(i) = 1e-6;
      double fd = (gaussian_nll(h, g + e, y) - gaussian_nll(h, g - e, y)) / 2e-6;
      CHECK(grad(i) == doctest::Approx(fd).epsilon(1e-6));
      double cfd = (categorical_nll(g + e, label) - categorical_nll(g - e, label)) / 2e-6;
      CHECK(cgrad(i) == doctest::Approx(cfd).epsilon(1e-6));
    }
  }
}

TEST_CASE("lambda_hessian closed forms") {
  Vector g(3);
  g << 1, 2, 3;
  Matrix lg = lambda_hessian(GaussianHead{0.04}, g);
  CHECK((lg - 25.0 * Matrix::Identity(3, 3)).norm() == 0.0);

  Vector g2(2);
  g2 << 0, 0;
  Matrix lc = lambda_hessian(CategoricalHead{}, g2);
  Matrix expect(2, 2);
  expect << 0.25, -0.25, -0.25, 0.25;
  CHECK((lc - expect).norm() < 1e-15);
}

TEST_CASE("lambda_hessian is the fd hessian of the categorical nll") {
  Rng r(3);
  for (int t = 0; t < 10; ++t) {
    Vector g = 2.0 * rand_vec(3, r);
    int y = static_cast<int>(r.index(3));  // Lambda is target-free; any label works
    Matrix L = lambda_hessian(CategoricalHead{}, g);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Vector ei = Vector::Zero(3), ej = Vector::Zero(3);
        ei(i) = 1e-4;
        ej(j) = 1e-4;
        double f = categorical_nll(g + ei + ej, y) - categorical_nll(g + ei - ej, y) -
                   categorical_nll(g - ei + ej, y) + categorical_nll(g - ei - ej, y);
        CHECK(std::abs(L(i, j) - f / 4e-8) < 1e-6);
      }
    }
  }
}

TEST_CASE("lambda_hessian invariants") {
  Rng r(17);
  for (int t = 0; t < 30; ++t) {
    Vector g = 10.0 * rand_vec(5, r);  // includes fairly extreme logits
    Matrix L = lambda_hessian(CategoricalHead{}, g);
    CHECK((L - L.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Matrix> es(L);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    CHECK(es.eigenvalues().maxCoeff() <= 2.0);
    CHECK(L.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(c_lambda_bound(CategoricalHead{}) == 2.0);
  CHECK(c_lambda_bound(GaussianHead{0.04}) == 25.0);
}

TEST_CASE("softmax") {
  Vector g(3);
  g << 1000, 1000, 999;  // stable at large logits
  Vector p = softmax(g);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p(0) == doctest::Approx(p(1)).epsilon(1e-14));
  CHECK(p(2) < p(0));
  CHECK(std::isfinite(p.maxCoeff()));
}

TEST_CASE("prior_variance") {
  CHECK(prior_variance(16, 0.05) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(prior_variance(2000, 1e-4) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(prior_variance(1, 1.0) == 1.0);
  CHECK_THROWS(prior_variance(16, 0.0));
  CHECK_THROWS(prior_variance(0, 0.1));
  CHECK_THROWS(prior_variance(16, -0.1));
}

TEST_CASE("dataset-facing dispatch") {
  Dataset ds;
  ds.X = Matrix::Zero(2, 1);
  ds.Y = Matrix::Zero(2, 1);
  ds.Y(0, 0) = 1.0;
  ds.input = Shape{1, 0, 0};
  ds.C = 1;

  Vector g(1);
  g << 0.0;
  GaussianHead h{1.0};
  CHECK(nll_item(h, g, ds, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(nll_item(h, g, ds, 1) == 0.0);
  CHECK((nll_grad_item(h, g, ds, 0) - gaussian_nll_grad(h, g, ds.y(0))).norm() == 0.0);

  Dataset cl;
  cl.X = Matrix::Zero(1, 1);
  cl.labels = {1};
  cl.input = Shape{1, 0, 0};
  cl.C = 2;
  cl.classification = true;
  Vector g2(2);
  g2 << 0, 0;
  CHECK(nll_item(CategoricalHead{}, g2, cl, 0) == doctest::Approx(std::log(2.0)));

  CHECK(head_matches(h, ds));
  CHECK(!head_matches(CategoricalHead{}, ds));
  CHECK(head_matches(CategoricalHead{}, cl));
  CHECK(!head_matches(h, cl));
}
