#include "ella/likelihood.hpp"

#include <cmath>
#include <stdexcept>

namespace ella {

Vector softmax(const Vector& g) {
  const double m = g.maxCoeff();
  Vector p = (g.array() - m).exp();
  return p / p.sum();
}

double gaussian_nll(const GaussianHead& h, const Vector& g, const Vector& y) {
  if (g.size() != y.size()) throw std::invalid_argument("gaussian_nll: dim mismatch");
  return (g - y).squaredNorm() / (2.0 * h.noise_var);
}

Vector gaussian_nll_grad(const GaussianHead& h, const Vector& g, const Vector& y) {
  return (g - y) / h.noise_var;
}

double categorical_nll(const Vector& g, int label) {
  if (label < 0 || label >= g.size())
    throw std::out_of_range("categorical_nll: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(g.size()) + ")");
  const double m = g.maxCoeff();
  const double lse = m + std::log((g.array() - m).exp().sum());
  return lse - g[label];
}

Vector categorical_nll_grad(const Vector& g, int label) {
  if (label < 0 || label >= g.size())
    throw std::out_of_range("categorical_nll_grad: label out of range");
  Vector p = softmax(g);
  p[label] -= 1.0;
  return p;
}

double nll_item(const Head& head, const Vector& g, const Dataset& ds, long i) {
  return std::visit(
      [&](const auto& h) -> double {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, GaussianHead>)
          return gaussian_nll(h, g, ds.y(i));
        else
          return categorical_nll(g, ds.label(i));
      },
      head);
}

Vector nll_grad_item(const Head& head, const Vector& g, const Dataset& ds, long i) {
  return std::visit(
      [&](const auto& h) -> Vector {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, GaussianHead>)
          return gaussian_nll_grad(h, g, ds.y(i));
        else
          return categorical_nll_grad(g, ds.label(i));
      },
      head);
}

Matrix lambda_hessian(const Head& head, const Vector& g) {
  if (!g.allFinite()) throw std::invalid_argument("lambda_hessian: non-finite logits");
  return std::visit(
      [&](const auto& h) -> Matrix {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, GaussianHead>) {
          return Matrix::Identity(g.size(), g.size()) / h.noise_var;
        } else {
          Vector p = softmax(g);
          Matrix lam = -p * p.transpose();
          lam.diagonal() += p;
          return lam;
        }
      },
      head);
}

double c_lambda_bound(const Head& head) {
  return std::visit(
      [](const auto& h) -> double {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, GaussianHead>)
          return 1.0 / h.noise_var;
        else
          return 2.0;
      },
      head);
}

double prior_variance(long N, double gamma) {
  if (N < 1) throw std::invalid_argument("prior_variance: N must be positive");
  if (gamma <= 0.0)
    throw std::invalid_argument("prior_variance: weight decay must be positive");
  return 1.0 / (static_cast<double>(N) * gamma);
}

bool head_matches(const Head& head, const Dataset& ds) {
  return std::holds_alternative<CategoricalHead>(head) == ds.classification;
}

}  // namespace ella
