#pragma once

#include <variant>

#include "ella/dataset.hpp"

namespace ella {

struct GaussianHead {
  double noise_var = 1.0;  // observation noise variance
};

struct CategoricalHead {};

using Head = std::variant<GaussianHead, CategoricalHead>;

Vector softmax(const Vector& g);  // stabilized by max subtraction

// Training losses; the Gaussian constant 0.5*log(2*pi*noise_var) is omitted
// here and added back only in reported evaluation NLLs.
double gaussian_nll(const GaussianHead& h, const Vector& g, const Vector& y);
Vector gaussian_nll_grad(const GaussianHead& h, const Vector& g, const Vector& y);
double categorical_nll(const Vector& g, int label);
Vector categorical_nll_grad(const Vector& g, int label);

double nll_item(const Head& head, const Vector& g, const Dataset& ds, long i);
Vector nll_grad_item(const Head& head, const Vector& g, const Dataset& ds, long i);

// Negative output-space Hessian of the log likelihood. For both supported
// heads it does not depend on the target: I/noise_var for Gaussian and
// diag(p) - p p^T with p = softmax(g) for categorical.
Matrix lambda_hessian(const Head& head, const Vector& g);

// spectral-norm bound on lambda_hessian: 1/noise_var (Gaussian), 2 (categorical)
double c_lambda_bound(const Head& head);

// prior variance from the weight decay used in pretraining: 1/(N*gamma)
double prior_variance(long N, double gamma);

// true when the head's target kind matches the dataset's
bool head_matches(const Head& head, const Dataset& ds);

}  // namespace ella
