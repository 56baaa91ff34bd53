#pragma once

#include <cstdint>
#include <vector>

#include "ella/likelihood.hpp"
#include "ella/nystrom.hpp"

namespace ella {

struct PredictiveGaussian {
  Vector mean;  // g(x)
  Matrix cov;   // C x C, symmetric PSD
};

struct EarlyStopConfig {
  const Dataset* validation = nullptr;
  long eval_every = 1;      // checkpoint spacing in accumulated items
  long mc_samples = 512;    // MC predictive samples for classification NLL
  std::uint64_t seed = 0;
};

struct EllaPosterior {
  NystromSketch sketch;
  Matrix G_chol;  // lower Cholesky factor of G = sum phi^T Lambda phi + I/sigma0^2
  double sigma0_sq = 1.0;
  std::vector<double> fit_log;  // validation NLL per checkpoint (early stopping only)
  long selected = -1;           // index of the checkpoint behind G_chol, -1 if none
  long items_seen = 0;          // training items accumulated into G
};

// posterior with an empty accumulation: G = I/sigma0^2
EllaPosterior prior_posterior(const NystromSketch& sketch, double sigma0_sq);

// Accumulates G over the dataset in order. With early stopping, checkpoints
// are recorded at 0 items, every eval_every items, and at the end; the
// checkpoint with minimal validation NLL is returned (its Cholesky factor is
// restored exactly, not re-fit). Without early stopping the accumulation is
// batched and may run on worker_count() threads; the reduction order is fixed
// so results do not depend on the worker count.
EllaPosterior fit(const NystromSketch& sketch, const FlatParams& p, const Dataset& ds,
                  const Head& head, double sigma0_sq,
                  const EarlyStopConfig* early = nullptr);

PredictiveGaussian predict_f(const EllaPosterior& post, const FlatParams& p, const Vector& x);

// cross-covariance phi(x) G^-1 phi(x')^T; at x == x' this equals the
// predict_f covariance bit for bit
Matrix kappa_ella(const EllaPosterior& post, const FlatParams& p, const Vector& x,
                  const Vector& x2);

// mean of softmax over S Gaussian samples of f; an all-zero covariance
// short-circuits to softmax(mean) exactly
Vector predictive_probs(const EllaPosterior& post, const FlatParams& p, const Vector& x,
                        long S, std::uint64_t seed);

// Gaussian predictive NLL of one item with observation noise folded in
double gaussian_predictive_nll(const PredictiveGaussian& pred, const Vector& y,
                               double noise_var);

// ELLA_WORKERS env var, else hardware concurrency
long worker_count();

}  // namespace ella
