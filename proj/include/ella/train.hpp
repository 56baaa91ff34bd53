#pragma once

#include <cstdint>

#include "ella/autodiff.hpp"
#include "ella/likelihood.hpp"

namespace ella {

struct TrainConfig {
  enum class Optimizer { Sgd, Adam };
  Optimizer optimizer = Optimizer::Adam;
  double lr = 1e-2;
  double momentum = 0.9;  // sgd only
  double gamma = 0.0;     // weight decay coefficient
  long iters = 1000;
  long batch = 0;  // 0 (or >= N) runs full-batch
  std::uint64_t seed = 0;
};

// Glorot-normal weights, zero biases, unit batchnorm scales
Vector init_params(const Arch& arch, std::uint64_t seed);

// minimizes mean nll + (gamma/2)*||theta||^2; deterministic given cfg.seed
FlatParams train_map(const Arch& arch, const Dataset& ds, const Head& head,
                     const TrainConfig& cfg);

// mean training-convention nll over the dataset (no weight decay term)
double mean_train_nll(const FlatParams& p, const Dataset& ds, const Head& head);

}  // namespace ella
