#include "ella/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ella/rng.hpp"

namespace ella {

Vector init_params(const Arch& arch, std::uint64_t seed) {
  Rng rng(seed);
  Vector p = Vector::Zero(arch.param_count());
  for (std::size_t li = 0; li < arch.layers.size(); ++li) {
    double* w = p.data() + arch.param_offset(li);
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Dense>) {
            const double sd = std::sqrt(2.0 / (l.in + l.out));
            for (long i = 0; i < static_cast<long>(l.out) * l.in; ++i)
              w[i] = sd * rng.normal();
          } else if constexpr (std::is_same_v<T, Conv2d>) {
            const long fan = static_cast<long>(l.in_ch) * l.kernel * l.kernel;
            const long fan_out = static_cast<long>(l.out_ch) * l.kernel * l.kernel;
            const double sd = std::sqrt(2.0 / static_cast<double>(fan + fan_out));
            for (long i = 0; i < static_cast<long>(l.out_ch) * fan; ++i)
              w[i] = sd * rng.normal();
          } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
            for (int c = 0; c < l.channels(); ++c) w[c] = 1.0;  // scales; shifts stay 0
          }
        },
        arch.layers[li]);
  }
  return p;
}

FlatParams train_map(const Arch& arch, const Dataset& ds, const Head& head,
                     const TrainConfig& cfg) {
  if (ds.size() == 0) throw std::invalid_argument("train_map: empty dataset");
  if (!head_matches(head, ds))
    throw std::invalid_argument("train_map: head kind does not match dataset targets");
  if (cfg.iters < 1) throw std::invalid_argument("train_map: iterations must be >= 1");
  ds.check();

  const long N = ds.size();
  const long P = arch.param_count();
  FlatParams p{arch, init_params(arch, Rng::mix(cfg.seed, 1))};
  Rng batch_rng(Rng::mix(cfg.seed, 2));

  const bool full_batch = cfg.batch <= 0 || cfg.batch >= N;
  std::vector<long> batch(full_batch ? static_cast<std::size_t>(N)
                                     : static_cast<std::size_t>(cfg.batch));
  if (full_batch) std::iota(batch.begin(), batch.end(), 0L);

  Vector m = Vector::Zero(P);  // adam first moment / sgd velocity
  Vector v = Vector::Zero(P);  // adam second moment
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

  for (long it = 0; it < cfg.iters; ++it) {
    if (!full_batch)
      for (auto& idx : batch) idx = static_cast<long>(batch_rng.index(static_cast<std::size_t>(N)));

    Vector grad = Vector::Zero(P);
    double loss = 0.0;
    for (long idx : batch) {
      Vector x = ds.x(idx);
      Vector g = forward(p, x);
      loss += nll_item(head, g, ds, idx);
      grad += vjp(p, x, nll_grad_item(head, g, ds, idx));
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    loss *= scale;
    grad *= scale;
    if (cfg.gamma != 0.0) grad += cfg.gamma * p.values;

    if (!std::isfinite(loss))
      throw std::runtime_error("train_map: loss diverged at iteration " + std::to_string(it));

    if (cfg.optimizer == TrainConfig::Optimizer::Adam) {
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
      const double mc = 1.0 - std::pow(b1, static_cast<double>(it + 1));
      const double vc = 1.0 - std::pow(b2, static_cast<double>(it + 1));
      p.values.array() -=
          cfg.lr * (m.array() / mc) / ((v.array() / vc).sqrt() + adam_eps);
    } else {
      m = cfg.momentum * m + grad;
      p.values -= cfg.lr * m;
    }
  }
  if (!p.values.allFinite())
    throw std::runtime_error("train_map: parameters diverged to non-finite values");
  return p;
}

double mean_train_nll(const FlatParams& p, const Dataset& ds, const Head& head) {
  if (ds.size() == 0) throw std::invalid_argument("mean_train_nll: empty dataset");
  double total = 0.0;
  for (long i = 0; i < ds.size(); ++i)
    total += nll_item(head, forward(p, ds.x(i)), ds, i);
  return total / static_cast<double>(ds.size());
}

}  // namespace ella
