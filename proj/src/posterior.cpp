#include "ella/posterior.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "ella/linalg.hpp"
#include "ella/rng.hpp"

namespace ella {

namespace {

Matrix chol_sym(const Matrix& G) {
  Matrix S = 0.5 * (G + G.transpose());
  return chol_lower_spd(S);
}

// shared by predict_f and kappa_ella so the diagonal case matches bit for bit
Matrix cov_from_features(const Matrix& G_chol, const Matrix& feat_a, const Matrix& feat_b) {
  Matrix za = G_chol.triangularView<Eigen::Lower>().solve(feat_a.transpose());
  Matrix zb = G_chol.triangularView<Eigen::Lower>().solve(feat_b.transpose());
  return za.transpose() * zb;
}

Matrix item_contribution(const FlatParams& p, const NystromSketch& sketch, const Head& head,
                         const Vector& x) {
  PhiResult r = phi(p, sketch, x);
  Matrix lam = lambda_hessian(head, r.g);
  return r.features.transpose() * lam * r.features;
}

Vector probs_from_gaussian(const Vector& mean, const Matrix& cov, long S, std::uint64_t seed) {
  if (S < 1) throw std::invalid_argument("need at least one predictive sample");
  const long C = mean.size();
  const double tr = cov.trace();
  if (!(tr > 0.0)) return softmax(mean);
  Matrix L;
  bool ok = false;
  const double base = 1e-10 * tr / static_cast<double>(C);
  for (int attempt = -1; attempt < 3 && !ok; ++attempt) {
    Matrix M = 0.5 * (cov + cov.transpose());
    if (attempt >= 0) M.diagonal().array() += base * std::pow(10.0, attempt);
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() == Eigen::Success) {
      L = llt.matrixL();
      ok = true;
    }
  }
  if (!ok) throw std::runtime_error("predictive covariance stayed indefinite after jitter");
  Rng rng(seed);
  Vector acc = Vector::Zero(C);
  Vector z(C);
  for (long s = 0; s < S; ++s) {
    for (long c = 0; c < C; ++c) z[c] = rng.normal();
    acc += softmax(mean + L * z);
  }
  return acc / static_cast<double>(S);
}

struct ValCache {
  Vector g;
  Matrix features;
};

double validation_nll(const std::vector<ValCache>& cache, const Dataset& val, const Head& head,
                      const Matrix& G_chol, long checkpoint, long mc_samples,
                      std::uint64_t seed) {
  double total = 0.0;
  for (long j = 0; j < val.size(); ++j) {
    const ValCache& vc = cache[static_cast<std::size_t>(j)];
    Matrix cov = cov_from_features(G_chol, vc.features, vc.features);
    if (val.classification) {
      std::uint64_t s = Rng::mix(Rng::mix(seed, static_cast<std::uint64_t>(checkpoint)),
                                 static_cast<std::uint64_t>(j));
      Vector probs = probs_from_gaussian(vc.g, cov, mc_samples, s);
      double p = std::max(probs[val.label(j)], 1e-300);
      total -= std::log(p);
    } else {
      double noise_var = std::get<GaussianHead>(head).noise_var;
      total += gaussian_predictive_nll(PredictiveGaussian{vc.g, cov}, val.y(j), noise_var);
    }
  }
  return total / static_cast<double>(val.size());
}

}  // namespace

long worker_count() {
  if (const char* env = std::getenv("ELLA_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<long>(hc);
}

EllaPosterior prior_posterior(const NystromSketch& sketch, double sigma0_sq) {
  if (!(sigma0_sq > 0.0)) throw std::invalid_argument("prior variance must be positive");
  EllaPosterior post;
  post.sketch = sketch;
  post.sigma0_sq = sigma0_sq;
  Matrix G = Matrix::Identity(sketch.K, sketch.K) / sigma0_sq;
  post.G_chol = chol_sym(G);
  post.items_seen = 0;
  return post;
}

EllaPosterior fit(const NystromSketch& sketch, const FlatParams& p, const Dataset& ds,
                  const Head& head, double sigma0_sq, const EarlyStopConfig* early) {
  if (!(sigma0_sq > 0.0)) throw std::invalid_argument("prior variance must be positive");
  if (ds.size() == 0) throw std::invalid_argument("cannot fit on an empty dataset");
  ds.check();
  if (!head_matches(head, ds)) throw std::invalid_argument("likelihood head does not match the dataset");
  if (p.arch.output_dim() != ds.C) throw std::invalid_argument("network output dimension does not match the dataset");
  if (sketch.V.cols() != p.arch.param_count())
    throw std::invalid_argument("sketch was built for a different parameter count");

  const long N = ds.size();
  const long K = sketch.K;
  Matrix G0 = Matrix::Identity(K, K) / sigma0_sq;

  EllaPosterior post;
  post.sketch = sketch;
  post.sigma0_sq = sigma0_sq;

  if (early == nullptr) {
    const long batch = 64;
    const long n_batches = (N + batch - 1) / batch;
    std::vector<Matrix> partials(static_cast<std::size_t>(n_batches));
    long workers = std::min<long>(worker_count(), n_batches);
    auto run_batch = [&](long b) {
      long lo = b * batch;
      long hi = std::min(N, lo + batch);
      Matrix acc = Matrix::Zero(K, K);
      for (long i = lo; i < hi; ++i) acc += item_contribution(p, sketch, head, ds.x(i));
      partials[static_cast<std::size_t>(b)] = std::move(acc);
    };
    if (workers <= 1) {
      for (long b = 0; b < n_batches; ++b) run_batch(b);
    } else {
      std::atomic<long> next{0};
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (long w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
          try {
            for (;;) {
              long b = next.fetch_add(1);
              if (b >= n_batches) break;
              run_batch(b);
            }
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    Matrix G = G0;
    for (long b = 0; b < n_batches; ++b) G += partials[static_cast<std::size_t>(b)];
    post.G_chol = chol_sym(G);
    post.items_seen = N;
    return post;
  }

  if (early->validation == nullptr || early->validation->size() == 0)
    throw std::invalid_argument("early stopping needs a nonempty validation set");
  if (early->eval_every < 1) throw std::invalid_argument("checkpoint spacing must be at least 1");
  const Dataset& val = *early->validation;
  val.check();
  if (val.classification != ds.classification || val.C != ds.C || !(val.input == ds.input))
    throw std::invalid_argument("validation set does not match the training set");

  std::vector<ValCache> cache(static_cast<std::size_t>(val.size()));
  for (long j = 0; j < val.size(); ++j) {
    PhiResult r = phi(p, sketch, val.x(j));
    cache[static_cast<std::size_t>(j)] = ValCache{std::move(r.g), std::move(r.features)};
  }

  Matrix G = G0;
  std::vector<Matrix> chols;
  std::vector<long> items_at;
  std::vector<double> nlls;
  auto checkpoint = [&](long t) {
    Matrix L = chol_sym(G);
    double nll = validation_nll(cache, val, head, L, static_cast<long>(nlls.size()),
                                early->mc_samples, early->seed);
    chols.push_back(std::move(L));
    items_at.push_back(t);
    nlls.push_back(nll);
  };
  checkpoint(0);
  for (long i = 0; i < N; ++i) {
    G += item_contribution(p, sketch, head, ds.x(i));
    long t = i + 1;
    if (t % early->eval_every == 0 && t < N) checkpoint(t);
  }
  checkpoint(N);

  std::size_t best = 0;
  for (std::size_t c = 1; c < nlls.size(); ++c)
    if (nlls[c] < nlls[best]) best = c;
  post.G_chol = chols[best];
  post.items_seen = items_at[best];
  post.selected = static_cast<long>(best);
  post.fit_log = nlls;
  return post;
}

PredictiveGaussian predict_f(const EllaPosterior& post, const FlatParams& p, const Vector& x) {
  PhiResult r = phi(p, post.sketch, x);
  PredictiveGaussian pred;
  pred.cov = cov_from_features(post.G_chol, r.features, r.features);
  pred.mean = std::move(r.g);
  return pred;
}

Matrix kappa_ella(const EllaPosterior& post, const FlatParams& p, const Vector& x,
                  const Vector& x2) {
  PhiResult a = phi(p, post.sketch, x);
  PhiResult b = phi(p, post.sketch, x2);
  return cov_from_features(post.G_chol, a.features, b.features);
}

Vector predictive_probs(const EllaPosterior& post, const FlatParams& p, const Vector& x,
                        long S, std::uint64_t seed) {
  PredictiveGaussian pred = predict_f(post, p, x);
  return probs_from_gaussian(pred.mean, pred.cov, S, seed);
}

double gaussian_predictive_nll(const PredictiveGaussian& pred, const Vector& y,
                               double noise_var) {
  if (y.size() != pred.mean.size()) throw std::invalid_argument("target dimension mismatch");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("noise variance must be nonnegative");
  const long C = y.size();
  Matrix S = 0.5 * (pred.cov + pred.cov.transpose());
  S.diagonal().array() += noise_var;
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("predictive covariance plus noise is not positive definite");
  Vector r = y - pred.mean;
  Vector w = llt.matrixL().solve(r);
  double logdet = 0.0;
  for (long i = 0; i < C; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return 0.5 * (static_cast<double>(C) * std::log(2.0 * M_PI) + logdet + w.squaredNorm());
}

}  // namespace ella
