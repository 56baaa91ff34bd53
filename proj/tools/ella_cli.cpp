#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ella/arch.hpp"
#include "ella/autodiff.hpp"
#include "ella/dataset.hpp"
#include "ella/likelihood.hpp"
#include "ella/linalg.hpp"
#include "ella/metrics.hpp"
#include "ella/nystrom.hpp"
#include "ella/oracle.hpp"
#include "ella/posterior.hpp"
#include "ella/rng.hpp"
#include "ella/serialize.hpp"
#include "ella/train.hpp"

namespace {

using namespace ella;

struct DataOpts {
  long sine = 0;
  long digits = 0;
  std::string idx_images;
  std::string idx_labels;
  long start = 0;
  long count = -1;
  std::uint64_t data_seed = 0;
  CLI::Option* sine_opt = nullptr;
  CLI::Option* digits_opt = nullptr;
  CLI::Option* data_seed_opt = nullptr;
};

void add_data_flags(CLI::App* cmd, DataOpts& d) {
  d.sine_opt =
      cmd->add_flag("--demo-sine{16}", d.sine,
                    "noisy sine regression set; --demo-sine=N overrides the size (default 16)");
  d.sine_opt->force_callback(false);
  d.digits_opt =
      cmd->add_flag("--demo-digits{2000}", d.digits,
                    "synthetic digit glyphs; --demo-digits=N overrides the size (default 2000)");
  d.digits_opt->force_callback(false);
  cmd->add_option("--idx-images", d.idx_images, "IDX image file");
  cmd->add_option("--idx-labels", d.idx_labels, "IDX label file");
  cmd->add_option("--subset-start", d.start, "first item to keep after loading");
  cmd->add_option("--subset-count", d.count, "number of items to keep (-1 keeps all)");
  d.data_seed_opt =
      cmd->add_option("--data-seed", d.data_seed, "dataset seed (default: derived from --seed)");
}

Dataset build_dataset(const DataOpts& d, std::uint64_t cmd_seed) {
  bool has_sine = d.sine_opt->count() > 0;
  bool has_digits = d.digits_opt->count() > 0;
  int sources = (has_sine ? 1 : 0) + (has_digits ? 1 : 0) +
                ((!d.idx_images.empty() || !d.idx_labels.empty()) ? 1 : 0);
  if (sources != 1)
    throw CLI::ValidationError(
        "dataset", "pass exactly one of --demo-sine, --demo-digits, or --idx-images/--idx-labels");
  std::uint64_t seed =
      d.data_seed_opt->count() > 0 ? d.data_seed : Rng::mix(cmd_seed, 0xda7aull);
  Dataset ds;
  if (has_sine) {
    ds = gen_sine_regression(d.sine, seed);
  } else if (has_digits) {
    ds = gen_digit_glyphs(d.digits, seed);
  } else {
    if (d.idx_images.empty() || d.idx_labels.empty())
      throw CLI::ValidationError("dataset", "--idx-images and --idx-labels go together");
    ds = load_idx(d.idx_images, d.idx_labels);
  }
  if (d.count >= 0)
    ds = take(ds, d.start, d.count);
  else if (d.start > 0)
    ds = take(ds, d.start, ds.size() - d.start);
  return ds;
}

std::string default_arch(const Dataset& ds) {
  if (!ds.classification) return "dense:16,tanh,dense:16,tanh,dense:16,tanh,dense:1";
  return "conv:4:3:2:1,bn,relu,conv:8:3:2:1,bn,relu,flatten,dense:" + std::to_string(ds.C);
}

Head make_head(const std::string& name, const Dataset& ds, double noise_var) {
  std::string kind = name;
  if (kind.empty()) kind = ds.classification ? "categorical" : "gaussian";
  if (kind == "gaussian") return GaussianHead{noise_var};
  if (kind == "categorical") return CategoricalHead{};
  throw CLI::ValidationError("--head", "expected gaussian or categorical");
}

std::vector<long> parse_long_grid(const std::string& csv, const char* what) {
  std::vector<long> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stol(tok));
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected a comma-separated list of integers");
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "grid is empty");
  return out;
}

std::vector<double> parse_double_grid(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected a comma-separated list of numbers");
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "list is empty");
  return out;
}

std::ostream& open_sink(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

double resolve_sigma0(const CLI::Option* s0_opt, double s0, const CLI::Option* wd_opt,
                      double wd, long n_items) {
  bool has_s0 = s0_opt->count() > 0;
  bool has_wd = wd_opt->count() > 0;
  if (has_s0 == has_wd)
    throw CLI::ValidationError("--sigma0-sq",
                               "pass exactly one of --sigma0-sq or --from-weight-decay");
  return has_s0 ? s0 : prior_variance(n_items, wd);
}

struct FitProducts {
  NystromSketch sketch;
  EllaPosterior post;
  double sigma0_sq = 0.0;
  Dataset fit_ds;
  Dataset val_ds;  // empty unless early stopping
};

FitProducts run_fit(const FlatParams& p, const Dataset& full, const Head& head, long M, int K,
                    double sigma0_sq, double rank_cutoff, long early_every, double val_fraction,
                    long mc_samples, std::uint64_t seed) {
  if (K > M) throw CLI::ValidationError("--K", "K cannot exceed the landmark count M");
  FitProducts out;
  out.sigma0_sq = sigma0_sq;
  if (early_every > 0) {
    std::vector<Dataset> parts =
        split(full, {1.0 - val_fraction, val_fraction}, Rng::mix(seed, 0x59117ull));
    out.fit_ds = std::move(parts[0]);
    out.val_ds = std::move(parts[1]);
  } else {
    out.fit_ds = full;
  }
  LandmarkSet lm = sample_landmarks(out.fit_ds, static_cast<int>(p.arch.output_dim()), M,
                                    Rng::mix(seed, 0x1a9dull));
  Matrix Jl = landmark_jacobian(p, out.fit_ds, lm);
  out.sketch = build_sketch(Jl, K, rank_cutoff);
  out.sketch.seed = lm.seed;
  std::cerr << "sketch: M=" << out.sketch.M << " K=" << out.sketch.K << " spectrum:";
  for (long k = 0; k < out.sketch.K; ++k) std::cerr << ' ' << out.sketch.eigenvalues[k];
  std::cerr << '\n';
  if (early_every > 0) {
    EarlyStopConfig es;
    es.validation = &out.val_ds;
    es.eval_every = early_every;
    es.mc_samples = mc_samples;
    es.seed = Rng::mix(seed, 0xe51ull);
    out.post = fit(out.sketch, p, out.fit_ds, head, sigma0_sq, &es);
    std::cerr << "early stop: validation NLL per checkpoint:";
    for (double v : out.post.fit_log) std::cerr << ' ' << v;
    std::cerr << "\nselected checkpoint " << out.post.selected << " after "
              << out.post.items_seen << " items\n";
  } else {
    out.post = fit(out.sketch, p, out.fit_ds, head, sigma0_sq);
  }
  return out;
}

int cmd_train(const DataOpts& data, const std::string& arch_spec, const std::string& head_name,
              double noise_var, const TrainConfig& cfg_in, std::uint64_t seed,
              const std::string& out_path) {
  Dataset ds = build_dataset(data, seed);
  Arch arch = parse_arch(ds.input.str(), arch_spec.empty() ? default_arch(ds) : arch_spec);
  Head head = make_head(head_name, ds, noise_var);
  TrainConfig cfg = cfg_in;
  cfg.seed = seed;
  std::cerr << "training " << format_arch(arch) << " on " << ds.provenance << " for "
            << cfg.iters << " iterations\n";
  FlatParams p = train_map(arch, ds, head, cfg);
  save_checkpoint(out_path, p);
  double nll = mean_train_nll(p, ds, head);
  nlohmann::json report{{"train_nll", nll},
                        {"param_count", p.arch.param_count()},
                        {"checkpoint_fnv1a", hex_u64(file_fnv1a(out_path))}};
  std::cout << report.dump() << '\n';
  return 0;
}

int main_impl(int argc, char** argv) {
  CLI::App app{"sketched linearized-Laplace predictive uncertainty for small networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from a TOML file (flags win)");

  // train
  auto* train_cmd = app.add_subcommand("train", "MAP-train a network and write a checkpoint");
  DataOpts train_data;
  add_data_flags(train_cmd, train_data);
  std::string train_arch, train_head;
  double train_noise = 0.2;
  TrainConfig tc;
  std::string train_opt = "adam";
  std::uint64_t train_seed = 0;
  std::string train_out;
  train_cmd->add_option("--arch", train_arch, "layer spec, e.g. dense:16,tanh,dense:1");
  train_cmd->add_option("--head", train_head, "gaussian or categorical (default by dataset)");
  train_cmd->add_option("--noise-var", train_noise, "Gaussian head noise variance")
      ->capture_default_str();
  train_cmd->add_option("--iters", tc.iters, "optimizer steps")->capture_default_str();
  train_cmd->add_option("--lr", tc.lr, "learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tc.batch, "minibatch size, 0 = full batch")
      ->capture_default_str();
  train_cmd->add_option("--gamma", tc.gamma, "weight decay")->capture_default_str();
  train_cmd->add_option("--momentum", tc.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--optimizer", train_opt, "adam or sgd")->capture_default_str();
  train_cmd->add_option("--seed", train_seed, "seed for init and batching")
      ->capture_default_str();
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "build the sketch and posterior for a checkpoint");
  DataOpts fit_data;
  add_data_flags(fit_cmd, fit_data);
  std::string fit_ckpt, fit_head;
  double fit_noise = 0.2;
  long fit_M = 2000;
  int fit_K = 20;
  double fit_s0 = 0.0, fit_wd = 0.0, fit_cutoff = 1e-10, fit_valfrac = 0.2;
  long fit_early = 0, fit_mc = 512;
  std::uint64_t fit_seed = 0;
  std::string sketch_out, posterior_out;
  fit_cmd->add_option("--checkpoint", fit_ckpt, "trained checkpoint")->required();
  fit_cmd->add_option("--head", fit_head, "gaussian or categorical (default by dataset)");
  fit_cmd->add_option("--noise-var", fit_noise, "Gaussian head noise variance")
      ->capture_default_str();
  fit_cmd->add_option("--M", fit_M, "landmark count")->capture_default_str();
  fit_cmd->add_option("--K", fit_K, "kept eigenpairs")->capture_default_str();
  auto* fit_s0_opt = fit_cmd->add_option("--sigma0-sq", fit_s0, "prior variance");
  auto* fit_wd_opt = fit_cmd->add_option("--from-weight-decay", fit_wd,
                                         "derive the prior variance as 1/(N*gamma)");
  fit_cmd->add_option("--rank-cutoff", fit_cutoff, "relative eigenvalue cutoff")
      ->capture_default_str();
  fit_cmd->add_option("--early-stop", fit_early,
                      "checkpoint spacing in items, 0 disables early stopping")
      ->capture_default_str();
  fit_cmd->add_option("--val-fraction", fit_valfrac, "held-out fraction for early stopping")
      ->capture_default_str();
  fit_cmd->add_option("--mc-samples", fit_mc, "MC samples for early-stop validation NLL")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit_seed, "seed for landmarks and early stopping")
      ->capture_default_str();
  fit_cmd->add_option("--sketch-out", sketch_out, "sketch path")->required();
  fit_cmd->add_option("--posterior-out", posterior_out, "posterior path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a posterior on a dataset");
  DataOpts eval_data;
  add_data_flags(eval_cmd, eval_data);
  std::string eval_post, eval_ckpt, eval_format = "json", eval_out, eval_thresholds;
  double eval_noise = 0.2;
  long eval_mc = 512;
  int eval_bins = 15;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--posterior", eval_post, "posterior file")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "matching checkpoint")->required();
  eval_cmd->add_option("--mc-samples", eval_mc, "MC predictive samples")->capture_default_str();
  eval_cmd->add_option("--bins", eval_bins, "calibration bins")->capture_default_str();
  eval_cmd->add_option("--noise-var", eval_noise, "Gaussian predictive noise variance")
      ->capture_default_str();
  eval_cmd->add_option("--thresholds", eval_thresholds,
                       "confidence thresholds, comma separated (default 0.1..1.0)");
  eval_cmd->add_option("--seed", eval_seed, "seed for MC sampling")->capture_default_str();
  eval_cmd->add_option("--format", eval_format, "json or csv")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "write the report here instead of stdout");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over M and K, CSV of errors and NLL");
  DataOpts sweep_data;
  add_data_flags(sweep_cmd, sweep_data);
  std::string sweep_ckpt, sweep_head, sweep_Mgrid = "64,512", sweep_Kgrid = "8,64", sweep_out;
  double sweep_noise = 0.2, sweep_s0 = 0.0, sweep_wd = 0.0, sweep_holdout = 0.2,
         sweep_cutoff = 1e-10;
  long sweep_seeds = 1, sweep_mc = 512;
  std::uint64_t sweep_seed = 0;
  sweep_cmd->add_option("--checkpoint", sweep_ckpt, "trained checkpoint")->required();
  sweep_cmd->add_option("--head", sweep_head, "gaussian or categorical (default by dataset)");
  sweep_cmd->add_option("--noise-var", sweep_noise, "Gaussian head noise variance")
      ->capture_default_str();
  sweep_cmd->add_option("--M-grid", sweep_Mgrid, "landmark counts, comma separated")
      ->capture_default_str();
  sweep_cmd->add_option("--K-grid", sweep_Kgrid, "kept ranks, comma separated")
      ->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_seeds, "number of landmark seeds per cell")
      ->capture_default_str();
  auto* sweep_s0_opt = sweep_cmd->add_option("--sigma0-sq", sweep_s0, "prior variance");
  auto* sweep_wd_opt = sweep_cmd->add_option("--from-weight-decay", sweep_wd,
                                             "derive the prior variance as 1/(N*gamma)");
  sweep_cmd->add_option("--holdout", sweep_holdout, "held-out fraction for test metrics")
      ->capture_default_str();
  sweep_cmd->add_option("--mc-samples", sweep_mc, "MC samples for classification NLL")
      ->capture_default_str();
  sweep_cmd->add_option("--rank-cutoff", sweep_cutoff, "relative eigenvalue cutoff")
      ->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_seed, "base seed")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "write CSV here instead of stdout");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "check the covariance error bounds on random instances");
  long verify_n = 100;
  double verify_delta = 0.05;
  std::uint64_t verify_seed = 0;
  std::string verify_out;
  verify_cmd->add_option("--instances", verify_n, "number of random instances")
      ->capture_default_str();
  verify_cmd->add_option("--delta", verify_delta, "failure probability for the sampled bound")
      ->capture_default_str();
  verify_cmd->add_option("--seed", verify_seed, "base seed")->capture_default_str();
  verify_cmd->add_option("--out", verify_out, "write JSON lines here instead of stdout");

  // demo-regression
  auto* demo_cmd = app.add_subcommand(
      "demo-regression", "1-D sine study: predictive bands and KL against the exact reference");
  long demo_seeds = 1;
  std::uint64_t demo_seed = 0;
  std::string demo_csv;
  long demo_grid = 200;
  demo_cmd->add_option("--seeds", demo_seeds, "number of independent repetitions")
      ->capture_default_str();
  demo_cmd->add_option("--grid", demo_grid, "test grid size on [-4, 4]")->capture_default_str();
  demo_cmd->add_option("--seed", demo_seed, "base seed")->capture_default_str();
  demo_cmd->add_option("--out", demo_csv, "write the first repetition's band CSV here");

  CLI11_PARSE(app, argc, argv);

  if (train_cmd->parsed()) {
    if (train_opt == "adam")
      tc.optimizer = TrainConfig::Optimizer::Adam;
    else if (train_opt == "sgd")
      tc.optimizer = TrainConfig::Optimizer::Sgd;
    else
      throw CLI::ValidationError("--optimizer", "expected adam or sgd");
    return cmd_train(train_data, train_arch, train_head, train_noise, tc, train_seed, train_out);
  }

  if (fit_cmd->parsed()) {
    FlatParams p = load_checkpoint(fit_ckpt);
    Dataset full = build_dataset(fit_data, fit_seed);
    Head head = make_head(fit_head, full, fit_noise);
    long n_items = fit_early > 0
                       ? static_cast<long>(std::llround((1.0 - fit_valfrac) * full.size()))
                       : full.size();
    double s0 = resolve_sigma0(fit_s0_opt, fit_s0, fit_wd_opt, fit_wd, n_items);
    FitProducts prod = run_fit(p, full, head, fit_M, fit_K, s0, fit_cutoff, fit_early,
                               fit_valfrac, fit_mc, fit_seed);
    std::string arch_hash = arch_fingerprint(p.arch);
    save_sketch(sketch_out, prod.sketch, arch_hash);
    save_posterior(posterior_out, prod.post, arch_hash);
    nlohmann::json report{{"M", prod.sketch.M},
                          {"K", prod.sketch.K},
                          {"sigma0_sq", s0},
                          {"items_seen", prod.post.items_seen},
                          {"selected", prod.post.selected},
                          {"sketch_fnv1a", hex_u64(file_fnv1a(sketch_out))},
                          {"posterior_fnv1a", hex_u64(file_fnv1a(posterior_out))}};
    std::cout << report.dump() << '\n';
    return 0;
  }

  if (eval_cmd->parsed()) {
    PosteriorFile pf = load_posterior(eval_post);
    FlatParams p = load_checkpoint(eval_ckpt);
    if (!pf.arch_hash.empty() && pf.arch_hash != arch_fingerprint(p.arch))
      throw std::runtime_error("posterior was fit for a different architecture");
    Dataset ds = build_dataset(eval_data, eval_seed);
    nlohmann::json report;
    if (ds.classification) {
      Matrix probs = posterior_probs(pf.post, p, ds, eval_mc, Rng::mix(eval_seed, 0xe7a1ull));
      MetricsReport mr = classification_report(probs, ds.labels, eval_bins);
      std::vector<double> taus;
      if (eval_thresholds.empty())
        for (int t = 1; t <= 10; ++t) taus.push_back(t / 10.0);
      else
        taus = parse_double_grid(eval_thresholds, "--thresholds");
      report = metrics_to_json(mr);
      report["curve"] = curve_to_json(error_vs_confidence(probs, ds.labels, taus));
    } else {
      std::vector<PredictiveGaussian> preds;
      preds.reserve(static_cast<std::size_t>(ds.size()));
      for (long i = 0; i < ds.size(); ++i) preds.push_back(predict_f(pf.post, p, ds.x(i)));
      report = nlohmann::json{{"n", ds.size()},
                              {"nll", regression_nll(preds, ds.Y, eval_noise)}};
    }
    std::ofstream file;
    std::ostream& out = open_sink(eval_out, file);
    if (eval_format == "json") {
      out << report.dump() << '\n';
    } else if (eval_format == "csv") {
      out << std::setprecision(17) << "metric,value\n";
      for (auto& [key, value] : report.items())
        if (value.is_number()) out << key << ',' << value.get<double>() << '\n';
    } else {
      throw CLI::ValidationError("--format", "expected json or csv");
    }
    return 0;
  }

  if (sweep_cmd->parsed()) {
    FlatParams p = load_checkpoint(sweep_ckpt);
    Dataset full = build_dataset(sweep_data, sweep_seed);
    Head head = make_head(sweep_head, full, sweep_noise);
    std::vector<Dataset> parts =
        split(full, {1.0 - sweep_holdout, sweep_holdout}, Rng::mix(sweep_seed, 0x501dull));
    Dataset& fit_ds = parts[0];
    Dataset& test_ds = parts[1];
    double s0 = resolve_sigma0(sweep_s0_opt, sweep_s0, sweep_wd_opt, sweep_wd, fit_ds.size());
    std::vector<long> Ms = parse_long_grid(sweep_Mgrid, "--M-grid");
    std::vector<long> Ks = parse_long_grid(sweep_Kgrid, "--K-grid");
    std::cerr << "sweep: " << fit_ds.size() << " fit items, " << test_ds.size()
              << " test items, sigma0_sq=" << s0 << '\n';
    LlaOracle oracle = make_lla_oracle(p, fit_ds, head, s0);
    std::ofstream file;
    std::ostream& out = open_sink(sweep_out, file);
    out << std::setprecision(17) << "M,K,seed,eps_nystrom,eps_ella,test_nll\n";
    for (long s = 0; s < sweep_seeds; ++s) {
      for (long M : Ms) {
        LandmarkSet lm = sample_landmarks(fit_ds, oracle.C, M,
                                          Rng::mix(Rng::mix(sweep_seed, 0x3a3dull + s),
                                                   static_cast<std::uint64_t>(M)));
        Matrix Jl = landmark_jacobian(p, fit_ds, lm);
        double eps_n = nystrom_error(oracle.J, Jl);
        for (long K : Ks) {
          if (K > M) {
            std::cerr << "skipping K=" << K << " > M=" << M << '\n';
            continue;
          }
          NystromSketch sk = build_sketch(Jl, static_cast<int>(K), sweep_cutoff);
          sk.seed = lm.seed;
          EllaPosterior post = fit(sk, p, fit_ds, head, s0);
          double eps_e = epsilon_ella(post, oracle, test_ds);
          double test_nll;
          if (test_ds.classification) {
            Matrix probs = posterior_probs(post, p, test_ds, sweep_mc,
                                           Rng::mix(sweep_seed, 0xe7a1ull + s));
            test_nll = nll_from_probs(probs, test_ds.labels);
          } else {
            std::vector<PredictiveGaussian> preds;
            for (long i = 0; i < test_ds.size(); ++i)
              preds.push_back(predict_f(post, p, test_ds.x(i)));
            test_nll = regression_nll(preds, test_ds.Y, sweep_noise);
          }
          out << M << ',' << K << ',' << s << ',' << eps_n << ',' << eps_e << ','
              << test_nll << '\n';
        }
      }
    }
    return 0;
  }

  if (verify_cmd->parsed()) {
    if (verify_n < 0) throw CLI::ValidationError("--instances", "must be nonnegative");
    std::ofstream file;
    std::ostream& out = open_sink(verify_out, file);
    long failures = 0;
    for (long i = 0; i < verify_n; ++i) {
      TheoremInstance inst =
          random_theorem_instance(Rng::mix(verify_seed, static_cast<std::uint64_t>(i)));
      TheoremBoundReport r = check_theorem_bounds(inst, verify_delta);
      if (!r.holds_thm0) ++failures;
      out << report_to_json(r).dump() << '\n';
    }
    std::cerr << verify_n - failures << '/' << verify_n << " instances satisfied the deterministic bound\n";
    return failures == 0 ? 0 : 1;
  }

  if (demo_cmd->parsed()) {
    if (demo_seeds < 1) throw CLI::ValidationError("--seeds", "must be at least 1");
    if (demo_grid < 2) throw CLI::ValidationError("--grid", "need at least 2 grid points");
    nlohmann::json per_seed = nlohmann::json::array();
    long wins_diag = 0, wins_lastlayer = 0;
    for (long s = 0; s < demo_seeds; ++s) {
      std::uint64_t ws = Rng::mix(demo_seed, static_cast<std::uint64_t>(s));
      Dataset ds = gen_sine_regression(16, Rng::mix(ws, 1));
      Arch arch = parse_arch(ds.input.str(), default_arch(ds));
      Head head = GaussianHead{0.2};
      TrainConfig cfg;
      cfg.iters = 1000;
      cfg.gamma = 0.05;
      cfg.seed = Rng::mix(ws, 2);
      FlatParams p = train_map(arch, ds, head, cfg);
      double sse = 0.0;
      for (long i = 0; i < ds.size(); ++i) sse += (forward(p, ds.x(i)) - ds.y(i)).squaredNorm();
      double rmse = std::sqrt(sse / static_cast<double>(ds.size()));
      double s0 = prior_variance(ds.size(), cfg.gamma);
      LandmarkSet lm = sample_landmarks(ds, 1, 16, Rng::mix(ws, 3));
      Matrix Jl = landmark_jacobian(p, ds, lm);
      NystromSketch sk = build_sketch(Jl, 5);
      sk.seed = lm.seed;
      EllaPosterior post = fit(sk, p, ds, head, s0);
      LlaOracle oracle = make_lla_oracle(p, ds, head, s0);
      double kl_e = 0.0, kl_d = 0.0, kl_l = 0.0;
      std::ofstream csv;
      bool write_csv = s == 0 && !demo_csv.empty();
      if (write_csv) {
        csv.open(demo_csv, std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write " + demo_csv);
        csv << std::setprecision(17) << "x,mean,std_ella,std_lla,std_diag,std_lastlayer\n";
      }
      for (long j = 0; j < demo_grid; ++j) {
        Vector x(1);
        x[0] = -4.0 + 8.0 * static_cast<double>(j) / static_cast<double>(demo_grid - 1);
        Vector mean = forward(p, x);
        Matrix v_ella = kappa_ella(post, p, x, x);
        Matrix v_exact = kappa_lla_exact(oracle, x, x);
        Matrix v_diag = kappa_lla_diag(oracle, x, x);
        Matrix v_ll = kappa_lla_lastlayer(oracle, x, x);
        kl_e += kl_gaussian(mean, v_ella, mean, v_exact);
        kl_d += kl_gaussian(mean, v_diag, mean, v_exact);
        kl_l += kl_gaussian(mean, v_ll, mean, v_exact);
        if (write_csv)
          csv << x[0] << ',' << mean[0] << ',' << std::sqrt(v_ella(0, 0)) << ','
              << std::sqrt(v_exact(0, 0)) << ',' << std::sqrt(v_diag(0, 0)) << ','
              << std::sqrt(v_ll(0, 0)) << '\n';
      }
      kl_e /= static_cast<double>(demo_grid);
      kl_d /= static_cast<double>(demo_grid);
      kl_l /= static_cast<double>(demo_grid);
      if (kl_e < kl_d) ++wins_diag;
      if (kl_e < kl_l) ++wins_lastlayer;
      per_seed.push_back({{"seed", s},
                          {"train_rmse", rmse},
                          {"kl_ella", kl_e},
                          {"kl_diag", kl_d},
                          {"kl_lastlayer", kl_l}});
      std::cerr << "seed " << s << ": rmse=" << rmse << " kl_ella=" << kl_e
                << " kl_diag=" << kl_d << " kl_lastlayer=" << kl_l << '\n';
    }
    nlohmann::json summary{{"seeds", per_seed},
                           {"wins_vs_diag", wins_diag},
                           {"wins_vs_lastlayer", wins_lastlayer},
                           {"grid", demo_grid}};
    std::cout << summary.dump() << '\n';
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main_impl(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
