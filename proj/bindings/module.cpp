#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ella/dataset.hpp"
#include "ella/metrics.hpp"
#include "ella/oracle.hpp"
#include "ella/posterior.hpp"
#include "ella/rng.hpp"
#include "ella/serialize.hpp"
#include "ella/train.hpp"

namespace py = pybind11;
using namespace ella;

namespace {

py::dict report_dict(const TheoremBoundReport& r) {
  py::dict d;
  d["E"] = r.E;
  d["eps_prime"] = r.eps_prime;
  d["c_lambda"] = r.c_lambda;
  d["c_kappa"] = r.c_kappa;
  d["lambda_tilde_next"] = r.lambda_tilde_next;
  d["delta"] = r.delta;
  d["bound_thm0"] = r.bound_thm0;
  d["bound_nystrom"] = r.bound_nystrom;
  d["bound_corollary"] = r.bound_corollary;
  d["holds_thm0"] = r.holds_thm0;
  d["holds_nystrom"] = r.holds_nystrom;
  d["holds_corollary"] = r.holds_corollary;
  d["M"] = r.M;
  d["N"] = r.N;
  d["C"] = r.C;
  d["P"] = r.P;
  d["seed"] = r.seed;
  return d;
}

py::dict metrics_dict(const MetricsReport& r) {
  py::list bins;
  for (const auto& b : r.bins) {
    py::dict row;
    row["conf_lo"] = b.conf_lo;
    row["conf_hi"] = b.conf_hi;
    row["mean_conf"] = b.mean_conf;
    row["accuracy"] = b.accuracy;
    row["count"] = b.count;
    bins.append(row);
  }
  py::dict d;
  d["nll"] = r.nll;
  d["accuracy"] = r.accuracy;
  d["ece"] = r.ece;
  d["n"] = r.n;
  d["bins"] = bins;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ella, m) {
  m.doc() = "sketched linearized-Laplace predictive uncertainty for small networks";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>())
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("normal", &Rng::normal)
      .def("index", &Rng::index)
      .def_static("mix", &Rng::mix);

  py::class_<Shape>(m, "Shape")
      .def_readonly("c", &Shape::c)
      .def_readonly("h", &Shape::h)
      .def_readonly("w", &Shape::w)
      .def("size", &Shape::size)
      .def("__repr__", &Shape::str);

  py::class_<Arch>(m, "Arch")
      .def("param_count", &Arch::param_count)
      .def("output_dim", &Arch::output_dim)
      .def_readonly("input", &Arch::input)
      .def("to_json", [](const Arch& a) { return arch_to_json(a).dump(); })
      .def("__repr__", &format_arch);
  m.def("parse_arch", &parse_arch, py::arg("input_shape"), py::arg("layer_spec"));
  m.def("arch_fingerprint", &arch_fingerprint);

  py::class_<FlatParams>(m, "FlatParams")
      .def(py::init<const Arch&, const Vector&>())
      .def_readonly("arch", &FlatParams::arch)
      .def_readwrite("values", &FlatParams::values);
  m.def("init_params", &init_params, py::arg("arch"), py::arg("seed"));

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("X", &Dataset::X)
      .def_readwrite("Y", &Dataset::Y)
      .def_readwrite("labels", &Dataset::labels)
      .def_readonly("input", &Dataset::input)
      .def_readonly("C", &Dataset::C)
      .def_readonly("classification", &Dataset::classification)
      .def_readonly("provenance", &Dataset::provenance)
      .def("size", &Dataset::size)
      .def("x", &Dataset::x)
      .def("y", &Dataset::y)
      .def("label", &Dataset::label);
  m.def("gen_sine_regression", &gen_sine_regression, py::arg("N"), py::arg("seed"),
        py::arg("lo") = -2.0, py::arg("hi") = 2.0, py::arg("noise_var") = 0.2);
  m.def("gen_two_moons", &gen_two_moons, py::arg("N"), py::arg("seed"),
        py::arg("noise_sd") = 0.15);
  m.def("gen_digit_glyphs", &gen_digit_glyphs, py::arg("N"), py::arg("seed"));
  m.def("load_idx", &load_idx);
  m.def("save_idx", &save_idx);
  m.def("select", &ella::select);
  m.def("take", &take);
  m.def("subsample", &subsample);
  m.def("split", &split);
  m.def("gaussian_corrupt", &gaussian_corrupt);

  py::class_<GaussianHead>(m, "GaussianHead")
      .def(py::init<double>(), py::arg("noise_var") = 1.0)
      .def_readwrite("noise_var", &GaussianHead::noise_var);
  py::class_<CategoricalHead>(m, "CategoricalHead").def(py::init<>());
  m.def("softmax", &softmax);
  m.def("lambda_hessian", &lambda_hessian);
  m.def("c_lambda_bound", &c_lambda_bound);
  m.def("prior_variance", &prior_variance, py::arg("N"), py::arg("gamma"));

  m.def("forward", &forward);
  m.def("jvp", [](const FlatParams& p, const Vector& x, const Vector& v) {
    JvpResult r = jvp(p, x, v);
    return py::make_tuple(r.value, r.tangent);
  });
  m.def("vjp", &vjp);
  m.def("grad_row", &grad_row);
  m.def("jacobian", &jacobian);
  m.def("jvp_pass_count", &jvp_pass_count);

  py::class_<TrainConfig> tc(m, "TrainConfig");
  py::enum_<TrainConfig::Optimizer>(tc, "Optimizer")
      .value("Sgd", TrainConfig::Optimizer::Sgd)
      .value("Adam", TrainConfig::Optimizer::Adam);
  tc.def(py::init<>())
      .def_readwrite("optimizer", &TrainConfig::optimizer)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("iters", &TrainConfig::iters)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("seed", &TrainConfig::seed);
  m.def("train_map", &train_map);
  m.def("mean_train_nll", &mean_train_nll);

  py::class_<Landmark>(m, "Landmark")
      .def_readonly("datum", &Landmark::datum)
      .def_readonly("cls", &Landmark::cls);
  py::class_<LandmarkSet>(m, "LandmarkSet")
      .def_readonly("entries", &LandmarkSet::entries)
      .def_readonly("seed", &LandmarkSet::seed);
  m.def("sample_landmarks", &sample_landmarks, py::arg("ds"), py::arg("C"), py::arg("M"),
        py::arg("seed"));
  m.def("landmark_jacobian", &landmark_jacobian);

  py::class_<NystromSketch>(m, "NystromSketch")
      .def_readonly("eigenvalues", &NystromSketch::eigenvalues)
      .def_readonly("V", &NystromSketch::V)
      .def_readonly("U", &NystromSketch::U)
      .def_readonly("M", &NystromSketch::M)
      .def_readonly("K", &NystromSketch::K)
      .def_readonly("requested_K", &NystromSketch::requested_K)
      .def_readonly("seed", &NystromSketch::seed);
  m.def("build_sketch", &build_sketch, py::arg("J_landmarks"), py::arg("K"),
        py::arg("rank_cutoff") = 1e-10);
  m.def("phi", [](const FlatParams& p, const NystromSketch& s, const Vector& x) {
    PhiResult r = phi(p, s, x);
    return py::make_tuple(r.g, r.features);
  });
  m.def("nystrom_error", &nystrom_error);

  py::class_<PredictiveGaussian>(m, "PredictiveGaussian")
      .def(py::init<>())
      .def_readwrite("mean", &PredictiveGaussian::mean)
      .def_readwrite("cov", &PredictiveGaussian::cov);

  py::class_<EllaPosterior>(m, "EllaPosterior")
      .def_readonly("sketch", &EllaPosterior::sketch)
      .def_readonly("G_chol", &EllaPosterior::G_chol)
      .def_readonly("sigma0_sq", &EllaPosterior::sigma0_sq)
      .def_readonly("fit_log", &EllaPosterior::fit_log)
      .def_readonly("selected", &EllaPosterior::selected)
      .def_readonly("items_seen", &EllaPosterior::items_seen);
  m.def("prior_posterior", &prior_posterior);
  m.def(
      "fit",
      [](const NystromSketch& s, const FlatParams& p, const Dataset& ds, const Head& head,
         double sigma0_sq) { return fit(s, p, ds, head, sigma0_sq); },
      py::arg("sketch"), py::arg("params"), py::arg("ds"), py::arg("head"),
      py::arg("sigma0_sq"));
  m.def(
      "fit_early_stopped",
      [](const NystromSketch& s, const FlatParams& p, const Dataset& ds, const Head& head,
         double sigma0_sq, const Dataset& validation, long eval_every, long mc_samples,
         std::uint64_t seed) {
        EarlyStopConfig es;
        es.validation = &validation;
        es.eval_every = eval_every;
        es.mc_samples = mc_samples;
        es.seed = seed;
        return fit(s, p, ds, head, sigma0_sq, &es);
      },
      py::arg("sketch"), py::arg("params"), py::arg("ds"), py::arg("head"),
      py::arg("sigma0_sq"), py::arg("validation"), py::arg("eval_every") = 1,
      py::arg("mc_samples") = 512, py::arg("seed") = 0);
  m.def("predict_f", &predict_f);
  m.def("kappa_ella", &kappa_ella);
  m.def("predictive_probs", &predictive_probs, py::arg("post"), py::arg("params"),
        py::arg("x"), py::arg("S"), py::arg("seed"));
  m.def("gaussian_predictive_nll", &gaussian_predictive_nll);

  py::class_<LlaOracle>(m, "LlaOracle")
      .def_readonly("J", &LlaOracle::J)
      .def_readonly("Lambda", &LlaOracle::Lambda)
      .def_readonly("Sigma", &LlaOracle::Sigma)
      .def_readonly("sigma0_sq", &LlaOracle::sigma0_sq)
      .def_readonly("N", &LlaOracle::N)
      .def_readonly("C", &LlaOracle::C);
  m.def("make_lla_oracle", &make_lla_oracle);
  m.def("dense_jacobian", &dense_jacobian);
  m.def("dense_lambda", &dense_lambda);
  m.def("sigma_from_ggn", &sigma_from_ggn);
  m.def("sigma_woodbury", &sigma_woodbury);
  m.def("kappa_from_sigma", &kappa_from_sigma);
  m.def("kappa_kernel_form", &kappa_kernel_form);
  m.def("sigma_prime", &sigma_prime);
  m.def("kappa_lla_exact", &kappa_lla_exact);
  m.def("kappa_lla_diag", &kappa_lla_diag);
  m.def("kappa_lla_lastlayer", &kappa_lla_lastlayer);
  m.def("kl_gaussian", &kl_gaussian);
  m.def("epsilon_ella", &epsilon_ella);
  m.def("check_random_instance", [](std::uint64_t seed, double delta) {
    TheoremInstance inst = random_theorem_instance(seed);
    return report_dict(check_theorem_bounds(inst, delta));
  }, py::arg("seed"), py::arg("delta") = 0.05);

  m.def("ece", &ece, py::arg("probs"), py::arg("labels"), py::arg("bins") = 15);
  m.def("nll_from_probs", &nll_from_probs);
  m.def("accuracy", &accuracy);
  m.def("classification_report",
        [](const Matrix& probs, const std::vector<int>& labels, int bins) {
          return metrics_dict(classification_report(probs, labels, bins));
        },
        py::arg("probs"), py::arg("labels"), py::arg("bins") = 15);
  m.def("error_vs_confidence",
        [](const Matrix& probs, const std::vector<int>& labels,
           const std::vector<double>& thresholds) {
          py::list out;
          for (const auto& pt : error_vs_confidence(probs, labels, thresholds)) {
            py::dict d;
            d["tau"] = pt.tau;
            d["error"] = pt.has_value ? py::object(py::float_(pt.error)) : py::none();
            d["count"] = pt.count;
            out.append(d);
          }
          return out;
        });
  m.def("regression_nll", &regression_nll);
  m.def("map_probs", &map_probs);
  m.def("posterior_probs", &posterior_probs, py::arg("post"), py::arg("params"),
        py::arg("ds"), py::arg("S"), py::arg("seed"));

  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);
  m.def("save_sketch", &save_sketch);
  m.def("load_sketch", [](const std::string& path) {
    SketchFile f = load_sketch(path);
    return py::make_tuple(f.sketch, f.arch_hash);
  });
  m.def("save_posterior", &save_posterior);
  m.def("load_posterior", [](const std::string& path) {
    PosteriorFile f = load_posterior(path);
    return py::make_tuple(f.post, f.arch_hash);
  });
}
