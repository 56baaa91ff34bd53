#include "ella/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ella/rng.hpp"

namespace ella {

namespace {

void check_inputs(const Matrix& probs, const std::vector<int>& labels) {
  if (probs.rows() == 0) throw std::invalid_argument("need at least one prediction");
  if (probs.rows() != static_cast<long>(labels.size()))
    throw std::invalid_argument("probability rows and label count disagree");
  for (int y : labels)
    if (y < 0 || y >= probs.cols()) throw std::invalid_argument("label out of range");
}

// ties go to the smaller class index
long argmax_row(const Matrix& probs, long i) {
  long best = 0;
  for (long c = 1; c < probs.cols(); ++c)
    if (probs(i, c) > probs(i, best)) best = c;
  return best;
}

}  // namespace

std::vector<BinRow> ece_bins(const Matrix& probs, const std::vector<int>& labels, int bins) {
  check_inputs(probs, labels);
  if (bins < 1) throw std::invalid_argument("need at least one bin");
  std::vector<BinRow> rows(static_cast<std::size_t>(bins));
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<long> correct(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b < bins; ++b) {
    rows[static_cast<std::size_t>(b)].conf_lo = static_cast<double>(b) / bins;
    rows[static_cast<std::size_t>(b)].conf_hi = static_cast<double>(b + 1) / bins;
  }
  for (long i = 0; i < probs.rows(); ++i) {
    long pred = argmax_row(probs, i);
    double conf = probs(i, pred);
    long b = std::min<long>(bins - 1, static_cast<long>(std::floor(conf * bins)));
    b = std::max<long>(0, b);
    std::size_t bi = static_cast<std::size_t>(b);
    rows[bi].count += 1;
    conf_sum[bi] += conf;
    if (pred == labels[static_cast<std::size_t>(i)]) correct[bi] += 1;
  }
  for (int b = 0; b < bins; ++b) {
    std::size_t bi = static_cast<std::size_t>(b);
    if (rows[bi].count > 0) {
      rows[bi].mean_conf = conf_sum[bi] / static_cast<double>(rows[bi].count);
      rows[bi].accuracy = static_cast<double>(correct[bi]) / static_cast<double>(rows[bi].count);
    }
  }
  return rows;
}

double ece(const Matrix& probs, const std::vector<int>& labels, int bins) {
  std::vector<BinRow> rows = ece_bins(probs, labels, bins);
  double n = static_cast<double>(probs.rows());
  double total = 0.0;
  for (const BinRow& r : rows)
    if (r.count > 0)
      total += (static_cast<double>(r.count) / n) * std::abs(r.accuracy - r.mean_conf);
  return total;
}

double nll_from_probs(const Matrix& probs, const std::vector<int>& labels) {
  check_inputs(probs, labels);
  double total = 0.0;
  for (long i = 0; i < probs.rows(); ++i)
    total -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
  return total / static_cast<double>(probs.rows());
}

double accuracy(const Matrix& probs, const std::vector<int>& labels) {
  check_inputs(probs, labels);
  long correct = 0;
  for (long i = 0; i < probs.rows(); ++i)
    if (argmax_row(probs, i) == labels[static_cast<std::size_t>(i)]) correct += 1;
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

MetricsReport classification_report(const Matrix& probs, const std::vector<int>& labels,
                                    int bins) {
  MetricsReport r;
  r.bins = ece_bins(probs, labels, bins);
  r.n = probs.rows();
  r.nll = nll_from_probs(probs, labels);
  r.accuracy = accuracy(probs, labels);
  double total = 0.0;
  for (const BinRow& row : r.bins)
    if (row.count > 0)
      total += (static_cast<double>(row.count) / static_cast<double>(r.n)) *
               std::abs(row.accuracy - row.mean_conf);
  r.ece = total;
  return r;
}

std::vector<ConfidencePoint> error_vs_confidence(const Matrix& probs,
                                                 const std::vector<int>& labels,
                                                 const std::vector<double>& thresholds) {
  check_inputs(probs, labels);
  std::vector<ConfidencePoint> curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    ConfidencePoint pt;
    pt.tau = tau;
    long wrong = 0;
    for (long i = 0; i < probs.rows(); ++i) {
      long pred = argmax_row(probs, i);
      if (probs(i, pred) <= tau) {
        pt.count += 1;
        if (pred != labels[static_cast<std::size_t>(i)]) wrong += 1;
      }
    }
    if (pt.count > 0) {
      pt.has_value = true;
      pt.error = static_cast<double>(wrong) / static_cast<double>(pt.count);
    }
    curve.push_back(pt);
  }
  return curve;
}

double regression_nll(const std::vector<PredictiveGaussian>& preds, const Matrix& Y,
                      double noise_var) {
  if (preds.empty()) throw std::invalid_argument("need at least one prediction");
  if (static_cast<long>(preds.size()) != Y.rows())
    throw std::invalid_argument("prediction count and target rows disagree");
  double total = 0.0;
  for (long i = 0; i < Y.rows(); ++i)
    total += gaussian_predictive_nll(preds[static_cast<std::size_t>(i)],
                                     Y.row(i).transpose(), noise_var);
  return total / static_cast<double>(Y.rows());
}

Matrix map_probs(const FlatParams& p, const Dataset& ds) {
  Matrix probs(ds.size(), ds.C);
  for (long i = 0; i < ds.size(); ++i) probs.row(i) = softmax(forward(p, ds.x(i))).transpose();
  return probs;
}

Matrix posterior_probs(const EllaPosterior& post, const FlatParams& p, const Dataset& ds,
                       long S, std::uint64_t seed) {
  Matrix probs(ds.size(), ds.C);
  for (long i = 0; i < ds.size(); ++i) {
    Vector row = predictive_probs(post, p, ds.x(i), S,
                                  Rng::mix(seed, static_cast<std::uint64_t>(i)));
    probs.row(i) = row.transpose();
  }
  return probs;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const BinRow& b : r.bins)
    bins.push_back({{"conf_lo", b.conf_lo},
                    {"conf_hi", b.conf_hi},
                    {"mean_conf", b.mean_conf},
                    {"accuracy", b.accuracy},
                    {"count", b.count}});
  return nlohmann::json{
      {"n", r.n}, {"nll", r.nll}, {"accuracy", r.accuracy}, {"ece", r.ece}, {"bins", bins}};
}

nlohmann::json curve_to_json(const std::vector<ConfidencePoint>& curve) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ConfidencePoint& pt : curve) {
    nlohmann::json row{{"tau", pt.tau}, {"count", pt.count}};
    if (pt.has_value)
      row["error"] = pt.error;
    else
      row["error"] = nullptr;
    arr.push_back(row);
  }
  return arr;
}

}  // namespace ella
