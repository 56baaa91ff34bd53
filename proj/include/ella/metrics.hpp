#pragma once

#include <vector>

#include <json.hpp>

#include "ella/posterior.hpp"

namespace ella {

struct BinRow {
  double conf_lo = 0.0;
  double conf_hi = 0.0;
  double mean_conf = 0.0;  // 0 when the bin is empty
  double accuracy = 0.0;   // 0 when the bin is empty
  long count = 0;
};

struct MetricsReport {
  double nll = 0.0;
  double accuracy = 0.0;
  double ece = 0.0;
  long n = 0;
  std::vector<BinRow> bins;
};

// probs is n x C, one predictive distribution per row. Confidence is the max
// probability; the predicted class is the argmax with ties going to the
// smaller index. Bins are equal width on [0, 1] with the last bin closed.
std::vector<BinRow> ece_bins(const Matrix& probs, const std::vector<int>& labels, int bins = 15);
double ece(const Matrix& probs, const std::vector<int>& labels, int bins = 15);
double nll_from_probs(const Matrix& probs, const std::vector<int>& labels);
double accuracy(const Matrix& probs, const std::vector<int>& labels);
MetricsReport classification_report(const Matrix& probs, const std::vector<int>& labels,
                                    int bins = 15);

struct ConfidencePoint {
  double tau = 0.0;
  bool has_value = false;  // false when no prediction has confidence <= tau
  double error = 0.0;
  long count = 0;
};

// error rate among predictions with confidence <= tau, per threshold
std::vector<ConfidencePoint> error_vs_confidence(const Matrix& probs,
                                                 const std::vector<int>& labels,
                                                 const std::vector<double>& thresholds);

// mean Gaussian predictive NLL over rows of Y with observation noise folded in
double regression_nll(const std::vector<PredictiveGaussian>& preds, const Matrix& Y,
                      double noise_var);

// softmax of the net outputs, one row per item
Matrix map_probs(const FlatParams& p, const Dataset& ds);

// MC posterior predictive probabilities, one row per item, seeded per item
Matrix posterior_probs(const EllaPosterior& post, const FlatParams& p, const Dataset& ds,
                       long S, std::uint64_t seed);

nlohmann::json metrics_to_json(const MetricsReport& r);
nlohmann::json curve_to_json(const std::vector<ConfidencePoint>& curve);

}  // namespace ella
