#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ella/arch.hpp"

namespace ella {

// Rows of X are flattened inputs (channel-major for images). Regression
// targets live in Y (N x C); classification labels are 0-based ints.
struct Dataset {
  Matrix X;
  Matrix Y;
  std::vector<int> labels;
  Shape input;
  int C = 0;
  bool classification = false;
  std::string provenance;

  long size() const { return X.rows(); }
  Vector x(long i) const { return X.row(i).transpose(); }
  Vector y(long i) const { return Y.row(i).transpose(); }
  int label(long i) const { return labels[static_cast<std::size_t>(i)]; }
  void check() const;
};

// y = sin 2x + noise, x uniform on [lo, hi]
Dataset gen_sine_regression(long N, std::uint64_t seed, double lo = -2.0, double hi = 2.0,
                            double noise_var = 0.2);

// two interleaved half-moons in the plane, binary labels
Dataset gen_two_moons(long N, std::uint64_t seed, double noise_sd = 0.15);

// synthetic 28x28 grayscale digit glyphs (seven-segment strokes with jitter,
// segment dropout, pixel noise, and a small label-noise rate), ten classes
Dataset gen_digit_glyphs(long N, std::uint64_t seed);

Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

Dataset select(const Dataset& ds, const std::vector<long>& indices);
Dataset take(const Dataset& ds, long start, long count);
Dataset subsample(const Dataset& ds, long n, std::uint64_t seed);
std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions,
                           std::uint64_t seed);

// additive pixel/feature noise, clamped to [0,1] for image data
Dataset gaussian_corrupt(const Dataset& ds, double noise_sd, std::uint64_t seed);

}  // namespace ella
